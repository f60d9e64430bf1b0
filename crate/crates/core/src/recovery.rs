//! Primal recovery from dual iterates, primal objective bounds, dual-ray
//! verification and the six DIMACS error measures.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::SolverError;
use crate::kkt::SchurAux;
use crate::linalg::{block_lambda_min, factor_blocks};
use crate::model::{BlockMat, BlockSym, SdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CandidateSource {
    BackwardNewton,
    Projection,
}

#[derive(Debug, Clone)]
pub struct PrimalCandidate {
    pub x: BlockSym,
    pub source: CandidateSource,
    pub psd_certified: bool,
}

/// `mu W M W` per block.
pub fn sandwich(winv: &[BlockMat], mid: &BlockSym, mu: f64) -> BlockSym {
    BlockSym(
        winv.iter()
            .zip(&mid.0)
            .map(|(w, m)| match (w, m) {
                (BlockMat::Dense(w), BlockMat::Dense(m)) => {
                    let mut x = w * m * w * mu;
                    crate::linalg::cholesky::symmetrize(&mut x);
                    BlockMat::Dense(x)
                }
                (BlockMat::Diag(w), BlockMat::Diag(m)) => BlockMat::Diag(w.component_mul(m).component_mul(w) * mu),
                _ => panic!("block kind mismatch"),
            })
            .collect(),
    )
}

/// `X(mu) = mu S^{-1} (S - dS) S^{-1}`, certified PSD when the backward
/// step `S - dS` factors.
pub fn recover_backward(winv: &[BlockMat], s: &BlockSym, ds: &BlockSym, mu: f64) -> PrimalCandidate {
    let mut back = s.clone();
    back.axpy(-1.0, ds);
    let psd_certified = factor_blocks(&back).is_ok();
    PrimalCandidate {
        x: sandwich(winv, &back, mu),
        source: CandidateSource::BackwardNewton,
        psd_certified,
    }
}

/// `X'(mu) = mu S^{-1} (S + A* dy') S^{-1}` from the projection problem.
pub fn recover_projection(winv: &[BlockMat], s: &BlockSym, ady_prime: &BlockSym, mu: f64) -> PrimalCandidate {
    let mut mid = s.clone();
    mid.axpy(1.0, ady_prime);
    let psd_certified = factor_blocks(&mid).is_ok();
    PrimalCandidate {
        x: sandwich(winv, &mid, mu),
        source: CandidateSource::Projection,
        psd_certified,
    }
}

/// Ingredients of the embedding Newton step used by the bounds.
#[derive(Debug, Clone, Copy)]
pub struct StepScalars<'a> {
    pub tau: f64,
    pub dtau: f64,
    pub gamma: f64,
    pub mu: f64,
    /// Total order `n`.
    pub n: f64,
    pub bty: f64,
    pub dy: &'a DVector<f64>,
}

/// Upper bound `<C tau, X(mu)> / tau` from the backward Newton step; requires
/// a certified candidate.
pub fn primal_bound_zbar(st: &StepScalars, aux: &SchurAux, certified: bool) -> Result<f64, SolverError> {
    if !certified {
        return Err(SolverError::NotCertified);
    }
    let StepScalars {
        tau,
        dtau,
        gamma,
        mu,
        n,
        bty,
        dy,
    } = *st;
    // <S, X>/mu and <R, X>/mu expanded through the linearized equations.
    let s_part = n - gamma * aux.rsinv + aux.asinv.dot(dy) - aux.csinv * dtau;
    let r_part = aux.rsinv - gamma * aux.rsinvrsinv + aux.asinv_rsinv.dot(dy) - aux.csinv_rsinv * dtau;
    Ok(((tau + dtau) * bty + mu * (s_part + r_part)) / tau)
}

/// Projection bound `z' = <C tau, X'(mu)>` with `dy' = (tau/mu) dy1 - dy2`.
pub fn primal_bound_zprime(
    tau: f64,
    mu: f64,
    n: f64,
    bty: f64,
    dy1: &DVector<f64>,
    dy2: &DVector<f64>,
    aux: &SchurAux,
) -> (f64, DVector<f64>) {
    let dyp = dy1 * (tau / mu) - dy2;
    let z = mu * (aux.rsinv + (&aux.asinv_rsinv + &aux.asinv).dot(&dyp) + n) + tau * bty;
    (z, dyp)
}

/// DIMACS errors 1-6 for the pair `(X, y, S)`.
pub fn dimacs_errors(problem: &SdpProblem, x: Option<&BlockSym>, y: &DVector<f64>, s: &BlockSym) -> [f64; 6] {
    let bnorm = 1.0 + problem.b.amax();
    let cnorm = 1.0 + problem.c_max_abs();
    let c = problem.c_matrix();
    let bty = problem.b.dot(y);

    let mut resid = problem.adjoint_map(y).expect("y has length m");
    resid.axpy(1.0, s);
    resid.axpy(-1.0, &c);
    let err3 = resid.frob_norm() / cnorm;
    let err4 = (-block_lambda_min(s)).max(0.0) / cnorm;

    let Some(x) = x else {
        return [f64::NAN, f64::NAN, err3, err4, f64::NAN, f64::NAN];
    };
    let ax = problem.primal_map(x).expect("x matches blocks");
    let err1 = (ax - &problem.b).norm() / bnorm;
    let err2 = (-block_lambda_min(x)).max(0.0) / bnorm;
    let cx = c.inner(x);
    let denom = 1.0 + cx.abs() + bty.abs();
    [err1, err2, err3, err4, (cx - bty) / denom, x.inner(s) / denom]
}

/// Sentinel row reported for infeasibility certificates.
pub const INFEASIBLE_ERRORS: [f64; 6] = [1.0; 6];

/// Results with any error above this are invalid.
pub const DIMACS_VALIDITY: f64 = 1e-2;

/// True when `dy` improves the dual objective without leaving the dual cone:
/// `b^T dy > 0` and `-A* dy` PSD up to `1e-10` after normalizing `dy`.
pub fn verify_dual_ray(problem: &SdpProblem, dy: &DVector<f64>) -> bool {
    let nrm = dy.norm();
    if nrm == 0.0 || !nrm.is_finite() {
        return false;
    }
    let d = dy / nrm;
    if problem.b.dot(&d) <= 0.0 {
        return false;
    }
    let ady = problem.adjoint_map(&d).expect("dy has length m");
    block_lambda_min(&ady.scaled(-1.0)) >= -1e-10
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Block, CoeffMatrix};
    use nalgebra::DMatrix;

    fn trace_problem(n: usize) -> SdpProblem {
        SdpProblem::new(
            vec![Block::Sdp(n)],
            vec![CoeffMatrix::identity(n)],
            vec![vec![CoeffMatrix::identity(n)]],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn exact_pair_has_zero_errors() {
        let p = trace_problem(3);
        let x = BlockSym(vec![BlockMat::Dense(DMatrix::identity(3, 3) / 3.0)]);
        let y = DVector::from_vec(vec![1.0]);
        let s = BlockSym::zeros(&p.blocks);
        let e = dimacs_errors(&p, Some(&x), &y, &s);
        assert!(e.iter().all(|v| v.abs() <= 1e-12), "{e:?}");
    }

    #[test]
    fn zero_y_gap_formula() {
        let p = trace_problem(2);
        let x = BlockSym(vec![BlockMat::Dense(DMatrix::identity(2, 2) / 2.0)]);
        let y = DVector::zeros(1);
        let s = p.c_matrix();
        let e = dimacs_errors(&p, Some(&x), &y, &s);
        assert_eq!(e[2], 0.0);
        // <C,X> = 1, b^T y = 0
        assert!((e[4] - 1.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ray_checks() {
        let p = trace_problem(2);
        assert!(!verify_dual_ray(&p, &DVector::zeros(1)));
        // A = -I: b^T dy > 0 and -A* dy = dy I >= 0
        let neg = SdpProblem::new(
            vec![Block::Sdp(2)],
            vec![CoeffMatrix::identity(2)],
            vec![vec![CoeffMatrix::identity(2).scaled(-1.0)]],
            vec![1.0],
        )
        .unwrap();
        assert!(verify_dual_ray(&neg, &DVector::from_vec(vec![1.0])));
        // LP: A = 1, dy = 1 gives A* dy = 1, not <= 0
        let lp = SdpProblem::new(
            vec![Block::Diag(1)],
            vec![CoeffMatrix::identity(1).scaled(-1.0)],
            vec![vec![CoeffMatrix::identity(1)]],
            vec![1.0],
        )
        .unwrap();
        assert!(!verify_dual_ray(&lp, &DVector::from_vec(vec![1.0])));
    }

    #[test]
    fn bounds_collapse_without_steps() {
        let aux = SchurAux {
            asinv: DVector::from_vec(vec![0.3]),
            asinv_csinv: DVector::from_vec(vec![0.1]),
            asinv_rsinv: DVector::zeros(1),
            csinv: 0.7,
            csinvcsinv: 0.2,
            csinv_rsinv: 0.0,
            rsinv: 0.0,
            rsinvrsinv: 0.0,
        };
        let dy = DVector::zeros(1);
        let st = StepScalars {
            tau: 1.0,
            dtau: 0.0,
            gamma: 0.5,
            mu: 0.1,
            n: 4.0,
            bty: 2.0,
            dy: &dy,
        };
        assert!((primal_bound_zbar(&st, &aux, true).unwrap() - 2.4).abs() < 1e-15);
        assert!(matches!(
            primal_bound_zbar(&st, &aux, false),
            Err(SolverError::NotCertified)
        ));
        let (z, _) = primal_bound_zprime(1.0, 0.1, 4.0, 2.0, &dy, &dy, &aux);
        assert!((z - 2.4).abs() < 1e-15);
    }
}
