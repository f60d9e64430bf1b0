//! Phase A: the simplified homogeneous embedding driven by dual-scaling
//! Newton steps.

use nalgebra::DVector;

use super::params::Params;
use super::Status;
use crate::error::{LinalgError, SolverError};
use crate::kkt::{NormalSolver, SchurAux};
use crate::linalg::{block_logdet, factor_blocks, max_step_blocks, BlockFactor, PcgState};
use crate::model::{BlockSym, SdpProblem};
use crate::recovery::verify_dual_ray;

/// Smallest barrier parameter ever used.
pub const MU_FLOOR: f64 = 1e-18;

/// Steps below this signal a numerical stall.
pub const MIN_STEP: f64 = 1e-10;

/// Dual iterate of the embedding. The residual is kept as a multiple of the
/// initial residual, `R = r_scale * R_0`, and `S` is always recomputed from
/// `S = C tau - A* y - R`.
#[derive(Debug, Clone)]
pub struct DualIterate {
    pub y: DVector<f64>,
    pub tau: f64,
    pub kappa: f64,
    pub s: BlockSym,
    pub factors: Vec<BlockFactor>,
    pub r0: BlockSym,
    pub r_scale: f64,
    pub mu: f64,
    pub mu0: f64,
    /// Best normalized primal objective bound found so far.
    pub z: f64,
}

impl DualIterate {
    pub fn residual(&self) -> BlockSym {
        self.r0.scaled(self.r_scale)
    }

    pub fn residual_norm(&self) -> f64 {
        self.r_scale.abs() * self.r0.frob_norm()
    }

    pub fn logdet(&self) -> f64 {
        block_logdet(&self.factors)
    }
}

/// `y = 0`, `tau = kappa = 1`, `S = C + 10^p ||C|| I`.
pub fn initialize(problem: &SdpProblem, params: &Params) -> DualIterate {
    let n = problem.total_order() as f64;
    let cn = problem.c_frob_norm();
    let scale = 10f64.powi(params.init_exponent) * if cn > 0.0 { cn } else { 1.0 };
    let c = problem.c_matrix();
    let mut s = c.clone();
    s.axpy(1.0, &BlockSym::identity(&problem.blocks, scale));
    let mut r0 = c;
    r0.axpy(-1.0, &s);
    let factors = factor_blocks(&s).expect("shifted objective is positive definite");
    let rnorm = r0.frob_norm();
    let mu0 = (n * 10f64.powi(params.init_exponent) + params.theta * rnorm) / (params.rho * n);
    DualIterate {
        y: DVector::zeros(problem.m()),
        tau: 1.0,
        kappa: 1.0,
        s,
        factors,
        r0,
        r_scale: 1.0,
        mu: mu0,
        mu0,
        z: f64::INFINITY,
    }
}

/// Solutions of the four normal systems sharing one Schur matrix.
#[derive(Debug, Clone)]
pub struct NewtonSolves {
    /// `M^{-1} b`
    pub dy1: DVector<f64>,
    /// `M^{-1} A S^{-1}`
    pub dy2: DVector<f64>,
    /// `M^{-1} A S^{-1} R S^{-1}`
    pub dy3: DVector<f64>,
    /// `M^{-1} A S^{-1} C S^{-1}`
    pub dy4: DVector<f64>,
}

impl NewtonSolves {
    pub fn compute(
        problem: &SdpProblem,
        aux: &SchurAux,
        solver: &mut NormalSolver,
        pcg: &mut PcgState,
        dy1: Option<DVector<f64>>,
    ) -> Result<Self, LinalgError> {
        let dy1 = match dy1 {
            Some(v) => v,
            None => solver.solve(&problem.b, pcg)?,
        };
        Ok(Self {
            dy1,
            dy2: solver.solve(&aux.asinv, pcg)?,
            dy3: solver.solve(&aux.asinv_rsinv, pcg)?,
            dy4: solver.solve(&aux.asinv_csinv, pcg)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct NewtonDirections {
    pub dy1: DVector<f64>,
    pub dy2: DVector<f64>,
    pub dy3: DVector<f64>,
    pub dy4: DVector<f64>,
    pub dy: DVector<f64>,
    pub dtau: f64,
    /// `dS = gamma R - A* dy + C dtau`
    pub ds: BlockSym,
    pub gamma: f64,
    pub alpha: f64,
}

/// Eliminates `dy` from the `(dy, dtau)` block system and rebuilds the
/// direction for damping factor `gamma`.
pub fn embedding_direction(
    problem: &SdpProblem,
    it: &DualIterate,
    aux: &SchurAux,
    solves: &NewtonSolves,
    gamma: f64,
) -> NewtonDirections {
    let (mu, tau) = (it.mu, it.tau);
    let b = &problem.b;
    let bty = b.dot(&it.y);
    let g = &aux.asinv_csinv * mu - b;
    let base = &solves.dy1 * (tau / mu) - &solves.dy2 + &solves.dy3 * gamma;
    let coupling = &solves.dy1 / mu + &solves.dy4;
    let rhs2 = bty - mu / tau - mu * aux.csinv + mu * gamma * aux.csinv_rsinv;
    let denom = g.dot(&coupling) - mu * (aux.csinvcsinv + 1.0 / (tau * tau));
    let dtau = (rhs2 - g.dot(&base)) / denom;
    let dy = base + coupling * dtau;
    let ds = direction_slack(problem, it, &dy, dtau, gamma);
    NewtonDirections {
        dy1: solves.dy1.clone(),
        dy2: solves.dy2.clone(),
        dy3: solves.dy3.clone(),
        dy4: solves.dy4.clone(),
        dy,
        dtau,
        ds,
        gamma,
        alpha: 0.0,
    }
}

pub fn direction_slack(problem: &SdpProblem, it: &DualIterate, dy: &DVector<f64>, dtau: f64, gamma: f64) -> BlockSym {
    let mut ds = problem.adjoint_map(dy).expect("dy has length m");
    ds.scale_mut(-1.0);
    for (blk, c) in ds.0.iter_mut().zip(&problem.c) {
        blk.add_coeff(c, dtau);
    }
    ds.axpy(gamma * it.r_scale, &it.r0);
    ds
}

/// Full Newton step of the damped embedding system at damping `gamma`.
pub fn newton_embedding(
    problem: &SdpProblem,
    it: &DualIterate,
    aux: &SchurAux,
    solver: &mut NormalSolver,
    pcg: &mut PcgState,
    gamma: f64,
) -> Result<NewtonDirections, LinalgError> {
    let solves = NewtonSolves::compute(problem, aux, solver, pcg, None)?;
    Ok(embedding_direction(problem, it, aux, &solves, gamma))
}

fn tau_ratio(tau: f64, dtau: f64) -> f64 {
    if dtau < 0.0 {
        -tau / dtau
    } else {
        f64::INFINITY
    }
}

/// Ratio test on `(S, dS)` and `(tau, dtau)`.
pub fn ratio_test(s: &BlockSym, factors: &[BlockFactor], ds: &BlockSym, tau: f64, dtau: f64) -> f64 {
    max_step_blocks(s, factors, ds).min(tau_ratio(tau, dtau))
}

#[derive(Debug, Clone)]
pub struct StepChoice {
    pub gamma: f64,
    pub alpha_c: f64,
    pub alpha: f64,
    pub directions: NewtonDirections,
}

fn barrier(s: &BlockSym, tau: f64) -> Option<(f64, Vec<BlockFactor>)> {
    if tau <= 0.0 {
        return None;
    }
    let f = factor_blocks(s).ok()?;
    Some((-block_logdet(&f) - tau.ln(), f))
}

/// Three-stage step selection: a barrier-decreasing step `alpha_c` along the
/// centering direction, the largest damping `gamma` keeping that trial point
/// feasible, and a final ratio test on the combined direction.
pub fn choose_step(
    problem: &SdpProblem,
    it: &DualIterate,
    aux: &SchurAux,
    solves: &NewtonSolves,
    params: &Params,
) -> Result<StepChoice, SolverError> {
    let d0 = embedding_direction(problem, it, aux, solves, 0.0);
    let d1 = embedding_direction(problem, it, aux, solves, 1.0);

    // Stage 1
    let amax = ratio_test(&it.s, &it.factors, &d0.ds, it.tau, d0.dtau);
    let mut alpha_c = (params.step_fraction * amax).min(1.0);
    let base = -it.logdet() - it.tau.ln();
    let mut trial = None;
    for _ in 0..=20 {
        let mut s = it.s.clone();
        s.axpy(alpha_c, &d0.ds);
        let tau = it.tau + alpha_c * d0.dtau;
        if let Some((phi, f)) = barrier(&s, tau) {
            if phi <= base {
                trial = Some((s, f, tau));
                break;
            }
        }
        alpha_c *= 0.5;
    }
    let (sc, fc, tauc) = match trial {
        Some(t) => t,
        None => {
            alpha_c = 0.0;
            (it.s.clone(), it.factors.clone(), it.tau)
        }
    };

    // Stage 2
    let gamma = if alpha_c == 0.0 {
        1.0
    } else {
        let mut dg = d1.ds.clone();
        dg.axpy(-1.0, &d0.ds);
        dg.scale_mut(alpha_c);
        let gmax = max_step_blocks(&sc, &fc, &dg).min(tau_ratio(tauc, alpha_c * (d1.dtau - d0.dtau)));
        if gmax > 1.0 {
            1.0
        } else {
            params.step_fraction * gmax
        }
    };

    // Stage 3
    let mut dir = embedding_direction(problem, it, aux, solves, gamma);
    let alpha = ratio_test(&it.s, &it.factors, &dir.ds, it.tau, dir.dtau).min(1.0);
    if !(alpha >= MIN_STEP) {
        return Err(SolverError::StepTooSmall(alpha));
    }
    dir.alpha = alpha;
    Ok(StepChoice {
        gamma,
        alpha_c,
        alpha,
        directions: dir,
    })
}

/// Moves `step_fraction * alpha` along the direction, halving up to ten
/// times if the new slack fails to factor.
pub fn update_iterate(
    problem: &SdpProblem,
    it: &mut DualIterate,
    dir: &NewtonDirections,
    params: &Params,
) -> Result<f64, SolverError> {
    let mut step = params.step_fraction * dir.alpha;
    let c = problem.c_matrix();
    for _ in 0..=10 {
        let y = &it.y + &dir.dy * step;
        let tau = it.tau + step * dir.dtau;
        let r_scale = it.r_scale * (1.0 - step * dir.gamma);
        if tau > 0.0 {
            let mut s = c.scaled(tau);
            s.axpy(-1.0, &problem.adjoint_map(&y)?);
            s.axpy(-r_scale, &it.r0);
            if let Ok(f) = factor_blocks(&s) {
                let dkappa = it.mu / it.tau - it.kappa - it.mu * dir.dtau / (it.tau * it.tau);
                let kappa = it.kappa + step * dkappa;
                it.kappa = if kappa > 0.0 { kappa } else { it.mu / tau };
                it.y = y;
                it.tau = tau;
                it.r_scale = r_scale;
                it.s = s;
                it.factors = f;
                return Ok(step);
            }
        }
        step *= 0.5;
    }
    Err(SolverError::StepTooSmall(step))
}

/// `mu' = (z - b^T y + theta ||R||) / (rho n)` with the step heuristics.
pub fn update_mu(gap: f64, rnorm: f64, n: f64, mu: f64, alpha: f64, gamma: f64, params: &Params) -> f64 {
    let mut next = ((gap.max(0.0) + params.theta * rnorm) / (params.rho * n)).max(MU_FLOOR);
    if params.mu_heuristics {
        if alpha >= 0.6 && gamma >= 0.9 {
            next = (next / params.rho).max(MU_FLOOR);
        }
        if alpha < 0.1 {
            next = next.max(mu);
        }
    }
    next
}

/// Embedding-phase status from the infeasibility rules and the switch rule.
pub fn check_status(problem: &SdpProblem, it: &DualIterate, params: &Params, last_dy: Option<&DVector<f64>>) -> Status {
    let eps = params.eps_inf;
    let rnorm = it.residual_norm();
    if rnorm > eps * it.tau && it.tau / it.kappa < eps && it.mu / it.mu0 <= eps * eps {
        return Status::PrimalUnboundedDualInfeasible;
    }
    let bty = problem.b.dot(&it.y) / it.tau;
    if bty > 1.0 / eps {
        let ray = last_dy.is_some_and(|d| verify_dual_ray(problem, d)) || verify_dual_ray(problem, &it.y);
        if ray {
            return Status::PrimalInfeasibleDualUnbounded;
        }
    }
    if rnorm <= params.eps_feas * it.tau * (1.0 + problem.c_frob_norm()) && it.mu <= 1e-3 * it.mu0 {
        return Status::SwitchPhaseB;
    }
    Status::Continue
}
