//! Phase B: feasible dual-scaling on `S = C - A* y` with a dual potential
//! line search.

use nalgebra::DVector;

use super::embedding::{update_mu, MIN_STEP, MU_FLOOR};
use super::params::Params;
use crate::error::SolverError;
use crate::kkt::{compute_aux, inverse_blocks, KktPlan, NormalSolver, SolveMode};
use crate::linalg::{block_logdet, factor_blocks, is_positive_definite, max_step_blocks, BlockFactor, PcgState};
use crate::model::{BlockMat, BlockSym, SdpProblem};
use crate::recovery::sandwich;

/// Dual-feasible iterate with `tau = 1` and `R = 0`.
#[derive(Debug, Clone)]
pub struct FeasibleIterate {
    pub y: DVector<f64>,
    pub s: BlockSym,
    pub factors: Vec<BlockFactor>,
    pub mu: f64,
    /// Best primal objective bound.
    pub z: f64,
    pub best: Option<BoundWitness>,
}

/// What is needed to rebuild the primal matrix behind the best bound:
/// `X = S^{-1} (mu_hat (S - A* dy2) + A* dy1) S^{-1}` at `y`.
#[derive(Debug, Clone)]
pub struct BoundWitness {
    pub y: DVector<f64>,
    pub dy1: DVector<f64>,
    pub dy2: DVector<f64>,
    pub mu_hat: f64,
}

impl BoundWitness {
    pub fn primal(&self, problem: &SdpProblem) -> Result<BlockSym, SolverError> {
        let s = problem.dual_slack(&self.y, 1.0);
        let f = factor_blocks(&s)?;
        let winv = inverse_blocks(&f);
        let mut mid = s;
        mid.axpy(-1.0, &problem.adjoint_map(&self.dy2)?);
        mid.scale_mut(self.mu_hat);
        mid.axpy(1.0, &problem.adjoint_map(&self.dy1)?);
        Ok(sandwich(&winv, &mid, 1.0))
    }

    /// `||A X - b|| / (1 + max |b_i|)` for the witness primal matrix.
    pub fn residual(&self, problem: &SdpProblem) -> Result<f64, SolverError> {
        let x = self.primal(problem)?;
        let r = problem.primal_map(&x)? - &problem.b;
        Ok(r.norm() / (1.0 + problem.b.amax()))
    }
}

impl FeasibleIterate {
    pub fn new(problem: &SdpProblem, y: DVector<f64>, mu: f64, z: f64) -> Result<Self, SolverError> {
        let s = problem.dual_slack(&y, 1.0);
        let factors = factor_blocks(&s)?;
        Ok(Self {
            y,
            s,
            factors,
            mu,
            z,
            best: None,
        })
    }

    pub fn gap(&self, problem: &SdpProblem) -> f64 {
        self.z - problem.b.dot(&self.y)
    }

    pub fn converged(&self, problem: &SdpProblem, eps: f64) -> bool {
        let bty = problem.b.dot(&self.y);
        self.z.is_finite() && self.z - bty <= eps * (1.0 + self.z.abs() + bty.abs())
    }
}

const PSD_SEARCH_ITERS: usize = 30;
/// Centrality radius relative to `sqrt(n)`.
const CENTRALITY_SCALE: f64 = 0.6;

/// Outcome of one Phase B iteration.
#[derive(Debug, Clone)]
pub struct PhaseBStep {
    pub alpha: f64,
    pub dy: DVector<f64>,
    pub bound_improved: bool,
}

/// Potential with a primal bound; without one, the barrier function at `mu`,
/// on which the Newton step always descends.
fn potential(rho_pot: f64, z: f64, mu: f64, bty: f64, logdet: f64) -> f64 {
    if z.is_finite() {
        rho_pot * (z - bty).ln() - logdet
    } else {
        -bty / mu - logdet
    }
}

/// `z(t) = b^T y + a_s^T dy1 + (n - a_s^T dy2) / t` with `1/t = mu_hat`.
fn bound_at(bty: f64, as_dy1: f64, n_minus: f64, mu_hat: f64) -> f64 {
    bty + as_dy1 + n_minus * mu_hat
}

/// Some `t >= 0` with `S - A2 + t A1` positive definite, if one exists.
///
/// Tries `t_hint` and `0` first. Otherwise maximizes the concave function
/// `g(u) = lambda_min(u (S - A2) + (1 - u) A1)` in the `S`-scaled metric over
/// `u = 1 / (1 + t)` by golden section; `g(u) = u - 1 / step(u)` where
/// `step(u)` is the largest step from `S` along `(1 - u) A1 - u A2`.
fn psd_point(s: &BlockSym, factors: &[BlockFactor], a1: &BlockSym, a2: &BlockSym, t_hint: f64) -> Option<f64> {
    let point = |t: f64| {
        let mut p = s.clone();
        p.axpy(-1.0, a2);
        p.axpy(t, a1);
        p
    };
    for t in [t_hint, 0.0] {
        if t.is_finite() && is_positive_definite(&point(t)) {
            return Some(t);
        }
    }
    let g = |u: f64| {
        let mut d = a1.scaled(1.0 - u);
        d.axpy(-u, a2);
        let step = max_step_blocks(s, factors, &d);
        if step.is_finite() {
            u - 1.0 / step
        } else {
            u
        }
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..PSD_SEARCH_ITERS {
        for (u, gu) in [(x1, g1), (x2, g2)] {
            if gu > 0.0 && u > 0.0 {
                let t = (1.0 - u) / u;
                if is_positive_definite(&point(t)) {
                    return Some(t);
                }
            }
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + ratio * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - ratio * (hi - lo);
            g1 = g(x1);
        }
    }
    None
}

/// Smallest `mu` whose Newton step `dy = dy1 / mu - dy2` has local norm
/// `sqrt(dy^T M dy)` at most `max(1, 0.6 sqrt(n))`, or the most central `mu`
/// when no `mu` reaches the radius. Steps far outside the Dikin ellipsoid are
/// cut short by the ratio test, so a smaller `mu` gains nothing.
fn centrality_floor(problem: &SdpProblem, asinv: &DVector<f64>, dy1: &DVector<f64>, dy2: &DVector<f64>) -> f64 {
    // ||dy||_M^2 = qa s^2 - 2 qb s + qc with s = 1 / mu.
    let qa = problem.b.dot(dy1);
    let qb = problem.b.dot(dy2);
    let qc = asinv.dot(dy2);
    if !(qa > 0.0) {
        return 0.0;
    }
    let radius = (CENTRALITY_SCALE * (problem.total_order() as f64).sqrt()).max(1.0);
    let disc = qb * qb - qa * (qc - radius * radius);
    let s_max = if disc >= 0.0 { (qb + disc.sqrt()) / qa } else { qb / qa };
    if s_max > 0.0 {
        1.0 / s_max
    } else {
        0.0
    }
}

/// One dual-scaling iteration: primal bound update, barrier update, Newton
/// step `M dy = b / mu - A S^{-1}` and a potential-reducing line search.
pub fn phase_b_step(
    problem: &SdpProblem,
    it: &mut FeasibleIterate,
    plan: &KktPlan,
    mode: SolveMode,
    pcg: &mut PcgState,
    params: &Params,
    last_alpha: f64,
) -> Result<PhaseBStep, SolverError> {
    let n = problem.total_order() as f64;
    let winv = inverse_blocks(&it.factors);
    let m = crate::kkt::assemble_schur_matrix(problem, &winv, plan);
    let aux = compute_aux(problem, &winv, None);
    let mut solver = NormalSolver::new(&m, mode)?;
    let dy1 = solver.solve(&problem.b, pcg)?;
    let dy2 = solver.solve(&aux.asinv, pcg)?;
    let bty = problem.b.dot(&it.y);

    // Primal bound from P(t) = S - A* dy2 + t A* dy1, PSD on an interval of
    // t. Any PSD point extends to the far end, where z(t) is smallest.
    let mut bound_improved = false;
    let mut mu_certified = None;
    let a1 = problem.adjoint_map(&dy1)?;
    let a2 = problem.adjoint_map(&dy2)?;
    if let Some(t0) = psd_point(&it.s, &it.factors, &a1, &a2, 1.0 / it.mu) {
        let mut p = it.s.clone();
        p.axpy(-1.0, &a2);
        p.axpy(t0, &a1);
        if let Ok(pf) = factor_blocks(&p) {
            let extra = max_step_blocks(&p, &pf, &a1);
            let as_dy1 = aux.asinv.dot(&dy1);
            let n_minus = n - aux.asinv.dot(&dy2);
            let far = if extra.is_finite() {
                1.0 / (t0 + params.step_fraction * extra)
            } else {
                0.0
            };
            mu_certified = Some(far);
            for mu_hat in [far, 1.0 / t0] {
                if !mu_hat.is_finite() {
                    continue;
                }
                let z = bound_at(bty, as_dy1, n_minus, mu_hat);
                if !(z < it.z && z >= bty) {
                    continue;
                }
                let witness = BoundWitness {
                    y: it.y.clone(),
                    dy1: dy1.clone(),
                    dy2: dy2.clone(),
                    mu_hat,
                };
                // Cancellation in S - A* dy2 can fake a PSD point; the
                // witness must actually satisfy the equality constraints.
                if witness.residual(problem)? <= params.eps_feas {
                    it.z = z;
                    it.best = Some(witness);
                    bound_improved = true;
                }
            }
        }
    }

    if it.converged(problem, params.eps_opt) {
        return Ok(PhaseBStep {
            alpha: 0.0,
            dy: DVector::zeros(problem.m()),
            bound_improved,
        });
    }

    // Barrier update; without a bound the gap estimate n mu stands in. There
    // is no centering weight here, so the extra decrease for gamma >= 0.9 is off.
    let gap = if it.z.is_finite() { it.z - bty } else { n * it.mu };
    let target = update_mu(gap, 0.0, n, it.mu, last_alpha, 0.0, params).max(MU_FLOOR);
    // Reduce mu no further than the smallest certified mu_hat, so the next
    // iterate still carries a primal bound; hold it when none is certified.
    it.mu = match mu_certified {
        Some(mu_hat) => target.max(mu_hat),
        None => target.max(it.mu),
    };
    it.mu = it.mu.max(centrality_floor(problem, &aux.asinv, &dy1, &dy2));
    let rho_pot = n + n.sqrt();
    let mut dy = &dy1 / it.mu - &dy2;
    if it.z.is_finite() {
        // Slope of the potential along dy. When the barrier step is not a
        // descent direction, mu = gap / rho_pot makes the barrier gradient
        // equal the potential gradient, so the Newton step descends.
        let slope = -rho_pot * problem.b.dot(&dy) / gap + aux.asinv.dot(&dy);
        if slope >= 0.0 {
            it.mu = (gap / rho_pot).max(MU_FLOOR);
            dy = &dy1 / it.mu - &dy2;
        }
    }
    let ds = problem.adjoint_map(&dy)?.scaled(-1.0);
    let amax = max_step_blocks(&it.s, &it.factors, &ds);
    let mut alpha = (params.step_fraction * amax).min(1.0);
    if !(alpha >= MIN_STEP) {
        return Err(SolverError::StepTooSmall(alpha));
    }

    let phi0 = potential(rho_pot, it.z, it.mu, bty, block_logdet(&it.factors));
    for _ in 0..=64 {
        let y = &it.y + &dy * alpha;
        let bty_new = problem.b.dot(&y);
        if bty_new < it.z {
            // Slack from its definition keeps the iterate exactly feasible.
            let s = problem.dual_slack(&y, 1.0);
            if let Ok(f) = factor_blocks(&s) {
                if potential(rho_pot, it.z, it.mu, bty_new, block_logdet(&f)) <= phi0 {
                    it.y = y;
                    it.s = s;
                    it.factors = f;
                    return Ok(PhaseBStep {
                        alpha,
                        dy,
                        bound_improved,
                    });
                }
            }
        }
        alpha *= 0.7;
        if alpha < MIN_STEP {
            break;
        }
    }
    Err(SolverError::StepTooSmall(alpha))
}

/// Restricts a primal matrix to the first `k` blocks.
pub fn truncate_blocks(x: &BlockSym, k: usize) -> BlockSym {
    BlockSym(x.0.iter().take(k).cloned().collect::<Vec<BlockMat>>())
}
