//! Restarted preconditioned conjugate gradients for the normal equations.

use nalgebra::{DMatrix, DVector};

use super::cholesky::{cholesky, CholeskyFactor};
use crate::error::LinalgError;

pub const PCG_RESTART: usize = 50;
pub const PCG_MAX_BUDGET: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Diagonal,
    CholeskyReuse,
}

#[derive(Debug, Clone)]
enum Preconditioner {
    None,
    Diagonal(DVector<f64>),
    Factor(CholeskyFactor),
}

/// Preconditioner cache plus the adaptive iteration budget.
#[derive(Debug, Clone)]
pub struct PcgState {
    pub kind: PreconditionerKind,
    pub max_iters: usize,
    pub restart: bool,
    precond: Preconditioner,
    over_budget_streak: usize,
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

impl PcgState {
    /// Budget starts around `50 / m`, never below 10.
    pub fn new(kind: PreconditionerKind, m: usize) -> Self {
        let base = 50usize.checked_div(m).map_or(10, |b| b.max(10));
        Self {
            kind,
            max_iters: base.min(PCG_MAX_BUDGET),
            restart: true,
            precond: Preconditioner::None,
            over_budget_streak: 0,
        }
    }

    pub fn needs_rebuild(&self) -> bool {
        matches!(self.precond, Preconditioner::None)
    }

    /// Rebuilds the preconditioner from `m`. A failed Cholesky falls back to
    /// the diagonal.
    pub fn rebuild(&mut self, m: &DMatrix<f64>) {
        self.precond = match self.kind {
            PreconditionerKind::Diagonal => Preconditioner::Diagonal(diag_precond(m)),
            PreconditionerKind::CholeskyReuse => match cholesky(m) {
                Ok(f) => Preconditioner::Factor(f),
                Err(_) => Preconditioner::Diagonal(diag_precond(m)),
            },
        };
        self.over_budget_streak = 0;
    }

    pub fn invalidate(&mut self) {
        self.precond = Preconditioner::None;
    }

    fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.precond {
            Preconditioner::None => r.clone(),
            Preconditioner::Diagonal(d) => r.component_mul(d),
            Preconditioner::Factor(f) => f.solve(r),
        }
    }

    /// Doubles the budget after a stall and flags the preconditioner stale
    /// after two consecutive over-budget solves.
    fn record(&mut self, converged: bool) {
        if converged {
            self.over_budget_streak = 0;
            return;
        }
        self.max_iters = (self.max_iters * 2).min(PCG_MAX_BUDGET);
        self.over_budget_streak += 1;
        if self.over_budget_streak >= 2 {
            self.invalidate();
        }
    }
}

fn diag_precond(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| {
        let d = m[(i, i)];
        if d > 0.0 {
            1.0 / d
        } else {
            1.0
        }
    })
}

/// Solves `M x = rhs` with `apply_m` as the operator. Returns `Breakdown` when
/// a search direction has nonpositive curvature.
pub fn pcg_solve<F>(apply_m: F, rhs: &DVector<f64>, state: &mut PcgState) -> Result<PcgOutcome, LinalgError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = rhs.len();
    let tol = (1e-8 * rhs.norm()).max(1e-10);
    let mut x = DVector::zeros(n);
    let mut r = rhs.clone();
    let mut rnorm = r.norm();
    let mut iters = 0;
    let max_iters = state.max_iters.max(1);

    while rnorm > tol && iters < max_iters {
        // Restart: fresh residual and steepest-descent direction.
        if iters > 0 {
            r = rhs - apply_m(&x);
        }
        let mut z = state.apply(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let inner_cap = if state.restart { PCG_RESTART } else { max_iters };
        for _ in 0..inner_cap {
            if iters >= max_iters {
                break;
            }
            let mp = apply_m(&p);
            let curv = p.dot(&mp);
            if !(curv > 0.0) {
                return Err(LinalgError::Breakdown(iters));
            }
            let alpha = rz / curv;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &mp, 1.0);
            iters += 1;
            rnorm = r.norm();
            if rnorm <= tol {
                break;
            }
            z = state.apply(&r);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p = &z + &p * beta;
        }
    }
    let converged = rnorm <= tol;
    state.record(converged);
    Ok(PcgOutcome {
        x,
        iterations: iters,
        residual_norm: rnorm,
        converged,
    })
}
