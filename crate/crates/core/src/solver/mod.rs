//! Two-phase dual-scaling solver: an infeasible-start embedding phase that
//! either certifies infeasibility or reaches dual feasibility, followed by
//! feasible dual-scaling iterations until the duality gap closes.

pub mod embedding;
pub mod params;
pub mod phase_b;

use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

pub use embedding::{
    check_status, choose_step, initialize, newton_embedding, update_iterate, update_mu, DualIterate, NewtonDirections,
    NewtonSolves, StepChoice,
};
pub use params::{LinearSolver, ParamError, Params};
pub use phase_b::{phase_b_step, FeasibleIterate};

use crate::kkt::{assemble_schur_matrix, compute_aux, inverse_blocks, KktPlan, NormalSolver, SolveMode};
use crate::linalg::{factor_blocks, lanczos_extremes, PcgState, PreconditionerKind};
use crate::model::{BlockMat, BlockSym, DualBounds, SdpProblem};
use crate::presolve::{presolve, StructureFlags};
use crate::recovery::{
    dimacs_errors, recover_backward, recover_projection, verify_dual_ray, DIMACS_VALIDITY, INFEASIBLE_ERRORS,
};

/// Above this many constraints `Auto` switches to preconditioned CG.
pub const PCG_MIN_ROWS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Continue,
    SwitchPhaseB,
    Optimal,
    PrimalUnboundedDualInfeasible,
    PrimalInfeasibleDualUnbounded,
    Stalled,
    IterLimit,
    TimeLimit,
    /// Terminated with a DIMACS error above the validity bar.
    Failed,
}

impl Status {
    pub fn is_infeasibility_certificate(self) -> bool {
        matches!(
            self,
            Status::PrimalUnboundedDualInfeasible | Status::PrimalInfeasibleDualUnbounded
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Continue => "Continue",
            Status::SwitchPhaseB => "SwitchPhaseB",
            Status::Optimal => "Optimal",
            Status::PrimalUnboundedDualInfeasible => "PrimalUnboundedDualInfeasible",
            Status::PrimalInfeasibleDualUnbounded => "PrimalInfeasibleDualUnbounded",
            Status::Stalled => "Stalled",
            Status::IterLimit => "IterLimit",
            Status::TimeLimit => "TimeLimit",
            Status::Failed => "Failed",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: Status,
    /// `<C, X>` of the recovered primal matrix (NaN when none exists).
    pub primal_objective: f64,
    /// `b^T y`.
    pub dual_objective: f64,
    #[serde(skip)]
    pub x: Option<BlockSym>,
    pub y: Vec<f64>,
    pub dimacs: [f64; 6],
    pub iterations_phase_a: usize,
    pub iterations_phase_b: usize,
    pub seconds: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub flags: StructureFlags,
    pub objective_scale: f64,
    pub psd_certified: bool,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.iterations_phase_a + self.iterations_phase_b
    }
}

fn solve_mode(problem: &SdpProblem, params: &Params) -> SolveMode {
    match params.linear_solver {
        LinearSolver::Direct => SolveMode::Direct,
        LinearSolver::Pcg => SolveMode::Pcg,
        LinearSolver::Auto if problem.m() > PCG_MIN_ROWS => SolveMode::Pcg,
        LinearSolver::Auto => SolveMode::Direct,
    }
}

/// An accepted iterate, as handed to a [`solve_observed`] callback.
#[derive(Debug, Clone, Copy)]
pub enum IterateView<'a> {
    /// After a Phase A iteration, including its `mu` update.
    Embedding(&'a DualIterate),
    /// After a successful Phase B step.
    Feasible(&'a FeasibleIterate),
}

/// Called with the working problem (after presolve) and each iterate.
pub type Observer<'a> = dyn FnMut(&SdpProblem, IterateView) + 'a;

/// Primal matrix found during the embedding, normalized so `A X = b`.
#[derive(Debug, Clone)]
struct EmbeddingCandidate {
    x: BlockSym,
    certified: bool,
}

struct Outcome {
    status: Status,
    y: DVector<f64>,
    x: Option<(BlockSym, bool)>,
    iters_a: usize,
    iters_b: usize,
    mu: f64,
    tau: f64,
    kappa: f64,
}

struct Clock {
    start: Instant,
    limit: f64,
}

impl Clock {
    fn expired(&self) -> bool {
        self.start.elapsed().as_secs_f64() > self.limit
    }
}

/// Best normalized bound among the backward Newton and projection candidates
/// at the current iterate; updates `it.z` and the stored candidate. The
/// objective is evaluated on the recovered matrix itself: the closed forms
/// cancel catastrophically while `mu` is large.
fn embedding_bounds(
    problem: &SdpProblem,
    it: &mut DualIterate,
    winv: &[BlockMat],
    solves: &NewtonSolves,
    dir: &NewtonDirections,
    best: &mut Option<EmbeddingCandidate>,
) {
    let c = problem.c_matrix();
    let mut offer = |x: BlockSym, scale: f64| {
        let x = x.scaled(1.0 / scale);
        let z = c.inner(&x);
        if z < it.z {
            it.z = z;
            *best = Some(EmbeddingCandidate { x, certified: true });
        }
    };
    let tau_next = it.tau + dir.dtau;
    if tau_next > 0.0 {
        let cand = recover_backward(winv, &it.s, &dir.ds, it.mu);
        if cand.psd_certified {
            offer(cand.x, tau_next);
        }
    }
    let dyp = &solves.dy1 * (it.tau / it.mu) - &solves.dy2;
    if let Ok(ady) = problem.adjoint_map(&dyp) {
        let cand = recover_projection(winv, &it.s, &ady, it.mu);
        if cand.psd_certified {
            offer(cand.x, it.tau);
        }
    }
}

fn lambda_max_estimate(s: &BlockSym) -> f64 {
    s.0.iter()
        .map(|b| match b {
            BlockMat::Dense(m) => lanczos_extremes(m.nrows(), |v| m * v, 64, 1e-8).lambda_max,
            BlockMat::Diag(d) => d.max(),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn run_phases(problem: &SdpProblem, params: &Params, clock: &Clock, observe: &mut Observer) -> Outcome {
    let n = problem.total_order() as f64;
    let plan = KktPlan::new(problem, params.kappa_mem);
    let mode = solve_mode(problem, params);
    let mut pcg = PcgState::new(PreconditionerKind::CholeskyReuse, problem.m());
    let mut it = initialize(problem, params);
    let mut best: Option<EmbeddingCandidate> = None;
    let mut last_dy: Option<DVector<f64>> = None;
    let (mut alpha, mut gamma) = (1.0, 1.0);
    let mut iters_a = 0;
    let outcome = |status, it: &DualIterate, best: Option<EmbeddingCandidate>, iters_a, iters_b, y| Outcome {
        status,
        y,
        x: best.map(|c| (c.x, c.certified)),
        iters_a,
        iters_b,
        mu: it.mu,
        tau: it.tau,
        kappa: it.kappa,
    };

    // Phase A
    loop {
        if iters_a >= params.max_iters {
            let y = &it.y / it.tau;
            return outcome(Status::IterLimit, &it, best, iters_a, 0, y);
        }
        if clock.expired() {
            let y = &it.y / it.tau;
            return outcome(Status::TimeLimit, &it, best, iters_a, 0, y);
        }
        iters_a += 1;

        let mut winv = inverse_blocks(&it.factors);
        let m = assemble_schur_matrix(problem, &winv, &plan);
        let mut aux = compute_aux(problem, &winv, Some(&it.residual()));
        let mut solver = match NormalSolver::new(&m, mode) {
            Ok(s) => s,
            Err(_) => {
                let y = &it.y / it.tau;
                return outcome(Status::Stalled, &it, best, iters_a, 0, y);
            }
        };
        let mut dy1 = None;
        for round in 0..=params.corrector_rounds {
            if round > 0 {
                winv = inverse_blocks(&it.factors);
                aux = compute_aux(problem, &winv, Some(&it.residual()));
            }
            let stepped = NewtonSolves::compute(problem, &aux, &mut solver, &mut pcg, dy1.take())
                .map_err(crate::error::SolverError::from)
                .and_then(|solves| {
                    let choice = choose_step(problem, &it, &aux, &solves, params)?;
                    Ok((solves, choice))
                });
            let (solves, choice) = match stepped {
                Ok(v) => v,
                Err(e) if round > 0 => {
                    log::trace!("corrector round {round}: {e}");
                    break;
                }
                Err(e) => {
                    log::debug!("embedding step failed: {e}");
                    let y = &it.y / it.tau;
                    return outcome(Status::Stalled, &it, best, iters_a, 0, y);
                }
            };
            if round == 0 {
                embedding_bounds(problem, &mut it, &winv, &solves, &choice.directions, &mut best);
            }
            match update_iterate(problem, &mut it, &choice.directions, params) {
                Ok(_) => {}
                Err(e) if round > 0 => {
                    log::trace!("corrector round {round}: {e}");
                    break;
                }
                Err(e) => {
                    log::debug!("embedding update failed: {e}");
                    let y = &it.y / it.tau;
                    return outcome(Status::Stalled, &it, best, iters_a, 0, y);
                }
            }
            alpha = choice.alpha;
            gamma = choice.gamma;
            last_dy = Some(choice.directions.dy);
            dy1 = Some(solves.dy1);
            // A blocked step lands 5% from the boundary; reusing M from there
            // drives S toward singularity, so only full steps get a corrector.
            if alpha < 1.0 {
                break;
            }
        }

        let bty = problem.b.dot(&it.y);
        let gap = if it.z.is_finite() {
            (it.tau * it.z - bty).min(n * it.mu)
        } else {
            n * it.mu
        };
        let next = update_mu(gap, it.residual_norm(), n, it.mu, alpha, gamma, params);
        it.mu = next.min(it.mu);

        let status = check_status(problem, &it, params, last_dy.as_ref());
        observe(problem, IterateView::Embedding(&it));
        log::debug!(
            "A{iters_a:>4} mu={:.3e} tau={:.3e} kappa={:.3e} |R|={:.3e} bty={:.8e} z={:.8e} a={alpha:.3} g={gamma:.3}",
            it.mu,
            it.tau,
            it.kappa,
            it.residual_norm(),
            bty / it.tau,
            it.z
        );
        match status {
            Status::Continue => {}
            Status::SwitchPhaseB => {
                let y = &it.y / it.tau;
                if factor_blocks(&problem.dual_slack(&y, 1.0)).is_ok() {
                    if params.skip_phase_b {
                        return outcome(Status::Optimal, &it, best, iters_a, 0, y);
                    }
                    break;
                }
            }
            s => {
                let y = &it.y / it.tau;
                return outcome(s, &it, best, iters_a, 0, y);
            }
        }
    }

    // Phase B
    let y0 = &it.y / it.tau;
    let mu_b = (it.mu / (it.tau * it.tau)).max(embedding::MU_FLOOR);
    let mut fb = match FeasibleIterate::new(problem, y0.clone(), mu_b, it.z) {
        Ok(f) => f,
        Err(_) => return outcome(Status::Stalled, &it, best, iters_a, 0, y0),
    };
    let mut iters_b = 0;
    let mut last_alpha = 1.0;
    let status = loop {
        if fb.converged(problem, params.eps_opt) {
            break Status::Optimal;
        }
        if iters_a + iters_b >= params.max_iters {
            break Status::IterLimit;
        }
        if clock.expired() {
            break Status::TimeLimit;
        }
        iters_b += 1;
        if let Some(trace) = params.implied_trace {
            // tr(X) = trace gives <C, X> - b^T y = <S, X> <= trace * lambda_max(S)
            // for every feasible X, which caps the barrier estimate.
            let cap = trace * lambda_max_estimate(&fb.s);
            if cap.is_finite() && cap > 0.0 {
                fb.mu = fb.mu.min(cap / (params.rho * n));
            }
        }
        match phase_b_step(problem, &mut fb, &plan, mode, &mut pcg, params, last_alpha) {
            Ok(step) => {
                observe(problem, IterateView::Feasible(&fb));
                last_alpha = step.alpha;
                let bty = problem.b.dot(&fb.y);
                if bty > 1.0 / params.eps_inf && (verify_dual_ray(problem, &step.dy) || verify_dual_ray(problem, &fb.y))
                {
                    break Status::PrimalInfeasibleDualUnbounded;
                }
            }
            Err(e) => {
                log::debug!("feasible step failed: {e}");
                if fb.converged(problem, params.eps_opt) {
                    break Status::Optimal;
                }
                break Status::Stalled;
            }
        }
        log::debug!(
            "B{iters_b:>4} mu={:.3e} bty={:.10e} z={:.10e} a={last_alpha:.3}",
            fb.mu,
            problem.b.dot(&fb.y),
            fb.z
        );
    };

    let x = match &fb.best {
        Some(w) => w.primal(problem).ok().map(|x| (x, true)),
        None => best.map(|c| (c.x, c.certified)),
    };
    Outcome {
        status,
        y: fb.y,
        x,
        iters_a,
        iters_b,
        mu: fb.mu,
        tau: 1.0,
        kappa: it.kappa,
    }
}

/// Presolve, embedding phase, feasible phase, primal recovery and DIMACS
/// errors on the unscaled problem. Never fails: every outcome is a status.
pub fn solve(problem: &SdpProblem, params: &Params) -> SolveResult {
    solve_observed(problem, params, &mut |_, _| {})
}

/// [`solve`], reporting every accepted iterate to `observe`.
pub fn solve_observed(problem: &SdpProblem, params: &Params, observe: &mut Observer) -> SolveResult {
    let clock = Clock {
        start: Instant::now(),
        limit: params.time_limit_seconds,
    };
    let pre = presolve(problem, &params.presolve);
    let params = params.adjusted_for(&pre.flags);
    let mut work = pre.problem;
    if params.use_dual_bounds {
        let m = work.m();
        work = work.with_bound_block(&DualBounds {
            lower: vec![-params.dual_bound; m],
            upper: vec![params.dual_bound; m],
        });
    }
    let out = run_phases(&work, &params, &clock, observe);
    let scale = pre.objective_scale;
    let y = &out.y * scale;
    let nblocks = problem.nblocks();
    let x = out.x.map(|(x, cert)| (phase_b::truncate_blocks(&x, nblocks), cert));

    let dual_objective = problem.b.dot(&y);
    let (dimacs, primal_objective) = if out.status.is_infeasibility_certificate() {
        (INFEASIBLE_ERRORS, f64::NAN)
    } else {
        let s = problem.dual_slack(&y, 1.0);
        let e = dimacs_errors(problem, x.as_ref().map(|(x, _)| x), &y, &s);
        let pobj = x.as_ref().map_or(f64::NAN, |(x, _)| problem.c_matrix().inner(x));
        (e, pobj)
    };
    let mut status = out.status;
    if status == Status::Optimal && dimacs.iter().any(|e| !(e.abs() <= DIMACS_VALIDITY)) {
        status = Status::Failed;
    }
    SolveResult {
        status,
        primal_objective,
        dual_objective,
        psd_certified: x.as_ref().is_some_and(|(_, c)| *c),
        x: x.map(|(x, _)| x),
        y: y.as_slice().to_vec(),
        dimacs,
        iterations_phase_a: out.iters_a,
        iterations_phase_b: out.iters_b,
        seconds: clock.start.elapsed().as_secs_f64(),
        mu: out.mu,
        tau: out.tau,
        kappa: out.kappa,
        flags: pre.flags,
        objective_scale: scale,
    }
}
