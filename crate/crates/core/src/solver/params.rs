use serde::Serialize;

use crate::kkt::DEFAULT_KAPPA_MEM;
use crate::presolve::{PresolveOptions, StructureFlags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinearSolver {
    Auto,
    Direct,
    Pcg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    /// Barrier reduction divisor.
    pub rho: f64,
    /// Weight of the dual residual in the barrier update.
    pub theta: f64,
    pub eps_opt: f64,
    pub eps_feas: f64,
    /// Infeasibility tolerance.
    pub eps_inf: f64,
    pub step_fraction: f64,
    /// `S_0 = C + 10^p ||C|| I`.
    pub init_exponent: i32,
    /// Extra Newton rounds per iteration that reuse the Schur matrix.
    pub corrector_rounds: usize,
    pub max_iters: usize,
    pub time_limit_seconds: f64,
    pub kappa_mem: f64,
    pub linear_solver: LinearSolver,
    pub skip_phase_b: bool,
    /// Penalty box `|y_i| <= dual_bound` added as a diagonal block.
    pub use_dual_bounds: bool,
    pub dual_bound: f64,
    /// Heuristic barrier adjustments from the step and damping factor.
    pub mu_heuristics: bool,
    /// Trace bound `tr(X) = theta` used for an extra primal bound.
    pub implied_trace: Option<f64>,
    #[serde(skip)]
    pub presolve: PresolveOptions,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            rho: 4.0,
            theta: 1e8,
            eps_opt: 5e-6,
            eps_feas: 5e-6,
            eps_inf: 1e-8,
            step_fraction: 0.95,
            init_exponent: 3,
            corrector_rounds: 4,
            max_iters: 500,
            time_limit_seconds: f64::INFINITY,
            kappa_mem: DEFAULT_KAPPA_MEM,
            linear_solver: LinearSolver::Auto,
            skip_phase_b: false,
            use_dual_bounds: false,
            dual_bound: 1e7,
            mu_heuristics: true,
            implied_trace: None,
            presolve: PresolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parameter {key}: {reason}")]
pub struct ParamError {
    pub key: String,
    pub reason: String,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ParamError> {
    value.parse().map_err(|_| ParamError {
        key: key.into(),
        reason: format!("cannot parse '{value}'"),
    })
}

impl Params {
    /// Applies a `KEY=VALUE` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        match key {
            "rho" => self.rho = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "eps_opt" => self.eps_opt = parse(key, value)?,
            "eps_feas" => self.eps_feas = parse(key, value)?,
            "eps_inf" => self.eps_inf = parse(key, value)?,
            "step_fraction" => self.step_fraction = parse(key, value)?,
            "init_exponent" | "p" => self.init_exponent = parse(key, value)?,
            "corrector_rounds" => self.corrector_rounds = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "time_limit_seconds" | "time_limit" => self.time_limit_seconds = parse(key, value)?,
            "kappa_mem" => self.kappa_mem = parse(key, value)?,
            "linear_solver" => {
                self.linear_solver = match value.to_ascii_lowercase().as_str() {
                    "auto" => LinearSolver::Auto,
                    "direct" => LinearSolver::Direct,
                    "pcg" => LinearSolver::Pcg,
                    _ => {
                        return Err(ParamError {
                            key: key.into(),
                            reason: "expected auto, direct or pcg".into(),
                        })
                    }
                }
            }
            "skip_phase_b" => self.skip_phase_b = parse(key, value)?,
            "use_dual_bounds" => self.use_dual_bounds = parse(key, value)?,
            "dual_bound" => self.dual_bound = parse(key, value)?,
            "mu_heuristics" => self.mu_heuristics = parse(key, value)?,
            "rank_tol" => self.presolve.rank_tol = parse(key, value)?,
            "dense_skip_order" => self.presolve.dense_skip_order = parse(key, value)?,
            "few_entry_threshold" => self.presolve.few_entry_threshold = parse(key, value)?,
            "scale_trigger" => self.presolve.scale_trigger = parse(key, value)?,
            "multi_block_threshold" => self.presolve.multi_block_threshold = parse(key, value)?,
            _ => {
                return Err(ParamError {
                    key: key.into(),
                    reason: "unknown parameter".into(),
                })
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |key: &str, reason: &str| {
            Err(ParamError {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return bad("step_fraction", "must lie in (0, 1)");
        }
        if !(self.rho > 1.0) {
            return bad("rho", "must exceed 1");
        }
        for (k, v) in [
            ("eps_opt", self.eps_opt),
            ("eps_feas", self.eps_feas),
            ("eps_inf", self.eps_inf),
            ("theta", self.theta),
        ] {
            if !(v > 0.0) {
                return bad(k, "must be positive");
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        Ok(())
    }

    /// Parameter changes driven by detected structure:
    ///
    /// | structure             | adjustment                                     |
    /// |-----------------------|------------------------------------------------|
    /// | implied trace         | trace value feeds an extra primal bound        |
    /// | implied dual bounds   | penalty box is not needed and stays off        |
    /// | empty primal interior | no corrector rounds                            |
    /// | empty dual interior   | residual weight `theta` raised to `1e10`       |
    /// | feasibility problem   | stop after the embedding phase                 |
    /// | dense / multi-block   | direct normal-equation solves                  |
    pub fn adjusted_for(&self, flags: &StructureFlags) -> Params {
        let mut p = self.clone();
        if let Some(t) = flags.implied_trace {
            p.implied_trace = Some(t);
        }
        if flags.implied_dual_bounds.is_some() {
            p.use_dual_bounds = false;
        }
        if flags.empty_primal_interior {
            p.corrector_rounds = 0;
        }
        if flags.empty_dual_interior {
            p.theta = p.theta.max(1e10);
        }
        if flags.feasibility_problem {
            p.skip_phase_b = true;
        }
        if (flags.dense_problem || flags.multi_block) && p.linear_solver == LinearSolver::Auto {
            p.linear_solver = LinearSolver::Direct;
        }
        p
    }
}
