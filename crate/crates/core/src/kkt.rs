//! Schur complement assembly `M_ij = <A_i, S^{-1} A_j S^{-1}>` with
//! per-row technique selection, plus the auxiliary inner products used by
//! the embedding Newton system.
//!
//! For every SDP block a [`RowPlan`] orders the constraint rows by predicted
//! cost and assigns one of five techniques:
//!
//! | technique | work for row `i`                                          |
//! |-----------|-----------------------------------------------------------|
//! | M1        | `B = sum_r lambda_r (W a_r)(W a_r)^T`, then `<A_j, B>`     |
//! | M2        | `w_r = W a_r`, then `sum_r lambda_r w_r^T A_j w_r`         |
//! | M3        | `B = W A_i W`, then `<A_j, B>`                            |
//! | M4        | `T = A_i W`, then `<T^T W, A_j>` on the nonzeros of `A_j` |
//! | M5        | `sum_{kl} a_kl w_k^T A_j w_l` directly                    |
//!
//! with `W = S^{-1}`. Only entries `M_{sigma(p) sigma(q)}` with `q >= p` are
//! computed and then mirrored.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::LinalgError;
use crate::linalg::{cholesky, ldl, pcg_solve, BlockFactor, FactorHandle, PcgState};
use crate::model::{Block, BlockMat, BlockSym, CoeffKind, CoeffMatrix, SdpProblem};

pub const DEFAULT_KAPPA_MEM: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Technique {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::M1,
        Technique::M2,
        Technique::M3,
        Technique::M4,
        Technique::M5,
    ];

    fn needs_factors(self) -> bool {
        matches!(self, Technique::M1 | Technique::M2)
    }
}

/// Structural statistics of one constraint row within one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStat {
    pub nnz: usize,
    pub rank: usize,
    pub has_factors: bool,
}

impl RowStat {
    pub fn of(c: &CoeffMatrix) -> Self {
        Self {
            nnz: c.nnz(),
            rank: c.rank(),
            has_factors: c.eigen_factors().is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowPlan {
    /// Row order, most expensive first. Rows with a zero coefficient come last.
    pub sigma: Vec<usize>,
    /// Technique per original row index.
    pub technique: Vec<Technique>,
    /// Predicted flops per original row index.
    pub predicted_flops: Vec<f64>,
    /// One-time cost of forming `S^{-1}` when any row uses M3-M5.
    pub extra_flops: f64,
}

/// Flop estimates of the five techniques for a row with `f` nonzeros, rank
/// `r`, in a block of order `n`, where `tail` is the nonzero count of the
/// rows at or after it.
pub fn technique_flops(n: f64, f: f64, r: f64, tail: f64, kappa: f64) -> [f64; 5] {
    [
        r * (n * n + 2.0 * n * n) + kappa * tail,
        r * (n * n + kappa * tail),
        n * kappa * f + n * n * n + kappa * tail,
        n * kappa * f + kappa * (n + 1.0) * tail,
        kappa * (2.0 * kappa * f + 1.0) * tail,
    ]
}

/// Chooses a technique for each row from the flop model and orders the rows
/// by predicted cost.
pub fn plan_rows(stats: &[RowStat], n: usize, kappa_mem: f64) -> RowPlan {
    let m = stats.len();
    let mut pre: Vec<usize> = (0..m).collect();
    pre.sort_by(|&a, &b| stats[b].nnz.cmp(&stats[a].nnz).then(a.cmp(&b)));
    let mut tail = vec![0.0; m];
    let mut acc = 0.0;
    for &i in pre.iter().rev() {
        acc += stats[i].nnz as f64;
        tail[i] = acc;
    }
    let nf = n as f64;
    let mut technique = vec![Technique::M5; m];
    let mut predicted = vec![0.0; m];
    let mut any_dense = false;
    for i in 0..m {
        let s = stats[i];
        if s.nnz == 0 {
            continue;
        }
        let costs = technique_flops(nf, s.nnz as f64, s.rank as f64, tail[i], kappa_mem);
        let (t, c) = if s.has_factors && s.rank == 1 && s.nnz <= 4 {
            // Rank one with at most two nonzeros in the vector.
            (Technique::M2, costs[1])
        } else {
            Technique::ALL
                .iter()
                .zip(costs)
                .filter(|(t, _)| s.has_factors || !t.needs_factors())
                .fold(
                    (Technique::M5, f64::INFINITY),
                    |best, (t, c)| if c < best.1 { (*t, c) } else { best },
                )
        };
        any_dense |= !t.needs_factors();
        technique[i] = t;
        predicted[i] = c;
    }
    let mut sigma = pre;
    sigma.sort_by(|&a, &b| {
        predicted[b]
            .total_cmp(&predicted[a])
            .then(stats[b].nnz.cmp(&stats[a].nnz))
            .then(a.cmp(&b))
    });
    RowPlan {
        sigma,
        technique,
        predicted_flops: predicted,
        extra_flops: if any_dense { nf * nf * nf } else { 0.0 },
    }
}

impl RowPlan {
    /// Forces `t` on every row where it applies.
    pub fn force(&mut self, t: Technique, stats: &[RowStat]) {
        for (i, s) in stats.iter().enumerate() {
            if !t.needs_factors() || s.has_factors {
                self.technique[i] = t;
            }
        }
    }
}

/// Row plans for every SDP block of a problem.
#[derive(Debug, Clone)]
pub struct KktPlan {
    pub blocks: Vec<Option<RowPlan>>,
}

impl KktPlan {
    pub fn new(problem: &SdpProblem, kappa_mem: f64) -> Self {
        let blocks = problem
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| match b {
                Block::Sdp(n) => {
                    let stats: Vec<RowStat> = problem.a.iter().map(|row| RowStat::of(&row[k])).collect();
                    Some(plan_rows(&stats, *n, kappa_mem))
                }
                Block::Diag(_) => None,
            })
            .collect();
        Self { blocks }
    }

    pub fn force(&mut self, problem: &SdpProblem, t: Technique) {
        for (k, plan) in self.blocks.iter_mut().enumerate() {
            if let Some(p) = plan {
                let stats: Vec<RowStat> = problem.a.iter().map(|row| RowStat::of(&row[k])).collect();
                p.force(t, &stats);
            }
        }
    }
}

/// Inner products against `W = S^{-1}`, `P = W C W` and `Q = W R W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurAux {
    /// `<A_i, S^{-1}>`
    pub asinv: DVector<f64>,
    /// `<A_i, S^{-1} C S^{-1}>`
    pub asinv_csinv: DVector<f64>,
    /// `<A_i, S^{-1} R S^{-1}>`
    pub asinv_rsinv: DVector<f64>,
    pub csinv: f64,
    pub csinvcsinv: f64,
    pub csinv_rsinv: f64,
    /// `<R, S^{-1}>`
    pub rsinv: f64,
    /// `<R, S^{-1} R S^{-1}>`
    pub rsinvrsinv: f64,
}

#[derive(Debug, Clone)]
pub struct SchurSystem {
    pub m: DMatrix<f64>,
    pub aux: SchurAux,
}

/// `W A W` contributions of one row against later rows.
fn row_entries(a_i: &CoeffMatrix, targets: &[&CoeffMatrix], w: &DMatrix<f64>, t: Technique) -> Vec<f64> {
    let n = w.nrows();
    let wcol = |k: usize| &w.as_slice()[k * n..(k + 1) * n];
    match t {
        Technique::M1 => {
            let mut b = DMatrix::zeros(n, n);
            for (lam, a) in a_i.eigen_factors().expect("M1 needs eigen factors") {
                let wa = w_times_sparse(w, &a.idx, &a.val);
                b.ger(lam, &wa, &wa, 1.0);
            }
            targets.iter().map(|c| c.inner_dense(&b)).collect()
        }
        Technique::M2 => {
            let ws: Vec<(f64, DVector<f64>)> = a_i
                .eigen_factors()
                .expect("M2 needs eigen factors")
                .into_iter()
                .map(|(lam, a)| (lam, w_times_sparse(w, &a.idx, &a.val)))
                .collect();
            targets
                .iter()
                .map(|c| {
                    ws.iter()
                        .map(|(lam, v)| lam * c.bilinear(v.as_slice(), v.as_slice()))
                        .sum()
                })
                .collect()
        }
        Technique::M3 => {
            let t = coeff_times_w(a_i, w);
            let b = w * t;
            targets.iter().map(|c| c.inner_dense(&b)).collect()
        }
        Technique::M4 => {
            let t = coeff_times_w(a_i, w);
            // (W A_i W)_{kl} = t.col(k) . w.col(l)
            targets
                .iter()
                .map(|c| {
                    c.upper_entries()
                        .iter()
                        .map(|&(k, l, v)| {
                            let x = t.column(k).dot(&w.column(l));
                            if k == l {
                                v * x
                            } else {
                                2.0 * v * x
                            }
                        })
                        .sum()
                })
                .collect()
        }
        Technique::M5 => {
            let entries = a_i.upper_entries();
            targets
                .iter()
                .map(|c| {
                    entries
                        .iter()
                        .map(|&(k, l, v)| {
                            let x = c.bilinear(wcol(k), wcol(l));
                            if k == l {
                                v * x
                            } else {
                                2.0 * v * x
                            }
                        })
                        .sum()
                })
                .collect()
        }
    }
}

fn w_times_sparse(w: &DMatrix<f64>, idx: &[usize], val: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(w.nrows());
    for (&k, &v) in idx.iter().zip(val) {
        out.axpy(v, &w.column(k), 1.0);
    }
    out
}

/// `A W` using only the nonzeros of `A` (W symmetric, so rows of W are
/// columns).
fn coeff_times_w(a: &CoeffMatrix, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    if let CoeffKind::DenseSym(_) | CoeffKind::LowRank { .. } = a.kind {
        return a.to_dense() * w;
    }
    let mut t = DMatrix::zeros(n, n);
    for (k, l, v) in a.upper_entries() {
        // row k of T += v * row l of W
        for j in 0..n {
            t[(k, j)] += v * w[(l, j)];
        }
        if k != l {
            for j in 0..n {
                t[(l, j)] += v * w[(k, j)];
            }
        }
    }
    t
}

/// Dense `S^{-1}` per block (diagonal blocks keep their reciprocal vector).
pub fn inverse_blocks(factors: &[BlockFactor]) -> Vec<BlockMat> {
    factors.par_iter().map(BlockFactor::inverse).collect()
}

fn add_sdp_block(problem: &SdpProblem, k: usize, w: &DMatrix<f64>, plan: &RowPlan, out: &mut DMatrix<f64>) {
    let active: Vec<usize> = plan
        .sigma
        .iter()
        .copied()
        .filter(|&i| !problem.a[i][k].is_zero())
        .collect();
    let rows: Vec<Vec<f64>> = (0..active.len())
        .into_par_iter()
        .map(|p| {
            let i = active[p];
            let targets: Vec<&CoeffMatrix> = active[p..].iter().map(|&j| &problem.a[j][k]).collect();
            row_entries(&problem.a[i][k], &targets, w, plan.technique[i])
        })
        .collect();
    for (p, vals) in rows.iter().enumerate() {
        let i = active[p];
        for (q, &v) in vals.iter().enumerate() {
            let j = active[p + q];
            out[(i, j)] += v;
            if i != j {
                out[(j, i)] += v;
            }
        }
    }
}

fn add_diag_block(problem: &SdpProblem, k: usize, winv: &DVector<f64>, out: &mut DMatrix<f64>) {
    let n = winv.len();
    let mut users: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in problem.a.iter().enumerate() {
        for (p, _, v) in row[k].upper_entries() {
            users[p].push((i, v * winv[p]));
        }
    }
    for u in &users {
        for &(i, vi) in u {
            for &(j, vj) in u {
                out[(i, j)] += vi * vj;
            }
        }
    }
}

/// Assembles `M` for the given `S^{-1}` blocks.
pub fn assemble_schur_matrix(problem: &SdpProblem, winv: &[BlockMat], plan: &KktPlan) -> DMatrix<f64> {
    let m = problem.m();
    let mut out = DMatrix::zeros(m, m);
    for (k, w) in winv.iter().enumerate() {
        match w {
            BlockMat::Dense(w) => add_sdp_block(
                problem,
                k,
                w,
                plan.blocks[k].as_ref().expect("plan for SDP block"),
                &mut out,
            ),
            BlockMat::Diag(d) => add_diag_block(problem, k, d, &mut out),
        }
    }
    out
}

/// Auxiliary inner products; `r` is the dual residual (omit when zero).
pub fn compute_aux(problem: &SdpProblem, winv: &[BlockMat], r: Option<&BlockSym>) -> SchurAux {
    let m = problem.m();
    let c = problem.c_matrix();
    // Per block: W C W and W R W.
    let sandwich: Vec<(BlockMat, Option<BlockMat>)> = winv
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let sw = |x: &BlockMat| match (w, x) {
                (BlockMat::Dense(w), BlockMat::Dense(x)) => BlockMat::Dense(w * x * w),
                (BlockMat::Diag(w), BlockMat::Diag(x)) => BlockMat::Diag(w.component_mul(x).component_mul(w)),
                _ => panic!("block kind mismatch"),
            };
            let p = if problem.c[k].is_zero() {
                BlockMat::zeros(problem.blocks[k])
            } else {
                sw(&c.0[k])
            };
            let q = r.map(|r| sw(&r.0[k]));
            (p, q)
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut s = (0.0, 0.0, 0.0);
            for (k, a) in problem.a[i].iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                s.0 += winv[k].inner_coeff(a);
                s.1 += sandwich[k].0.inner_coeff(a);
                if let Some(q) = &sandwich[k].1 {
                    s.2 += q.inner_coeff(a);
                }
            }
            s
        })
        .collect();
    let mut aux = SchurAux {
        asinv: DVector::from_iterator(m, rows.iter().map(|r| r.0)),
        asinv_csinv: DVector::from_iterator(m, rows.iter().map(|r| r.1)),
        asinv_rsinv: DVector::from_iterator(m, rows.iter().map(|r| r.2)),
        csinv: 0.0,
        csinvcsinv: 0.0,
        csinv_rsinv: 0.0,
        rsinv: 0.0,
        rsinvrsinv: 0.0,
    };
    for (k, (p, q)) in sandwich.iter().enumerate() {
        aux.csinv += winv[k].inner(&c.0[k]);
        aux.csinvcsinv += p.inner(&c.0[k]);
        if let (Some(q), Some(r)) = (q, r) {
            aux.csinv_rsinv += q.inner(&c.0[k]);
            aux.rsinv += winv[k].inner(&r.0[k]);
            aux.rsinvrsinv += q.inner(&r.0[k]);
        }
    }
    aux
}

/// Schur matrix and auxiliary quantities at `S` (given by its factors).
pub fn assemble_schur(
    problem: &SdpProblem,
    factors: &[BlockFactor],
    r: Option<&BlockSym>,
    plan: &KktPlan,
) -> SchurSystem {
    let winv = inverse_blocks(factors);
    SchurSystem {
        m: assemble_schur_matrix(problem, &winv, plan),
        aux: compute_aux(problem, &winv, r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMode {
    Direct,
    Pcg,
}

/// A factored (or preconditioned) normal matrix ready for repeated solves.
#[derive(Debug, Clone)]
pub struct NormalSolver {
    m: DMatrix<f64>,
    factor: Option<FactorHandle>,
    mode: SolveMode,
}

fn direct_factor(m: &DMatrix<f64>) -> Result<FactorHandle, LinalgError> {
    match cholesky(m) {
        Ok(f) => Ok(FactorHandle::Cholesky(f)),
        Err(_) => ldl(m).map(FactorHandle::Ldl),
    }
}

impl NormalSolver {
    pub fn new(m: &DMatrix<f64>, mode: SolveMode) -> Result<Self, LinalgError> {
        let factor = match mode {
            SolveMode::Direct => Some(direct_factor(m)?),
            SolveMode::Pcg => None,
        };
        Ok(Self {
            m: m.clone(),
            factor,
            mode,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Some(FactorHandle::Cholesky(_)))
    }

    fn direct(&mut self, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        if self.factor.is_none() {
            self.factor = Some(direct_factor(&self.m)?);
        }
        let f = self.factor.as_ref().unwrap();
        let mut x = f.solve(rhs);
        // Two rounds of iterative refinement.
        for _ in 0..2 {
            let r = rhs - &self.m * &x;
            if r.norm() <= 1e-14 * rhs.norm() {
                break;
            }
            x += f.solve(&r);
        }
        Ok(x)
    }

    /// Solves `M x = rhs`. PCG falls back to a direct factorization on
    /// breakdown or when the budget runs out.
    pub fn solve(&mut self, rhs: &DVector<f64>, pcg: &mut PcgState) -> Result<DVector<f64>, LinalgError> {
        if rhs.is_empty() {
            return Ok(DVector::zeros(0));
        }
        match self.mode {
            SolveMode::Direct => self.direct(rhs),
            SolveMode::Pcg => {
                if pcg.needs_rebuild() {
                    pcg.rebuild(&self.m);
                }
                let m = &self.m;
                match pcg_solve(|v| m * v, rhs, pcg) {
                    Ok(out) if out.converged => Ok(out.x),
                    _ => {
                        log::debug!("pcg fell back to a direct solve");
                        self.direct(rhs)
                    }
                }
            }
        }
    }
}

/// One-shot solve of `M x = rhs`.
pub fn solve_normal(system: &SchurSystem, rhs: &DVector<f64>, mode: SolveMode) -> Result<DVector<f64>, LinalgError> {
    let mut pcg = PcgState::new(crate::linalg::PreconditionerKind::CholeskyReuse, system.m.nrows());
    NormalSolver::new(&system.m, mode)?.solve(rhs, &mut pcg)
}
