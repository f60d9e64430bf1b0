//! Structure discovery before the solve: hidden low-rank coefficients,
//! objective scaling and the problem-level structure flags.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::linalg::{cholesky, ldl_solve};
use crate::model::{Block, CoeffKind, CoeffMatrix, SdpProblem, SparseVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresolveOptions {
    pub rank_tol: f64,
    pub dense_skip_order: usize,
    pub few_entry_threshold: usize,
    pub scale_trigger: f64,
    pub multi_block_threshold: usize,
}

impl Default for PresolveOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            dense_skip_order: 2048,
            few_entry_threshold: 20,
            scale_trigger: 1e8,
            multi_block_threshold: 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StructureFlags {
    pub implied_trace: Option<f64>,
    pub implied_dual_bounds: Option<(Vec<f64>, Vec<f64>)>,
    pub empty_primal_interior: bool,
    pub empty_dual_interior: bool,
    pub feasibility_problem: bool,
    pub dense_problem: bool,
    pub multi_block: bool,
}

/// Eigenpairs of a symmetric matrix in the original coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<SparseVec>,
}

/// Sorted indices of rows holding at least one nonzero.
fn nonzero_rows(m: &CoeffMatrix) -> Vec<usize> {
    let mut rows = vec![false; m.dim];
    for (i, j, _) in m.upper_entries() {
        rows[i] = true;
        rows[j] = true;
    }
    (0..m.dim).filter(|&i| rows[i]).collect()
}

/// Dense `k x k` core on the given rows.
fn gather(m: &CoeffMatrix, rows: &[usize]) -> DMatrix<f64> {
    let mut pos = vec![usize::MAX; m.dim];
    for (k, &r) in rows.iter().enumerate() {
        pos[r] = k;
    }
    let k = rows.len();
    let mut core = DMatrix::zeros(k, k);
    for (i, j, v) in m.upper_entries() {
        core[(pos[i], pos[j])] = v;
        core[(pos[j], pos[i])] = v;
    }
    core
}

fn scatter(v: &[f64], rows: &[usize], drop_tol: f64) -> SparseVec {
    let mut out = SparseVec::default();
    for (&x, &r) in v.iter().zip(rows) {
        if x.abs() > drop_tol {
            out.idx.push(r);
            out.val.push(x);
        }
    }
    out
}

/// Eigendecomposition through the nonzero-row permutation: the nonzeros are
/// gathered into a small dense block, decomposed, and mapped back.
pub fn gather_permute_eig(m: &CoeffMatrix) -> SparseEigen {
    let rows = nonzero_rows(m);
    if rows.is_empty() {
        return SparseEigen::default();
    }
    let core = gather(m, &rows);
    let eig = core.symmetric_eigen();
    let mut out = SparseEigen::default();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        out.values.push(lam);
        out.vectors.push(scatter(&v, &rows, 0.0));
    }
    out
}

/// Rank-one test by one step of Gaussian elimination on the pivot of largest
/// diagonal magnitude. Returns `(lambda, a)` with `|a| = 1` and the first
/// nonzero of `a` positive.
pub fn detect_rank_one(m: &CoeffMatrix, tol: f64) -> Option<(f64, SparseVec)> {
    if let CoeffKind::RankOne { lambda, a } = &m.kind {
        return Some((*lambda, a.clone()));
    }
    let rows = nonzero_rows(m);
    if rows.is_empty() {
        return None;
    }
    let core = gather(m, &rows);
    let k = rows.len();
    let p = (0..k).max_by(|&a, &b| core[(a, a)].abs().total_cmp(&core[(b, b)].abs()))?;
    let piv = core[(p, p)];
    if piv == 0.0 {
        return None;
    }
    let col: Vec<f64> = core.column(p).iter().copied().collect();
    let fnorm = core.norm();
    let mut resid = 0.0;
    for j in 0..k {
        for i in 0..k {
            let r = core[(i, j)] - col[i] * col[j] / piv;
            resid += r * r;
        }
    }
    if resid.sqrt() > tol * fnorm {
        return None;
    }
    let first = col.iter().copied().find(|v| *v != 0.0)?;
    let scaled: Vec<f64> = col.iter().map(|v| v / first).collect();
    let norm2: f64 = scaled.iter().map(|v| v * v).sum();
    let nrm = norm2.sqrt();
    let unit: Vec<f64> = scaled.iter().map(|v| v / nrm).collect();
    // M = (first^2 / piv) * scaled scaled^T
    let lambda = first * first / piv * norm2;
    Some((lambda, scatter(&unit, &rows, 0.0)))
}

/// Keeps eigenpairs above `tol * max|lambda|`; profitable only when the kept
/// rank is at most half the block order.
pub fn detect_low_rank(m: &CoeffMatrix, tol: f64, dense_skip_order: usize) -> Option<CoeffMatrix> {
    if m.is_zero() || matches!(m.kind, CoeffKind::RankOne { .. } | CoeffKind::LowRank { .. }) {
        return None;
    }
    let rows = nonzero_rows(m);
    if rows.len() > dense_skip_order {
        return None;
    }
    let eig = gather_permute_eig(m);
    let lmax = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut lambdas = Vec::new();
    let mut vectors = Vec::new();
    for (l, v) in eig.values.iter().zip(&eig.vectors) {
        if l.abs() > tol * lmax {
            lambdas.push(*l);
            let drop = 1e-15 * v.val.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let vd: Vec<f64> = v.val.clone();
            vectors.push(scatter(&vd, &v.idx, drop));
        }
    }
    if lambdas.is_empty() || 2 * lambdas.len() > m.dim {
        return None;
    }
    Some(CoeffMatrix {
        kind: CoeffKind::LowRank { lambdas, vectors },
        dim: m.dim,
    })
}

/// Replaces SDP-block constraint coefficients by rank-one or low-rank forms
/// where that is exact to `tol`.
pub fn promote_low_rank(problem: &mut SdpProblem, opts: &PresolveOptions) {
    let blocks = problem.blocks.clone();
    for row in &mut problem.a {
        for (k, coeff) in row.iter_mut().enumerate() {
            if !matches!(blocks[k], Block::Sdp(_)) || coeff.is_zero() {
                continue;
            }
            if matches!(coeff.kind, CoeffKind::RankOne { .. } | CoeffKind::LowRank { .. }) {
                continue;
            }
            if nonzero_rows(coeff).len() > opts.dense_skip_order {
                continue;
            }
            if let Some((lambda, a)) = detect_rank_one(coeff, opts.rank_tol) {
                *coeff = CoeffMatrix {
                    kind: CoeffKind::RankOne { lambda, a },
                    dim: coeff.dim,
                };
            } else if let Some(lr) = detect_low_rank(coeff, opts.rank_tol, opts.dense_skip_order) {
                *coeff = lr;
            }
        }
    }
}

/// Divides `C` by its Frobenius norm when that norm exceeds `trigger`.
pub fn scale_objective(problem: &SdpProblem, trigger: f64) -> (SdpProblem, f64) {
    let norm = problem.c_frob_norm();
    if norm > trigger {
        let mut p = problem.clone();
        for c in &mut p.c {
            *c = c.scaled(1.0 / norm);
        }
        (p, norm)
    } else {
        (problem.clone(), 1.0)
    }
}

/// `tr(X) = theta` implied either by one scaled-identity constraint covering
/// every block or by single-diagonal-entry constraints covering the whole
/// diagonal exactly once.
fn implied_trace(problem: &SdpProblem) -> Option<f64> {
    let n = problem.total_order();
    for (i, row) in problem.a.iter().enumerate() {
        let scales: Vec<Option<f64>> = row.iter().map(CoeffMatrix::is_scaled_identity).collect();
        if let Some(Some(s0)) = scales.first() {
            if scales.iter().all(|s| *s == Some(*s0)) {
                let theta = problem.b[i] / s0;
                return (theta > 0.0).then_some(theta);
            }
        }
    }
    let offsets: Vec<usize> = problem
        .blocks
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.order();
            Some(o)
        })
        .collect();
    let mut covered = vec![false; n];
    let mut theta = 0.0;
    for (i, row) in problem.a.iter().enumerate() {
        let mut hit = None;
        for (k, a) in row.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let e = a.upper_entries();
            if hit.is_some() || e.len() != 1 || e[0].0 != e[0].1 {
                hit = None;
                break;
            }
            hit = Some((offsets[k] + e[0].0, e[0].2));
        }
        if let Some((pos, v)) = hit {
            if covered[pos] {
                return None;
            }
            covered[pos] = true;
            theta += problem.b[i] / v;
        }
    }
    (covered.iter().all(|&c| c) && theta > 0.0).then_some(theta)
}

/// Dual bounds from diagonal blocks whose positions each involve exactly one
/// constraint: `c_k - a y_i >= 0`.
fn implied_dual_bounds(problem: &SdpProblem) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = problem.m();
    let mut lower = vec![f64::NEG_INFINITY; m];
    let mut upper = vec![f64::INFINITY; m];
    let mut found = false;
    for (k, blk) in problem.blocks.iter().enumerate() {
        let Block::Diag(n) = *blk else { continue };
        let mut users: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in problem.a.iter().enumerate() {
            for (p, _, v) in row[k].upper_entries() {
                users[p].push((i, v));
            }
        }
        for (p, u) in users.iter().enumerate() {
            if let [(i, a)] = u.as_slice() {
                let c = problem.c[k].entry(p, p);
                let bound = c / a;
                if *a > 0.0 {
                    upper[*i] = upper[*i].min(bound);
                } else {
                    lower[*i] = lower[*i].max(bound);
                }
                found = true;
            }
        }
    }
    found.then_some((lower, upper))
}

/// `A* y = C` solvable in the least-squares sense to `1e-10`.
fn dual_equation_consistent(problem: &SdpProblem) -> bool {
    let m = problem.m();
    if m == 0 {
        return false;
    }
    // Vectorized upper triangles, off-diagonals weighted by sqrt(2).
    let len: usize = problem
        .blocks
        .iter()
        .map(|b| match b {
            Block::Sdp(n) => n * (n + 1) / 2,
            Block::Diag(n) => *n,
        })
        .sum();
    if len.saturating_mul(m) > 50_000_000 {
        return false;
    }
    let vectorize = |coeffs: &[CoeffMatrix]| {
        let mut v = DVector::zeros(len);
        let mut off = 0;
        for (blk, c) in problem.blocks.iter().zip(coeffs) {
            match blk {
                Block::Sdp(n) => {
                    for (i, j, x) in c.upper_entries() {
                        let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                        v[off + j * (j + 1) / 2 + i] = w * x;
                    }
                    off += n * (n + 1) / 2;
                }
                Block::Diag(n) => {
                    for (i, _, x) in c.upper_entries() {
                        v[off + i] = x;
                    }
                    off += n;
                }
            }
        }
        v
    };
    let c = vectorize(&problem.c);
    let cn = c.norm();
    if cn == 0.0 {
        return false;
    }
    let mut a = DMatrix::zeros(len, m);
    for (i, row) in problem.a.iter().enumerate() {
        a.set_column(i, &vectorize(row));
    }
    let mut g = a.tr_mul(&a);
    let ridge = 1e-14 * g.trace().max(1.0) / m as f64;
    for i in 0..m {
        g[(i, i)] += ridge;
    }
    let rhs = a.tr_mul(&c);
    let y = match cholesky(&g) {
        Ok(f) => f.solve(&rhs),
        Err(_) => match ldl_solve(&g, &rhs) {
            Ok(y) => y,
            Err(_) => return false,
        },
    };
    (&a * y - &c).norm() <= 1e-10 * (1.0 + cn)
}

pub fn detect_structures(problem: &SdpProblem, opts: &PresolveOptions) -> StructureFlags {
    let empty_primal_interior = problem.a.iter().enumerate().any(|(i, row)| {
        let nz: Vec<&CoeffMatrix> = row.iter().filter(|c| !c.is_zero()).collect();
        problem.b[i].abs() <= 1e-12
            && nz.len() == 1
            && detect_rank_one(nz[0], opts.rank_tol).is_some_and(|(l, _)| l != 0.0)
    });
    let nonzero_a: Vec<&CoeffMatrix> = problem.a.iter().flatten().filter(|c| !c.is_zero()).collect();
    StructureFlags {
        implied_trace: implied_trace(problem),
        implied_dual_bounds: implied_dual_bounds(problem),
        empty_primal_interior,
        empty_dual_interior: dual_equation_consistent(problem),
        feasibility_problem: problem.c.iter().all(CoeffMatrix::is_zero),
        dense_problem: !nonzero_a.is_empty() && nonzero_a.iter().all(|c| matches!(c.kind, CoeffKind::DenseSym(_))),
        multi_block: problem.nblocks() > opts.multi_block_threshold,
    }
}

/// Output of the presolve pipeline.
#[derive(Debug, Clone)]
pub struct Presolved {
    pub problem: SdpProblem,
    pub objective_scale: f64,
    pub flags: StructureFlags,
}

/// Low-rank promotion, objective scaling, then structure detection.
pub fn presolve(problem: &SdpProblem, opts: &PresolveOptions) -> Presolved {
    let mut p = problem.clone();
    promote_low_rank(&mut p, opts);
    let (p, scale) = scale_objective(&p, opts.scale_trigger);
    let flags = detect_structures(&p, opts);
    Presolved {
        problem: p,
        objective_scale: scale,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_coeff(m: &DMatrix<f64>) -> CoeffMatrix {
        crate::model::classify_coefficient(m, 0.0).unwrap()
    }

    #[test]
    fn rank_one_unit_vector() {
        let c = CoeffMatrix::from_triplets(4, &[(1, 1, 1.0)]);
        let (l, a) = detect_rank_one(&c, 1e-10).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(a.idx, vec![1]);
        assert_eq!(a.val, vec![1.0]);
    }

    #[test]
    fn rank_one_scaled_outer() {
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let m = &v * v.transpose() * 3.0;
        let (l, a) = detect_rank_one(&dense_coeff(&m), 1e-10).unwrap();
        assert!((l - 3.0).abs() < 1e-14);
        let a = a.to_dense(3);
        assert!((&a * a.transpose() * l - &m).norm() < 1e-14);
        assert!(a[0] > 0.0);
    }

    #[test]
    fn identity_not_rank_one() {
        assert!(detect_rank_one(&CoeffMatrix::identity(2), 1e-10).is_none());
    }

    #[test]
    fn negative_rank_one_keeps_sign() {
        let m = CoeffMatrix::from_triplets(3, &[(0, 0, -1.0), (0, 2, 1.0), (2, 2, -1.0)]);
        let (l, a) = detect_rank_one(&m, 1e-10).unwrap();
        let a = a.to_dense(3);
        assert!((&a * a.transpose() * l - m.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn low_rank_two_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
        let a1 = q.column(0).into_owned();
        let a2 = q.column(1).into_owned();
        let m = &a1 * a1.transpose() - &a2 * a2.transpose();
        let lr = detect_low_rank(&dense_coeff(&m), 1e-10, 2048).unwrap();
        let CoeffKind::LowRank { lambdas, .. } = &lr.kind else {
            panic!()
        };
        let mut l = lambdas.clone();
        l.sort_by(f64::total_cmp);
        assert!((l[0] + 1.0).abs() < 1e-12 && (l[1] - 1.0).abs() < 1e-12);
        assert!((lr.to_dense() - &m).norm() < 1e-10);
    }

    #[test]
    fn identity_not_low_rank() {
        assert!(detect_low_rank(&CoeffMatrix::identity(4), 1e-10, 2048).is_none());
    }

    #[test]
    fn corner_in_large_matrix() {
        let m = CoeffMatrix::from_triplets(50, &[(3, 3, 1.0), (3, 40, 2.0), (40, 40, -1.0)]);
        let lr = detect_low_rank(&m, 1e-10, 2048).unwrap();
        assert!(lr.rank() <= 2);
        assert!((lr.to_dense() - m.to_dense()).norm() < 1e-10);
    }

    #[test]
    fn gather_single_entry() {
        let m = CoeffMatrix::from_triplets(10, &[(4, 4, 2.0)]);
        let e = gather_permute_eig(&m);
        assert_eq!(e.values, vec![2.0]);
        assert_eq!(e.vectors[0].idx, vec![4]);
        assert_eq!(e.vectors[0].val[0].abs(), 1.0);
        assert!(gather_permute_eig(&CoeffMatrix::zero(5)).values.is_empty());
    }

    #[test]
    fn gather_matches_full_eigensolve() {
        let m = CoeffMatrix::from_triplets(9, &[(2, 2, 1.0), (2, 6, 0.5), (6, 6, -2.0)]);
        let e = gather_permute_eig(&m);
        let mut got = e.values.clone();
        got.sort_by(f64::total_cmp);
        let full = m.to_dense().symmetric_eigen();
        let mut want: Vec<f64> = full.eigenvalues.iter().copied().filter(|v| v.abs() > 1e-14).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling() {
        let small = SdpProblem::new(
            vec![Block::Sdp(2)],
            vec![CoeffMatrix::identity(2).scaled(1.0 / 2f64.sqrt())],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(scale_objective(&small, 1e8).1, 1.0);
        let big = SdpProblem::new(
            vec![Block::Sdp(2)],
            vec![CoeffMatrix::identity(2).scaled(1e9)],
            vec![],
            vec![],
        )
        .unwrap();
        let (p, s) = scale_objective(&big, 1e8);
        assert!((s - 1e9 * 2f64.sqrt()).abs() < 1e-3);
        assert!((p.c_frob_norm() - 1.0).abs() < 1e-15);
        let zero = SdpProblem::new(vec![Block::Sdp(2)], vec![CoeffMatrix::zero(2)], vec![], vec![]).unwrap();
        assert_eq!(scale_objective(&zero, 1e8).1, 1.0);
    }

    fn diag_constraint_problem(n: usize, c: CoeffMatrix) -> SdpProblem {
        let a = (0..n)
            .map(|i| vec![CoeffMatrix::from_triplets(n, &[(i, i, 1.0)])])
            .collect();
        SdpProblem::new(vec![Block::Sdp(n)], vec![c], a, vec![1.0; n]).unwrap()
    }

    #[test]
    fn maxcut_implied_trace() {
        let p = diag_constraint_problem(5, CoeffMatrix::from_triplets(5, &[(0, 1, -1.0)]));
        let f = detect_structures(&p, &PresolveOptions::default());
        assert_eq!(f.implied_trace, Some(5.0));
        assert!(!f.feasibility_problem);
    }

    #[test]
    fn feasibility_flag() {
        let p = diag_constraint_problem(3, CoeffMatrix::zero(3));
        let f = detect_structures(&p, &PresolveOptions::default());
        assert!(f.feasibility_problem);
        assert!(!f.empty_dual_interior);
    }

    #[test]
    fn dense_single_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rand_sym = || {
            let d = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(0.5..1.5));
            dense_coeff(&(&d + d.transpose()))
        };
        let p = SdpProblem::new(
            vec![Block::Sdp(4)],
            vec![rand_sym()],
            vec![vec![rand_sym()], vec![rand_sym()]],
            vec![1.0, 2.0],
        )
        .unwrap();
        let f = detect_structures(&p, &PresolveOptions::default());
        assert!(f.dense_problem && !f.multi_block);
    }

    #[test]
    fn empty_interiors() {
        // <e1 e1^T, X> = 0 forces X_11 = 0.
        let p = SdpProblem::new(
            vec![Block::Sdp(2)],
            vec![CoeffMatrix::identity(2)],
            vec![vec![CoeffMatrix::from_triplets(2, &[(0, 0, 1.0)])]],
            vec![0.0],
        )
        .unwrap();
        let f = detect_structures(&p, &PresolveOptions::default());
        assert!(f.empty_primal_interior);
        assert!(!f.empty_dual_interior);
        // C = 2 A_1 makes A* y = C solvable.
        let p = SdpProblem::new(
            vec![Block::Sdp(2)],
            vec![CoeffMatrix::identity(2).scaled(2.0)],
            vec![vec![CoeffMatrix::identity(2)]],
            vec![1.0],
        )
        .unwrap();
        assert!(detect_structures(&p, &PresolveOptions::default()).empty_dual_interior);
    }

    #[test]
    fn bounds_from_diag_block() {
        // y1 <= 3 and y2 >= -1 from s = c - A* y >= 0
        let p = SdpProblem::new(
            vec![Block::Diag(2)],
            vec![CoeffMatrix::from_triplets(2, &[(0, 0, 3.0), (1, 1, 1.0)])],
            vec![
                vec![CoeffMatrix::from_triplets(2, &[(0, 0, 1.0)])],
                vec![CoeffMatrix::from_triplets(2, &[(1, 1, -1.0)])],
            ],
            vec![1.0, 1.0],
        )
        .unwrap();
        let (l, u) = detect_structures(&p, &PresolveOptions::default())
            .implied_dual_bounds
            .unwrap();
        assert_eq!(u[0], 3.0);
        assert_eq!(l[1], -1.0);
    }

    #[test]
    fn promotion_preserves_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let m = &v * v.transpose();
        let mut p = SdpProblem::new(
            vec![Block::Sdp(5)],
            vec![CoeffMatrix::identity(5)],
            vec![vec![dense_coeff(&m)], vec![CoeffMatrix::identity(5)]],
            vec![1.0, 1.0],
        )
        .unwrap();
        promote_low_rank(&mut p, &PresolveOptions::default());
        assert!(matches!(p.a[0][0].kind, CoeffKind::RankOne { .. }));
        assert!((p.a[0][0].to_dense() - m).norm() < 1e-12);
        assert!(matches!(p.a[1][0].kind, CoeffKind::SparseSym(_)));
    }
}
