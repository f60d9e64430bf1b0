// Random instances and dense oracles shared by the integration tests. The
// oracles work on whole block-diagonal matrices assembled densely, so they
// share no code with the solver's block kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sdsolve::linalg::factor_blocks;
use sdsolve::model::{classify_coefficient, Block, BlockMat, BlockSym, CoeffKind, CoeffMatrix, SdpProblem, SparseVec};
use sdsolve::solver::{initialize, DualIterate, Params};

pub fn random_pd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let h = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&h + h.transpose()) * 0.5
}

fn unit_sparse(rng: &mut ChaCha8Rng, n: usize, nnz: usize) -> SparseVec {
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..nnz.min(n) {
        let j = rng.gen_range(k..n);
        idx.swap(k, j);
    }
    let mut idx: Vec<usize> = idx[..nnz.min(n)].to_vec();
    idx.sort_unstable();
    let mut val: Vec<f64> = idx
        .iter()
        .map(|_| rng.gen_range(0.2..1.0) * if rng.gen() { 1.0 } else { -1.0 })
        .collect();
    let norm = val.iter().map(|v| v * v).sum::<f64>().sqrt();
    val.iter_mut().for_each(|v| *v /= norm);
    SparseVec { idx, val }
}

/// A coefficient of a random storage kind: zero, sparse, dense, rank one or
/// low rank.
pub fn random_coeff(rng: &mut ChaCha8Rng, n: usize) -> CoeffMatrix {
    match rng.gen_range(0..5) {
        0 => CoeffMatrix::zero(n),
        1 => {
            let k = rng.gen_range(1..=n.min(4));
            let t: Vec<_> = (0..k)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0)))
                .collect();
            CoeffMatrix::from_triplets(n, &t)
        }
        2 => classify_coefficient(&random_sym(rng, n), 0.0).expect("symmetric"),
        3 => {
            let lambda = rng.gen_range(-2.0..2.0);
            let nnz = rng.gen_range(1..=n.min(3));
            CoeffMatrix {
                kind: CoeffKind::RankOne {
                    lambda,
                    a: unit_sparse(rng, n, nnz),
                },
                dim: n,
            }
        }
        _ => {
            let r = rng.gen_range(2..=3);
            let lambdas = (0..r).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let vectors = (0..r)
                .map(|_| {
                    let nnz = rng.gen_range(1..=n);
                    unit_sparse(rng, n, nnz)
                })
                .collect();
            CoeffMatrix {
                kind: CoeffKind::LowRank { lambdas, vectors },
                dim: n,
            }
        }
    }
}

fn random_diag_coeff(rng: &mut ChaCha8Rng, n: usize) -> CoeffMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        if rng.gen_bool(0.5) {
            t.push((i, i, rng.gen_range(-1.0..1.0)));
        }
    }
    CoeffMatrix::from_triplets(n, &t)
}

/// Mixed-structure problem: SDP blocks of the given orders plus an optional
/// diagonal block, every coefficient of a random kind.
pub fn random_mixed_problem(rng: &mut ChaCha8Rng, m: usize, sdp_orders: &[usize], diag: Option<usize>) -> SdpProblem {
    let mut blocks: Vec<Block> = sdp_orders.iter().map(|&n| Block::Sdp(n)).collect();
    if let Some(d) = diag {
        blocks.push(Block::Diag(d));
    }
    let coeff = |rng: &mut ChaCha8Rng, b: &Block| match *b {
        Block::Sdp(n) => random_coeff(rng, n),
        Block::Diag(n) => random_diag_coeff(rng, n),
    };
    let c = blocks.iter().map(|b| coeff(rng, b)).collect();
    let a = (0..m).map(|_| blocks.iter().map(|b| coeff(rng, b)).collect()).collect();
    let b = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SdpProblem::new(blocks, c, a, b).expect("consistent dimensions")
}

/// Positive definite block slack.
pub fn random_slack(rng: &mut ChaCha8Rng, blocks: &[Block]) -> BlockSym {
    BlockSym(
        blocks
            .iter()
            .map(|b| match *b {
                Block::Sdp(n) => BlockMat::Dense(random_pd(rng, n, 0.5)),
                Block::Diag(n) => BlockMat::Diag(DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0))),
            })
            .collect(),
    )
}

fn offsets(blocks: &[Block]) -> Vec<usize> {
    let mut off = vec![0];
    for b in blocks {
        off.push(off.last().unwrap() + b.order());
    }
    off
}

/// Whole block-diagonal matrix of one constraint row (or `C`).
pub fn dense_row(blocks: &[Block], row: &[CoeffMatrix]) -> DMatrix<f64> {
    let off = offsets(blocks);
    let n = *off.last().unwrap();
    let mut out = DMatrix::zeros(n, n);
    for (k, c) in row.iter().enumerate() {
        let d = c.to_dense();
        out.view_mut((off[k], off[k]), (d.nrows(), d.ncols())).copy_from(&d);
    }
    out
}

pub fn dense_blocksym(blocks: &[Block], x: &BlockSym) -> DMatrix<f64> {
    let off = offsets(blocks);
    let n = *off.last().unwrap();
    let mut out = DMatrix::zeros(n, n);
    for (k, b) in x.0.iter().enumerate() {
        let d = b.to_dense();
        out.view_mut((off[k], off[k]), (d.nrows(), d.ncols())).copy_from(&d);
    }
    out
}

/// Dense data of a problem: `C` and every `A_i` as whole matrices.
pub struct DenseProblem {
    pub c: DMatrix<f64>,
    pub a: Vec<DMatrix<f64>>,
    pub b: DVector<f64>,
}

impl DenseProblem {
    pub fn of(p: &SdpProblem) -> Self {
        Self {
            c: dense_row(&p.blocks, &p.c),
            a: p.a.iter().map(|r| dense_row(&p.blocks, r)).collect(),
            b: p.b.clone(),
        }
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let n = self.c.nrows();
        self.a
            .iter()
            .zip(y.iter())
            .fold(DMatrix::zeros(n, n), |acc, (a, yi)| acc + a * *yi)
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.dot(x)))
    }

    /// `M_ij = tr(A_i W A_j W)`.
    pub fn schur(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let wa: Vec<DMatrix<f64>> = self.a.iter().map(|a| w * a * w).collect();
        let m = self.a.len();
        DMatrix::from_fn(m, m, |i, j| self.a[i].dot(&wa[j]))
    }
}

pub fn rel_frob(a: &DMatrix<f64>, oracle: &DMatrix<f64>) -> f64 {
    (a - oracle).norm() / oracle.norm().max(f64::MIN_POSITIVE)
}

/// A random embedding iterate `(y, tau, S)` with `R = C tau - A* y - S`.
pub fn random_iterate(rng: &mut ChaCha8Rng, problem: &SdpProblem) -> DualIterate {
    let mut it = initialize(problem, &Params::default());
    let y = DVector::from_fn(problem.m(), |_, _| rng.gen_range(-1.0..1.0));
    let tau = rng.gen_range(0.5..2.0);
    let s = random_slack(rng, &problem.blocks);
    let mut r0 = problem.c_matrix().scaled(tau);
    r0.axpy(-1.0, &problem.adjoint_map(&y).unwrap());
    r0.axpy(-1.0, &s);
    it.factors = factor_blocks(&s).unwrap();
    it.y = y;
    it.tau = tau;
    it.s = s;
    it.r0 = r0;
    it.r_scale = 1.0;
    it.mu = rng.gen_range(0.1..10.0);
    it
}

pub fn embedding_problem(rng: &mut ChaCha8Rng) -> SdpProblem {
    let m = rng.gen_range(1..=10);
    let orders = [rng.gen_range(1..=5)];
    let diag = rng.gen_bool(0.5).then(|| rng.gen_range(1..=3));
    random_mixed_problem(rng, m, &orders, diag)
}
