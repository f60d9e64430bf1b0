//! Block-structured SDP data.
//!
//! A problem is a list of cone blocks (dense SDP blocks or diagonal LP
//! blocks), an objective coefficient per block and an `m x nblocks` grid of
//! constraint coefficients. Every coefficient carries its structural kind so
//! the Schur assembly can pick the cheapest way of touching it.

use nalgebra::{DMatrix, DVector};

use crate::error::ModelError;

/// Default nonzero fraction below which a coefficient is stored sparse.
pub const SPARSITY_THRESHOLD: f64 = 0.25;
/// Relative asymmetry accepted by [`classify_coefficient`].
pub const SYMMETRY_TOL: f64 = 1e-14;

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn from_dense(v: &[f64]) -> Self {
        let mut out = SparseVec::default();
        for (i, &x) in v.iter().enumerate() {
            if x != 0.0 {
                out.idx.push(i);
                out.val.push(x);
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self, n: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        for (&i, &x) in self.idx.iter().zip(&self.val) {
            v[i] = x;
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Storage kinds for a symmetric coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum CoeffKind {
    Zero,
    /// Upper-triangle triplets `(i, j, v)` with `i <= j`, each position once.
    SparseSym(Vec<(usize, usize, f64)>),
    /// Packed upper triangle, column by column: `(i, j)` with `i <= j` lives
    /// at `j * (j + 1) / 2 + i`.
    DenseSym(Vec<f64>),
    /// `lambda * a a^T` with `|a| = 1`.
    RankOne {
        lambda: f64,
        a: SparseVec,
    },
    /// `sum_r lambda_r a_r a_r^T` with unit vectors.
    LowRank {
        lambdas: Vec<f64>,
        vectors: Vec<SparseVec>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub kind: CoeffKind,
    pub dim: usize,
}

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

impl CoeffMatrix {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: CoeffKind::Zero,
            dim,
        }
    }

    /// Builds a sparse coefficient from triplets in either triangle. Entries
    /// on the same symmetric position are summed; explicit zeros are dropped.
    pub fn from_triplets(dim: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = entries
            .iter()
            .map(|&(i, j, v)| if i <= j { (i, j, v) } else { (j, i, v) })
            .collect();
        sorted.sort_by_key(|e| (e.1, e.0));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        if merged.is_empty() {
            Self::zero(dim)
        } else {
            Self {
                kind: CoeffKind::SparseSym(merged),
                dim,
            }
        }
    }

    /// Switches sparse storage to packed dense once the nonzero fraction
    /// reaches `sparsity_threshold`.
    pub fn with_storage(self, sparsity_threshold: f64) -> Self {
        let n = self.dim;
        match &self.kind {
            CoeffKind::SparseSym(t) if n > 0 && self.nnz() as f64 / (n * n) as f64 >= sparsity_threshold => {
                let mut p = vec![0.0; n * (n + 1) / 2];
                for &(i, j, v) in t {
                    p[packed_index(i, j)] = v;
                }
                Self {
                    kind: CoeffKind::DenseSym(p),
                    dim: n,
                }
            }
            _ => self,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let e: Vec<_> = (0..dim).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(dim, &e)
    }

    pub fn rank_one(lambda: f64, a: &[f64]) -> Self {
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit: Vec<f64> = a.iter().map(|x| x / norm).collect();
        Self {
            kind: CoeffKind::RankOne {
                lambda: lambda * norm * norm,
                a: SparseVec::from_dense(&unit),
            },
            dim: a.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, CoeffKind::Zero)
    }

    /// Number of nonzeros of the materialized (full, both triangles) matrix.
    pub fn nnz(&self) -> usize {
        match &self.kind {
            CoeffKind::Zero => 0,
            CoeffKind::SparseSym(t) => t.iter().map(|e| if e.0 == e.1 { 1 } else { 2 }).sum(),
            CoeffKind::DenseSym(_) => self.dim * self.dim,
            CoeffKind::RankOne { a, .. } => a.nnz() * a.nnz(),
            CoeffKind::LowRank { vectors, .. } => {
                let mut rows = vec![false; self.dim];
                for v in vectors {
                    for &i in &v.idx {
                        rows[i] = true;
                    }
                }
                let k = rows.iter().filter(|&&b| b).count();
                k * k
            }
        }
    }

    /// Rank if known from the representation, otherwise the block order.
    pub fn rank(&self) -> usize {
        match &self.kind {
            CoeffKind::Zero => 0,
            CoeffKind::RankOne { .. } => 1,
            CoeffKind::LowRank { lambdas, .. } => lambdas.len(),
            _ => self.dim,
        }
    }

    /// Eigen-style factors `(lambda_r, a_r)` when the representation has them.
    pub fn eigen_factors(&self) -> Option<Vec<(f64, &SparseVec)>> {
        match &self.kind {
            CoeffKind::RankOne { lambda, a } => Some(vec![(*lambda, a)]),
            CoeffKind::LowRank { lambdas, vectors } => Some(lambdas.iter().copied().zip(vectors.iter()).collect()),
            _ => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        self.add_to_dense(&mut m, 1.0);
        m
    }

    /// `target += scale * self`.
    pub fn add_to_dense(&self, target: &mut DMatrix<f64>, scale: f64) {
        let n = self.dim;
        match &self.kind {
            CoeffKind::Zero => {}
            CoeffKind::SparseSym(t) => {
                for &(i, j, v) in t {
                    target[(i, j)] += scale * v;
                    if i != j {
                        target[(j, i)] += scale * v;
                    }
                }
            }
            CoeffKind::DenseSym(p) => {
                for j in 0..n {
                    for i in 0..=j {
                        let v = scale * p[packed_index(i, j)];
                        target[(i, j)] += v;
                        if i != j {
                            target[(j, i)] += v;
                        }
                    }
                }
            }
            CoeffKind::RankOne { lambda, a } => add_outer(target, scale * lambda, a),
            CoeffKind::LowRank { lambdas, vectors } => {
                for (l, a) in lambdas.iter().zip(vectors) {
                    add_outer(target, scale * l, a);
                }
            }
        }
    }

    /// `target += scale * diag(self)` for diagonal (LP) blocks.
    pub fn add_to_diag(&self, target: &mut DVector<f64>, scale: f64) {
        for (i, j, v) in self.upper_entries() {
            if i == j {
                target[i] += scale * v;
            }
        }
    }

    /// Upper-triangle entries of the represented matrix.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.kind {
            CoeffKind::Zero => Vec::new(),
            CoeffKind::SparseSym(t) => t.clone(),
            CoeffKind::DenseSym(p) => {
                let mut out = Vec::with_capacity(p.len());
                for j in 0..self.dim {
                    for i in 0..=j {
                        let v = p[packed_index(i, j)];
                        if v != 0.0 {
                            out.push((i, j, v));
                        }
                    }
                }
                out
            }
            _ => {
                let d = self.to_dense();
                let mut out = Vec::new();
                for j in 0..self.dim {
                    for i in 0..=j {
                        if d[(i, j)] != 0.0 {
                            out.push((i, j, d[(i, j)]));
                        }
                    }
                }
                out
            }
        }
    }

    /// `<self, b>` for a dense symmetric `b`.
    pub fn inner_dense(&self, b: &DMatrix<f64>) -> f64 {
        match &self.kind {
            CoeffKind::Zero => 0.0,
            CoeffKind::SparseSym(t) => t
                .iter()
                .map(|&(i, j, v)| {
                    if i == j {
                        v * b[(i, i)]
                    } else {
                        v * (b[(i, j)] + b[(j, i)])
                    }
                })
                .sum(),
            CoeffKind::DenseSym(p) => {
                let mut s = 0.0;
                for j in 0..self.dim {
                    for i in 0..j {
                        s += p[packed_index(i, j)] * (b[(i, j)] + b[(j, i)]);
                    }
                    s += p[packed_index(j, j)] * b[(j, j)];
                }
                s
            }
            CoeffKind::RankOne { lambda, a } => lambda * sparse_quad(b, a),
            CoeffKind::LowRank { lambdas, vectors } => {
                lambdas.iter().zip(vectors).map(|(l, a)| l * sparse_quad(b, a)).sum()
            }
        }
    }

    /// `<self, diag(d)>` for diagonal blocks.
    pub fn inner_diag(&self, d: &DVector<f64>) -> f64 {
        match &self.kind {
            CoeffKind::Zero => 0.0,
            CoeffKind::SparseSym(t) => t.iter().filter(|e| e.0 == e.1).map(|&(i, _, v)| v * d[i]).sum(),
            _ => (0..self.dim).map(|i| self.entry(i, i) * d[i]).sum(),
        }
    }

    /// `u^T self v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        match &self.kind {
            CoeffKind::Zero => 0.0,
            CoeffKind::SparseSym(t) => t
                .iter()
                .map(|&(i, j, a)| {
                    if i == j {
                        a * u[i] * v[i]
                    } else {
                        a * (u[i] * v[j] + u[j] * v[i])
                    }
                })
                .sum(),
            CoeffKind::DenseSym(p) => {
                let mut s = 0.0;
                for j in 0..self.dim {
                    for i in 0..j {
                        s += p[packed_index(i, j)] * (u[i] * v[j] + u[j] * v[i]);
                    }
                    s += p[packed_index(j, j)] * u[j] * v[j];
                }
                s
            }
            CoeffKind::RankOne { lambda, a } => lambda * a.dot(u) * a.dot(v),
            CoeffKind::LowRank { lambdas, vectors } => {
                lambdas.iter().zip(vectors).map(|(l, a)| l * a.dot(u) * a.dot(v)).sum()
            }
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match &self.kind {
            CoeffKind::Zero => 0.0,
            CoeffKind::SparseSym(t) => t.iter().find(|e| e.0 == i && e.1 == j).map_or(0.0, |e| e.2),
            CoeffKind::DenseSym(p) => p[packed_index(i, j)],
            _ => self.to_dense()[(i, j)],
        }
    }

    pub fn frob_norm(&self) -> f64 {
        match &self.kind {
            CoeffKind::Zero => 0.0,
            CoeffKind::SparseSym(t) => t
                .iter()
                .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
                .sum::<f64>()
                .sqrt(),
            _ => self.to_dense().norm(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.upper_entries().iter().fold(0.0f64, |acc, e| acc.max(e.2.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let kind = match &self.kind {
            CoeffKind::Zero => CoeffKind::Zero,
            CoeffKind::SparseSym(t) => CoeffKind::SparseSym(t.iter().map(|&(i, j, v)| (i, j, v * s)).collect()),
            CoeffKind::DenseSym(p) => CoeffKind::DenseSym(p.iter().map(|v| v * s).collect()),
            CoeffKind::RankOne { lambda, a } => CoeffKind::RankOne {
                lambda: lambda * s,
                a: a.clone(),
            },
            CoeffKind::LowRank { lambdas, vectors } => CoeffKind::LowRank {
                lambdas: lambdas.iter().map(|l| l * s).collect(),
                vectors: vectors.clone(),
            },
        };
        Self { kind, dim: self.dim }
    }

    /// True when the represented matrix equals `scale * I`.
    pub fn is_scaled_identity(&self) -> Option<f64> {
        let e = self.upper_entries();
        if e.len() != self.dim || self.dim == 0 {
            return None;
        }
        let s = e[0].2;
        e.iter().all(|&(i, j, v)| i == j && v == s).then_some(s)
    }
}

fn add_outer(target: &mut DMatrix<f64>, scale: f64, a: &SparseVec) {
    for (&i, &ai) in a.idx.iter().zip(&a.val) {
        for (&j, &aj) in a.idx.iter().zip(&a.val) {
            target[(i, j)] += scale * ai * aj;
        }
    }
}

fn sparse_quad(b: &DMatrix<f64>, a: &SparseVec) -> f64 {
    let mut s = 0.0;
    for (&i, &ai) in a.idx.iter().zip(&a.val) {
        for (&j, &aj) in a.idx.iter().zip(&a.val) {
            s += ai * aj * b[(i, j)];
        }
    }
    s
}

/// Picks the cheapest faithful storage for a dense symmetric matrix.
///
/// Rank structure is left to presolve; this only separates zero, sparse and
/// dense storage.
pub fn classify_coefficient(m: &DMatrix<f64>, sparsity_threshold: f64) -> Result<CoeffMatrix, ModelError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "coefficient is {}x{}",
            n,
            m.ncols()
        )));
    }
    let max_abs = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * max_abs {
        return Err(ModelError::NonSymmetric { asymmetry: asym });
    }
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    if nnz == 0 {
        return Ok(CoeffMatrix::zero(n));
    }
    let fraction = nnz as f64 / (n * n) as f64;
    if fraction < sparsity_threshold {
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..=j {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Ok(CoeffMatrix {
            kind: CoeffKind::SparseSym(t),
            dim: n,
        })
    } else {
        let mut p = vec![0.0; n * (n + 1) / 2];
        for j in 0..n {
            for i in 0..=j {
                p[packed_index(i, j)] = m[(i, j)];
            }
        }
        Ok(CoeffMatrix {
            kind: CoeffKind::DenseSym(p),
            dim: n,
        })
    }
}

/// Cone block: a dense SDP block or a diagonal (LP) block of the given order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Sdp(usize),
    Diag(usize),
}

impl Block {
    pub fn order(&self) -> usize {
        match *self {
            Block::Sdp(n) | Block::Diag(n) => n,
        }
    }

    /// SDPA convention: negative order marks a diagonal block.
    pub fn signed_order(&self) -> i64 {
        match *self {
            Block::Sdp(n) => n as i64,
            Block::Diag(n) => -(n as i64),
        }
    }
}

/// Value of a block-diagonal symmetric matrix restricted to one block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockMat {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl BlockMat {
    pub fn zeros(block: Block) -> Self {
        match block {
            Block::Sdp(n) => BlockMat::Dense(DMatrix::zeros(n, n)),
            Block::Diag(n) => BlockMat::Diag(DVector::zeros(n)),
        }
    }

    pub fn identity(block: Block, scale: f64) -> Self {
        match block {
            Block::Sdp(n) => BlockMat::Dense(DMatrix::identity(n, n) * scale),
            Block::Diag(n) => BlockMat::Diag(DVector::from_element(n, scale)),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            BlockMat::Dense(m) => m.nrows(),
            BlockMat::Diag(d) => d.len(),
        }
    }

    pub fn inner(&self, other: &BlockMat) -> f64 {
        match (self, other) {
            (BlockMat::Dense(a), BlockMat::Dense(b)) => a.dot(b),
            (BlockMat::Diag(a), BlockMat::Diag(b)) => a.dot(b),
            _ => panic!("block kind mismatch"),
        }
    }

    pub fn frob_norm_sq(&self) -> f64 {
        match self {
            BlockMat::Dense(m) => m.norm_squared(),
            BlockMat::Diag(d) => d.norm_squared(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            BlockMat::Dense(m) => m.trace(),
            BlockMat::Diag(d) => d.sum(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &BlockMat) {
        match (self, other) {
            (BlockMat::Dense(a), BlockMat::Dense(b)) => *a += b * s,
            (BlockMat::Diag(a), BlockMat::Diag(b)) => a.axpy(s, b, 1.0),
            _ => panic!("block kind mismatch"),
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        match self {
            BlockMat::Dense(a) => *a *= s,
            BlockMat::Diag(a) => *a *= s,
        }
    }

    pub fn add_coeff(&mut self, c: &CoeffMatrix, s: f64) {
        match self {
            BlockMat::Dense(a) => c.add_to_dense(a, s),
            BlockMat::Diag(d) => c.add_to_diag(d, s),
        }
    }

    pub fn inner_coeff(&self, c: &CoeffMatrix) -> f64 {
        match self {
            BlockMat::Dense(a) => c.inner_dense(a),
            BlockMat::Diag(d) => c.inner_diag(d),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            BlockMat::Dense(a) => a.amax(),
            BlockMat::Diag(d) => d.amax(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            BlockMat::Dense(a) => a.clone(),
            BlockMat::Diag(d) => DMatrix::from_diagonal(d),
        }
    }
}

/// Block-diagonal symmetric matrix (one [`BlockMat`] per cone block).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSym(pub Vec<BlockMat>);

impl BlockSym {
    pub fn zeros(blocks: &[Block]) -> Self {
        BlockSym(blocks.iter().map(|b| BlockMat::zeros(*b)).collect())
    }

    pub fn identity(blocks: &[Block], scale: f64) -> Self {
        BlockSym(blocks.iter().map(|b| BlockMat::identity(*b, scale)).collect())
    }

    pub fn inner(&self, other: &BlockSym) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.iter().map(BlockMat::frob_norm_sq).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.0.iter().map(BlockMat::trace).sum()
    }

    pub fn axpy(&mut self, s: f64, other: &BlockSym) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.axpy(s, b);
        }
    }

    pub fn scale_mut(&mut self, s: f64) {
        for a in &mut self.0 {
            a.scale_mut(s);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, b| acc.max(b.max_abs()))
    }
}

/// Optional box `l <= y <= u` enforced through an extra diagonal block.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// `min <C, X>  s.t.  <A_i, X> = b_i, X psd` together with its dual
/// `max b^T y  s.t.  sum_i y_i A_i + S = C, S psd`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    /// Objective coefficient per block.
    pub c: Vec<CoeffMatrix>,
    /// Constraint coefficients, `a[i][k]` for constraint `i` and block `k`.
    pub a: Vec<Vec<CoeffMatrix>>,
    pub b: DVector<f64>,
    pub dual_bounds: Option<DualBounds>,
}

impl SdpProblem {
    /// Validates dimensions and builds the problem.
    pub fn new(
        blocks: Vec<Block>,
        c: Vec<CoeffMatrix>,
        a: Vec<Vec<CoeffMatrix>>,
        b: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if c.len() != blocks.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} objective blocks for {} cone blocks",
                c.len(),
                blocks.len()
            )));
        }
        if a.len() != b.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} constraint rows but b has {} entries",
                a.len(),
                b.len()
            )));
        }
        for (k, blk) in blocks.iter().enumerate() {
            let check = |cm: &CoeffMatrix, what: &str| -> Result<(), ModelError> {
                if cm.dim != blk.order() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "{what} in block {} has order {} (expected {})",
                        k + 1,
                        cm.dim,
                        blk.order()
                    )));
                }
                if let Block::Diag(_) = blk {
                    if cm.upper_entries().iter().any(|e| e.0 != e.1) {
                        return Err(ModelError::DimensionMismatch(format!(
                            "{what} has off-diagonal entries in diagonal block {}",
                            k + 1
                        )));
                    }
                }
                Ok(())
            };
            check(&c[k], "objective")?;
            for (i, row) in a.iter().enumerate() {
                if row.len() != blocks.len() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "constraint {} has {} blocks",
                        i + 1,
                        row.len()
                    )));
                }
                check(&row[k], &format!("constraint {}", i + 1))?;
            }
        }
        Ok(Self {
            blocks,
            c,
            a,
            b: DVector::from_vec(b),
            dual_bounds: None,
        })
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn nblocks(&self) -> usize {
        self.blocks.len()
    }

    /// Sum of block orders (diagonal blocks count each entry once).
    pub fn total_order(&self) -> usize {
        self.blocks.iter().map(Block::order).sum()
    }

    pub fn c_frob_norm(&self) -> f64 {
        self.c.iter().map(|c| c.frob_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn c_max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |acc, c| acc.max(c.max_abs()))
    }

    pub fn c_matrix(&self) -> BlockSym {
        let mut out = BlockSym::zeros(&self.blocks);
        for (blk, c) in out.0.iter_mut().zip(&self.c) {
            blk.add_coeff(c, 1.0);
        }
        out
    }

    fn check_blocks(&self, x: &BlockSym) -> Result<(), ModelError> {
        if x.0.len() != self.blocks.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} blocks given, problem has {}",
                x.0.len(),
                self.blocks.len()
            )));
        }
        for (k, (bm, blk)) in x.0.iter().zip(&self.blocks).enumerate() {
            let ok = match (bm, blk) {
                (BlockMat::Dense(m), Block::Sdp(n)) => m.nrows() == *n && m.ncols() == *n,
                (BlockMat::Diag(d), Block::Diag(n)) => d.len() == *n,
                _ => false,
            };
            if !ok {
                return Err(ModelError::DimensionMismatch(format!(
                    "block {} does not match order {}",
                    k + 1,
                    blk.signed_order()
                )));
            }
        }
        Ok(())
    }

    /// `A X = (<A_1, X>, ..., <A_m, X>)`.
    pub fn primal_map(&self, x: &BlockSym) -> Result<DVector<f64>, ModelError> {
        self.check_blocks(x)?;
        Ok(DVector::from_iterator(
            self.m(),
            self.a
                .iter()
                .map(|row| row.iter().zip(&x.0).map(|(a, xb)| xb.inner_coeff(a)).sum::<f64>()),
        ))
    }

    /// `A* y = sum_i y_i A_i`.
    pub fn adjoint_map(&self, y: &DVector<f64>) -> Result<BlockSym, ModelError> {
        if y.len() != self.m() {
            return Err(ModelError::DimensionMismatch(format!(
                "y has {} entries, expected {}",
                y.len(),
                self.m()
            )));
        }
        let mut out = BlockSym::zeros(&self.blocks);
        for (row, &yi) in self.a.iter().zip(y.iter()) {
            if yi == 0.0 {
                continue;
            }
            for (blk, a) in out.0.iter_mut().zip(row) {
                blk.add_coeff(a, yi);
            }
        }
        Ok(out)
    }

    /// `C tau - A* y`.
    pub fn dual_slack(&self, y: &DVector<f64>, tau: f64) -> BlockSym {
        let mut s = self.adjoint_map(y).expect("y length checked by caller");
        s.scale_mut(-1.0);
        for (blk, c) in s.0.iter_mut().zip(&self.c) {
            blk.add_coeff(c, tau);
        }
        s
    }

    /// Appends a diagonal block of order `2m` that enforces `l <= y <= u` in
    /// the dual.
    pub fn with_bound_block(&self, bounds: &DualBounds) -> SdpProblem {
        let m = self.m();
        let mut out = self.clone();
        let nb = 2 * m;
        out.blocks.push(Block::Diag(nb));
        let mut c_entries = Vec::with_capacity(nb);
        for i in 0..m {
            c_entries.push((i, i, bounds.upper[i]));
            c_entries.push((m + i, m + i, -bounds.lower[i]));
        }
        out.c.push(CoeffMatrix::from_triplets(nb, &c_entries));
        for (i, row) in out.a.iter_mut().enumerate() {
            row.push(CoeffMatrix::from_triplets(nb, &[(i, i, 1.0), (m + i, m + i, -1.0)]));
        }
        out.dual_bounds = None;
        out
    }
}
