//! Dense symmetric kernels and their block-diagonal wrappers.

pub mod cholesky;
pub mod lanczos;
pub mod ldl;
pub mod pcg;

pub use cholesky::{cholesky, logdet, CholeskyFactor, FactorHandle};
pub use lanczos::{lambda_min_sym, lanczos_extremes, max_step_diag, max_step_lanczos, LANCZOS_TOL};
pub use ldl::{ldl, ldl_solve, LdlFactor};
pub use pcg::{pcg_solve, PcgOutcome, PcgState, PreconditionerKind};

use nalgebra::DVector;

use crate::error::LinalgError;
use crate::model::{BlockMat, BlockSym};

/// Orders up to which the minimum eigenvalue is computed densely.
pub const DENSE_EIG_LIMIT: usize = 400;

/// Factor of one positive definite block.
#[derive(Debug, Clone)]
pub enum BlockFactor {
    Dense(CholeskyFactor),
    Diag(DVector<f64>),
}

impl BlockFactor {
    pub fn logdet(&self) -> f64 {
        match self {
            BlockFactor::Dense(f) => f.logdet(),
            BlockFactor::Diag(d) => d.iter().map(|v| v.ln()).sum(),
        }
    }

    pub fn inverse(&self) -> BlockMat {
        match self {
            BlockFactor::Dense(f) => BlockMat::Dense(f.inverse()),
            BlockFactor::Diag(d) => BlockMat::Diag(d.map(|v| 1.0 / v)),
        }
    }
}

/// Factors every block; a diagonal block fails on its first nonpositive entry.
pub fn factor_blocks(s: &BlockSym) -> Result<Vec<BlockFactor>, LinalgError> {
    s.0.iter()
        .map(|b| match b {
            BlockMat::Dense(m) => cholesky(m).map(BlockFactor::Dense),
            BlockMat::Diag(d) => match d.iter().position(|&v| !(v > 0.0)) {
                Some(k) => Err(LinalgError::NotPositiveDefinite(k + 1)),
                None => Ok(BlockFactor::Diag(d.clone())),
            },
        })
        .collect()
}

pub fn is_positive_definite(s: &BlockSym) -> bool {
    factor_blocks(s).is_ok()
}

pub fn block_logdet(factors: &[BlockFactor]) -> f64 {
    factors.iter().map(BlockFactor::logdet).sum()
}

pub fn block_inverse(factors: &[BlockFactor]) -> BlockSym {
    BlockSym(factors.iter().map(BlockFactor::inverse).collect())
}

/// Largest `alpha` with `S + alpha dS` PSD across all blocks.
pub fn max_step_blocks(s: &BlockSym, factors: &[BlockFactor], ds: &BlockSym) -> f64 {
    let mut alpha = f64::INFINITY;
    for ((sb, f), db) in s.0.iter().zip(factors).zip(&ds.0) {
        let a = match (sb, f, db) {
            (BlockMat::Dense(sm), BlockFactor::Dense(fac), BlockMat::Dense(dm)) => {
                max_step_lanczos(sm, fac, dm, LANCZOS_TOL)
            }
            (BlockMat::Diag(sv), _, BlockMat::Diag(dv)) => max_step_diag(sv, dv),
            _ => panic!("block kind mismatch"),
        };
        alpha = alpha.min(a);
    }
    alpha
}

/// Smallest eigenvalue over all blocks.
pub fn block_lambda_min(x: &BlockSym) -> f64 {
    x.0.iter()
        .map(|b| match b {
            BlockMat::Dense(m) => lambda_min_sym(m, DENSE_EIG_LIMIT),
            BlockMat::Diag(d) => d.min(),
        })
        .fold(f64::INFINITY, f64::min)
}
