use nalgebra::{DMatrix, DVector};

use crate::error::LinalgError;

/// Scale-relative pivot guard: each pivot must exceed this times its own
/// original diagonal entry, which keeps the test invariant under diagonal
/// scaling.
pub const PIVOT_REL_TOL: f64 = 1e-13;

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

/// Factor of a symmetric matrix, definite or not.
#[derive(Debug, Clone)]
pub enum FactorHandle {
    Cholesky(CholeskyFactor),
    Ldl(super::ldl::LdlFactor),
}

impl FactorHandle {
    pub fn dim(&self) -> usize {
        match self {
            FactorHandle::Cholesky(c) => c.dim(),
            FactorHandle::Ldl(l) => l.dim(),
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match self {
            FactorHandle::Cholesky(c) => c.solve(rhs),
            FactorHandle::Ldl(l) => l.solve(rhs),
        }
    }
}

/// Factors a symmetric matrix (only the lower triangle is read).
pub fn cholesky(a: &DMatrix<f64>) -> Result<CholeskyFactor, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!("{}x{}", n, a.ncols())));
    }
    let mut l = a.lower_triangle();
    for j in 0..n {
        let d = l[(j, j)];
        if !(d > PIVOT_REL_TOL * a[(j, j)]) || !(d > 0.0) || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite(j + 1));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        let inv = 1.0 / djj;
        for i in j + 1..n {
            l[(i, j)] *= inv;
        }
        // Right-looking update of the trailing lower triangle, column by column.
        let data = l.as_mut_slice();
        let (head, tail) = data.split_at_mut((j + 1) * n);
        let col_j = &head[j * n..];
        for k in j + 1..n {
            let lkj = col_j[k];
            if lkj == 0.0 {
                continue;
            }
            let off = (k - j - 1) * n;
            let dst = &mut tail[off + k..off + n];
            for (d, s) in dst.iter_mut().zip(&col_j[k..n]) {
                *d -= lkj * s;
            }
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `L y = b` in place.
    pub fn forward_mut(&self, b: &mut DVector<f64>) {
        self.l.solve_lower_triangular_mut(b);
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_mut(&self, b: &mut DVector<f64>) {
        self.l.tr_solve_lower_triangular_mut(b);
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = rhs.clone();
        self.forward_mut(&mut x);
        self.backward_mut(&mut x);
        x
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = rhs.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// Explicit inverse `A^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut linv = DMatrix::identity(n, n);
        self.l.solve_lower_triangular_mut(&mut linv);
        let mut w = linv.tr_mul(&linv);
        symmetrize(&mut w);
        w
    }

    pub fn logdet(&self) -> f64 {
        logdet(self)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.l * self.l.transpose()
    }
}

/// `log det A = 2 sum log L_ii`.
pub fn logdet(factor: &CholeskyFactor) -> f64 {
    2.0 * factor.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_factor() {
        let f = cholesky(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.l(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 5.0]);
        let f = cholesky(&a).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]);
        assert!((f.l() - expect).norm() < 1e-15);
        assert!((f.reconstruct() - a).norm() < 1e-14);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(cholesky(&a).unwrap_err(), LinalgError::NotPositiveDefinite(2));
    }

    #[test]
    fn random_reconstruction_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 5, 17, 40] {
            let a = random_spd(n, &mut rng);
            let f = cholesky(&a).unwrap();
            assert!((f.reconstruct() - &a).norm() <= 1e-10 * a.norm());
            let b = DVector::from_fn(n, |i, _| i as f64 - 1.0);
            let x = f.solve(&b);
            assert!((&a * &x - &b).norm() <= 1e-10 * b.norm().max(1.0));
            let inv = f.inverse();
            assert!((&a * inv - DMatrix::identity(n, n)).norm() < 1e-9);
        }
    }

    #[test]
    fn logdet_examples() {
        let f = cholesky(&DMatrix::identity(5, 5)).unwrap();
        assert_eq!(logdet(&f), 0.0);
        let e = std::f64::consts::E;
        let f = cholesky(&DMatrix::from_diagonal(&DVector::from_vec(vec![e, e]))).unwrap();
        assert!((logdet(&f) - 2.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_spd(8, &mut rng);
        let eig = a.clone().symmetric_eigen();
        let oracle: f64 = eig.eigenvalues.iter().map(|v| v.ln()).sum();
        assert!((logdet(&cholesky(&a).unwrap()) - oracle).abs() < 1e-10);
    }

    #[test]
    fn logdet_additive_over_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(4, &mut rng);
        let b = random_spd(3, &mut rng);
        let mut ab = DMatrix::zeros(7, 7);
        ab.view_mut((0, 0), (4, 4)).copy_from(&a);
        ab.view_mut((4, 4), (3, 3)).copy_from(&b);
        let lhs = logdet(&cholesky(&a).unwrap()) + logdet(&cholesky(&b).unwrap());
        assert!((lhs - logdet(&cholesky(&ab).unwrap())).abs() < 1e-12);
    }
}
