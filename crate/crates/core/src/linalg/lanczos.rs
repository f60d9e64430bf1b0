//! Extreme eigenvalues by Lanczos with full reorthogonalization, and the
//! step-length ratio test built on it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cholesky::{cholesky, CholeskyFactor};

pub const LANCZOS_MAX_ITERS: usize = 64;
pub const LANCZOS_TOL: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 40;

/// Fraction of the maximum step used for certification.
pub const CERTIFY_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy)]
pub struct LanczosResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest and largest eigenvalue of the symmetric operator `apply` on R^n.
pub fn lanczos_extremes<F>(n: usize, apply: F, max_iters: usize, tol: f64) -> LanczosResult
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return LanczosResult {
            lambda_min: 0.0,
            lambda_max: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let kmax = max_iters.min(n).max(1);
    // Fixed seed keeps the whole solver deterministic.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
    v /= v.norm();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(kmax);
    let mut alphas: Vec<f64> = Vec::with_capacity(kmax);
    let mut betas: Vec<f64> = Vec::with_capacity(kmax);
    let mut result = LanczosResult {
        lambda_min: 0.0,
        lambda_max: 0.0,
        iterations: 0,
        converged: false,
    };

    for k in 0..kmax {
        let mut w = apply(&v);
        let alpha = w.dot(&v);
        basis.push(v.clone());
        alphas.push(alpha);
        // Full reorthogonalization, twice for safety against cancellation.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let beta = w.norm();

        let t = tridiagonal(&alphas, &betas);
        let eig = t.symmetric_eigen();
        let (imin, lmin) = argext(&eig.eigenvalues, |a, b| a < b);
        let (imax, lmax) = argext(&eig.eigenvalues, |a, b| a > b);
        let last = k;
        let rmin = beta * eig.eigenvectors[(last, imin)].abs();
        let rmax = beta * eig.eigenvectors[(last, imax)].abs();
        result = LanczosResult {
            lambda_min: lmin,
            lambda_max: lmax,
            iterations: k + 1,
            converged: false,
        };
        let scale = lmin.abs().max(lmax.abs()).max(f64::MIN_POSITIVE);
        let invariant = beta <= 1e-14 * scale.max(alpha.abs());
        if invariant || (rmin <= tol * scale && rmax <= tol * scale) || k + 1 == n {
            result.converged = true;
            break;
        }
        betas.push(beta);
        v = w / beta;
    }
    result
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t
}

fn argext(v: &DVector<f64>, better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if better(x, best.1) {
            best = (i, x);
        }
    }
    best
}

/// Smallest eigenvalue of a dense symmetric matrix; dense eigensolve up to
/// `dense_limit`, Lanczos above it.
pub fn lambda_min_sym(a: &DMatrix<f64>, dense_limit: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= dense_limit {
        a.clone().symmetric_eigen().eigenvalues.min()
    } else {
        lanczos_extremes(n, |v| a * v, 300, 1e-12).lambda_min
    }
}

/// Largest `alpha >= 0` with `S + alpha dS` positive semidefinite, where
/// `factor` is the Cholesky factor of `s`. Returns `f64::INFINITY` when `dS`
/// is itself positive semidefinite.
///
/// The estimate `-1 / lambda_min(L^{-1} dS L^{-T})` comes from Lanczos and is
/// certified by a trial factorization of `S + 0.95 alpha dS`; if that fails
/// the certified step is located by bisection.
pub fn max_step_lanczos(s: &DMatrix<f64>, factor: &CholeskyFactor, ds: &DMatrix<f64>, tol: f64) -> f64 {
    let n = s.nrows();
    if n == 0 || ds.amax() == 0.0 {
        return f64::INFINITY;
    }
    let l = factor.l();
    let op = |v: &DVector<f64>| {
        let mut t = v.clone();
        l.tr_solve_lower_triangular_mut(&mut t);
        let mut u = ds * t;
        l.solve_lower_triangular_mut(&mut u);
        u
    };
    let res = lanczos_extremes(n, op, LANCZOS_MAX_ITERS, tol);
    let lmin = res.lambda_min;
    // Relative to the spread of the pencil, a nonnegative Ritz minimum means a
    // PSD direction.
    if lmin >= -1e-14 * res.lambda_max.abs() || lmin >= 0.0 {
        return f64::INFINITY;
    }
    let alpha = -1.0 / lmin;
    if cholesky(&(s + ds * (CERTIFY_FRACTION * alpha))).is_ok() {
        return alpha;
    }
    let mut lo = 0.0;
    let mut hi = CERTIFY_FRACTION * alpha;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if cholesky(&(s + ds * mid)).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo / CERTIFY_FRACTION
}

/// Ratio test for a diagonal block: `min_{dS_k < 0} -S_k / dS_k`.
pub fn max_step_diag(s: &DVector<f64>, ds: &DVector<f64>) -> f64 {
    s.iter()
        .zip(ds.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&sv, &d)| -sv / d)
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_oracle(s: &DMatrix<f64>, ds: &DMatrix<f64>) -> f64 {
        let f = cholesky(s).unwrap();
        let mut linv = DMatrix::identity(s.nrows(), s.nrows());
        f.l().solve_lower_triangular_mut(&mut linv);
        let p = &linv * ds * linv.transpose();
        let p = (&p + p.transpose()) * 0.5;
        let lmin = p.symmetric_eigen().eigenvalues.min();
        if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -1.0 / lmin
        }
    }

    #[test]
    fn identity_pencils() {
        let s = DMatrix::identity(4, 4);
        let f = cholesky(&s).unwrap();
        let a = max_step_lanczos(&s, &f, &(-DMatrix::identity(4, 4)), LANCZOS_TOL);
        assert!((a - 1.0).abs() < 1e-12);
        let a = max_step_lanczos(&s, &f, &DMatrix::identity(4, 4), LANCZOS_TOL);
        assert!(a.is_infinite());
        let a = max_step_lanczos(&s, &f, &(DMatrix::identity(4, 4) * -2.0), LANCZOS_TOL);
        assert!((a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_pair_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let s = &b * b.transpose() + DMatrix::identity(10, 10);
        let d = DMatrix::from_fn(10, 10, |_, _| rng.gen_range(-1.0..1.0));
        let ds = (&d + d.transpose()) * 0.5;
        let f = cholesky(&s).unwrap();
        let got = max_step_lanczos(&s, &f, &ds, LANCZOS_TOL);
        let want = dense_oracle(&s, &ds);
        assert!((got - want).abs() <= 1e-8 * want);
    }

    #[test]
    fn diag_ratio() {
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let ds = DVector::from_vec(vec![-2.0, 1.0, -1.0]);
        assert_eq!(max_step_diag(&s, &ds), 0.5);
        assert!(max_step_diag(&s, &DVector::from_vec(vec![0.0, 1.0, 0.0])).is_infinite());
    }

    #[test]
    fn lambda_min_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = DMatrix::from_fn(30, 30, |_, _| rng.gen_range(-1.0..1.0));
        let a = (&d + d.transpose()) * 0.5;
        let dense = lambda_min_sym(&a, 400);
        let lz = lambda_min_sym(&a, 0);
        assert!((dense - lz).abs() < 1e-9);
    }
}
