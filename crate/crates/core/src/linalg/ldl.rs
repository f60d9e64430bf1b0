//! Symmetric indefinite factorization `P^T A P = L D L^T` with Bunch-Kaufman
//! pivoting (1x1 and 2x2 diagonal blocks).

use nalgebra::{DMatrix, DVector};

use crate::error::LinalgError;

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8

#[derive(Debug, Clone)]
pub struct LdlFactor {
    /// Unit lower factor stored below the diagonal, pivots on/next to it.
    work: DMatrix<f64>,
    /// `perm[i]` is the original index placed at position `i`.
    perm: Vec<usize>,
    /// Size of the pivot block starting at each position (0 for the second
    /// row of a 2x2 block).
    pivots: Vec<u8>,
}

pub fn ldl(a: &DMatrix<f64>) -> Result<LdlFactor, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!("{}x{}", n, a.ncols())));
    }
    let mut w = a.clone();
    // Only the lower triangle is trusted; mirror it.
    for j in 0..n {
        for i in 0..j {
            w[(i, j)] = w[(j, i)];
        }
    }
    let scale = w.amax();
    let tol = super::cholesky::PIVOT_REL_TOL * scale.max(f64::MIN_POSITIVE);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pivots = vec![0u8; n];

    let swap = |w: &mut DMatrix<f64>, p: &mut Vec<usize>, a: usize, b: usize| {
        if a != b {
            w.swap_rows(a, b);
            w.swap_columns(a, b);
            p.swap(a, b);
        }
    };

    let mut k = 0;
    while k < n {
        let absakk = w[(k, k)].abs();
        let (imax, colmax) = (k + 1..n)
            .map(|i| (i, w[(i, k)].abs()))
            .fold((k, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if absakk.max(colmax) <= tol {
            return Err(LinalgError::Singular(k + 1));
        }
        let (kp, kstep) = if absakk >= BK_ALPHA * colmax {
            (k, 1)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| w[(imax, j)].abs())
                .fold(0.0, f64::max);
            if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                (k, 1)
            } else if w[(imax, imax)].abs() >= BK_ALPHA * rowmax {
                (imax, 1)
            } else {
                (imax, 2)
            }
        };
        let kk = k + kstep - 1;
        swap(&mut w, &mut perm, kk, kp);

        if kstep == 1 {
            let d = w[(k, k)];
            if d.abs() <= tol {
                return Err(LinalgError::Singular(k + 1));
            }
            for i in k + 1..n {
                w[(i, k)] /= d;
            }
            for j in k + 1..n {
                let ljd = w[(j, k)] * d;
                if ljd == 0.0 {
                    continue;
                }
                for i in j..n {
                    let v = w[(i, j)] - w[(i, k)] * ljd;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            pivots[k] = 1;
        } else {
            let d11 = w[(k, k)];
            let d21 = w[(k + 1, k)];
            let d22 = w[(k + 1, k + 1)];
            let det = d11 * d22 - d21 * d21;
            if det.abs() <= tol * tol {
                return Err(LinalgError::Singular(k + 1));
            }
            // Rows of the panel times D^{-1}.
            let mut l = Vec::with_capacity(n - k - 2);
            for i in k + 2..n {
                let a1 = w[(i, k)];
                let a2 = w[(i, k + 1)];
                l.push(((a1 * d22 - a2 * d21) / det, (a2 * d11 - a1 * d21) / det));
            }
            for (jj, j) in (k + 2..n).enumerate() {
                let (bj1, bj2) = (w[(j, k)], w[(j, k + 1)]);
                for (ii, i) in (j..n).enumerate() {
                    let (li1, li2) = l[jj + ii];
                    let v = w[(i, j)] - (li1 * bj1 + li2 * bj2);
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            for (ii, i) in (k + 2..n).enumerate() {
                w[(i, k)] = l[ii].0;
                w[(i, k + 1)] = l[ii].1;
            }
            pivots[k] = 2;
            pivots[k + 1] = 0;
        }
        k += kstep;
    }
    Ok(LdlFactor { work: w, perm, pivots })
}

impl LdlFactor {
    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let w = &self.work;
        let mut z = DVector::from_fn(n, |i, _| rhs[self.perm[i]]);
        // L z' = z
        let mut k = 0;
        while k < n {
            let step = self.pivots[k] as usize;
            for c in k..k + step {
                let zc = z[c];
                if zc != 0.0 {
                    for i in k + step..n {
                        z[i] -= w[(i, c)] * zc;
                    }
                }
            }
            k += step;
        }
        // D
        let mut k = 0;
        while k < n {
            if self.pivots[k] == 1 {
                z[k] /= w[(k, k)];
                k += 1;
            } else {
                let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = d11 * d22 - d21 * d21;
                let (z1, z2) = (z[k], z[k + 1]);
                z[k] = (d22 * z1 - d21 * z2) / det;
                z[k + 1] = (d11 * z2 - d21 * z1) / det;
                k += 2;
            }
        }
        // L^T
        let mut k = n;
        while k > 0 {
            let start = if k >= 2 && self.pivots[k - 2] == 2 {
                k - 2
            } else {
                k - 1
            };
            let step = k - start;
            for c in start..start + step {
                let mut s = z[c];
                for i in start + step..n {
                    s -= w[(i, c)] * z[i];
                }
                z[c] = s;
            }
            k = start;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }

    /// Inertia-independent count of negative eigenvalues of `D`.
    pub fn negative_pivots(&self) -> usize {
        let w = &self.work;
        let mut k = 0;
        let mut neg = 0;
        while k < self.dim() {
            if self.pivots[k] == 1 {
                neg += usize::from(w[(k, k)] < 0.0);
                k += 1;
            } else {
                let (a, b, c) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a * c - b * b;
                if det < 0.0 {
                    neg += 1;
                } else if a + c < 0.0 {
                    neg += 2;
                }
                k += 2;
            }
        }
        neg
    }
}

/// Solves `M x = rhs` for symmetric, possibly indefinite `M`.
pub fn ldl_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
    Ok(ldl(m)?.solve(rhs))
}
