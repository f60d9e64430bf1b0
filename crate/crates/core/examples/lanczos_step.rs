// Maximum step to the psd boundary: Lanczos on L^{-1} dS L^{-T} against
// the exact generalized eigenvalue from a dense decomposition.

use std::error::Error;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdsolve::linalg::{cholesky, max_step_lanczos, LANCZOS_TOL};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [5, 40, 120] {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let s = &g * g.transpose() + DMatrix::identity(n, n) * 0.5;
        let h = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let ds = (&h + h.transpose()) * 0.5;

        let factor = cholesky(&s)?;
        let alpha = max_step_lanczos(&s, &factor, &ds, LANCZOS_TOL);

        let linv = factor.l().clone().try_inverse().ok_or("singular factor")?;
        let pencil = &linv * &ds * linv.transpose();
        let lmin = SymmetricEigen::new((&pencil + pencil.transpose()) * 0.5)
            .eigenvalues
            .min();
        let exact = if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY };
        let rel = (alpha - exact).abs() / exact;
        println!("n = {n:>3}: lanczos {alpha:.10} exact {exact:.10} relative error {rel:.1e}");
        if rel > 1e-6 {
            return Err(format!("n = {n}: step off by {rel:e}").into());
        }
        cholesky(&(&s + &ds * (0.95 * alpha)))?;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
