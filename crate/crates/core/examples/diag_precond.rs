// Optimal diagonal preconditioning: maximize tau with D <= B and tau B <= D.
// The optimal 1 / tau is the smallest condition number of D^{-1/2} B D^{-1/2}.

use std::error::Error;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdsolve::generate::{diag_precond, diag_precond_from, random_spd};
use sdsolve::solver::{solve, Params, Status};

fn condition(b: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    let s = d.map(|v| 1.0 / v.sqrt());
    let scaled = DMatrix::from_diagonal(&s) * b * DMatrix::from_diagonal(&s);
    let e = SymmetricEigen::new(scaled).eigenvalues;
    e.max() / e.min()
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // A diagonal B is its own best preconditioner.
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 0.25, 9.0]));
    let result = solve(&diag_precond_from(&b)?, &Params::default());
    let tau = result.dual_objective;
    println!("diagonal B: {} tau = {tau:.8}", result.status);
    let tol = 5e-6 * (1.0 + result.primal_objective.abs() + tau.abs());
    if result.status != Status::Optimal || (tau - 1.0).abs() > tol {
        return Err("diagonal B should give tau = 1".into());
    }

    let (n, density, seed) = (30, 0.2, 5);
    let result = solve(&diag_precond(n, density, seed)?, &Params::default());
    if result.status != Status::Optimal {
        return Err(format!("random B did not solve: {}", result.status).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = random_spd(n, density, &mut rng);
    let d = DVector::from_column_slice(&result.y[..n]);
    let jacobi = b.diagonal();
    println!(
        "random B: kappa(B) = {:.3}, Jacobi {:.3}, optimal {:.3} (1 / tau = {:.3})",
        condition(&b, &DVector::from_element(n, 1.0)),
        condition(&b, &jacobi),
        condition(&b, &d),
        1.0 / result.dual_objective
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
