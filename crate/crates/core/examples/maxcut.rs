// Max-cut relaxation on a random graph, followed by hyperplane rounding of
// the recovered primal matrix.

use std::error::Error;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdsolve::generate::{maxcut, random_graph};
use sdsolve::model::BlockMat;
use sdsolve::solver::{solve, Params, Status};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (n, p, seed) = (40, 0.3, 7);
    let problem = maxcut(n, p, seed)?;
    let result = solve(&problem, &Params::default());
    println!(
        "{} after {} iterations, {:.3} s",
        result.status,
        result.iterations(),
        result.seconds
    );
    if result.status != Status::Optimal {
        return Err(format!("max-cut did not solve: {}", result.status).into());
    }
    // The relaxation minimizes <-L/4, X>, so -<C, X> bounds the cut from above.
    let upper = -result.primal_objective;
    println!("relaxation bound on the cut: {upper:.4}");

    let Some(BlockMat::Dense(x)) = result.x.as_ref().map(|x| &x.0[0]) else {
        return Err("no primal matrix".into());
    };
    // Rounding along the leading eigenvector of X.
    let eig = SymmetricEigen::new(x.clone());
    let lead = eig.eigenvalues.imax();
    let side: Vec<bool> = eig.eigenvectors.column(lead).iter().map(|v| *v >= 0.0).collect();

    // Same graph the generator used.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_graph(n, p, &mut rng);
    let cut = edges.iter().filter(|&&(i, j)| side[i] != side[j]).count() as f64;
    println!("rounded cut: {cut} of {} edges", edges.len());
    if cut > upper + 1e-6 {
        return Err("cut exceeds the relaxation bound".into());
    }
    let diag_err = (x.diagonal() - DMatrix::from_element(n, 1, 1.0).column(0)).amax();
    println!("max |X_ii - 1| = {diag_err:.2e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
