// Smallest eigenvalue of the identity as an SDP: minimize tr(X) subject to
// tr(X) = 1, X psd. Every feasible X is optimal with value 1.

use std::error::Error;

use sdsolve::model::{Block, CoeffMatrix, SdpProblem};
use sdsolve::solver::{solve, Params, Status};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for n in [1, 5, 50] {
        let problem = SdpProblem::new(
            vec![Block::Sdp(n)],
            vec![CoeffMatrix::identity(n)],
            vec![vec![CoeffMatrix::identity(n)]],
            vec![1.0],
        )?;
        let result = solve(&problem, &Params::default());
        println!(
            "n = {n:>2}: {} b^T y = {:.8} <C, X> = {:.8} ({} iterations)",
            result.status,
            result.dual_objective,
            result.primal_objective,
            result.iterations()
        );
        // The stop rule bounds the gap relative to the objective magnitudes.
        let tol = 5e-6 * (1.0 + result.primal_objective.abs() + result.dual_objective.abs());
        if result.status != Status::Optimal || (result.dual_objective - 1.0).abs() > tol {
            return Err(format!("n = {n}: unexpected result {:?}", result.status).into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
