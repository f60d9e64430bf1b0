// Infeasibility certificates from the embedding.
//
// Primal infeasible: <-I, X> = 1 has no psd solution, and y -> +inf keeps
// S = I + y I psd while b^T y grows.
// Dual infeasible: with C = diag(0, -1), S = C - y E_11 is never psd, and
// X = t E_22 is feasible for <E_11, X> = 0 with <C, X> -> -inf.

use std::error::Error;

use sdsolve::commands::exit_code;
use sdsolve::model::{Block, CoeffMatrix, SdpProblem};
use sdsolve::solver::{solve, Params, Status};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let primal_infeasible = SdpProblem::new(
        vec![Block::Sdp(2)],
        vec![CoeffMatrix::identity(2)],
        vec![vec![CoeffMatrix::identity(2).scaled(-1.0)]],
        vec![1.0],
    )?;
    let dual_infeasible = SdpProblem::new(
        vec![Block::Sdp(2)],
        vec![CoeffMatrix::from_triplets(2, &[(1, 1, -1.0)])],
        vec![vec![CoeffMatrix::from_triplets(2, &[(0, 0, 1.0)])]],
        vec![0.0],
    )?;
    for (name, problem, expect) in [
        (
            "primal infeasible",
            primal_infeasible,
            Status::PrimalInfeasibleDualUnbounded,
        ),
        (
            "dual infeasible",
            dual_infeasible,
            Status::PrimalUnboundedDualInfeasible,
        ),
    ] {
        let r = solve(&problem, &Params::default());
        println!(
            "{name}: {} (exit code {}), errors {:?}",
            r.status,
            exit_code(r.status),
            r.dimacs
        );
        if r.status != expect {
            return Err(format!("{name}: expected {expect}, got {}", r.status).into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
