// Graph partitioning relaxation with a psd block for k X - 11^T and a
// diagonal slack block for the entrywise nonnegativity of X.

use std::error::Error;

use sdsolve::generate::{default_beta, graph_partition};
use sdsolve::solver::{solve, Params, Status};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = 10;
    let problem = graph_partition(n, 2.0, None, 0.4, 3)?;
    println!(
        "n = {n}: {} constraints, block orders {:?}, beta = {}",
        problem.m(),
        problem.blocks.iter().map(|b| b.order()).collect::<Vec<_>>(),
        default_beta(n)
    );
    let result = solve(&problem, &Params::default());
    println!(
        "{}: <C, X> = {:.6}, b^T y = {:.6}, errors {:?}",
        result.status,
        result.primal_objective,
        result.dual_objective,
        result.dimacs.map(|e| format!("{e:.1e}"))
    );
    if result.status != Status::Optimal {
        return Err(format!("gpp did not solve: {}", result.status).into());
    }

    // beta = 0 contradicts diag(X) = 1 with X >= 0, so this one is infeasible.
    let infeasible = graph_partition(4, 2.0, Some(0.0), 0.5, 1)?;
    let result = solve(&infeasible, &Params::default());
    println!("beta = 0: {}", result.status);
    if result.status != Status::PrimalInfeasibleDualUnbounded {
        return Err(format!("beta = 0 should be primal infeasible, got {}", result.status).into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
