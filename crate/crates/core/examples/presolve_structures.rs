// Presolve: low-rank coefficients hidden in dense storage are recovered as
// eigen factors, and problem-level structure is flagged.

use std::error::Error;

use nalgebra::{DMatrix, DVector};
use sdsolve::model::{classify_coefficient, Block, CoeffMatrix, SdpProblem};
use sdsolve::presolve::{presolve, PresolveOptions};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = 6;
    let v = DVector::from_fn(n, |i, _| (i + 1) as f64);
    let dense_rank_one = classify_coefficient(&(&v * v.transpose()), 0.0)?;
    let problem = SdpProblem::new(
        vec![Block::Sdp(n)],
        vec![CoeffMatrix::identity(n)],
        vec![vec![CoeffMatrix::identity(n)], vec![dense_rank_one]],
        vec![1.0, 0.5],
    )?;
    let before = problem.a[1][0].rank();
    let out = presolve(&problem, &PresolveOptions::default());
    let after = &out.problem.a[1][0];
    println!(
        "rank-one row: stored rank {before} -> {} with factors {}",
        after.rank(),
        after.eigen_factors().is_some()
    );
    if after.eigen_factors().map(|f| f.len()) != Some(1) {
        return Err("rank-one coefficient was not recovered".into());
    }
    let err = (after.to_dense() - DMatrix::from(&v * v.transpose())).amax();
    println!("reconstruction error {err:.1e}");
    println!("trace implied by the constraints: {:?}", out.flags.implied_trace);
    if out.flags.implied_trace != Some(1.0) {
        return Err("tr X = 1 should be detected".into());
    }

    // C = 0 makes this a feasibility problem.
    let feasibility = SdpProblem::new(
        vec![Block::Sdp(2)],
        vec![CoeffMatrix::zero(2)],
        vec![vec![CoeffMatrix::from_triplets(2, &[(0, 1, 1.0)])]],
        vec![0.5],
    )?;
    let flags = presolve(&feasibility, &PresolveOptions::default()).flags;
    println!("feasibility problem: {}", flags.feasibility_problem);
    if !flags.feasibility_problem {
        return Err("C = 0 should be flagged".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
