// Schur complement assembly: the flop model picks a technique per row, and
// every technique yields the same matrix M_ij = <A_i, W A_j W>.

use std::error::Error;

use sdsolve::generate::{diag_precond, graph_partition, maxcut};
use sdsolve::kkt::{assemble_schur_matrix, inverse_blocks, KktPlan, Technique, DEFAULT_KAPPA_MEM};
use sdsolve::linalg::factor_blocks;
use sdsolve::model::{BlockSym, SdpProblem};

fn interior_slack(problem: &SdpProblem) -> BlockSym {
    // y = 0 with a large multiple of the identity keeps S positive definite.
    let shift = 1.0 + 2.0 * problem.c_max_abs() * problem.total_order() as f64;
    let mut s = problem.c_matrix();
    s.axpy(1.0, &BlockSym::identity(&problem.blocks, shift));
    s
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    for (name, problem) in [
        ("maxcut", maxcut(30, 0.3, 1)?),
        ("gpp", graph_partition(8, 2.0, None, 0.5, 1)?),
        ("diagprecond", diag_precond(20, 0.3, 1)?),
    ] {
        let s = interior_slack(&problem);
        let winv = inverse_blocks(&factor_blocks(&s)?);
        let plan = KktPlan::new(&problem, DEFAULT_KAPPA_MEM);
        let mut counts = [0usize; 5];
        for p in plan.blocks.iter().flatten() {
            for t in &p.technique {
                counts[*t as usize] += 1;
            }
        }
        let chosen = assemble_schur_matrix(&problem, &winv, &plan);
        let mut worst: f64 = 0.0;
        for t in Technique::ALL {
            let mut forced = plan.clone();
            forced.force(&problem, t);
            let m = assemble_schur_matrix(&problem, &winv, &forced);
            worst = worst.max((&m - &chosen).amax() / chosen.amax());
        }
        println!(
            "{name:<12} m = {:>3}  rows per technique M1..M5 {counts:?}  max relative spread {worst:.1e}",
            problem.m()
        );
        if worst > 1e-10 {
            return Err(format!("{name}: techniques disagree by {worst:e}").into());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
