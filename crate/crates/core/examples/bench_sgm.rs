// Benchmark a directory of generated instances and summarize with the
// shifted geometric mean, charging unsolved instances the failure time.

use std::error::Error;
use std::fs;
use std::io;

use sdsolve::bench::shifted_geometric_mean;
use sdsolve::commands::{cmd_bench, cmd_gen, BenchOptions, GenSpec, Outputs};
use sdsolve::generate::Family;
use sdsolve::solver::Params;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    for (name, family, n) in [
        ("mc20", Family::MaxCut, 20),
        ("gpp6", Family::GraphPartition, 6),
        ("dp15", Family::DiagPrecond, 15),
    ] {
        let spec = GenSpec::new(family, n, 1);
        fs::write(dir.path().join(format!("{name}.dat-s")), cmd_gen(&spec)?)?;
    }
    fs::write(dir.path().join("broken.dat-s"), "not an sdpa file\n")?;

    let summary = cmd_bench(
        dir.path(),
        &Params::default(),
        BenchOptions::default(),
        &Outputs::default(),
        &mut io::stdout(),
    )?;
    let times: Vec<f64> = summary.rows.iter().map(|r| r.time_seconds).collect();
    let check = shifted_geometric_mean(&times, summary.shift);
    println!("recomputed sgm {check:.3}");
    if summary.solved_count != 3 || summary.total != 4 {
        return Err(format!("expected 3 of 4 solved, got {}/{}", summary.solved_count, summary.total).into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
