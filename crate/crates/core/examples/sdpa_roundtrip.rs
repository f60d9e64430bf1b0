// SDPA sparse format: write a generated instance, read it back, and show the
// line-numbered diagnostics for malformed input.

use std::error::Error;

use sdsolve::generate::graph_partition;
use sdsolve::sdpa_io::{parse_sdpa, write_sdpa};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let problem = graph_partition(4, 2.0, Some(0.0), 0.5, 1)?;
    let text = write_sdpa(&problem);
    println!("{} lines, header:", text.lines().count());
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    let back = parse_sdpa(&text)?;
    if write_sdpa(&back) != text {
        return Err("round trip changed the file".into());
    }
    println!("round trip is byte-identical");

    for bad in [
        "1\n1\n2\n1.0\n0 1 1 x 1.0\n",
        "1\n1\n2\n1.0\n0 1 3 3 1.0\n",
        "2\n1\n2\n1.0\n",
    ] {
        match parse_sdpa(bad) {
            Ok(_) => return Err("malformed input was accepted".into()),
            Err(e) => println!("rejected: {e}"),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
