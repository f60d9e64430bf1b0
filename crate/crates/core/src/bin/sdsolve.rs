use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdsolve::commands::{
    cmd_bench, cmd_gen, cmd_solve, exit_code, params_from_overrides, BenchOptions, CliError, GenSpec, Outputs,
    EXIT_USAGE,
};
use sdsolve::generate::Family;
use sdsolve::solver::Params;

#[derive(Parser)]
#[command(name = "sdsolve", version, about = "Dual-scaling SDP solver")]
struct Cli {
    /// Worker threads for Schur assembly (0 = one per core).
    #[arg(long, global = true, env = "SDSOLVE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolveFlags {
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Write JSON to PATH ("-" for stdout).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the CSV report to PATH ("-" for stdout).
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
}

impl SolveFlags {
    fn params(&self) -> Result<Params, CliError> {
        let mut p = params_from_overrides(Params::default(), &self.params)?;
        if let Some(t) = self.time_limit {
            p.time_limit_seconds = t;
        }
        Ok(p)
    }

    fn outputs(&self) -> Outputs {
        Outputs {
            json: self.json.clone(),
            csv: self.csv.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one SDPA sparse file.
    Solve {
        /// SDPA sparse (.dat-s) file.
        file: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Generate a seeded instance in SDPA sparse format.
    Gen {
        /// maxcut, gpp or diagprecond.
        family: Family,
        /// Graph or matrix order.
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge probability, or matrix density for diagprecond.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Number of parts (gpp).
        #[arg(long, default_value_t = 2.0)]
        k: f64,
        /// Balance target (gpp); defaults to n/2 + n^2/2.
        #[arg(long)]
        beta: Option<f64>,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve every .dat-s file in a directory and summarize.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        /// Seconds charged to an unsolved instance.
        #[arg(long, default_value_t = 3600.0)]
        fail_time: f64,
        /// Shift of the geometric mean, in seconds.
        #[arg(long, default_value_t = 10.0)]
        shift: f64,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Solve { file, flags } => {
            let r = cmd_solve(&file, &flags.params()?, &flags.outputs(), &mut stdout)?;
            Ok(exit_code(r.status))
        }
        Command::Gen {
            family,
            n,
            seed,
            density,
            k,
            beta,
            output,
        } => {
            let text = cmd_gen(&GenSpec {
                family,
                n,
                seed,
                density,
                k,
                beta,
            })?;
            match output {
                Some(path) => std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?,
                None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                    path: "-".into(),
                    source,
                })?,
            }
            Ok(0)
        }
        Command::Bench {
            dir,
            flags,
            fail_time,
            shift,
        } => {
            let opts = BenchOptions { fail_time, shift };
            let summary = cmd_bench(&dir, &flags.params()?, opts, &flags.outputs(), &mut stdout)?;
            Ok(if summary.solved_count == summary.total { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
