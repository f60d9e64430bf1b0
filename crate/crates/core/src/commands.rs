//! The `solve`, `gen` and `bench` commands behind the `sdsolve` binary.
//!
//! Each command writes its human-readable report to the supplied writer and
//! returns structured data; the binary only parses flags and maps outcomes to
//! exit codes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bench::{report_row, BenchSummary, DEFAULT_FAIL_TIME, DEFAULT_SHIFT};
use crate::error::{GenerateError, ParseError};
use crate::generate::{self, Family};
use crate::sdpa_io::{fmt_sci, parse_sdpa, write_report, write_sdpa, ReportRow};
use crate::solver::{solve, ParamError, Params, SolveResult, Status};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
/// Malformed input or flags.
pub const EXIT_USAGE: i32 = 64;

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Optimal => EXIT_OPTIMAL,
        s if s.is_infeasibility_certificate() => EXIT_INFEASIBLE,
        _ => EXIT_FAILED,
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// The named input cannot be read: a usage error.
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: io::Error },
    /// Writing output failed.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("--param expects KEY=VALUE, got '{0}'")]
    ParamSyntax(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Json(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Applies `KEY=VALUE` overrides on top of `base`.
pub fn params_from_overrides<S: AsRef<str>>(base: Params, overrides: &[S]) -> Result<Params, CliError> {
    let mut p = base;
    for kv in overrides {
        let kv = kv.as_ref();
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::ParamSyntax(kv.to_string()))?;
        p.set(k.trim(), v.trim())?;
    }
    Ok(p)
}

/// Where structured output goes; `-` means standard output.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn emit(target: &Path, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    if target == Path::new("-") {
        out.write_all(text.as_bytes()).map_err(io_err(target))
    } else {
        fs::write(target, text).map_err(io_err(target))
    }
}

/// Instance name: the file stem.
pub fn instance_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Serialize)]
struct SolveReport<'a> {
    instance: &'a str,
    #[serde(flatten)]
    result: &'a SolveResult,
}

pub fn load_problem(path: &Path) -> Result<crate::model::SdpProblem, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sdpa(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn write_summary(name: &str, r: &SolveResult, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "instance     {name}")?;
    writeln!(out, "status       {}", r.status)?;
    writeln!(out, "b^T y        {:.10e}", r.dual_objective)?;
    writeln!(out, "<C, X>       {:.10e}", r.primal_objective)?;
    let errs: Vec<String> = r.dimacs.iter().map(|&e| fmt_sci(e, 2)).collect();
    writeln!(out, "errors 1-6   {}", errs.join(" "))?;
    writeln!(
        out,
        "iterations   {} ({} embedding + {} feasible)",
        r.iterations(),
        r.iterations_phase_a,
        r.iterations_phase_b
    )?;
    writeln!(out, "seconds      {:.3}", r.seconds)
}

/// Reads, solves and reports one SDPA file.
pub fn cmd_solve(
    path: &Path,
    params: &Params,
    outputs: &Outputs,
    out: &mut dyn Write,
) -> Result<SolveResult, CliError> {
    let problem = load_problem(path)?;
    let result = solve(&problem, params);
    let name = instance_name(path);
    write_summary(&name, &result, out).map_err(io_err(Path::new("-")))?;
    if let Some(target) = &outputs.json {
        let mut text = serde_json::to_string_pretty(&SolveReport {
            instance: &name,
            result: &result,
        })?;
        text.push('\n');
        emit(target, &text, out)?;
    }
    if let Some(target) = &outputs.csv {
        let row = report_row(&name, &result, DEFAULT_FAIL_TIME);
        emit(target, &write_report(&[row]), out)?;
    }
    Ok(result)
}

/// Size and randomness settings for `gen`.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Edge probability (maxcut, gpp) or off-diagonal density (diagprecond).
    pub density: f64,
    /// Partition count for gpp.
    pub k: f64,
    /// Balance target for gpp; the default target when `None`.
    pub beta: Option<f64>,
}

impl GenSpec {
    pub fn new(family: Family, n: usize, seed: u64) -> Self {
        Self {
            family,
            n,
            seed,
            density: 0.5,
            k: 2.0,
            beta: None,
        }
    }
}

/// Generates an instance as SDPA text.
pub fn cmd_gen(spec: &GenSpec) -> Result<String, CliError> {
    let problem = match spec.family {
        Family::MaxCut => generate::maxcut(spec.n, spec.density, spec.seed)?,
        Family::GraphPartition => generate::graph_partition(spec.n, spec.k, spec.beta, spec.density, spec.seed)?,
        Family::DiagPrecond => generate::diag_precond(spec.n, spec.density, spec.seed)?,
    };
    Ok(write_sdpa(&problem))
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub fail_time: f64,
    pub shift: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            fail_time: DEFAULT_FAIL_TIME,
            shift: DEFAULT_SHIFT,
        }
    }
}

/// SDPA files (`.dat-s`) directly inside `dir`, sorted by name.
pub fn bench_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| CliError::Input {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.to_string_lossy().ends_with(".dat-s"))
        .collect();
    files.sort();
    Ok(files)
}

/// Solves every SDPA file in `dir`. Per-instance failures, unreadable files
/// included, become `Failed` rows charged `fail_time`.
pub fn cmd_bench(
    dir: &Path,
    params: &Params,
    opts: BenchOptions,
    outputs: &Outputs,
    out: &mut dyn Write,
) -> Result<BenchSummary, CliError> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for path in bench_files(dir)? {
        let name = instance_name(&path);
        let row = match load_problem(&path) {
            Ok(problem) => report_row(&name, &solve(&problem, params), opts.fail_time),
            Err(e) => {
                log::warn!("{e}");
                ReportRow {
                    instance: name,
                    errors: [f64::NAN; 6],
                    time_seconds: opts.fail_time,
                    status: Status::Failed.name().into(),
                }
            }
        };
        let errs: Vec<String> = row.errors.iter().map(|&e| fmt_sci(e, 2)).collect();
        writeln!(
            out,
            "{:<16} {:<30} {:>10.3} {}",
            row.instance,
            row.status,
            row.time_seconds,
            errs.join(" ")
        )
        .map_err(io_err(Path::new("-")))?;
        rows.push(row);
    }
    let summary = BenchSummary::from_rows(&rows, opts.shift);
    writeln!(
        out,
        "solved {}/{}  sgm {:.3} s (shift {})",
        summary.solved_count, summary.total, summary.sgm, summary.shift
    )
    .map_err(io_err(Path::new("-")))?;
    if let Some(target) = &outputs.csv {
        emit(target, &write_report(&rows), out)?;
    }
    if let Some(target) = &outputs.json {
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        emit(target, &text, out)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(Status::Optimal), 0);
        assert_eq!(exit_code(Status::PrimalInfeasibleDualUnbounded), 2);
        assert_eq!(exit_code(Status::PrimalUnboundedDualInfeasible), 2);
        assert_eq!(exit_code(Status::Stalled), 1);
        assert_eq!(exit_code(Status::Failed), 1);
    }

    #[test]
    fn overrides_parse() {
        let p = params_from_overrides(Params::default(), &["rho=5", " eps_opt = 1e-7 "]).unwrap();
        assert_eq!(p.rho, 5.0);
        assert_eq!(p.eps_opt, 1e-7);
        let e = params_from_overrides(Params::default(), &["rho"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        assert!(params_from_overrides(Params::default(), &["nope=1"]).is_err());
    }

    #[test]
    fn gen_is_reproducible() {
        let spec = GenSpec::new(Family::MaxCut, 8, 42);
        assert_eq!(cmd_gen(&spec).unwrap(), cmd_gen(&spec).unwrap());
        let other = GenSpec { seed: 43, ..spec };
        assert_ne!(
            cmd_gen(&other).unwrap(),
            cmd_gen(&GenSpec::new(Family::MaxCut, 8, 42)).unwrap()
        );
    }

    #[test]
    fn solve_reports_toy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.dat-s");
        fs::write(
            &path,
            "1\n1\n2\n1.0\n0 1 1 1 1.0\n0 1 2 2 1.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n",
        )
        .unwrap();
        let mut buf = Vec::new();
        let outputs = Outputs {
            json: Some(PathBuf::from("-")),
            csv: None,
        };
        let r = cmd_solve(&path, &Params::default(), &outputs, &mut buf).unwrap();
        assert_eq!(r.status, Status::Optimal);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("status       Optimal"));
        let json_start = text.find('{').unwrap();
        let v: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
        assert_eq!(v["instance"], "toy");
        assert_eq!(v["status"], "Optimal");
    }

    #[test]
    fn malformed_file_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.dat-s");
        fs::write(&path, "1\n1\n2\n1.0\n0 1 1 x 1.0\n").unwrap();
        let e = cmd_solve(&path, &Params::default(), &Outputs::default(), &mut io::sink()).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        assert!(e.to_string().contains("line 5"), "{e}");
    }
}
