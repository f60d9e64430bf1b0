//! Benchmark summaries: solved counts and shifted geometric means.

use serde::Serialize;

use crate::sdpa_io::ReportRow;
use crate::solver::{SolveResult, Status};

/// Default shift of the geometric mean, in seconds.
pub const DEFAULT_SHIFT: f64 = 10.0;
/// Default time charged to an unsolved instance, in seconds.
pub const DEFAULT_FAIL_TIME: f64 = 3600.0;

/// `exp(mean(log(t_i + shift))) - shift`; zero for an empty list. Terms are
/// summed in sorted order so the result does not depend on input order.
pub fn shifted_geometric_mean(times: &[f64], shift: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    let mut logs: Vec<f64> = times.iter().map(|t| (t + shift).ln()).collect();
    logs.sort_by(f64::total_cmp);
    let mean = logs.iter().sum::<f64>() / times.len() as f64;
    mean.exp() - shift
}

/// An instance counts as solved when it ends Optimal or with an
/// infeasibility certificate.
pub fn is_solved(status: Status) -> bool {
    status == Status::Optimal || status.is_infeasibility_certificate()
}

/// Report row for one result. Unsolved instances are reported as `Failed`
/// and charged `fail_time`.
pub fn report_row(instance: &str, result: &SolveResult, fail_time: f64) -> ReportRow {
    if is_solved(result.status) {
        ReportRow {
            instance: instance.into(),
            errors: result.dimacs,
            time_seconds: result.seconds,
            status: result.status.name().into(),
        }
    } else {
        ReportRow {
            instance: instance.into(),
            errors: result.dimacs,
            time_seconds: fail_time,
            status: Status::Failed.name().into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub errors: [f64; 6],
    pub time_seconds: f64,
    pub status: String,
}

impl From<&ReportRow> for BenchRow {
    fn from(r: &ReportRow) -> Self {
        Self {
            instance: r.instance.clone(),
            errors: r.errors,
            time_seconds: r.time_seconds,
            status: r.status.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub solved_count: usize,
    pub total: usize,
    pub shift: f64,
    pub sgm: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchSummary {
    /// Summary over report rows whose times already include failure charges.
    pub fn from_rows(rows: &[ReportRow], shift: f64) -> Self {
        let times: Vec<f64> = rows.iter().map(|r| r.time_seconds).collect();
        Self {
            solved_count: rows.iter().filter(|r| r.status != Status::Failed.name()).count(),
            total: rows.len(),
            shift,
            sgm: shifted_geometric_mean(&times, shift),
            rows: rows.iter().map(BenchRow::from).collect(),
        }
    }
}
