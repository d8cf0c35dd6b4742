//! CSV writers. Numbers use the shortest representation that round-trips.

use crate::error::{BenchError, Result};
use crate::run::{Arm, LipschitzRow, SweepSummary};
use std::path::Path;
use varpen::solvers::OuterTrace;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const LIPSCHITZ_FILE: &str = "lipschitz.csv";

pub const SUMMARY_HEADER: [&str; 10] = [
    "lambda",
    "arm",
    "final_objective",
    "final_grad_norm",
    "outer_iters",
    "total_inner_iters",
    "lipschitz_estimate",
    "u_estimate",
    "wall_seconds",
    "status",
];

pub const TRACE_HEADER: [&str; 7] = [
    "k",
    "objective",
    "grad_norm",
    "inner_iterations",
    "cumulative_inner",
    "min_grad_sq",
    "wall_seconds",
];

/// Controls longer than this are left out of the `u_estimate` column.
pub const MAX_REPORTED_CONTROL: usize = 4;

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// `trace_{arm}_{lambda}.csv`, e.g. `trace_joint_1e5.csv` or `trace_adjoint_inf.csv`.
pub fn trace_file_name(arm: Arm, lambda: f64) -> String {
    format!("trace_{arm}_{lambda:e}.csv")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn trace_csv(t: &OuterTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in &t.records {
        w.write_record([
            r.k.to_string(),
            num(r.objective),
            num(r.grad_norm),
            r.inner_iterations.to_string(),
            r.cumulative_inner.to_string(),
            num(r.min_grad_sq),
            num(r.wall_seconds),
        ])?;
    }
    finish(w)
}

pub fn summary_csv(s: &SweepSummary) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for r in &s.records {
        let u = if r.u_estimate.len() <= MAX_REPORTED_CONTROL {
            r.u_estimate.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
        } else {
            String::new()
        };
        w.write_record([
            num(r.lambda),
            r.arm.to_string(),
            num(r.final_objective),
            num(r.final_grad_norm),
            r.outer_iters.to_string(),
            r.total_inner_iters.to_string(),
            opt(r.lipschitz_estimate),
            u,
            num(r.wall_seconds),
            r.status.clone(),
        ])?;
    }
    finish(w)
}

pub fn lipschitz_csv(rows: &[LipschitzRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lambda", "estimate", "status"])?;
    for r in rows {
        w.write_record([num(r.lambda), opt(r.estimate), r.status.clone()])?;
    }
    finish(w)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| BenchError::io(path, e))
}
