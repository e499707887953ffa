use serde::{Deserialize, Serialize};

use crate::solver::{SolveResult, TraceRow};

pub const TRACE_HEADER: &str = "iter,g,grad_inf,rel_gap,primal_resid,step,time_s";

/// The result document. Non-finite values (an uncertified primal value, say)
/// are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub status: String,
    pub dual_value: Option<f64>,
    pub primal_value: Option<f64>,
    pub relative_gap: Option<f64>,
    pub nu: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub flows: Vec<Vec<f64>>,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultFile {
    /// With `deterministic` set the wall time is written as zero.
    pub fn from_result(result: &SolveResult, deterministic: bool) -> Self {
        ResultFile {
            status: result.status.as_str().to_string(),
            dual_value: finite(result.dual_value),
            primal_value: finite(result.primal_value),
            relative_gap: finite(result.relative_gap),
            nu: result.nu.clone(),
            y_hat: result.y_hat.clone(),
            flows: result.flows.clone(),
            iterations: result.iterations,
            wall_time_seconds: if deterministic { 0.0 } else { result.wall_time_seconds },
        }
    }
}

pub fn result_to_json(result: &SolveResult, deterministic: bool) -> String {
    let mut text =
        serde_json::to_string_pretty(&ResultFile::from_result(result, deterministic)).expect("result serializes");
    text.push('\n');
    text
}

/// Formats a float as the shortest decimal that round-trips.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

/// Trace CSV with one row per iterate, row 0 being the start point.
pub fn trace_to_csv(trace: &[TraceRow], deterministic: bool) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let time = if deterministic { 0.0 } else { r.time_s };
        let fields = [fmt(r.g), fmt(r.grad_inf), fmt(r.rel_gap), fmt(r.primal_resid), fmt(r.step), fmt(time)];
        out.push_str(&r.iter.to_string());
        for f in fields {
            out.push(',');
            out.push_str(&f);
        }
        out.push('\n');
    }
    out
}
