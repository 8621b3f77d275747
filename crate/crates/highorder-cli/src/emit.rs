//! Trace serialization: the fixed-header CSV stream and the JSON document
//! carrying records, config echo, and diagnostics.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use highorder::diagnostics::TheoremReport;
use highorder::methods::RunTrace;

use crate::config::BenchmarkConfig;

pub const CSV_HEADER: &str =
    "iter,f,fgap,grad_norm,step_norm,A_t,nu_t,lambda_t,inner_iters,subsolver_evals,wall_ms";

/// JSON mirror of a trace: records plus the config echo and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub method: String,
    pub label: String,
    pub config: BenchmarkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fstar_hint: Option<f64>,
    pub trace: RunTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<TheoremReport>,
}

fn opt_num<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trace_to_csv(trace: &RunTrace, fstar: Option<f64>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &trace.records {
        let fgap = fstar.map(|fs| r.f - fs);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            r.f,
            opt_num(fgap),
            r.grad_norm,
            opt_num(r.step_norm),
            opt_num(r.a_big),
            opt_num(r.nu),
            opt_num(r.lambda),
            opt_num(r.inner_iters),
            opt_num(r.subsolver_evals),
            r.wall_ms,
        ));
    }
    out
}

pub fn write_csv(trace: &RunTrace, fstar: Option<f64>, path: &Path) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(trace_to_csv(trace, fstar).as_bytes())
}

pub fn write_json(document: &TraceDocument, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(document)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> anyhow::Result<TraceDocument> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
