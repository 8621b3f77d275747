//! Benchmark execution: problem assembly, the shared f* pre-run, method
//! dispatch, diagnostics, and the cross-method summary.

use std::fs::File;
use std::io::BufReader;

use serde::{Deserialize, Serialize};

use highorder::diagnostics::{verify_theorem_bounds, TheoremReport};
use highorder::linalg::Vector;
use highorder::methods::{fstar_prerun, run_method, MethodKind, RunStatus, RunTrace};
use highorder::problems::{
    normalize_rows, parse_libsvm, synth_logistic, synth_poisson, Dataset, LibsvmOptions,
    Oracle, ProblemKind, ProblemOracle, SynthKind,
};

use crate::config::{BenchmarkConfig, X0Spec};

#[derive(Debug)]
pub enum RunnerError {
    /// Configuration / input problems (exit code 2).
    Config(String),
}

impl std::fmt::Display for RunnerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunnerError::Config(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for RunnerError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub label: String,
    pub iterations: usize,
    pub final_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_fgap: Option<f64>,
    pub final_grad_norm: f64,
    pub total_subsolver_evals: u64,
    pub wall_ms: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Method ordering (best f first) at a checkpoint iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iter: usize,
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fstar_hint: Option<f64>,
    pub methods: Vec<MethodSummary>,
    pub orderings: Vec<Checkpoint>,
    pub diagnostics_enabled: bool,
    pub check_failures: Vec<String>,
}

pub struct BenchmarkOutcome {
    pub summary: RunSummary,
    /// (label, trace, per-method diagnostics) per configured method.
    pub traces: Vec<(String, RunTrace, Option<TheoremReport>)>,
    pub fstar: Option<f64>,
    pub any_method_error: bool,
}

pub fn build_dataset(config: &BenchmarkConfig) -> Result<Option<Dataset>, RunnerError> {
    let problem = &config.problem;
    match problem.kind {
        ProblemKind::NesterovLb => Ok(None),
        _ => {
            let mut data = if let Some(path) = &problem.dataset {
                let file = File::open(path)
                    .map_err(|e| RunnerError::Config(format!("dataset missing: {path}: {e}")))?;
                let options = LibsvmOptions {
                    dim_override: problem.dim_override,
                    remap_01_labels: problem.remap_01_labels,
                    name: path.clone(),
                };
                parse_libsvm(BufReader::new(file), &options)
                    .map_err(|e| RunnerError::Config(format!("{path}: {e}")))?
            } else if let Some(synth) = &problem.synth {
                match synth.kind {
                    SynthKind::Logistic => synth_logistic(synth.n, synth.d, synth.seed),
                    SynthKind::Poisson => synth_poisson(synth.n, synth.d, synth.seed),
                }
            } else {
                return Err(RunnerError::Config("no dataset or synth spec".into()));
            };
            if let Some((n, d)) = problem.expected_shape {
                if data.n() != n || data.dim() != d {
                    eprintln!(
                        "warning: dataset shape ({}, {}) differs from expected ({n}, {d})",
                        data.n(),
                        data.dim()
                    );
                }
            }
            if problem.normalize {
                let zero_rows = normalize_rows(&mut data);
                if zero_rows > 0 {
                    eprintln!("warning: {zero_rows} zero rows left unnormalized");
                }
            }
            Ok(Some(data))
        }
    }
}

pub fn build_oracle(config: &BenchmarkConfig) -> Result<ProblemOracle, RunnerError> {
    let problem = &config.problem;
    let lipschitz = problem.lipschitz;
    let oracle = match problem.kind {
        ProblemKind::NesterovLb => ProblemOracle::nesterov_lb(
            problem.dim.unwrap_or(0),
            problem.mu,
            lipschitz,
        ),
        ProblemKind::Logistic => {
            let data = build_dataset(config)?.expect("dataset problem");
            ProblemOracle::logistic(data, problem.mu, lipschitz)
        }
        ProblemKind::Poisson => {
            let data = build_dataset(config)?.expect("dataset problem");
            ProblemOracle::poisson(data, problem.mu, lipschitz)
        }
    };
    oracle.map_err(|e| RunnerError::Config(e.to_string()))
}

pub fn starting_point(config: &BenchmarkConfig, dim: usize) -> Result<Vector, RunnerError> {
    match &config.problem.x0 {
        X0Spec::Zeros => Ok(Vector::zeros(dim)),
        X0Spec::Ones { scale } => Ok(Vector::from_element(dim, *scale)),
        X0Spec::Vector { values } => {
            if values.len() != dim {
                return Err(RunnerError::Config(format!(
                    "x0 has {} entries, problem dimension is {dim}",
                    values.len()
                )));
            }
            Ok(Vector::from_vec(values.clone()))
        }
    }
}

/// Runs every configured method on the shared oracle from the shared x0.
pub fn run_benchmark(
    config: &BenchmarkConfig,
    check: bool,
) -> Result<BenchmarkOutcome, RunnerError> {
    config.validate().map_err(RunnerError::Config)?;
    let mut oracle = build_oracle(config)?;
    let x0 = starting_point(config, oracle.dim())?;
    let lipschitz = oracle.lipschitz;

    // Shared f* hint from a high-budget CRN pre-run.
    let mut fstar: Option<f64> = None;
    let mut xstar: Option<Vector> = None;
    if config.run.fstar_prerun > 0 {
        match lipschitz.l2 {
            Some(l2) => match fstar_prerun(
                &oracle,
                &x0,
                l2,
                config.run.fstar_prerun,
                config.run.fstar_tol,
            ) {
                Ok((f, x, _)) => {
                    fstar = Some(f);
                    xstar = Some(x);
                }
                Err(e) => eprintln!("warning: f* pre-run failed: {e}"),
            },
            None => eprintln!("warning: f* pre-run skipped (no L2 constant)"),
        }
    }
    oracle.fstar_hint = fstar;

    let mut labels = Vec::new();
    let mut traces = Vec::new();
    let mut summaries = Vec::new();
    let mut check_failures = Vec::new();
    let mut any_method_error = false;

    for spec in &config.methods {
        let method_config = spec.resolve(&config.run);
        let label = unique_label(&labels, method_config.method.name());
        labels.push(label.clone());

        match run_method(&oracle, &lipschitz, &x0, &method_config) {
            Ok(trace) => {
                let error = match &trace.status {
                    RunStatus::Failed { message } => {
                        any_method_error = true;
                        Some(message.clone())
                    }
                    _ => None,
                };
                let diagnostics = if check {
                    run_checks(
                        &trace,
                        &method_config,
                        &oracle,
                        fstar,
                        xstar.as_ref(),
                        &label,
                        &mut check_failures,
                    )
                } else {
                    None
                };
                summaries.push(summarize(&label, &trace, fstar, error));
                traces.push((label, trace, diagnostics));
            }
            Err(e) => {
                any_method_error = true;
                summaries.push(MethodSummary {
                    method: method_config.method.name().into(),
                    label: label.clone(),
                    iterations: 0,
                    final_f: f64::NAN,
                    final_fgap: None,
                    final_grad_norm: f64::NAN,
                    total_subsolver_evals: 0,
                    wall_ms: 0.0,
                    status: RunStatus::Failed {
                        message: e.to_string(),
                    },
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let orderings = orderings(&traces);
    let problem_name = match &oracle.dataset() {
        Some(d) => d.name.clone(),
        None => format!("nesterov_lb(d={})", oracle.dim()),
    };
    let summary = RunSummary {
        problem: problem_name,
        fstar_hint: fstar,
        methods: summaries,
        orderings,
        diagnostics_enabled: check,
        check_failures: check_failures.clone(),
    };
    Ok(BenchmarkOutcome {
        summary,
        traces,
        fstar,
        any_method_error: any_method_error || !check_failures.is_empty(),
    })
}

fn unique_label(existing: &[String], base: &str) -> String {
    if !existing.iter().any(|l| l == base) {
        return base.to_string();
    }
    let mut k = 2;
    loop {
        let candidate = format!("{base}-{k}");
        if !existing.iter().any(|l| l == &candidate) {
            return candidate;
        }
        k += 1;
    }
}

fn summarize(
    label: &str,
    trace: &RunTrace,
    fstar: Option<f64>,
    error: Option<String>,
) -> MethodSummary {
    MethodSummary {
        method: trace.method.clone(),
        label: label.to_string(),
        iterations: trace.records.len().saturating_sub(1),
        final_f: trace.final_f(),
        final_fgap: fstar.map(|fs| trace.final_f() - fs),
        final_grad_norm: trace.final_grad_norm(),
        total_subsolver_evals: trace
            .records
            .iter()
            .filter_map(|r| r.subsolver_evals)
            .sum(),
        wall_ms: trace.records.last().map(|r| r.wall_ms).unwrap_or(0.0),
        status: trace.status.clone(),
        error,
    }
}

/// Monotonicity for the basic methods and the theorem bounds for crn/btm on
/// strongly regularized problems with a trusted (f*, x*).
fn run_checks(
    trace: &RunTrace,
    method_config: &highorder::methods::MethodConfig,
    oracle: &ProblemOracle,
    fstar: Option<f64>,
    xstar: Option<&Vector>,
    label: &str,
    failures: &mut Vec<String>,
) -> Option<TheoremReport> {
    let basic = matches!(
        method_config.method,
        MethodKind::Gd | MethodKind::Crn | MethodKind::Btm
    );
    if basic {
        let f = trace.f_series();
        for (t, w) in f.windows(2).enumerate() {
            if w[1] > w[0] + 1e-12 * w[0].abs().max(1.0) {
                failures.push(format!(
                    "{label}: monotonicity violated at iteration {t}: {} -> {}",
                    w[0], w[1]
                ));
                break;
            }
        }
    }
    let theorem_applies = matches!(method_config.method, MethodKind::Crn | MethodKind::Btm)
        && oracle.mu() > 0.0;
    if !theorem_applies {
        return None;
    }
    let (fstar, xstar) = (fstar?, xstar?);
    let m_p = method_config.resolve_m(&oracle.lipschitz).ok()?;
    let l_p = oracle.lipschitz.get(method_config.p).unwrap_or(m_p);
    match verify_theorem_bounds(
        trace,
        oracle.mu(),
        m_p,
        l_p,
        method_config.p,
        2,
        fstar,
        Some(xstar),
    ) {
        Ok(report) => {
            if !report.passed {
                for check in report.checks.iter().filter(|c| !c.passed) {
                    failures.push(format!(
                        "{label}: {} violated ({} violations, worst margin {})",
                        check.name,
                        check.violations.len(),
                        check.worst_margin
                    ));
                }
            }
            Some(report)
        }
        Err(e) => {
            failures.push(format!("{label}: diagnostics failed: {e}"));
            None
        }
    }
}

/// Cross-method ordering (by f, ascending) at shared checkpoint iterations.
fn orderings(traces: &[(String, RunTrace, Option<TheoremReport>)]) -> Vec<Checkpoint> {
    if traces.is_empty() {
        return Vec::new();
    }
    let min_len = traces
        .iter()
        .map(|(_, t, _)| t.records.len().saturating_sub(1))
        .min()
        .unwrap_or(0);
    [1usize, 2, 5, 10, 20, 30, 50, 100, 200, 500]
        .iter()
        .filter(|&&c| c <= min_len)
        .map(|&iter| {
            let mut ranked: Vec<(&String, f64)> = traces
                .iter()
                .map(|(label, t, _)| (label, t.records[iter].f))
                .collect();
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
            Checkpoint {
                iter,
                ranking: ranked.into_iter().map(|(l, _)| l.clone()).collect(),
            }
        })
        .collect()
}
