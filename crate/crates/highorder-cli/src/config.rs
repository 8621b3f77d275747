//! Benchmark configuration: JSON schema, validation, and preset merging.

use std::path::Path;

use serde::{Deserialize, Serialize};

use highorder::methods::{MethodConfig, MethodKind};
use highorder::problems::{Lipschitz, ProblemKind, SynthKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// LibSVM file path; mutually exclusive with `synth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    /// Dimension for the dataset-free nesterov_lb problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_override: Option<usize>,
    #[serde(default = "default_true")]
    pub remap_01_labels: bool,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub lipschitz: Lipschitz,
    #[serde(default)]
    pub x0: X0Spec,
    /// Expected (n, d); mismatches warn rather than fail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_shape: Option<(usize, usize)>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Spec {
    #[default]
    Zeros,
    Ones {
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Vector {
        values: Vec<f64>,
    },
}

fn default_scale() -> f64 {
    1.0
}

/// Method entry: `MethodConfig` with the budget fields optional so the run
/// block can supply defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: MethodKind,
    pub p: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bisections: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prox_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_cap: Option<usize>,
}

impl MethodSpec {
    pub fn new(method: MethodKind, p: u32) -> Self {
        Self {
            method,
            p,
            m: None,
            max_iters: None,
            grad_tol: None,
            gamma: None,
            nu_p: None,
            nu_min: None,
            nu_max: None,
            theta: None,
            nu0: None,
            max_bisections: None,
            prox_h: None,
            sigma: None,
            nu: None,
            r_estimate: None,
            inner_cap: None,
        }
    }

    pub fn resolve(&self, run: &RunBlock) -> MethodConfig {
        let mut cfg = MethodConfig::new(self.method, self.p);
        if let Some(m) = self.m {
            cfg.m = Some(m);
        }
        cfg.max_iters = self.max_iters.or(run.max_iters).unwrap_or(30);
        cfg.grad_tol = self.grad_tol.or(run.grad_tol).unwrap_or(1e-12);
        cfg.gamma = self.gamma;
        cfg.nu_p = self.nu_p;
        cfg.nu_min = self.nu_min;
        cfg.nu_max = self.nu_max;
        cfg.theta = self.theta;
        cfg.nu0 = self.nu0;
        cfg.max_bisections = self.max_bisections;
        cfg.prox_h = self.prox_h;
        cfg.sigma = self.sigma;
        cfg.nu = self.nu;
        cfg.r_estimate = self.r_estimate;
        cfg.inner_cap = self.inner_cap;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    /// CRN pre-run budget for the f* hint; 0 disables the pre-run.
    #[serde(default = "default_prerun")]
    pub fstar_prerun: usize,
    #[serde(default = "default_prerun_tol")]
    pub fstar_tol: f64,
}

fn default_prerun() -> usize {
    500
}

fn default_prerun_tol() -> f64 {
    1e-13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBlock {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<TraceFormat>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<TraceFormat> {
    vec![TraceFormat::Csv, TraceFormat::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Json,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.methods.is_empty() {
            return Err("config must list at least one method".into());
        }
        for spec in &self.methods {
            spec.resolve(&self.run)
                .validate()
                .map_err(|e| e.to_string())?;
        }
        match self.problem.kind {
            ProblemKind::NesterovLb => {
                if self.problem.dim.unwrap_or(0) < 2 {
                    return Err("nesterov_lb requires problem.dim >= 2".into());
                }
            }
            _ => {
                let has_dataset = self.problem.dataset.is_some();
                let has_synth = self.problem.synth.is_some();
                if !has_dataset && !has_synth {
                    return Err(
                        "dataset missing: provide problem.dataset (path) or problem.synth".into(),
                    );
                }
                if has_dataset && has_synth {
                    return Err(
                        "problem.dataset and problem.synth are mutually exclusive".into(),
                    );
                }
                if let Some(path) = &self.problem.dataset {
                    if !Path::new(path).is_file() {
                        return Err(format!("dataset missing: {path}"));
                    }
                }
            }
        }
        if self.problem.mu < 0.0 {
            return Err("problem.mu must be nonnegative".into());
        }
        Ok(())
    }
}

/// Recursive JSON merge: `overlay` wins; objects merge key-wise, everything
/// else replaces. Lets a config file override any subset of a preset.
pub fn merge_values(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(base_map), serde_json::Value::Object(overlay_map)) => {
            for (key, value) in overlay_map {
                match base_map.get_mut(&key) {
                    Some(slot) => merge_values(slot, value),
                    None => {
                        base_map.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
