//! The eight optimization methods: three basic steps (gradient descent,
//! cubic Newton, basic third-order) and five accelerated schemes, all
//! producing uniform `RunTrace` streams.

mod basic;
mod near_optimal;
mod nesterov;
mod optimal;
mod ppss;
mod prox;

pub use basic::{btm_step, crn_step, fstar_prerun, gd_step, run_basic, tensor_step, TensorStep};
pub use near_optimal::near_optimal_run;
pub use nesterov::{nata_run, natm_run, nu_theoretical, NU_2, NU_3};
pub use optimal::{optimal_nu_theoretical, optimal_run};
pub use ppss::ppss_run;
pub use prox::{CompositeOracle, ProxTerm};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::{Lipschitz, Oracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Gd,
    Crn,
    Btm,
    Natm,
    Nata,
    NearOptimal,
    Ppss,
    Optimal,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Gd => "gd",
            MethodKind::Crn => "crn",
            MethodKind::Btm => "btm",
            MethodKind::Natm => "natm",
            MethodKind::Nata => "nata",
            MethodKind::NearOptimal => "near_optimal",
            MethodKind::Ppss => "ppss",
            MethodKind::Optimal => "optimal",
        }
    }
}

fn default_grad_tol() -> f64 {
    1e-12
}

fn default_max_iters() -> usize {
    30
}

/// Per-method run configuration. All methods are deterministic; there is no
/// seed. Optional fields fall back to the pairings used throughout the
/// experiments: M_2 = L_2, M_3 = 6 L_3, gamma = 1/6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: MethodKind,
    pub p: u32,
    /// Regularization constant M_p. Defaults to L_1 / L_2 / 6 L_3 by p.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Relative inexactness for third-order subsolves (default 1/6); also the
    /// tolerance of near-optimal / proximal-point acceptance sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Override for the theoretical schedule constant nu_p (natm, nata).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_p: Option<f64>,
    /// NATA adaptation block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu0: Option<f64>,
    /// Near-optimal pair-search halving budget (default 64).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bisections: Option<usize>,
    /// Proximal-point constant H for ppss (default M_p).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prox_h: Option<f64>,
    /// Optimal-method block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_estimate: Option<f64>,
    /// Inner-loop caps: BDGM (default 100) and tensor extragradient (200).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_cap: Option<usize>,
}

impl MethodConfig {
    pub fn new(method: MethodKind, p: u32) -> Self {
        Self {
            method,
            p,
            m: None,
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
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

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_grad_tol(mut self, grad_tol: f64) -> Self {
        self.grad_tol = grad_tol;
        self
    }

    pub fn gamma_or_default(&self) -> f64 {
        self.gamma.unwrap_or(1.0 / 6.0)
    }

    pub fn validate(&self) -> Result<()> {
        let p_ok = match self.method {
            MethodKind::Gd => self.p == 1,
            MethodKind::Crn => self.p == 2,
            MethodKind::Btm => self.p == 3,
            _ => self.p == 2 || self.p == 3,
        };
        if !p_ok {
            return Err(Error::InvalidArgument(format!(
                "method {} does not support p = {}",
                self.method.name(),
                self.p
            )));
        }
        if let Some(m) = self.m {
            if m <= 0.0 {
                return Err(Error::InvalidArgument("M_p must be positive".into()));
            }
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return Err(Error::InvalidArgument("gamma must be in [0, 1)".into()));
            }
        }
        if let Some(s) = self.sigma {
            if !(0.0..1.0).contains(&s) || s == 0.0 {
                return Err(Error::InvalidArgument("sigma must be in (0, 1)".into()));
            }
        }
        if let Some(t) = self.theta {
            if t <= 1.0 {
                return Err(Error::InvalidArgument("theta must exceed 1".into()));
            }
        }
        Ok(())
    }

    /// Resolves M_p against the problem's Lipschitz constants.
    pub fn resolve_m(&self, lipschitz: &Lipschitz) -> Result<f64> {
        if let Some(m) = self.m {
            return Ok(m);
        }
        let missing = |p: u32| {
            Error::InvalidArgument(format!(
                "M_{p} not given and L_{p} unavailable to derive a default"
            ))
        };
        match self.p {
            1 => lipschitz.l1.ok_or_else(|| missing(1)),
            2 => lipschitz.l2.ok_or_else(|| missing(2)),
            3 => lipschitz.l3.map(|l| 6.0 * l).ok_or_else(|| missing(3)),
            p => Err(Error::InvalidArgument(format!("unsupported order p = {p}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// Gradient norm reached the tolerance.
    Converged,
    /// Iteration budget exhausted.
    Budget,
    /// The method stopped early; partial records are preserved.
    Failed { message: String },
}

/// One per-iteration record. `step_norm` is ||x_{t+1} - x_t|| for basic
/// methods and ||x_{t+1} - y_t|| (the tensor-step length) for accelerated
/// ones. Fields not applicable to a method stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_norm: Option<f64>,
    /// Accumulated A_t after this iteration.
    #[serde(rename = "A_t", default, skip_serializing_if = "Option::is_none")]
    pub a_big: Option<f64>,
    /// Increment a_{t+1} used by estimating-sequence methods.
    #[serde(rename = "a_t", default, skip_serializing_if = "Option::is_none")]
    pub a_inc: Option<f64>,
    #[serde(rename = "nu_t", default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(rename = "lambda_t", default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsolver_evals: Option<u64>,
    /// Method-specific exit residual of the inner loop (optimal: the sigma
    /// test ratio; btm: certificate lhs/rhs ratio).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_residual: Option<f64>,
    pub wall_ms: f64,
}

/// Per-run record stream plus the iterate sequence (one entry per record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: String,
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
    /// Index of the iterate the method reports as its answer (argmin f for
    /// near-optimal, last iterate otherwise).
    pub result_iter: usize,
    pub iterates: Vec<Vec<f64>>,
}

impl RunTrace {
    pub fn f_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().map(|r| r.f).unwrap_or(f64::NAN)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.records.last().map(|r| r.grad_norm).unwrap_or(f64::NAN)
    }

    pub fn iterate(&self, index: usize) -> Vector {
        Vector::from_vec(self.iterates[index].clone())
    }

    /// Equality ignoring wall-clock columns, for determinism checks.
    pub fn content_eq(&self, other: &RunTrace) -> bool {
        if self.method != other.method
            || self.status != other.status
            || self.result_iter != other.result_iter
            || self.iterates != other.iterates
            || self.records.len() != other.records.len()
        {
            return false;
        }
        self.records.iter().zip(&other.records).all(|(a, b)| {
            let mut a = a.clone();
            let mut b = b.clone();
            a.wall_ms = 0.0;
            b.wall_ms = 0.0;
            a == b
        })
    }
}

/// Accumulates records with wall-clock stamps relative to run start.
pub(crate) struct TraceBuilder {
    method: &'static str,
    records: Vec<IterRecord>,
    iterates: Vec<Vec<f64>>,
    start: Instant,
}

impl TraceBuilder {
    pub fn new(method: &'static str) -> Self {
        Self {
            method,
            records: Vec::new(),
            iterates: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn wall_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    pub fn push(&mut self, mut record: IterRecord, x: &Vector) {
        record.wall_ms = self.wall_ms();
        self.records.push(record);
        self.iterates.push(x.iter().copied().collect());
    }

    pub fn push_initial(&mut self, x: &Vector, f: f64, grad_norm: f64) {
        self.push(
            IterRecord {
                iter: 0,
                f,
                grad_norm,
                step_norm: None,
                a_big: None,
                a_inc: None,
                nu: None,
                lambda: None,
                inner_iters: None,
                subsolver_evals: None,
                inner_residual: None,
                wall_ms: 0.0,
            },
            x,
        );
    }

    pub fn finish(self, status: RunStatus) -> RunTrace {
        let result_iter = self.records.len().saturating_sub(1);
        RunTrace {
            method: self.method.to_string(),
            records: self.records,
            status,
            result_iter,
            iterates: self.iterates,
        }
    }
}

/// Running estimating function
/// psi(z) = 1/power ||z - x0||^power + <s, z> + c.
#[derive(Debug, Clone)]
pub struct EstimatingFunction {
    x0: Vector,
    power: u32,
    s: Vector,
    c: f64,
    a_total: f64,
}

impl EstimatingFunction {
    pub fn new(x0: Vector, power: u32) -> Self {
        assert!(power >= 2);
        let d = x0.len();
        Self {
            x0,
            power,
            s: Vector::zeros(d),
            c: 0.0,
            a_total: 0.0,
        }
    }

    pub fn a_total(&self) -> f64 {
        self.a_total
    }

    pub fn s(&self) -> &Vector {
        &self.s
    }

    /// Adds a_{t+1} [f(x) + <grad f(x), z - x>].
    pub fn accumulate(&mut self, a: f64, f_value: f64, grad: &Vector, point: &Vector) {
        self.accumulate_affine(a, grad, f_value - grad.dot(point));
    }

    /// Adds a * [<grad_bar, z> + const_bar] for an arbitrary affine minorant.
    pub fn accumulate_affine(&mut self, a: f64, grad_bar: &Vector, const_bar: f64) {
        debug_assert!(a >= 0.0);
        self.s.axpy(a, grad_bar, 1.0);
        self.c += a * const_bar;
        self.a_total += a;
    }

    /// Closed-form argmin: v = x0 - s ||s||^{1/p - 1} with p = power - 1.
    pub fn argmin(&self) -> Vector {
        let s_norm = self.s.norm();
        if s_norm == 0.0 {
            return self.x0.clone();
        }
        let p = (self.power - 1) as f64;
        &self.x0 - &self.s * s_norm.powf(1.0 / p - 1.0)
    }

    pub fn value(&self, z: &Vector) -> f64 {
        let r = (z - &self.x0).norm();
        r.powi(self.power as i32) / self.power as f64 + self.s.dot(z) + self.c
    }

    /// Norm of grad psi at z, used by stationarity checks.
    pub fn gradient_norm(&self, z: &Vector) -> f64 {
        let w = z - &self.x0;
        let r = w.norm();
        let g = w * r.powi(self.power as i32 - 2) + &self.s;
        g.norm()
    }
}

/// Minimizer of the estimating function.
pub fn psi_argmin(psi: &EstimatingFunction) -> Vector {
    psi.argmin()
}

/// Dispatches a configured method run.
pub fn run_method(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    x0: &Vector,
    config: &MethodConfig,
) -> Result<RunTrace> {
    config.validate()?;
    if x0.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x0.len(),
        });
    }
    match config.method {
        MethodKind::Gd | MethodKind::Crn | MethodKind::Btm => run_basic(oracle, lipschitz, x0, config),
        MethodKind::Natm => natm_run(oracle, lipschitz, x0, config),
        MethodKind::Nata => nata_run(oracle, lipschitz, x0, config),
        MethodKind::NearOptimal => near_optimal_run(oracle, lipschitz, x0, config),
        MethodKind::Ppss => ppss_run(oracle, lipschitz, x0, config),
        MethodKind::Optimal => optimal_run(oracle, lipschitz, x0, config),
    }
}
