//! Basic steps and the shared run loop for gd / crn / btm.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::{Lipschitz, Oracle};
use crate::subsolvers::{
    bdgm_solve, solve_cubic_model, InexactnessCertificate, ModelSubproblem, SubsolverResult,
};

use super::{IterRecord, MethodConfig, MethodKind, RunStatus, RunTrace, TraceBuilder};

pub(crate) const BDGM_DEFAULT_CAP: usize = 100;

/// x+ = x - (1/M1) grad f(x).
pub fn gd_step(oracle: &dyn Oracle, x: &Vector, m1: f64) -> Result<Vector> {
    let g = oracle.gradient(x)?;
    Ok(x - g / m1)
}

/// Cubic regularized Newton step: x+ = x + argmin of the cubic model at x.
pub fn crn_step(oracle: &dyn Oracle, x: &Vector, m2: f64) -> Result<(Vector, SubsolverResult)> {
    let g = oracle.gradient(x)?;
    let h = oracle.hessian(x)?;
    let result = solve_cubic_model(&ModelSubproblem::cubic(g, h, m2))?;
    Ok((x + &result.h, result))
}

/// Basic third-order step via BDGM, certified relatively inexact.
pub fn btm_step(
    oracle: &dyn Oracle,
    x: &Vector,
    m3: f64,
    gamma: f64,
) -> Result<(Vector, InexactnessCertificate, usize)> {
    let (h, cert, iters) = bdgm_solve(oracle, x, m3, gamma, BDGM_DEFAULT_CAP)?;
    Ok((x + &h, cert, iters))
}

/// Outcome of one tensor step (p = 2 exact cubic, p = 3 BDGM-certified).
pub struct TensorStep {
    pub x_next: Vector,
    pub inner_iters: u64,
    pub subsolver_evals: u64,
    pub certificate: Option<InexactnessCertificate>,
}

/// Minimizes the p-th order regularized model of `oracle` at `y`.
pub fn tensor_step(
    oracle: &dyn Oracle,
    y: &Vector,
    p: u32,
    m_p: f64,
    gamma: f64,
) -> Result<TensorStep> {
    match p {
        2 => {
            let g = oracle.gradient(y)?;
            let h = oracle.hessian(y)?;
            let result = solve_cubic_model(&ModelSubproblem::cubic(g, h, m_p))?;
            Ok(TensorStep {
                x_next: y + &result.h,
                inner_iters: result.inner_evals as u64,
                subsolver_evals: 1,
                certificate: None,
            })
        }
        3 => {
            let (h, cert, iters) = bdgm_solve(oracle, y, m_p, gamma, BDGM_DEFAULT_CAP)?;
            Ok(TensorStep {
                x_next: y + &h,
                inner_iters: iters as u64,
                subsolver_evals: iters as u64,
                certificate: Some(cert),
            })
        }
        p => Err(Error::InvalidArgument(format!(
            "tensor step supports p in {{2, 3}}, got {p}"
        ))),
    }
}

/// Shared driver for the non-accelerated methods.
pub fn run_basic(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    x0: &Vector,
    config: &MethodConfig,
) -> Result<RunTrace> {
    let m = config.resolve_m(lipschitz)?;
    let gamma = config.gamma_or_default();
    let mut builder = TraceBuilder::new(config.method.name());

    let mut x = x0.clone();
    let (mut f, mut grad) = oracle.value_gradient(&x)?;
    let mut grad_norm = grad.norm();
    builder.push_initial(&x, f, grad_norm);

    let mut status = RunStatus::Budget;
    for t in 0..config.max_iters {
        if grad_norm <= config.grad_tol {
            status = RunStatus::Converged;
            break;
        }
        let step = match config.method {
            MethodKind::Gd => gd_step(oracle, &x, m).map(|x_next| (x_next, None, None, None)),
            MethodKind::Crn => crn_step(oracle, &x, m).map(|(x_next, r)| {
                (
                    x_next,
                    Some(r.inner_evals as u64),
                    Some(1u64),
                    None,
                )
            }),
            MethodKind::Btm => btm_step(oracle, &x, m, gamma).map(|(x_next, cert, iters)| {
                let ratio = if cert.rhs > 0.0 { cert.lhs / cert.rhs } else { 0.0 };
                (
                    x_next,
                    Some(iters as u64),
                    Some(iters as u64),
                    Some(ratio),
                )
            }),
            _ => unreachable!("run_basic only drives gd/crn/btm"),
        };
        let (x_next, inner_iters, subsolver_evals, inner_residual) = match step {
            Ok(out) => out,
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        };
        let step_norm = (&x_next - &x).norm();
        match oracle.value_gradient(&x_next) {
            Ok((f_next, g_next)) => {
                f = f_next;
                grad = g_next;
            }
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        }
        grad_norm = grad.norm();
        x = x_next;
        builder.push(
            IterRecord {
                iter: t + 1,
                f,
                grad_norm,
                step_norm: Some(step_norm),
                a_big: None,
                a_inc: None,
                nu: None,
                lambda: None,
                inner_iters,
                subsolver_evals,
                inner_residual,
                wall_ms: 0.0,
            },
            &x,
        );
    }
    if grad_norm <= config.grad_tol && !matches!(status, RunStatus::Failed { .. }) {
        status = RunStatus::Converged;
    }
    Ok(builder.finish(status))
}

/// High-budget CRN pre-run producing a trusted (f*, x*) pair for diagnostics.
///
/// Runs until the gradient norm drops to `tol` (default 1e-13) or `budget`
/// iterations. Returns (f*, x*, iterations used).
pub fn fstar_prerun(
    oracle: &dyn Oracle,
    x0: &Vector,
    m2: f64,
    budget: usize,
    tol: f64,
) -> Result<(f64, Vector, usize)> {
    let mut x = x0.clone();
    let mut best_f = oracle.value(&x)?;
    for t in 0..budget {
        let g_norm = oracle.gradient(&x)?.norm();
        if g_norm <= tol {
            return Ok((best_f, x, t));
        }
        let (x_next, _) = crn_step(oracle, &x, m2)?;
        let f_next = oracle.value(&x_next)?;
        // CRN is monotone; keep the best value seen in case of fp wobble.
        if f_next < best_f {
            best_f = f_next;
        }
        x = x_next;
    }
    Ok((best_f, x, budget))
}
