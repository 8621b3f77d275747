//! Optimal tensor method: outer estimating sequence with the schedule
//! a_t = nu t^{(3p-1)/2} and a tensor-extragradient inner loop on
//! g_lambda(x, y) = f(x) + 1/(2 lambda) ||x - y||^2.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::{Lipschitz, Oracle};

use super::basic::tensor_step;
use super::prox::{CompositeOracle, ProxTerm};
use super::{IterRecord, MethodConfig, RunStatus, RunTrace, TraceBuilder};

const INNER_CAP: usize = 200;

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Schedule coefficient nu from the convergence theorem, given M_p = m,
/// sigma, and a distance estimate R.
pub fn optimal_nu_theoretical(p: u32, m: f64, l_p: f64, sigma: f64, r: f64) -> Result<f64> {
    let pf = p as f64;
    if pf * m - l_p <= 0.0 {
        return Err(Error::InvalidArgument(
            "optimal method schedule requires p M_p > L_p".into(),
        ));
    }
    let c_p = pf.powi(p as i32) * m.powi(p as i32) * (1.0 + 1.0 / sigma)
        / (factorial(p)
            * (pf * m - l_p).powf(pf / 2.0)
            * (pf * m + l_p).powf(pf / 2.0 - 1.0));
    let denom = (3.0 * pf + 1.0).powi(p as i32) * c_p * r.powi(p as i32 - 1)
        / (2f64.powi(p as i32) * pf.sqrt())
        * ((1.0 + sigma) / (1.0 - sigma)).powf((pf - 1.0) / 2.0);
    Ok(1.0 / denom)
}

pub fn optimal_run(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    x0: &Vector,
    config: &MethodConfig,
) -> Result<RunTrace> {
    let m = config.resolve_m(lipschitz)?;
    let p = config.p;
    let sigma = config.sigma.unwrap_or(0.5);
    let fact = factorial(p - 1);
    let inner_cap = config.inner_cap.unwrap_or(INNER_CAP);
    let nu = match config.nu {
        Some(nu) => nu,
        None => {
            let l_p = lipschitz.get(p).unwrap_or(m);
            let r = config.r_estimate.unwrap_or_else(|| x0.norm() + 1.0);
            optimal_nu_theoretical(p, m, l_p, sigma, r)?
        }
    };
    let exponent = (3.0 * p as f64 - 1.0) / 2.0;

    let mut builder = TraceBuilder::new("optimal");
    let mut x = x0.clone();
    let mut v = x0.clone();
    let mut a_big = 0.0f64;

    let (f0, g0) = oracle.value_gradient(&x)?;
    let mut grad_norm = g0.norm();
    builder.push_initial(&x, f0, grad_norm);

    let mut status = RunStatus::Budget;
    for t in 0..config.max_iters {
        if grad_norm <= config.grad_tol {
            status = RunStatus::Converged;
            break;
        }
        let a = nu * ((t + 1) as f64).powf(exponent);
        let a_big_next = a_big + a;
        let lambda = a * a / a_big_next;
        let y = (a_big / a_big_next) * &x + (a / a_big_next) * &v;

        let inner = inner_extragradient(oracle, &y, p, m, lambda, sigma, fact, inner_cap);
        let (x_next, k, evals, exit_ratio, dist_to_y) = match inner {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        };

        let (f_next, g_next) = match oracle.value_gradient(&x_next) {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        };
        v -= a * &g_next;
        grad_norm = g_next.norm();
        a_big = a_big_next;
        x = x_next;
        builder.push(
            IterRecord {
                iter: t + 1,
                f: f_next,
                grad_norm,
                step_norm: Some(dist_to_y),
                a_big: Some(a_big),
                a_inc: Some(a),
                nu: Some(nu),
                lambda: Some(lambda),
                inner_iters: Some(k),
                subsolver_evals: Some(evals),
                inner_residual: Some(exit_ratio),
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

/// Tensor extragradient loop. Models of g_lambda around y^k are handed to
/// the standard subsolvers with the lambda-shifted Hessian and the
/// regularization constant p M_p (weight p M_p / (p+1)!).
///
/// Returns (x, iterations k, subsolver evals, exit ratio, ||x - y_t||).
#[allow(clippy::too_many_arguments)]
fn inner_extragradient(
    oracle: &dyn Oracle,
    y_t: &Vector,
    p: u32,
    m: f64,
    lambda: f64,
    sigma: f64,
    fact: f64,
    inner_cap: usize,
) -> Result<(Vector, u64, u64, f64, f64)> {
    let g_lambda = CompositeOracle::new(oracle, ProxTerm::new(y_t.clone(), 0.5 / lambda, 2));
    let m_eff = p as f64 * m;
    let mut y_k = y_t.clone();
    let mut evals = 0u64;
    let mut last_ratio = f64::INFINITY;

    for k in 0..inner_cap {
        let step = tensor_step(&g_lambda, &y_k, p, m_eff, 1.0 / 6.0)?;
        evals += step.subsolver_evals;
        let x_k = step.x_next;
        let grad_gl = g_lambda.gradient(&x_k)?;
        let grad_gl_norm = grad_gl.norm();
        let dist_to_y = (&x_k - y_t).norm();
        let threshold = sigma / lambda * dist_to_y;
        last_ratio = if threshold > 0.0 {
            grad_gl_norm / threshold
        } else if grad_gl_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if grad_gl_norm <= threshold {
            return Ok((x_k, k as u64 + 1, evals, last_ratio * sigma, dist_to_y));
        }
        // Extragradient correction with step 1 / (M_p ||x^k - y^k||^{p-1} / (p-1)!).
        let step_len = (&x_k - &y_k).norm();
        if step_len == 0.0 {
            // Model solve returned its own center with a nonzero gradient;
            // nothing further can move, surface the residual.
            break;
        }
        let eta = fact / (m_eff * step_len.powi(p as i32 - 1));
        y_k -= eta * grad_gl;
    }
    Err(Error::ExtragradientBudget { ratio: last_ratio })
}
