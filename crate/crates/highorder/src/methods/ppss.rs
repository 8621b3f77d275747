//! Proximal-point method with segment search.
//!
//! Each outer iteration needs one or more points in the acceptance set
//! A^gamma_{p,H}(y) = { w : ||grad (f + H/(p+1)||.-y||^{p+1})(w)|| <= gamma ||grad f(w)|| },
//! realized by repeated inexact tensor steps on the composite objective with
//! the prox addend differentiated analytically.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problems::{Lipschitz, Oracle};

use super::basic::tensor_step;
use super::prox::{CompositeOracle, ProxTerm};
use super::{EstimatingFunction, IterRecord, MethodConfig, RunStatus, RunTrace, TraceBuilder};

const PROX_STEP_CAP: usize = 10;
const SEGMENT_PROBE_CAP: usize = 40;

/// One accepted member of A^gamma_{p,H}(center).
struct ProxPoint {
    w: Vector,
    f: f64,
    grad: Vector,
    tensor_steps: u64,
}

/// Affine minorant phi(z) = <grad_bar, z> + const_bar with g_t attached.
struct OuterModel {
    grad_bar: Vector,
    const_bar: f64,
    g_t: f64,
    x_next: Vector,
    tensor_steps: u64,
}

fn prox_membership(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    center: &Vector,
    p: u32,
    h_const: f64,
    gamma: f64,
) -> Result<ProxPoint> {
    let prox = ProxTerm::new(center.clone(), h_const / (p + 1) as f64, p + 1);
    let composite = CompositeOracle::new(oracle, prox);
    // Smoothness of the prox addend: the cube contributes 2H to L2, the
    // fourth power 6H to L3.
    let m_comp = match p {
        2 => lipschitz.l2.ok_or_else(|| missing_l(2))? + 2.0 * h_const,
        3 => 6.0 * (lipschitz.l3.ok_or_else(|| missing_l(3))? + 6.0 * h_const),
        p => {
            return Err(Error::InvalidArgument(format!(
                "ppss supports p in {{2, 3}}, got {p}"
            )))
        }
    };

    let mut w = center.clone();
    let mut steps = 0u64;
    let mut last = (f64::INFINITY, 0.0);
    for _ in 0..PROX_STEP_CAP {
        let step = tensor_step(&composite, &w, p, m_comp, 1.0 / 6.0)?;
        steps += step.subsolver_evals;
        w = step.x_next;
        let lhs = composite.gradient(&w)?.norm();
        let (f, grad) = oracle.value_gradient(&w)?;
        let rhs = gamma * grad.norm();
        if lhs <= rhs {
            return Ok(ProxPoint {
                w,
                f,
                grad,
                tensor_steps: steps,
            });
        }
        last = (lhs, rhs);
    }
    Err(Error::ProxBudget {
        lhs: last.0,
        rhs: last.1,
    })
}

fn missing_l(p: u32) -> Error {
    Error::InvalidArgument(format!("ppss needs L_{p} for its inner tensor steps"))
}

fn affine_from(point: &ProxPoint) -> OuterModel {
    OuterModel {
        grad_bar: point.grad.clone(),
        const_bar: point.f - point.grad.dot(&point.w),
        g_t: point.grad.norm(),
        x_next: point.w.clone(),
        tensor_steps: point.tensor_steps,
    }
}

pub fn ppss_run(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    x0: &Vector,
    config: &MethodConfig,
) -> Result<RunTrace> {
    let m = config.resolve_m(lipschitz)?;
    let h_const = config.prox_h.unwrap_or(m);
    if h_const <= 0.0 {
        return Err(Error::InvalidArgument("prox constant H must be positive".into()));
    }
    let gamma = config.gamma_or_default();
    let p = config.p;
    let exp = 1.0 / p as f64;
    // kappa(g) = 1/2 [(1-gamma)/H]^{1/p} g^{(1-p)/p} couples a_{t+1} to g_t.
    let kappa_coeff = 0.5 * ((1.0 - gamma) / h_const).powf(exp);

    let mut builder = TraceBuilder::new("ppss");
    let mut x = x0.clone();
    // Quadratic prox center: psi_0(z) = 1/2 ||z - x0||^2, argmin = x0 - s.
    let mut psi = EstimatingFunction::new(x0.clone(), 2);
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
        let outcome = outer_step(oracle, lipschitz, &x, &v, p, h_const, gamma);
        let model = match outcome {
            Ok(model) => model,
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        };

        let kappa = kappa_coeff * model.g_t.powf((1.0 - p as f64) / p as f64);
        // Positive root of a^2 - kappa a - kappa A_t = 0.
        let a = 0.5 * (kappa + (kappa * kappa + 4.0 * kappa * a_big).sqrt());
        let a_big_next = a_big + a;
        psi.accumulate_affine(a, &model.grad_bar, model.const_bar);
        v = psi.argmin();

        let x_next = model.x_next;
        let (f_next, g_next) = match oracle.value_gradient(&x_next) {
            Ok(r) => r,
            Err(e) => {
                status = RunStatus::Failed {
                    message: e.at_iteration(t).to_string(),
                };
                break;
            }
        };
        let step_norm = (&x_next - &x).norm();
        grad_norm = g_next.norm();
        a_big = a_big_next;
        x = x_next;
        builder.push(
            IterRecord {
                iter: t + 1,
                f: f_next,
                grad_norm,
                step_norm: Some(step_norm),
                a_big: Some(a_big),
                a_inc: Some(a),
                nu: None,
                lambda: None,
                inner_iters: Some(model.tensor_steps),
                subsolver_evals: Some(model.tensor_steps),
                inner_residual: None,
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

/// Lines 5-14 of the outer iteration: try the prox point at x_t, then at
/// v_t, then bracket the segment between them.
fn outer_step(
    oracle: &dyn Oracle,
    lipschitz: &Lipschitz,
    x: &Vector,
    v: &Vector,
    p: u32,
    h_const: f64,
    gamma: f64,
) -> Result<OuterModel> {
    let u = v - x;
    let x0t = prox_membership(oracle, lipschitz, x, p, h_const, gamma)?;
    if x0t.grad.dot(&u) >= 0.0 {
        return Ok(affine_from(&x0t));
    }
    let x1t = prox_membership(oracle, lipschitz, v, p, h_const, gamma)?;
    if x1t.grad.dot(&u) <= 0.0 {
        let mut model = affine_from(&x1t);
        model.tensor_steps += x0t.tensor_steps;
        return Ok(model);
    }

    // Segment search: beta(0) < 0 < beta(1); bisect tau keeping the sign
    // bracket until the line-12 product condition holds.
    let power = (p as f64 + 1.0) / p as f64;
    let mut tau1 = 0.0f64;
    let mut tau2 = 1.0f64;
    let mut w1 = x0t;
    let mut w2 = x1t;
    let mut beta1 = w1.grad.dot(&u);
    let mut beta2 = w2.grad.dot(&u);
    let mut spent = w1.tensor_steps + w2.tensor_steps;
    let threshold_coeff = 0.5 * ((1.0 - gamma) / h_const).powf(1.0 / p as f64);

    for _ in 0..SEGMENT_PROBE_CAP {
        let alpha = beta2 / (beta2 - beta1);
        debug_assert!((0.0..=1.0).contains(&alpha));
        let g_t = (alpha * w1.grad.norm().powf(power)
            + (1.0 - alpha) * w2.grad.norm().powf(power))
        .powf(1.0 / power);
        let lhs = alpha * (tau1 - tau2) * beta1;
        if lhs <= threshold_coeff * g_t.powf(power) {
            let grad_bar = alpha * &w1.grad + (1.0 - alpha) * &w2.grad;
            let const_bar = alpha * (w1.f - w1.grad.dot(&w1.w))
                + (1.0 - alpha) * (w2.f - w2.grad.dot(&w2.w));
            let x_next = alpha * &w1.w + (1.0 - alpha) * &w2.w;
            return Ok(OuterModel {
                grad_bar,
                const_bar,
                g_t,
                x_next,
                tensor_steps: spent,
            });
        }
        let tau_mid = 0.5 * (tau1 + tau2);
        let center = x + tau_mid * &u;
        let wm = prox_membership(oracle, lipschitz, &center, p, h_const, gamma)?;
        spent += wm.tensor_steps;
        let beta_mid = wm.grad.dot(&u);
        if beta_mid <= 0.0 {
            tau1 = tau_mid;
            w1 = wm;
            beta1 = beta_mid;
        } else {
            tau2 = tau_mid;
            w2 = wm;
            beta2 = beta_mid;
        }
    }
    Err(Error::SegmentSearchBudget {
        tau_lo: tau1,
        tau_hi: tau2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::MethodKind;
    use crate::problems::ProblemOracle;

    fn oracle() -> ProblemOracle {
        let data = crate::problems::synth_logistic(60, 5, 13);
        ProblemOracle::logistic(
            data,
            1e-3,
            Lipschitz {
                l1: None,
                l2: Some(0.1),
                l3: Some(0.1),
            },
        )
        .unwrap()
    }

    #[test]
    fn first_iteration_takes_branch_one() {
        // v_0 = x_0 makes u_0 = 0, so <grad, u> = 0 >= 0 selects x_t^0.
        let oracle = oracle();
        let x0 = Vector::from_element(5, 1.0);
        let cfg = MethodConfig::new(MethodKind::Ppss, 2).with_iters(1);
        let trace = ppss_run(&oracle, &oracle.lipschitz, &x0, &cfg).unwrap();
        assert_eq!(trace.records.len(), 2);
        // The prox step from x0 decreases f.
        assert!(trace.records[1].f < trace.records[0].f);
    }

    #[test]
    fn a_sequence_positive_and_increasing() {
        let oracle = oracle();
        let x0 = Vector::from_element(5, 3.0);
        let cfg = MethodConfig::new(MethodKind::Ppss, 2).with_iters(10);
        let trace = ppss_run(&oracle, &oracle.lipschitz, &x0, &cfg).unwrap();
        assert!(matches!(
            trace.status,
            RunStatus::Budget | RunStatus::Converged
        ));
        let mut prev = 0.0;
        for r in trace.records.iter().skip(1) {
            assert!(r.a_inc.unwrap() > 0.0);
            assert!(r.a_big.unwrap() > prev);
            prev = r.a_big.unwrap();
        }
        // Overall progress.
        assert!(trace.final_f() < trace.records[0].f);
    }

    #[test]
    fn third_order_variant_runs() {
        let oracle = oracle();
        let x0 = Vector::from_element(5, 2.0);
        let cfg = MethodConfig::new(MethodKind::Ppss, 3).with_iters(5);
        let trace = ppss_run(&oracle, &oracle.lipschitz, &x0, &cfg).unwrap();
        assert!(matches!(
            trace.status,
            RunStatus::Budget | RunStatus::Converged
        ));
        assert!(trace.final_f() < trace.records[0].f);
    }
}
