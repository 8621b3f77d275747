//! Convergence-rate diagnostics: contraction factors, their theoretical
//! bounds, and runtime verification of the superlinear-rate guarantees on
//! completed traces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::methods::RunTrace;

/// Unique root in (0, 1) of h_z(a) = a^p z + a - 1 via safeguarded bisection.
///
/// h_z is strictly increasing with h_z(0) = -1 and h_z(1) = z > 0. For p = 2
/// the closed form (-1 + sqrt(1 + 4z)) / (2z) is available as a cross-check.
pub fn alpha_star(z: f64, p: u32) -> Result<f64> {
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha_star requires z > 0, got {z}"
        )));
    }
    let h = |a: f64| a.powi(p as i32) * z + a - 1.0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-12) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed form of alpha_star for p = 2.
pub fn alpha_star_closed_p2(z: f64) -> f64 {
    (-1.0 + (1.0 + 4.0 * z).sqrt()) / (2.0 * z)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Constant linear-rate lower bound:
/// min{1/2, 1/2 ((p+1)! mu / (q (M_p + L_p) D^{p-q+1}))^{1/p}}.
pub fn alpha_low(mu: f64, m_p: f64, l_p: f64, d: f64, p: u32, q: u32) -> f64 {
    let ratio = factorial(p + 1) * mu
        / (q as f64 * (m_p + l_p) * d.powi((p - q + 1) as i32));
    (0.5 * ratio.powf(1.0 / p as f64)).min(0.5)
}

/// Contraction argument kappa_t = q (M_p + L_p) ||x_t - x*||^{p-q+1} / ((p+1)! mu).
pub fn kappa_t(x_dist: f64, mu: f64, m_p: f64, l_p: f64, p: u32, q: u32) -> f64 {
    q as f64 * (m_p + l_p) * x_dist.powi((p - q + 1) as i32) / (factorial(p + 1) * mu)
}

/// Superlinear-envelope argument
/// kappa_t^sl = (M_p + L_p) q^{(q+1)/q} / ((p+1)! mu^{(q+1)/q})
///              (1 - alpha_low)^{t/q} (f(x_0) - f*)^{1/q}.
#[allow(clippy::too_many_arguments)]
pub fn kappa_sl(
    t: usize,
    f0_gap: f64,
    mu: f64,
    m_p: f64,
    l_p: f64,
    p: u32,
    q: u32,
    alpha_low: f64,
) -> f64 {
    let qf = q as f64;
    (m_p + l_p) * qf.powf((qf + 1.0) / qf) / (factorial(p + 1) * mu.powf((qf + 1.0) / qf))
        * (1.0 - alpha_low).powf(t as f64 / qf)
        * f0_gap.powf(1.0 / qf)
}

/// Per-iteration decrease factors and their theoretical envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostics {
    /// alpha_t = 1 - (f(x_{t+1}) - f*) / (f(x_t) - f*), one per consecutive
    /// pair of recorded values with positive gap.
    pub alpha_series: Vec<f64>,
    /// Number of leading records used (series length + 1); records past the
    /// first nonpositive gap are discarded.
    pub used_records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_star_series: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sl_series: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<f64>>,
}

/// Observed per-iteration decrease factors against a trusted f*.
///
/// The f-series is truncated at the first record whose gap to f* is not
/// positive (the trailing records sit at the arithmetic floor of f*).
pub fn rate_series(trace: &RunTrace, fstar: f64) -> Result<RateDiagnostics> {
    let f: Vec<f64> = trace.f_series();
    if f.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let min_f = f.iter().copied().fold(f64::INFINITY, f64::min);
    // A hint above every recorded value cannot produce a single valid pair.
    if fstar > min_f && fstar > f[0] {
        return Err(Error::BadFstarHint { fstar, min_f });
    }
    let mut used = f.len();
    for (i, &fi) in f.iter().enumerate() {
        if fi - fstar <= 0.0 {
            used = i;
            break;
        }
    }
    let mut alpha_series = Vec::new();
    for w in f[..used].windows(2) {
        let gap0 = w[0] - fstar;
        let gap1 = w[1] - fstar;
        alpha_series.push(1.0 - gap1 / gap0);
    }
    Ok(RateDiagnostics {
        alpha_series,
        used_records: used,
        alpha_star_series: None,
        alpha_low: None,
        kappa_sl_series: None,
        distances: None,
    })
}

/// One verified inequality with its worst margin (negative = satisfied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub checked: usize,
    pub skipped: bool,
    pub violations: Vec<Violation>,
    /// max over t of (lhs - rhs - slack); satisfied iff <= 0.
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub iter: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub p: u32,
    pub q: u32,
    pub mu: f64,
    pub m_p: f64,
    pub l_p: f64,
    pub fstar: f64,
    pub d_certified: Option<f64>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

const GAP_VACUOUS: f64 = 1e-14;

fn slack(gap: f64) -> f64 {
    1e-12 * gap.abs().max(1.0)
}

/// Verifies the contraction guarantees of the basic high-order methods on a
/// completed trace against trusted (f*, x*):
/// (a) per-step gap contraction with alpha*(kappa_t),
/// (b) the aggregated superlinear product bound,
/// (c) the degree-q growth condition.
///
/// All checks are one-sided with additive slack 1e-12 * max(1, gap); gaps
/// below 1e-14 * max(1, |f*|) are vacuous. Without x*, (a) and (c) are
/// reported as skipped. Bounds are marked satisfied, never tight.
#[allow(clippy::too_many_arguments)]
pub fn verify_theorem_bounds(
    trace: &RunTrace,
    mu: f64,
    m_p: f64,
    l_p: f64,
    p: u32,
    q: u32,
    fstar: f64,
    xstar: Option<&Vector>,
) -> Result<TheoremReport> {
    let f = trace.f_series();
    if f.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let vacuous_at = GAP_VACUOUS * fstar.abs().max(1.0);
    let gap0 = f[0] - fstar;
    let mut checks = Vec::new();

    let distances: Option<Vec<f64>> = xstar.map(|xs| {
        (0..trace.iterates.len())
            .map(|i| (trace.iterate(i) - xs).norm())
            .collect()
    });

    // (a) per-step contraction with alpha*(kappa_t(||x_t - x*||)).
    let mut per_step = CheckOutcome {
        name: "per_step_contraction".into(),
        checked: 0,
        skipped: distances.is_none(),
        violations: Vec::new(),
        worst_margin: f64::NEG_INFINITY,
        passed: true,
    };
    if let Some(dist) = &distances {
        for t in 0..f.len() - 1 {
            let gap_t = f[t] - fstar;
            let gap_next = f[t + 1] - fstar;
            if gap_t <= vacuous_at {
                continue;
            }
            let kappa = kappa_t(dist[t], mu, m_p, l_p, p, q);
            let alpha = if kappa > 0.0 {
                alpha_star(kappa, p)?
            } else {
                1.0
            };
            let rhs = (1.0 - alpha) * gap_t;
            let margin = gap_next - rhs - slack(gap_t);
            per_step.checked += 1;
            per_step.worst_margin = per_step.worst_margin.max(margin);
            if margin > 0.0 {
                per_step.violations.push(Violation {
                    iter: t,
                    lhs: gap_next,
                    rhs,
                    margin,
                });
            }
        }
    }
    per_step.passed = per_step.violations.is_empty();
    checks.push(per_step);

    // (b) aggregated product bound. D certified from the growth condition:
    // every iterate of a monotone run stays in the level set, and
    // mu/q ||x - x*||^q <= gap0 gives D <= (q gap0 / mu)^{1/q}.
    let d_certified = if gap0 > 0.0 {
        Some((q as f64 * gap0 / mu).powf(1.0 / q as f64))
    } else {
        None
    };
    let mut aggregated = CheckOutcome {
        name: "aggregated_superlinear_product".into(),
        checked: 0,
        skipped: d_certified.is_none(),
        violations: Vec::new(),
        worst_margin: f64::NEG_INFINITY,
        passed: true,
    };
    if let Some(d) = d_certified {
        let a_low = alpha_low(mu, m_p, l_p, d, p, q);
        let mut product = 1.0f64;
        for (t, &f_t) in f.iter().enumerate().skip(1) {
            let ksl = kappa_sl(t, gap0, mu, m_p, l_p, p, q, a_low);
            let alpha_sl = if ksl > 0.0 { alpha_star(ksl, p)? } else { 1.0 };
            product *= 1.0 - alpha_sl;
            let gap_t = f_t - fstar;
            if gap_t <= vacuous_at {
                continue;
            }
            let rhs = gap0 * product;
            let margin = gap_t - rhs - slack(gap_t);
            aggregated.checked += 1;
            aggregated.worst_margin = aggregated.worst_margin.max(margin);
            if margin > 0.0 {
                aggregated.violations.push(Violation {
                    iter: t,
                    lhs: gap_t,
                    rhs,
                    margin,
                });
            }
        }
    }
    aggregated.passed = aggregated.violations.is_empty();
    checks.push(aggregated);

    // (c) growth condition mu/q ||x_t - x*||^q <= gap_t.
    let mut growth = CheckOutcome {
        name: "growth_condition".into(),
        checked: 0,
        skipped: distances.is_none(),
        violations: Vec::new(),
        worst_margin: f64::NEG_INFINITY,
        passed: true,
    };
    if let Some(dist) = &distances {
        for (t, &f_t) in f.iter().enumerate() {
            let gap_t = f_t - fstar;
            if gap_t <= vacuous_at {
                continue;
            }
            let lhs = mu / q as f64 * dist[t].powi(q as i32);
            let margin = lhs - gap_t - slack(gap_t);
            growth.checked += 1;
            growth.worst_margin = growth.worst_margin.max(margin);
            if margin > 0.0 {
                growth.violations.push(Violation {
                    iter: t,
                    lhs,
                    rhs: gap_t,
                    margin,
                });
            }
        }
    }
    growth.passed = growth.violations.is_empty();
    checks.push(growth);

    let passed = checks.iter().all(|c| c.passed);
    Ok(TheoremReport {
        p,
        q,
        mu,
        m_p,
        l_p,
        fstar,
        d_certified,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::{IterRecord, RunStatus};

    fn trace_from_f(f: &[f64]) -> RunTrace {
        RunTrace {
            method: "test".into(),
            records: f
                .iter()
                .enumerate()
                .map(|(i, &v)| IterRecord {
                    iter: i,
                    f: v,
                    grad_norm: 0.0,
                    step_norm: None,
                    a_big: None,
                    a_inc: None,
                    nu: None,
                    lambda: None,
                    inner_iters: None,
                    subsolver_evals: None,
                    inner_residual: None,
                    wall_ms: 0.0,
                })
                .collect(),
            status: RunStatus::Budget,
            result_iter: f.len() - 1,
            iterates: vec![vec![0.0]; f.len()],
        }
    }

    #[test]
    fn alpha_star_examples() {
        // p = 2, z = 2: sqrt(1 + 8) = 3 so alpha* = 1/2.
        let a = alpha_star(2.0, 2).unwrap();
        assert!((a - 0.5).abs() <= 1e-10);
        // p = 3, z = 1: real root of a^3 + a - 1.
        let a = alpha_star(1.0, 3).unwrap();
        assert!((a - 0.6823278038280193).abs() <= 1e-9);
        // z -> 0+ drives alpha* -> 1.
        let a = alpha_star(1e-12, 2).unwrap();
        assert!(a > 1.0 - 1e-11);
        assert!(alpha_star(0.0, 2).is_err());
    }

    #[test]
    fn alpha_star_root_residual() {
        for &z in &[1e-6, 1e-3, 0.5, 1.0, 7.0, 1e4] {
            for p in [2u32, 3] {
                let a = alpha_star(z, p).unwrap();
                let h = a.powi(p as i32) * z + a - 1.0;
                assert!(h.abs() <= 1e-10, "residual {h} at z={z}, p={p}");
            }
        }
    }

    #[test]
    fn alpha_low_examples() {
        // p = q = 2: min{1/2, sqrt(3 mu / (4 (M+L) D))}.
        let a = alpha_low(1.0, 1.5, 1.5, 1.0, 2, 2);
        assert!((a - 0.5).abs() < 1e-15);
        let direct = (3.0f64 * 1.0 / (4.0 * 3.0 * 1.0)).sqrt();
        assert!((a - direct.min(0.5)).abs() < 1e-15);
        // Vanishing mu is never clamped at 1/2.
        let a = alpha_low(1e-9, 1.5, 1.5, 1.0, 2, 2);
        assert!(a < 0.5 && a > 0.0);
        // p = 3, q = 2 example: ratio 24*24/(2*24) = 12, so the min binds.
        let a = alpha_low(24.0, 12.0, 12.0, 1.0, 3, 2);
        assert!((a - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        // p = q = 2 reduces to (M+L) d / (3 mu).
        let k = kappa_t(1.0, 1.0, 1.5, 1.5, 2, 2);
        assert!((k - 1.0).abs() < 1e-15);
        assert_eq!(kappa_t(0.0, 1.0, 1.5, 1.5, 2, 2), 0.0);
        let k2 = kappa_t(2.0, 1.0, 1.5, 1.5, 2, 2);
        assert!((k2 - 2.0 * k).abs() < 1e-15);
    }

    #[test]
    fn kappa_sl_matches_main_text_form_at_p2() {
        // Prefactor (M+L) sqrt(2) / (3 mu^{3/2}) times the decay.
        for (mu, m, l, gap) in [
            (1.0, 1.5, 1.5, 2.0),
            (0.5, 0.2, 0.1, 5.0),
            (2.0, 3.0, 1.0, 0.3),
            (1e-3, 0.1, 0.1, 10.0),
            (0.25, 1.0, 0.9, 1.0),
        ] {
            let a_low = alpha_low(mu, m, l, 1.0, 2, 2);
            for t in [0usize, 3, 10] {
                let general = kappa_sl(t, gap, mu, m, l, 2, 2, a_low);
                let main_text = (m + l) * 2f64.sqrt() / (3.0 * mu.powf(1.5))
                    * (1.0 - a_low).powf(t as f64 / 2.0)
                    * gap.sqrt();
                assert!(
                    (general - main_text).abs() <= 1e-12 * main_text.max(1.0),
                    "mismatch at t={t}"
                );
            }
        }
    }

    #[test]
    fn kappa_sl_strictly_decreasing() {
        let a_low = 0.25;
        let mut prev = f64::INFINITY;
        for t in 0..20 {
            let k = kappa_sl(t, 1.0, 0.1, 1.0, 1.0, 2, 2, a_low);
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn rate_series_arithmetic() {
        // gaps (1, 0.5, 0.125) -> alpha (0.5, 0.75).
        let trace = trace_from_f(&[1.0, 0.5, 0.125]);
        let d = rate_series(&trace, 0.0).unwrap();
        assert_eq!(d.alpha_series.len(), 2);
        assert!((d.alpha_series[0] - 0.5).abs() < 1e-15);
        assert!((d.alpha_series[1] - 0.75).abs() < 1e-15);

        // Constant-gap trace -> alpha = 0.
        let trace = trace_from_f(&[2.0, 2.0, 2.0]);
        let d = rate_series(&trace, 1.0).unwrap();
        assert!(d.alpha_series.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn rate_series_truncates_and_rejects() {
        let trace = trace_from_f(&[1.0, 0.5, 0.25, 0.25]);
        // fstar equal to the trailing values truncates there.
        let d = rate_series(&trace, 0.25).unwrap();
        assert_eq!(d.used_records, 2);
        assert_eq!(d.alpha_series.len(), 1);

        let trace = trace_from_f(&[1.0, 0.5]);
        assert!(matches!(
            rate_series(&trace, 2.0),
            Err(Error::BadFstarHint { .. })
        ));
    }

    #[test]
    fn verify_vacuous_at_optimum() {
        let trace = trace_from_f(&[1e-15, 1e-16]);
        let xs = Vector::from_vec(vec![0.0]);
        let report =
            verify_theorem_bounds(&trace, 1e-3, 0.1, 0.1, 2, 2, 0.0, Some(&xs)).unwrap();
        assert!(report.passed);
        for check in &report.checks {
            assert!(check.violations.is_empty());
        }
    }

    #[test]
    fn verify_skips_without_xstar() {
        let trace = trace_from_f(&[1.0, 0.5, 0.2]);
        let report = verify_theorem_bounds(&trace, 0.1, 1.0, 1.0, 2, 2, 0.0, None).unwrap();
        assert!(report.checks[0].skipped);
        assert!(report.checks[2].skipped);
        assert!(!report.checks[1].skipped);
    }
}
