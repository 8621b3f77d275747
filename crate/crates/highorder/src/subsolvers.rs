//! Solvers for the regularized local models behind every tensor step.
//!
//! Both model shapes reduce, after an eigendecomposition of the quadratic
//! term, to a monotone scalar equation in the dual variable tau which is
//! driven to machine precision by safeguarded bisection + Newton.

use crate::error::{Error, Result};
use crate::linalg::{check_finite_vector, evd_symmetric, EigenDecomposition, Matrix, Vector};
use crate::problems::Oracle;

/// Regularization order of the local model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegOrder {
    /// (M2/6)||h||^3 added to a linear + quadratic model.
    Cubic,
    /// (L3/4)||y||^4 added to a linear + quadratic model.
    Quartic,
}

/// The local model `<g, h> + 1/2 <H h, h> + reg(h)` handed to a solver.
#[derive(Debug, Clone)]
pub struct ModelSubproblem {
    pub g: Vector,
    pub hessian: Matrix,
    pub reg_order: RegOrder,
    /// M2 for cubic (weight M2/6), L3 for quartic (weight L3/4).
    pub reg_const: f64,
    pub evd_cache: Option<EigenDecomposition>,
}

impl ModelSubproblem {
    pub fn cubic(g: Vector, hessian: Matrix, m2: f64) -> Self {
        Self {
            g,
            hessian,
            reg_order: RegOrder::Cubic,
            reg_const: m2,
            evd_cache: None,
        }
    }

    pub fn quartic(g: Vector, hessian: Matrix, l3: f64) -> Self {
        Self {
            g,
            hessian,
            reg_order: RegOrder::Quartic,
            reg_const: l3,
            evd_cache: None,
        }
    }

    pub fn with_evd(mut self, evd: EigenDecomposition) -> Self {
        self.evd_cache = Some(evd);
        self
    }

    /// Model value at h (constant term dropped).
    pub fn value(&self, h: &Vector) -> f64 {
        let quad = 0.5 * (&self.hessian * h).dot(h);
        let reg = match self.reg_order {
            RegOrder::Cubic => self.reg_const / 6.0 * h.norm().powi(3),
            RegOrder::Quartic => self.reg_const / 4.0 * h.norm_squared().powi(2),
        };
        self.g.dot(h) + quad + reg
    }
}

#[derive(Debug, Clone)]
pub struct SubsolverResult {
    /// Minimizer of the model.
    pub h: Vector,
    /// Dual variable tau >= 0.
    pub tau: f64,
    /// Norm of the model gradient at `h`.
    pub stationarity_residual: f64,
    /// Scalar-equation evaluations performed.
    pub inner_evals: usize,
}

/// Membership certificate for the relative-inexactness set N^gamma.
#[derive(Debug, Clone, Copy)]
pub struct InexactnessCertificate {
    pub gamma: f64,
    /// ||grad Omega_{x, M_p}(y)||
    pub lhs: f64,
    /// gamma * ||grad f(y)||
    pub rhs: f64,
    pub satisfied: bool,
}

impl InexactnessCertificate {
    fn new(gamma: f64, lhs: f64, rhs: f64) -> Self {
        Self {
            gamma,
            lhs,
            rhs,
            satisfied: lhs <= rhs,
        }
    }
}

const HESSIAN_NEG_TOL: f64 = 1e-10;
const DENOM_FLOOR: f64 = 1e-300;
const ROOT_ITERS: usize = 200;

fn validate_and_decompose(sp: &ModelSubproblem) -> Result<EigenDecomposition> {
    check_finite_vector(&sp.g, "model linear term")?;
    if sp.reg_const <= 0.0 {
        return Err(Error::InvalidArgument(
            "regularization constant must be positive".into(),
        ));
    }
    if sp.hessian.nrows() != sp.g.len() {
        return Err(Error::DimensionMismatch {
            expected: sp.g.len(),
            got: sp.hessian.nrows(),
        });
    }
    let evd = match &sp.evd_cache {
        Some(e) => e.clone(),
        None => evd_symmetric(&sp.hessian)?,
    };
    let lambda_min = evd.lambda_min();
    if lambda_min < -HESSIAN_NEG_TOL * evd.spectral_norm().max(1.0) {
        return Err(Error::IndefiniteHessian { lambda_min });
    }
    Ok(evd)
}

/// ||v(tau)||^2 and d/dtau ||v(tau)||^2 for v(tau) = -(S + tau*c)^{-1} g_hat.
fn shifted_solve_norm(s: &Vector, ghat: &Vector, tau: f64, c: f64) -> (f64, f64) {
    let mut norm_sq = 0.0;
    let mut dnorm_sq = 0.0;
    for i in 0..s.len() {
        let denom = (s[i] + tau * c).max(DENOM_FLOOR);
        let vi = ghat[i] / denom;
        norm_sq += vi * vi;
        dnorm_sq -= 2.0 * c * vi * vi / denom;
    }
    (norm_sq, dnorm_sq)
}

fn shifted_solution(s: &Vector, ghat: &Vector, tau: f64, c: f64) -> Vector {
    Vector::from_fn(s.len(), |i, _| {
        -ghat[i] / (s[i] + tau * c).max(DENOM_FLOOR)
    })
}

/// Safeguarded Newton + bisection for a strictly decreasing phi with
/// phi(lo) > 0 > phi(hi). `done` receives (tau, phi) and may stop early.
fn decreasing_root(
    mut lo: f64,
    mut hi: f64,
    mut phi: impl FnMut(f64) -> (f64, f64),
    mut done: impl FnMut(f64, f64) -> bool,
    evals: &mut usize,
) -> f64 {
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..ROOT_ITERS {
        let (value, derivative) = phi(tau);
        *evals += 1;
        if done(tau, value) {
            return tau;
        }
        if value > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = if derivative < 0.0 {
            tau - value / derivative
        } else {
            f64::NAN
        };
        tau = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-12 * tau.abs().max(1e-300) {
            return tau;
        }
    }
    tau
}

/// Minimizes <g,h> + 1/2 <Hh,h> + (M2/6)||h||^3 for H >= 0.
///
/// In the eigenbasis the stationarity condition g + Hh + (M2/2)||h|| h = 0
/// becomes the scalar equation ||(S + tau I)^{-1} g_hat|| = 2 tau / M2 with
/// tau = (M2/2)||h||.
pub fn solve_cubic_model(sp: &ModelSubproblem) -> Result<SubsolverResult> {
    debug_assert_eq!(sp.reg_order, RegOrder::Cubic);
    let evd = validate_and_decompose(sp)?;
    let m2 = sp.reg_const;
    let d = sp.g.len();
    let g_norm = sp.g.norm();
    let mut evals = 0usize;

    if g_norm == 0.0 {
        return Ok(SubsolverResult {
            h: Vector::zeros(d),
            tau: 0.0,
            stationarity_residual: 0.0,
            inner_evals: 0,
        });
    }

    let ghat = evd.vectors.transpose() * &sp.g;
    let s = &evd.values;
    let residual_target = 1e-10 * g_norm.max(1.0);

    // phi(tau) = ||v(tau)|| - 2 tau / M2, strictly decreasing on (tau_lo, inf).
    let tau_lo = (-evd.lambda_min()).max(0.0) + 1e-14;
    let phi = |tau: f64| {
        let (norm_sq, dnorm_sq) = shifted_solve_norm(s, &ghat, tau, 1.0);
        let norm = norm_sq.sqrt();
        let value = norm - 2.0 * tau / m2;
        let derivative = if norm > 0.0 {
            dnorm_sq / (2.0 * norm) - 2.0 / m2
        } else {
            -2.0 / m2
        };
        (value, derivative)
    };

    let (phi_lo, _) = phi(tau_lo);
    evals += 1;
    let tau_star = if phi_lo <= 0.0 {
        tau_lo
    } else {
        let mut hi = tau_lo.max(1e-8);
        loop {
            hi *= 2.0;
            let (value, _) = phi(hi);
            evals += 1;
            if value < 0.0 {
                break;
            }
            if hi > 1e160 {
                return Err(Error::RootSearchFailed { residual: value });
            }
        }
        // Residual of the primal system is (M2/2)|phi| * ||v||.
        decreasing_root(
            tau_lo,
            hi,
            phi,
            |tau, value| {
                let norm = value + 2.0 * tau / m2;
                0.5 * m2 * value.abs() * norm <= residual_target
            },
            &mut evals,
        )
    };

    let v = shifted_solution(s, &ghat, tau_star, 1.0);
    let h = &evd.vectors * v;
    let h_norm = h.norm();
    let residual = (&sp.g + &sp.hessian * &h + (0.5 * m2 * h_norm) * &h).norm();
    Ok(SubsolverResult {
        h,
        tau: 0.5 * m2 * h_norm,
        stationarity_residual: residual,
        inner_evals: evals,
    })
}

/// Minimizes <g,y> + 1/2 <Hy,y> + (L3/4)||y||^4 for H >= 0.
///
/// Dual form: maximize -1/2 <(S + tau sqrt(2 L3))^{-1} g_hat, g_hat> - tau^2/2
/// over tau >= 0, with tau* = (sqrt(2 L3)/2) ||v||^2 and y = U v.
pub fn solve_quartic_model(sp: &ModelSubproblem) -> Result<SubsolverResult> {
    debug_assert_eq!(sp.reg_order, RegOrder::Quartic);
    let evd = validate_and_decompose(sp)?;
    let l3 = sp.reg_const;
    let c = (2.0 * l3).sqrt();
    let d = sp.g.len();
    let g_norm = sp.g.norm();
    let mut evals = 0usize;

    if g_norm == 0.0 {
        return Ok(SubsolverResult {
            h: Vector::zeros(d),
            tau: 0.0,
            stationarity_residual: 0.0,
            inner_evals: 0,
        });
    }

    let ghat = evd.vectors.transpose() * &sp.g;
    let s = &evd.values;
    let residual_target = 1e-10 * g_norm.max(1.0);

    // phi(tau) = (c/2)||v(tau)||^2 - tau, strictly decreasing.
    let tau_lo = (-evd.lambda_min() / c).max(0.0) + 1e-14;
    let phi = |tau: f64| {
        let (norm_sq, dnorm_sq) = shifted_solve_norm(s, &ghat, tau, c);
        (0.5 * c * norm_sq - tau, 0.5 * c * dnorm_sq - 1.0)
    };

    let (phi_lo, _) = phi(tau_lo);
    evals += 1;
    let tau_star = if phi_lo <= 0.0 {
        tau_lo
    } else {
        let mut hi = tau_lo.max(1e-8);
        loop {
            hi *= 2.0;
            let (value, _) = phi(hi);
            evals += 1;
            if value < 0.0 {
                break;
            }
            if hi > 1e160 {
                return Err(Error::RootSearchFailed { residual: value });
            }
        }
        // Residual of the primal system is c|phi| * ||v||.
        decreasing_root(
            tau_lo,
            hi,
            phi,
            |tau, value| {
                let norm_sq = 2.0 * (value + tau) / c;
                c * value.abs() * norm_sq.max(0.0).sqrt() <= residual_target
            },
            &mut evals,
        )
    };

    let v = shifted_solution(s, &ghat, tau_star, c);
    let y = &evd.vectors * v;
    let y_norm_sq = y.norm_squared();
    let residual = (&sp.g + &sp.hessian * &y + (l3 * y_norm_sq) * &y).norm();
    Ok(SubsolverResult {
        h: y,
        tau: 0.5 * c * y_norm_sq,
        stationarity_residual: residual,
        inner_evals: evals,
    })
}

/// Gradient of the p-th order regularized model at y:
/// grad Phi_{x,p}(y) + (M_p / p!) ||y - x||^{p-1} (y - x),
/// built from oracle derivatives at x.
pub fn certify_inexact(
    oracle: &dyn Oracle,
    x: &Vector,
    y: &Vector,
    m_p: f64,
    p: u32,
    gamma: f64,
) -> Result<InexactnessCertificate> {
    assert!(p == 2 || p == 3, "certification supports p in {{2, 3}}");
    let h = y - x;
    let grad_x = oracle.gradient(x)?;
    let hess_x = oracle.hessian(x)?;
    let mut model_grad = &grad_x + &hess_x * &h;
    if p == 3 {
        let third = oracle.third_dir(x, &h)?;
        model_grad += 0.5 * third;
    }
    let factorial = if p == 2 { 2.0 } else { 6.0 };
    let h_norm = h.norm();
    model_grad += (m_p / factorial * h_norm.powi(p as i32 - 1)) * &h;

    let lhs = model_grad.norm();
    let rhs = gamma * oracle.gradient(y)?.norm();
    Ok(InexactnessCertificate::new(gamma, lhs, rhs))
}

/// Bregman Distance Gradient Method for the third-order step at `x`.
///
/// Iterates explicit quartic steps
///   h_{k+1} = argmin <g_k, y> + 1/2 <H y, y> + (L3/4)||y||^4,
///   g_k = (2-sqrt2)/2 [grad f + 1/2 D3f(x)[h_k]^2]
///       - sqrt2/2 [H h_k + L3 ||h_k||^2 h_k],
/// with L3 = M3/6, until x + h lands in N^gamma_{M3}(x). The EVD of the
/// Hessian at x is computed once and shared across inner iterations.
///
/// Returns (h, certificate, inner iterations).
pub fn bdgm_solve(
    oracle: &dyn Oracle,
    x: &Vector,
    m3: f64,
    gamma: f64,
    max_iters: usize,
) -> Result<(Vector, InexactnessCertificate, usize)> {
    let d = oracle.dim();
    let l3 = m3 / 6.0;
    let grad_x = oracle.gradient(x)?;
    let grad_x_norm = grad_x.norm();
    if grad_x_norm <= 1e-14 {
        return Ok((
            Vector::zeros(d),
            InexactnessCertificate::new(gamma, 0.0, gamma * grad_x_norm),
            0,
        ));
    }
    let hess_x = oracle.hessian(x)?;
    let evd = evd_symmetric(&hess_x)?;

    let c1 = (2.0 - std::f64::consts::SQRT_2) / 2.0;
    let c2 = std::f64::consts::SQRT_2 / 2.0;

    let mut h = Vector::zeros(d);
    let mut third = Vector::zeros(d); // D3 f(x)[h]^2, zero at h = 0
    let mut best: Option<InexactnessCertificate> = None;

    for k in 0..max_iters {
        let hh = &hess_x * &h;
        let cube = l3 * h.norm_squared() * &h;
        let g_k = c1 * (&grad_x + 0.5 * &third) - c2 * (hh + cube);

        let sp = ModelSubproblem::quartic(g_k, hess_x.clone(), l3).with_evd(evd.clone());
        let step = solve_quartic_model(&sp)?;
        h = step.h;

        third = oracle.third_dir(x, &h)?;
        let h_norm_sq = h.norm_squared();
        let model_grad =
            &grad_x + &hess_x * &h + 0.5 * &third + (m3 / 6.0 * h_norm_sq) * &h;
        let y = x + &h;
        let grad_y = oracle.gradient(&y)?;
        let cert = InexactnessCertificate::new(gamma, model_grad.norm(), gamma * grad_y.norm());
        if cert.satisfied {
            return Ok((h, cert, k + 1));
        }
        if best.is_none_or(|b| cert.lhs - cert.rhs < b.lhs - b.rhs) {
            best = Some(cert);
        }
    }

    let best = best.expect("at least one inner iteration ran");
    Err(Error::CertificateBudget {
        iters: max_iters,
        lhs: best.lhs,
        rhs: best.rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Lipschitz, ProblemOracle};

    #[test]
    fn cubic_zero_gradient() {
        let sp = ModelSubproblem::cubic(Vector::zeros(3), Matrix::identity(3, 3), 2.0);
        let r = solve_cubic_model(&sp).unwrap();
        assert_eq!(r.h.norm(), 0.0);
        assert_eq!(r.tau, 0.0);
    }

    #[test]
    fn cubic_one_dimensional_hand_root() {
        // h minimizes -3h + h^2/2 + h^3/3: root of h^2 + h - 3 = 0.
        let sp = ModelSubproblem::cubic(
            Vector::from_vec(vec![-3.0]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            2.0,
        );
        let r = solve_cubic_model(&sp).unwrap();
        let expected = (-1.0 + 13f64.sqrt()) / 2.0;
        assert!(
            (r.h[0] - expected).abs() < 1e-9,
            "h = {}, expected {expected}",
            r.h[0]
        );
        assert!(r.stationarity_residual <= 1e-9 * 3f64.max(1.0));
        assert!((r.tau - 0.5 * 2.0 * r.h.norm()).abs() <= 1e-12);
    }

    #[test]
    fn cubic_rejects_indefinite() {
        let sp = ModelSubproblem::cubic(
            Vector::from_vec(vec![1.0, 1.0]),
            Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 2.0])),
            1.0,
        );
        assert!(matches!(
            solve_cubic_model(&sp),
            Err(Error::IndefiniteHessian { .. })
        ));
    }

    #[test]
    fn cubic_singular_hessian_still_solves() {
        let sp = ModelSubproblem::cubic(
            Vector::from_vec(vec![-1.0, -1.0]),
            Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 1.0])),
            3.0,
        );
        let r = solve_cubic_model(&sp).unwrap();
        assert!(r.stationarity_residual <= 1e-9 * 2f64.sqrt().max(1.0));
    }

    #[test]
    fn quartic_zero_gradient() {
        let sp = ModelSubproblem::quartic(Vector::zeros(2), Matrix::identity(2, 2), 1.0);
        let r = solve_quartic_model(&sp).unwrap();
        assert_eq!(r.h.norm(), 0.0);
        assert_eq!(r.tau, 0.0);
    }

    #[test]
    fn quartic_pure_regularizer_case() {
        // H = 0, g = -1, L3 = 1: y^3 = 1 so y = 1 and tau = sqrt(2)/2.
        let sp = ModelSubproblem::quartic(
            Vector::from_vec(vec![-1.0]),
            Matrix::from_row_slice(1, 1, &[0.0]),
            1.0,
        );
        let r = solve_quartic_model(&sp).unwrap();
        assert!((r.h[0] - 1.0).abs() < 1e-9, "y = {}", r.h[0]);
        assert!((r.tau - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn quartic_one_dimensional_hand_root() {
        // Stationarity: -2 + y + 4 y^3 = 0.
        let sp = ModelSubproblem::quartic(
            Vector::from_vec(vec![-2.0]),
            Matrix::from_row_slice(1, 1, &[1.0]),
            4.0,
        );
        let r = solve_quartic_model(&sp).unwrap();
        let expected = bisect_scalar(|y| 4.0 * y.powi(3) + y - 2.0, 0.0, 2.0);
        assert!((r.h[0] - expected).abs() < 1e-9);
        // Dual consistency.
        let v_norm_sq = r.h.norm_squared();
        assert!((r.tau - (8f64.sqrt() / 2.0) * v_norm_sq).abs() <= 1e-9 * r.tau.max(1.0));
    }

    fn bisect_scalar(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn certify_at_center_fails_for_gamma_below_one() {
        let oracle = ProblemOracle::nesterov_lb(4, 1e-3, Lipschitz::default()).unwrap();
        let x = Vector::from_vec(vec![0.5, -0.25, 0.1, 0.0]);
        let cert = certify_inexact(&oracle, &x, &x, 10.0, 2, 0.5).unwrap();
        let g = oracle.gradient(&x).unwrap().norm();
        assert!((cert.lhs - g).abs() < 1e-12);
        assert!((cert.rhs - 0.5 * g).abs() < 1e-12);
        assert!(!cert.satisfied);
    }

    #[test]
    fn certify_after_exact_cubic_step() {
        let oracle = ProblemOracle::nesterov_lb(6, 1e-3, Lipschitz::default()).unwrap();
        let x = Vector::from_element(6, 0.3);
        let g = oracle.gradient(&x).unwrap();
        let hess = oracle.hessian(&x).unwrap();
        let sp = ModelSubproblem::cubic(g, hess, 10.0);
        let step = solve_cubic_model(&sp).unwrap();
        let y = &x + &step.h;
        let cert = certify_inexact(&oracle, &x, &y, 10.0, 2, 1e-6).unwrap();
        assert!(cert.satisfied, "lhs {} rhs {}", cert.lhs, cert.rhs);
    }

    #[test]
    fn certify_gamma_zero_is_unreachable_off_stationarity() {
        // gamma = 0 makes rhs = 0: the certificate holds only when the model
        // gradient is exactly zero numerically.
        let oracle = ProblemOracle::nesterov_lb(4, 1e-2, Lipschitz::default()).unwrap();
        let x = Vector::from_element(4, 0.4);
        let g = oracle.gradient(&x).unwrap();
        let hess = oracle.hessian(&x).unwrap();
        let step = solve_cubic_model(&ModelSubproblem::cubic(g, hess, 5.0)).unwrap();
        let y = &x + &step.h;
        let cert = certify_inexact(&oracle, &x, &y, 5.0, 2, 0.0).unwrap();
        assert!(cert.lhs <= 1e-9);
        assert_eq!(cert.rhs, 0.0);
        assert_eq!(cert.satisfied, cert.lhs == 0.0);
    }

    #[test]
    fn bdgm_zero_gradient_start() {
        // Gradient of the poisson single-sample instance vanishes at 0.
        let data = crate::problems::Dataset {
            features: Matrix::from_row_slice(1, 1, &[1.0]),
            labels: vec![1.0],
            name: "p".into(),
        };
        let oracle = ProblemOracle::poisson(data, 0.0, Lipschitz::default()).unwrap();
        let (h, cert, iters) = bdgm_solve(&oracle, &Vector::zeros(1), 6.0, 1.0 / 6.0, 100).unwrap();
        assert_eq!(h.norm(), 0.0);
        assert!(cert.satisfied);
        assert_eq!(iters, 0);
    }

    #[test]
    fn bdgm_nesterov_certificate_within_budget() {
        let oracle = ProblemOracle::nesterov_lb(20, 1e-3, Lipschitz::default()).unwrap();
        let x = Vector::zeros(20);
        let (h, cert, iters) = bdgm_solve(&oracle, &x, 60.0, 1.0 / 6.0, 50).unwrap();
        assert!(cert.satisfied);
        assert!(iters <= 50, "iters = {iters}");
        assert!(h.norm() > 0.0);
    }
}
