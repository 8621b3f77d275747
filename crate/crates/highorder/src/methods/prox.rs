//! Proximal-term oracle combinator: f(x) + coeff * ||x - center||^m with the
//! addend's gradient, Hessian and directional third derivative supplied
//! analytically.

use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::problems::{EvalRequest, Oracle, OracleResponse};

/// coeff * ||x - center||^exponent, exponent in {2, 3, 4}.
#[derive(Debug, Clone)]
pub struct ProxTerm {
    pub center: Vector,
    pub coeff: f64,
    pub exponent: u32,
}

impl ProxTerm {
    pub fn new(center: Vector, coeff: f64, exponent: u32) -> Self {
        assert!((2..=4).contains(&exponent));
        Self {
            center,
            coeff,
            exponent,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.coeff * (x - &self.center).norm().powi(self.exponent as i32)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let r = x - &self.center;
        let m = self.exponent as f64;
        let norm = r.norm();
        if norm == 0.0 {
            return Vector::zeros(x.len());
        }
        r * (self.coeff * m * norm.powi(self.exponent as i32 - 2))
    }

    pub fn add_hessian(&self, x: &Vector, h: &mut Matrix) {
        let r = x - &self.center;
        let m = self.exponent as f64;
        let norm = r.norm();
        if norm == 0.0 {
            if self.exponent == 2 {
                for j in 0..x.len() {
                    h[(j, j)] += 2.0 * self.coeff;
                }
            }
            return;
        }
        let diag = self.coeff * m * norm.powi(self.exponent as i32 - 2);
        let outer = self.coeff * m * (m - 2.0) * norm.powi(self.exponent as i32 - 4);
        for i in 0..x.len() {
            h[(i, i)] += diag;
            for j in 0..x.len() {
                // r[i] * r[j] first: keeps the update bitwise symmetric.
                h[(i, j)] += outer * (r[i] * r[j]);
            }
        }
    }

    /// D^3 of the prox addend along [h, h], valid for even exponents
    /// everywhere and away from the center for exponent 3.
    pub fn third_dir(&self, x: &Vector, h: &Vector) -> Vector {
        let r = x - &self.center;
        let m = self.exponent as f64;
        let norm = r.norm();
        if norm == 0.0 || self.exponent == 2 {
            return Vector::zeros(x.len());
        }
        let rh = r.dot(h);
        let hh = h.norm_squared();
        let c_base = self.coeff * m * (m - 2.0);
        let mut out = &r
            * (c_base * norm.powi(self.exponent as i32 - 4) * hh
                + c_base * (m - 4.0) * norm.powi(self.exponent as i32 - 6) * rh * rh);
        out += h * (2.0 * c_base * norm.powi(self.exponent as i32 - 4) * rh);
        out
    }
}

/// Base oracle plus a proximal addend; implements `Oracle` so every solver
/// and tensor step applies unchanged.
pub struct CompositeOracle<'a> {
    pub base: &'a dyn Oracle,
    pub prox: ProxTerm,
}

impl<'a> CompositeOracle<'a> {
    pub fn new(base: &'a dyn Oracle, prox: ProxTerm) -> Self {
        Self { base, prox }
    }
}

impl Oracle for CompositeOracle<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse> {
        let mut resp = self.base.eval(x, request)?;
        resp.value += self.prox.value(x);
        if let Some(g) = resp.gradient.as_mut() {
            *g += self.prox.gradient(x);
        }
        if let Some(h) = resp.hessian.as_mut() {
            self.prox.add_hessian(x, h);
        }
        if let (Some(td), Some(dir)) = (resp.third_dir.as_mut(), request.third_dir) {
            *td += self.prox.third_dir(x, dir);
        }
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Lipschitz, ProblemOracle};

    fn fd_check(oracle: &dyn Oracle, x: &Vector, h: &Vector) {
        let eps = 1e-5;
        let f_plus = oracle.value(&(x + h * eps)).unwrap();
        let f_minus = oracle.value(&(x - h * eps)).unwrap();
        let fd = (f_plus - f_minus) / (2.0 * eps);
        let g = oracle.gradient(x).unwrap();
        assert!((fd - g.dot(h)).abs() <= 1e-6 * fd.abs().max(1.0));

        let g_plus = oracle.gradient(&(x + h * eps)).unwrap();
        let g_minus = oracle.gradient(&(x - h * eps)).unwrap();
        let hess_fd = (&g_plus - &g_minus) / (2.0 * eps);
        let hess = oracle.hessian(x).unwrap();
        let hess_h = &hess * h;
        assert!((hess_fd - &hess_h).norm() <= 1e-5 * hess_h.norm().max(1.0));

        let third_fd = (&g_plus - 2.0 * &g + &g_minus) / (eps * eps);
        let third = oracle.third_dir(x, h).unwrap();
        assert!(
            (third_fd - &third).norm() <= 1e-3 * third.norm().max(1.0),
            "third derivative mismatch"
        );
    }

    #[test]
    fn composite_derivatives_match_finite_differences() {
        let base = ProblemOracle::nesterov_lb(5, 1e-2, Lipschitz::default()).unwrap();
        let center = Vector::from_vec(vec![0.2, -0.1, 0.4, 0.0, -0.3]);
        let x = Vector::from_vec(vec![1.0, 0.5, -0.2, 0.8, 0.1]);
        let h = Vector::from_vec(vec![0.3, -0.7, 0.2, 0.1, -0.4]);
        for exponent in [2u32, 3, 4] {
            let oracle = CompositeOracle::new(&base, ProxTerm::new(center.clone(), 0.7, exponent));
            fd_check(&oracle, &x, &h);
        }
    }

    #[test]
    fn prox_vanishes_at_center() {
        let center = Vector::from_vec(vec![1.0, 2.0]);
        for exponent in [2u32, 3, 4] {
            let prox = ProxTerm::new(center.clone(), 0.5, exponent);
            assert_eq!(prox.value(&center), 0.0);
            assert_eq!(prox.gradient(&center).norm(), 0.0);
        }
    }
}
