//! Problem oracles with closed-form derivatives up to the directional third
//! order, plus dataset ingestion and synthetic instance generation.

mod libsvm;
mod synth;

pub use libsvm::{parse_libsvm, LibsvmOptions};
pub use synth::{synth_logistic, synth_poisson, SynthKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_finite_vector, symmetrize, Matrix, Vector};

/// Dense feature matrix with labels. Rows are samples a_i.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub name: String,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 || self.dim() == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: self.labels.len(),
            });
        }
        for i in 0..self.n() {
            for j in 0..self.dim() {
                if !self.features[(i, j)].is_finite() {
                    return Err(Error::NonFinite {
                        context: "dataset features",
                        index: i * self.dim() + j,
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks labels are in {-1, +1}.
    pub fn validate_classification(&self) -> Result<()> {
        for (row, &b) in self.labels.iter().enumerate() {
            if b != 1.0 && b != -1.0 {
                return Err(Error::InvalidLabel { row, value: b });
            }
        }
        Ok(())
    }

    /// Checks labels are nonnegative integers.
    pub fn validate_counts(&self) -> Result<()> {
        for (row, &b) in self.labels.iter().enumerate() {
            if b < 0.0 || b.fract() != 0.0 || !b.is_finite() {
                return Err(Error::InvalidLabel { row, value: b });
            }
        }
        Ok(())
    }
}

/// Rescales every nonzero row to unit norm. Zero rows pass through; the
/// returned count reports how many were left untouched.
pub fn normalize_rows(dataset: &mut Dataset) -> usize {
    let mut zero_rows = 0;
    for i in 0..dataset.n() {
        let norm = dataset.features.row(i).norm();
        if norm == 0.0 {
            zero_rows += 1;
            continue;
        }
        for j in 0..dataset.dim() {
            dataset.features[(i, j)] /= norm;
        }
    }
    zero_rows
}

/// Which derivative components an oracle call should produce.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalRequest<'a> {
    pub gradient: bool,
    pub hessian: bool,
    /// Direction h for the directional third derivative D^3 f(x)[h]^2.
    pub third_dir: Option<&'a Vector>,
}

#[derive(Debug, Clone)]
pub struct OracleResponse {
    pub value: f64,
    pub gradient: Option<Vector>,
    pub hessian: Option<Matrix>,
    pub third_dir: Option<Vector>,
}

/// Callable bundle returning f, grad f, hess f and D^3 f(x)[h]^2 for a fixed
/// problem instance. Implementations must be pure and thread-safe.
pub trait Oracle: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse>;

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.eval(x, EvalRequest::default())?.value)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let resp = self.eval(
            x,
            EvalRequest {
                gradient: true,
                ..Default::default()
            },
        )?;
        Ok(resp.gradient.expect("gradient requested"))
    }

    fn value_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let resp = self.eval(
            x,
            EvalRequest {
                gradient: true,
                ..Default::default()
            },
        )?;
        Ok((resp.value, resp.gradient.expect("gradient requested")))
    }

    fn hessian(&self, x: &Vector) -> Result<Matrix> {
        let resp = self.eval(
            x,
            EvalRequest {
                hessian: true,
                ..Default::default()
            },
        )?;
        Ok(resp.hessian.expect("hessian requested"))
    }

    fn third_dir(&self, x: &Vector, h: &Vector) -> Result<Vector> {
        let resp = self.eval(
            x,
            EvalRequest {
                third_dir: Some(h),
                ..Default::default()
            },
        )?;
        Ok(resp.third_dir.expect("third_dir requested"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Logistic,
    NesterovLb,
    Poisson,
}

/// User-supplied smoothness constants L_1, L_2, L_3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
}

impl Lipschitz {
    pub fn get(&self, p: u32) -> Option<f64> {
        match p {
            1 => self.l1,
            2 => self.l2,
            3 => self.l3,
            _ => None,
        }
    }
}

/// Problem instance: loss kind, data, l2 regularizer mu and smoothness
/// constants. Evaluation is pure; the struct is immutable after construction.
pub struct ProblemOracle {
    kind: ProblemKind,
    dataset: Option<Dataset>,
    mu: f64,
    dim: usize,
    pub lipschitz: Lipschitz,
    pub fstar_hint: Option<f64>,
}

impl ProblemOracle {
    pub fn logistic(dataset: Dataset, mu: f64, lipschitz: Lipschitz) -> Result<Self> {
        dataset.validate()?;
        dataset.validate_classification()?;
        if mu < 0.0 {
            return Err(Error::InvalidArgument("mu must be nonnegative".into()));
        }
        let dim = dataset.dim();
        Ok(Self {
            kind: ProblemKind::Logistic,
            dataset: Some(dataset),
            mu,
            dim,
            lipschitz,
            fstar_hint: None,
        })
    }

    pub fn poisson(dataset: Dataset, mu: f64, lipschitz: Lipschitz) -> Result<Self> {
        dataset.validate()?;
        dataset.validate_counts()?;
        if mu < 0.0 {
            return Err(Error::InvalidArgument("mu must be nonnegative".into()));
        }
        let dim = dataset.dim();
        Ok(Self {
            kind: ProblemKind::Poisson,
            dataset: Some(dataset),
            mu,
            dim,
            lipschitz,
        fstar_hint: None,
        })
    }

    pub fn nesterov_lb(dim: usize, mu: f64, lipschitz: Lipschitz) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "nesterov_lb requires dimension >= 2".into(),
            ));
        }
        if mu < 0.0 {
            return Err(Error::InvalidArgument("mu must be nonnegative".into()));
        }
        Ok(Self {
            kind: ProblemKind::NesterovLb,
            dataset: None,
            mu,
            dim,
            lipschitz,
            fstar_hint: None,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.dataset.as_ref()
    }

    pub fn with_fstar_hint(mut self, fstar: f64) -> Self {
        self.fstar_hint = Some(fstar);
        self
    }

    fn eval_logistic(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse> {
        let data = self.dataset.as_ref().expect("logistic has a dataset");
        let a = &data.features;
        let n = data.n();
        let inv_n = 1.0 / n as f64;
        let t = a * x; // margins <a_i, x>

        // Scalar loss l(t) = log(1 + e^{-b t}) through the stable softplus
        // log(1+e^z) = max(z,0) + log(1+e^{-|z|}); s = sigmoid(-b t).
        let mut value = 0.0;
        let mut lp = Vector::zeros(n); // l'(t_i)
        let mut lpp = Vector::zeros(n); // l''(t_i)
        let mut lppp = Vector::zeros(n); // l'''(t_i)
        let need_second = request.hessian;
        let need_third = request.third_dir.is_some();
        for i in 0..n {
            let b = data.labels[i];
            let z = -b * t[i];
            value += z.max(0.0) + (-z.abs()).exp().ln_1p();
            let s = stable_sigmoid(z);
            lp[i] = -b * s;
            if need_second || need_third {
                lpp[i] = s * (1.0 - s);
            }
            if need_third {
                lppp[i] = -b * s * (1.0 - s) * (1.0 - 2.0 * s);
            }
        }
        value *= inv_n;
        value += 0.5 * self.mu * x.norm_squared();

        let gradient = if request.gradient {
            let mut g = a.transpose() * &lp;
            g *= inv_n;
            g.axpy(self.mu, x, 1.0);
            Some(g)
        } else {
            None
        };

        let hessian = if request.hessian {
            let mut scaled = a.clone();
            for i in 0..n {
                let w = lpp[i] * inv_n;
                for j in 0..self.dim {
                    scaled[(i, j)] *= w;
                }
            }
            let mut h = a.transpose() * scaled;
            symmetrize(&mut h);
            for j in 0..self.dim {
                h[(j, j)] += self.mu;
            }
            Some(h)
        } else {
            None
        };

        let third_dir = match request.third_dir {
            Some(h) => {
                if h.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: h.len(),
                    });
                }
                let ah = a * h;
                let mut coef = Vector::zeros(n);
                for i in 0..n {
                    coef[i] = lppp[i] * ah[i] * ah[i] * inv_n;
                }
                // mu-term is quadratic: no third-order contribution.
                Some(a.transpose() * coef)
            }
            None => None,
        };

        Ok(OracleResponse {
            value,
            gradient,
            hessian,
            third_dir,
        })
    }

    fn eval_nesterov_lb(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse> {
        let d = self.dim;
        // f = 1/4 sum (x_i - x_{i+1})^4 - x_1 + mu/2 ||x||^2
        let mut value = 0.0;
        for i in 0..d - 1 {
            let delta = x[i] - x[i + 1];
            value += 0.25 * delta.powi(4);
        }
        value -= x[0];
        value += 0.5 * self.mu * x.norm_squared();

        let gradient = if request.gradient {
            let mut g = Vector::zeros(d);
            for i in 0..d - 1 {
                let cube = (x[i] - x[i + 1]).powi(3);
                g[i] += cube;
                g[i + 1] -= cube;
            }
            g[0] -= 1.0;
            g.axpy(self.mu, x, 1.0);
            Some(g)
        } else {
            None
        };

        let hessian = if request.hessian {
            let mut h = Matrix::zeros(d, d);
            for i in 0..d - 1 {
                let w = 3.0 * (x[i] - x[i + 1]).powi(2);
                h[(i, i)] += w;
                h[(i + 1, i + 1)] += w;
                h[(i, i + 1)] -= w;
                h[(i + 1, i)] -= w;
            }
            for j in 0..d {
                h[(j, j)] += self.mu;
            }
            Some(h)
        } else {
            None
        };

        let third_dir = match request.third_dir {
            Some(hv) => {
                if hv.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: hv.len(),
                    });
                }
                let mut td = Vector::zeros(d);
                for i in 0..d - 1 {
                    let w = 6.0 * (x[i] - x[i + 1]) * (hv[i] - hv[i + 1]).powi(2);
                    td[i] += w;
                    td[i + 1] -= w;
                }
                Some(td)
            }
            None => None,
        };

        Ok(OracleResponse {
            value,
            gradient,
            hessian,
            third_dir,
        })
    }

    fn eval_poisson(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse> {
        let data = self.dataset.as_ref().expect("poisson has a dataset");
        let a = &data.features;
        let n = data.n();
        let t = a * x;
        for i in 0..n {
            if t[i].abs() > 700.0 {
                return Err(Error::ExponentOverflow {
                    index: i,
                    value: t[i].abs(),
                });
            }
        }

        // f = sum e^{t_i} - b_i t_i (+ mu/2 ||x||^2 when regularized)
        let mut value = 0.0;
        let mut et = Vector::zeros(n);
        for i in 0..n {
            et[i] = t[i].exp();
            value += et[i] - data.labels[i] * t[i];
        }
        value += 0.5 * self.mu * x.norm_squared();

        let gradient = if request.gradient {
            let mut coef = et.clone();
            for i in 0..n {
                coef[i] -= data.labels[i];
            }
            let mut g = a.transpose() * coef;
            g.axpy(self.mu, x, 1.0);
            Some(g)
        } else {
            None
        };

        let hessian = if request.hessian {
            let mut scaled = a.clone();
            for i in 0..n {
                for j in 0..self.dim {
                    scaled[(i, j)] *= et[i];
                }
            }
            let mut h = a.transpose() * scaled;
            symmetrize(&mut h);
            for j in 0..self.dim {
                h[(j, j)] += self.mu;
            }
            Some(h)
        } else {
            None
        };

        let third_dir = match request.third_dir {
            Some(hv) => {
                if hv.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: hv.len(),
                    });
                }
                let ah = a * hv;
                let mut coef = Vector::zeros(n);
                for i in 0..n {
                    coef[i] = et[i] * ah[i] * ah[i];
                }
                Some(a.transpose() * coef)
            }
            None => None,
        };

        Ok(OracleResponse {
            value,
            gradient,
            hessian,
            third_dir,
        })
    }
}

impl Oracle for ProblemOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector, request: EvalRequest) -> Result<OracleResponse> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        check_finite_vector(x, "oracle evaluation point")?;
        let resp = match self.kind {
            ProblemKind::Logistic => self.eval_logistic(x, request)?,
            ProblemKind::NesterovLb => self.eval_nesterov_lb(x, request)?,
            ProblemKind::Poisson => self.eval_poisson(x, request)?,
        };
        if !resp.value.is_finite() {
            return Err(Error::NonFinite {
                context: "oracle value",
                index: 0,
            });
        }
        if let Some(g) = &resp.gradient {
            check_finite_vector(g, "oracle gradient")?;
        }
        Ok(resp)
    }
}

/// Numerically stable 1/(1+e^{-z}).
fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_logistic() -> ProblemOracle {
        // single sample a = (1, 0), b = +1
        let data = Dataset {
            features: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            labels: vec![1.0],
            name: "tiny".into(),
        };
        ProblemOracle::logistic(data, 0.0, Lipschitz::default()).unwrap()
    }

    #[test]
    fn logistic_at_zero() {
        let oracle = tiny_logistic();
        let x = Vector::zeros(2);
        let (f, g) = oracle.value_gradient(&x).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[0] - (-0.5)).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn logistic_zero_gradient_matches_mean_label_form() {
        // x = 0, mu = 0: gradient = -(1/(2n)) sum b_i a_i
        let data = Dataset {
            features: Matrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 1.0, 0.25, -2.0]),
            labels: vec![1.0, -1.0, 1.0],
            name: "t".into(),
        };
        let oracle = ProblemOracle::logistic(data.clone(), 0.0, Lipschitz::default()).unwrap();
        let g = oracle.gradient(&Vector::zeros(2)).unwrap();
        let mut expected = Vector::zeros(2);
        for i in 0..3 {
            for j in 0..2 {
                expected[j] -= data.labels[i] * data.features[(i, j)] / 6.0;
            }
        }
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn logistic_extreme_margins_stay_finite() {
        let oracle = tiny_logistic();
        let x = Vector::from_vec(vec![500.0, 0.0]);
        let resp = oracle
            .eval(
                &x,
                EvalRequest {
                    gradient: true,
                    hessian: true,
                    third_dir: None,
                },
            )
            .unwrap();
        assert!(resp.value.is_finite());
        assert!(resp.value >= 0.0);
        let x = Vector::from_vec(vec![-500.0, 0.0]);
        let resp = oracle.eval(&x, EvalRequest::default()).unwrap();
        assert!((resp.value - 500.0).abs() < 1e-9);
    }

    #[test]
    fn nesterov_values() {
        let oracle = ProblemOracle::nesterov_lb(2, 0.0, Lipschitz::default()).unwrap();
        let zero = Vector::zeros(2);
        let (f, g) = oracle.value_gradient(&zero).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[1], 0.0);

        let ones = Vector::from_element(2, 1.0);
        let (f, g) = oracle.value_gradient(&ones).unwrap();
        assert_eq!(f, -1.0);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[1], 0.0);

        let x = Vector::from_vec(vec![1.0, 0.0]);
        let (f, g) = oracle.value_gradient(&x).unwrap();
        assert!((f - (-0.75)).abs() < 1e-15);
        assert!((g[0] - 0.0).abs() < 1e-15);
        assert!((g[1] - (-1.0)).abs() < 1e-15);
    }

    #[test]
    fn nesterov_rejects_small_dim() {
        assert!(ProblemOracle::nesterov_lb(1, 0.0, Lipschitz::default()).is_err());
    }

    #[test]
    fn poisson_values() {
        let data = Dataset {
            features: Matrix::from_row_slice(1, 1, &[1.0]),
            labels: vec![1.0],
            name: "p".into(),
        };
        let oracle = ProblemOracle::poisson(data, 0.0, Lipschitz::default()).unwrap();
        let (f, g) = oracle.value_gradient(&Vector::zeros(1)).unwrap();
        assert_eq!(f, 1.0);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn poisson_overflow_reports_index() {
        let data = Dataset {
            features: Matrix::from_row_slice(2, 1, &[0.001, 1.0]),
            labels: vec![0.0, 2.0],
            name: "p".into(),
        };
        let oracle = ProblemOracle::poisson(data, 0.0, Lipschitz::default()).unwrap();
        match oracle.value(&Vector::from_vec(vec![800.0])) {
            Err(Error::ExponentOverflow { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn poisson_rejects_bad_labels() {
        let data = Dataset {
            features: Matrix::from_row_slice(1, 1, &[1.0]),
            labels: vec![-2.0],
            name: "p".into(),
        };
        assert!(matches!(
            ProblemOracle::poisson(data, 0.0, Lipschitz::default()),
            Err(Error::InvalidLabel { .. })
        ));
    }

    #[test]
    fn normalize_rows_examples() {
        let mut data = Dataset {
            features: Matrix::from_row_slice(3, 2, &[3.0, 4.0, 1.0, 0.0, 0.0, 0.0]),
            labels: vec![1.0, -1.0, 1.0],
            name: "n".into(),
        };
        let zero_rows = normalize_rows(&mut data);
        assert_eq!(zero_rows, 1);
        assert!((data.features[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((data.features[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(data.features[(1, 0)], 1.0);
        for i in 0..2 {
            let norm = data.features.row(i).norm();
            assert!((norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let oracle = tiny_logistic();
        assert!(matches!(
            oracle.value(&Vector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
