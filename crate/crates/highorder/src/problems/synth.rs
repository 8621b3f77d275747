//! Deterministic synthetic instance generators.
//!
//! Generator recipe (recorded in `Dataset.name`):
//! - logistic: rows are standard-normal draws normalized to unit length;
//!   labels come from a planted linear model sign(<a_i, w>) with a 10% label
//!   flip, w itself a unit-normalized normal draw.
//! - poisson: rows are N(0, 1/d) draws rescaled so |<a_i, w>| <= 8 for the
//!   planted w with entries U(-1, 1); counts are Poisson(exp(<a_i, w>)).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Uniform};

use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};
use crate::problems::{normalize_rows, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Logistic,
    Poisson,
}

/// Planted-model logistic instance: unit rows, labels in {-1, +1}.
pub fn synth_logistic(n: usize, d: usize, seed: u64) -> Dataset {
    assert!(n >= 1 && d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut planted = Vector::zeros(d);
    for j in 0..d {
        planted[j] = StandardNormal.sample(&mut rng);
    }
    let norm = planted.norm();
    if norm > 0.0 {
        planted /= norm;
    }

    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            features[(i, j)] = StandardNormal.sample(&mut rng);
        }
        let margin: f64 = (0..d).map(|j| features[(i, j)] * planted[j]).sum();
        let mut label = if margin >= 0.0 { 1.0 } else { -1.0 };
        if rng.gen::<f64>() < 0.1 {
            label = -label;
        }
        labels.push(label);
    }

    let mut dataset = Dataset {
        features,
        labels,
        name: format!("synth-logistic(n={n},d={d},seed={seed},flip=0.1,rows=unit-normal)"),
    };
    normalize_rows(&mut dataset);
    dataset
}

/// Planted-model Poisson instance with bounded margins so exp stays in range.
pub fn synth_poisson(n: usize, d: usize, seed: u64) -> Dataset {
    assert!(n >= 1 && d >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = Uniform::new_inclusive(-1.0, 1.0);

    let mut planted = Vector::zeros(d);
    for j in 0..d {
        planted[j] = uniform.sample(&mut rng);
    }

    let scale = 1.0 / (d as f64).sqrt();
    let margin_cap = 8.0;
    let mut features = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[(i, j)] = z * scale;
        }
        let mut margin: f64 = (0..d).map(|j| features[(i, j)] * planted[j]).sum();
        if margin.abs() > margin_cap {
            let shrink = margin_cap / margin.abs();
            for j in 0..d {
                features[(i, j)] *= shrink;
            }
            margin *= shrink;
        }
        let rate = margin.exp();
        let count = Poisson::new(rate).expect("positive rate").sample(&mut rng);
        labels.push(count.floor());
    }

    Dataset {
        features,
        labels,
        name: format!("synth-poisson(n={n},d={d},seed={seed},margin_cap={margin_cap},rows=normal/sqrt(d))"),
    }
}
