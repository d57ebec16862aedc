//! Weighted linear risk score passed through a bounded activation.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gbdt::sigmoid;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    /// min(max(z, 0), 1)
    ReluClamped,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::ReluClamped => z.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams {
            activation: Activation::Sigmoid,
            epochs: 300,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::InvalidHyperparameter(
                "linear_risk: epochs >= 1, learning_rate > 0, l2 >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearState {
    pub activation: Activation,
    pub bias: f64,
    /// Weights on the raw (unstandardised) features.
    pub weights: Vec<f64>,
}

impl LinearState {
    pub fn linear_score(&self, row: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

pub(crate) fn standardizer(x: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.n_rows().max(1) as f64;
    let mut mean = vec![0.0; x.n_cols()];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; x.n_cols()];
    for row in x.rows() {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    std.iter_mut().for_each(|s| {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    });
    (mean, std)
}

/// Full-batch gradient descent on the mean logistic loss in standardised
/// coordinates, from a seeded small random start.
pub(crate) fn fit(params: &LinearParams, x: &FeatureMatrix, y: &[u8], seed: u64) -> LinearState {
    let (mean, std) = standardizer(x);
    let d = x.n_cols();
    let n = x.n_rows() as f64;
    let z: Vec<f64> = x
        .rows()
        .flat_map(|r| r.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect::<Vec<_>>())
        .collect();
    let mut rng = seed::rng(seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w: Vec<f64> = (0..d).map(|_| init.sample(&mut rng)).collect();
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    for _ in 0..params.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (i, &label) in y.iter().enumerate() {
            let row = &z[i * d..(i + 1) * d];
            let s = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
            let r = sigmoid(s) - label as f64;
            grad_b += r;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
        }
        b -= params.learning_rate * grad_b / n;
        for (a, g) in w.iter_mut().zip(&grad) {
            *a -= params.learning_rate * (g / n + params.l2 * *a);
        }
    }
    let weights: Vec<f64> = w.iter().zip(&std).map(|(a, s)| a / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(a, m)| a * m).sum::<f64>();
    LinearState {
        activation: params.activation,
        bias,
        weights,
    }
}
