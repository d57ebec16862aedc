//! k-nearest-neighbour voting and Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::linear::standardizer;
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 15 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidHyperparameter("knn: k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState {
    pub k: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Standardised training rows, row-major.
    pub points: Vec<f64>,
    pub labels: Vec<u8>,
}

impl KnnState {
    pub(crate) fn fit(params: &KnnParams, x: &FeatureMatrix, y: &[u8]) -> Self {
        let (mean, std) = standardizer(x);
        let points = x
            .rows()
            .flat_map(|r| r.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect::<Vec<_>>())
            .collect();
        KnnState {
            k: params.k,
            mean,
            std,
            points,
            labels: y.to_vec(),
        }
    }

    /// Fraction of positives among the k nearest training rows, ties by index.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let d = self.mean.len();
        let q: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let p = &self.points[i * d..(i + 1) * d];
                (p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let hits: usize = dist[..k].iter().map(|&(_, i)| self.labels[i] as usize).sum();
        hits as f64 / k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesParams {
    /// Added to every variance as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        NaiveBayesParams { var_smoothing: 1e-9 }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_smoothing >= 0.0 && self.var_smoothing.is_finite()) {
            return Err(Error::InvalidHyperparameter("naive_bayes: var_smoothing must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesState {
    /// Indexed by class label.
    pub prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl NaiveBayesState {
    pub(crate) fn fit(params: &NaiveBayesParams, x: &FeatureMatrix, y: &[u8]) -> Self {
        let d = x.n_cols();
        let mut count = [0.0f64; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (row, &c) in x.rows().zip(y) {
            count[c as usize] += 1.0;
            for (m, v) in mean[c as usize].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= count[c]);
        }
        for (row, &c) in x.rows().zip(y) {
            for ((s, v), m) in var[c as usize].iter_mut().zip(row).zip(&mean[c as usize]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            var[c].iter_mut().for_each(|s| *s /= count[c]);
        }
        let (_, std) = standardizer(x);
        let max_var = std.iter().map(|s| s * s).fold(0.0, f64::max);
        let floor = (params.var_smoothing * max_var).max(1e-12);
        for v in var.iter_mut() {
            v.iter_mut().for_each(|s| *s += floor);
        }
        let n = count[0] + count[1];
        NaiveBayesState {
            prior: [count[0] / n, count[1] / n],
            mean,
            var,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let log_joint = |c: usize| {
            self.prior[c].ln()
                + row
                    .iter()
                    .zip(&self.mean[c])
                    .zip(&self.var[c])
                    .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v))
                    .sum::<f64>()
        };
        let (l0, l1) = (log_joint(0), log_joint(1));
        // Posterior of class 1 as a logistic of the log-odds.
        super::gbdt::sigmoid(l1 - l0)
    }
}
