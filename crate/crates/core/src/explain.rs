//! Model-agnostic attributions: permutation-sampled Shapley values and a
//! kernel-weighted ridge surrogate fitted around one instance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::models::Scorer;
use crate::seed;

/// Permutations scored per batch.
const SHAPLEY_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    pub contributions: Vec<f64>,
    /// Mean score over the background (Shapley) or at the training means
    /// (surrogate).
    pub base_value: f64,
    pub instance_score: f64,
    /// Per-feature standard errors; empty for the surrogate.
    #[serde(default)]
    pub std_errors: Vec<f64>,
    /// Standard error of `base_value + sum(contributions) - instance_score`,
    /// excluding floating-point rounding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_std_error: Option<f64>,
}

impl Attribution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column `feature,value` table.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["feature", "value"])?;
        for (name, v) in self.feature_names.iter().zip(&self.contributions) {
            w.write_record([name.as_str(), &v.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// `base_value + sum(contributions) - instance_score`.
    pub fn efficiency_gap(&self) -> f64 {
        self.base_value + self.contributions.iter().sum::<f64>() - self.instance_score
    }
}

fn check_width(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::WidthMismatch { expected, actual });
    }
    Ok(())
}

fn feature_names(background: &FeatureMatrix) -> Vec<String> {
    background.names().to_vec()
}

/// Monte-Carlo Shapley values of `scorer` at `x`.
///
/// Each permutation pairs a random feature order with a background row,
/// walks from the background row to `x` one feature at a time, and credits
/// each feature with the score change it causes. Background rows are drawn
/// in shuffled passes over the whole background, so every row is used
/// equally often up to the final partial pass.
pub fn shapley_sample<S: Scorer + ?Sized>(
    scorer: &S,
    x: &[f64],
    background: &FeatureMatrix,
    n_permutations: usize,
    seed: u64,
) -> Result<Attribution> {
    if background.n_rows() == 0 {
        return Err(Error::EmptyBackground);
    }
    if n_permutations == 0 {
        return Err(Error::InvalidHyperparameter("n_permutations must be >= 1".into()));
    }
    let d = scorer.n_features();
    check_width(d, x.len())?;
    check_width(d, background.n_cols())?;

    let base_scores = scorer.score(background)?;
    let base_value = pairwise_mean(&base_scores);
    let instance_score = scorer.score(&FeatureMatrix::new(1, feature_names(background), x.to_vec())?)?[0];

    // Per permutation: the marginal of every feature.
    let stream = seed::derive(seed, "shapley");
    let n_bg = background.n_rows();
    let pass_stream = seed::derive(seed, "shapley-background");
    let mut starts = Vec::with_capacity(n_permutations);
    for pass in 0..n_permutations.div_ceil(n_bg) {
        let mut order: Vec<usize> = (0..n_bg).collect();
        order.shuffle(&mut seed::rng(pass_stream.wrapping_add(pass as u64)));
        starts.extend(order);
    }
    starts.truncate(n_permutations);
    let chunks: Vec<Result<Vec<Vec<f64>>>> = (0..n_permutations)
        .step_by(SHAPLEY_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let end = (start + SHAPLEY_CHUNK).min(n_permutations);
            let mut orders = Vec::with_capacity(end - start);
            let mut values = Vec::with_capacity((end - start) * (d + 1) * d);
            for p in start..end {
                let mut rng = seed::rng(stream.wrapping_add(p as u64));
                let mut order: Vec<usize> = (0..d).collect();
                order.shuffle(&mut rng);
                let mut z = background.row(starts[p]).to_vec();
                values.extend_from_slice(&z);
                for &j in &order {
                    z[j] = x[j];
                    values.extend_from_slice(&z);
                }
                orders.push(order);
            }
            let batch = FeatureMatrix::new(orders.len() * (d + 1), feature_names(background), values)?;
            let s = scorer.score(&batch)?;
            Ok(orders
                .iter()
                .enumerate()
                .map(|(i, order)| {
                    let path = &s[i * (d + 1)..(i + 1) * (d + 1)];
                    let mut marginal = vec![0.0; d];
                    for (k, &j) in order.iter().enumerate() {
                        marginal[j] = path[k + 1] - path[k];
                    }
                    marginal
                })
                .collect())
        })
        .collect();
    let mut marginals = Vec::with_capacity(n_permutations);
    for chunk in chunks {
        marginals.extend(chunk?);
    }

    let mut contributions = Vec::with_capacity(d);
    let mut std_errors = Vec::with_capacity(d);
    let mut column = vec![0.0; n_permutations];
    for j in 0..d {
        for (c, m) in column.iter_mut().zip(&marginals) {
            *c = m[j];
        }
        let (mean, se) = mean_and_se(&column);
        contributions.push(mean);
        std_errors.push(se);
    }
    // The marginals of one permutation telescope to f(x) - f(b), so the
    // efficiency gap is mean f(background) - mean f(used b). Full passes
    // cancel; only the final partial pass, a draw without replacement of
    // `rest` rows, carries sampling error.
    let rest = n_permutations % n_bg;
    let efficiency_std_error = if rest == 0 {
        0.0
    } else {
        let (_, se_full) = mean_and_se(&base_scores);
        // se_full^2 * n_bg is the background variance S^2.
        let var_rest = se_full * se_full * n_bg as f64 / rest as f64 * (1.0 - rest as f64 / n_bg as f64);
        rest as f64 / n_permutations as f64 * var_rest.sqrt()
    };
    Ok(Attribution {
        feature_names: feature_names(background),
        contributions,
        base_value,
        instance_score,
        std_errors,
        efficiency_std_error: Some(efficiency_std_error),
    })
}

/// Sum by recursive halving so the result does not depend on how work was split.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn pairwise_mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_mean(v);
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean absolute contribution per feature over many attributions.
pub fn mean_abs_contributions(attributions: &[Attribution]) -> Vec<(String, f64)> {
    let Some(first) = attributions.first() else {
        return Vec::new();
    };
    let n = attributions.len() as f64;
    let mut out: Vec<(String, f64)> = first
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let total: f64 = attributions.iter().map(|a| a.contributions[j].abs()).sum();
            (name.clone(), total / n)
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

/// Per-feature training statistics that drive surrogate perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features resampled jointly from their empirical distribution, one
    /// group per encoded categorical column. Every other feature gets
    /// Gaussian noise.
    pub categorical_groups: Vec<CategoricalGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalGroup {
    pub features: Vec<usize>,
    /// Distinct encoded tuples and their training frequencies.
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TrainStats {
    /// Treat every feature as numeric.
    pub fn numeric(x: &FeatureMatrix) -> Result<Self> {
        Self::from_sources(x, &vec![(String::new(), false); x.n_cols()])
    }

    /// `sources` maps each feature to its raw column and whether that column
    /// is categorical, as returned by `FittedEncoder::feature_sources`.
    pub fn from_sources(x: &FeatureMatrix, sources: &[(String, bool)]) -> Result<Self> {
        check_width(x.n_cols(), sources.len())?;
        if x.n_rows() == 0 {
            return Err(Error::TooFewRows(0));
        }
        let n = x.n_rows() as f64;
        let mut mean = Vec::with_capacity(x.n_cols());
        let mut std = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            std.push(v.sqrt());
        }
        let mut categorical_groups = Vec::new();
        let mut j = 0;
        while j < sources.len() {
            let (name, categorical) = &sources[j];
            let mut end = j + 1;
            while end < sources.len() && sources[end].0 == *name && sources[end].1 == *categorical {
                end += 1;
            }
            if *categorical {
                let features: Vec<usize> = (j..end).collect();
                let mut counts: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
                for r in x.rows() {
                    *counts.entry(r[j..end].iter().map(|v| v.to_bits()).collect()).or_default() += 1;
                }
                let (values, weights) = counts
                    .into_iter()
                    .map(|(k, c)| (k.into_iter().map(f64::from_bits).collect(), c as f64 / n))
                    .unzip();
                categorical_groups.push(CategoricalGroup {
                    features,
                    values,
                    weights,
                });
            }
            j = end;
        }
        Ok(TrainStats {
            feature_names: x.names().to_vec(),
            mean,
            std,
            categorical_groups,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub n_samples: usize,
    /// Kernel width on standardised coordinates; `None` means 0.75 * sqrt(d).
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            n_samples: 5000,
            kernel_width: None,
            ridge: 1.0,
            top_k: 10,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_samples < d + 2 {
            return Err(Error::InvalidSurrogateConfig(format!(
                "n_samples {} must be at least d + 2 = {}",
                self.n_samples,
                d + 2
            )));
        }
        if let Some(w) = self.kernel_width {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSurrogateConfig(format!("kernel width {w} must be positive")));
            }
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(Error::InvalidSurrogateConfig(format!("ridge {} must be >= 0", self.ridge)));
        }
        Ok(())
    }

    fn width(&self, d: usize) -> f64 {
        self.kernel_width.unwrap_or(0.75 * (d as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFit {
    /// `coefficient_j * (x_j - mean_j)`.
    pub attribution: Attribution,
    /// Slopes in raw feature units.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Kernel-weighted R^2; 0 when the scores do not vary.
    pub r_squared: f64,
    /// Largest coefficients by magnitude.
    pub top_features: Vec<(String, f64)>,
}

impl SurrogateFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fit a weighted ridge regression to the scorer's outputs on perturbations
/// of `x`.
pub fn local_surrogate<S: Scorer + ?Sized>(
    scorer: &S,
    x: &[f64],
    cfg: &SurrogateConfig,
    stats: &TrainStats,
) -> Result<SurrogateFit> {
    let d = scorer.n_features();
    check_width(d, x.len())?;
    check_width(d, stats.mean.len())?;
    cfg.validate(d)?;
    let n = cfg.n_samples;

    let mut grouped = vec![false; d];
    for g in &stats.categorical_groups {
        for &j in &g.features {
            grouped[j] = true;
        }
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, "surrogate"));
    let mut samples = Vec::with_capacity(n * d);
    for _ in 0..n {
        let start = samples.len();
        for j in 0..d {
            let v = if grouped[j] || stats.std[j] == 0.0 {
                x[j]
            } else {
                let noise = Normal::new(0.0, stats.std[j]).map_err(|e| Error::InvalidSurrogateConfig(e.to_string()))?;
                x[j] + noise.sample(&mut rng)
            };
            samples.push(v);
        }
        for g in &stats.categorical_groups {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = g.values.len() - 1;
            for (i, w) in g.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            for (k, &j) in g.features.iter().enumerate() {
                samples[start + j] = g.values[pick][k];
            }
        }
    }
    let z = FeatureMatrix::new(n, stats.feature_names.clone(), samples)?;
    let y = scorer.score(&z)?;
    let instance_score = scorer.score(&FeatureMatrix::new(1, stats.feature_names.clone(), x.to_vec())?)?[0];

    // Standardised coordinates relative to x; features without spread are
    // left out of both the kernel and the regression.
    let scale: Vec<f64> = stats.std.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();
    let width = cfg.width(d);
    let weights: Vec<f64> = z
        .rows()
        .map(|r| {
            let dist2: f64 = r
                .iter()
                .zip(x)
                .zip(&scale)
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum();
            (-dist2 / (width * width)).exp()
        })
        .collect();
    let w_total: f64 = weights.iter().sum();

    let mut z_mean = vec![0.0; d];
    for (r, w) in z.rows().zip(&weights) {
        for j in 0..d {
            z_mean[j] += w * r[j] / scale[j];
        }
    }
    z_mean.iter_mut().for_each(|m| *m /= w_total);
    let y_mean = if y.iter().all(|v| *v == y[0]) {
        y[0]
    } else {
        y.iter().zip(&weights).map(|(v, w)| v * w).sum::<f64>() / w_total
    };

    let active: Vec<usize> = (0..d)
        .filter(|&j| {
            z.rows()
                .zip(&weights)
                .any(|(r, w)| *w > 0.0 && (r[j] / scale[j] - z_mean[j]).abs() > 1e-12 * (1.0 + z_mean[j].abs()))
        })
        .collect();
    if active.is_empty() {
        return Err(Error::DegeneratePerturbation);
    }

    let p = active.len();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut centred = vec![0.0; p];
    for (r, (&yi, &w)) in z.rows().zip(y.iter().zip(&weights)) {
        for (a, &j) in active.iter().enumerate() {
            centred[a] = r[j] / scale[j] - z_mean[j];
        }
        let yc = yi - y_mean;
        for a in 0..p {
            rhs[a] += w * centred[a] * yc;
            for b in 0..=a {
                gram[(a, b)] += w * centred[a] * centred[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += cfg.ridge;
    }
    let solution = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or(Error::DegeneratePerturbation)?;

    let mut coefficients = vec![0.0; d];
    for (a, &j) in active.iter().enumerate() {
        coefficients[j] = solution[a] / scale[j];
    }
    let intercept = y_mean - (0..d).map(|j| coefficients[j] * z_mean[j] * scale[j]).sum::<f64>();

    let mut sse = 0.0;
    let mut sst = 0.0;
    for (r, (&yi, &w)) in z.rows().zip(y.iter().zip(&weights)) {
        let fit = intercept + r.iter().zip(&coefficients).map(|(v, c)| v * c).sum::<f64>();
        sse += w * (yi - fit).powi(2);
        sst += w * (yi - y_mean).powi(2);
    }
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };

    let contributions: Vec<f64> = (0..d).map(|j| coefficients[j] * (x[j] - stats.mean[j])).collect();
    let base_value = intercept + stats.mean.iter().zip(&coefficients).map(|(m, c)| m * c).sum::<f64>();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
    let top_features = order
        .into_iter()
        .take(cfg.top_k)
        .map(|j| (stats.feature_names[j].clone(), coefficients[j]))
        .collect();
    Ok(SurrogateFit {
        attribution: Attribution {
            feature_names: stats.feature_names.clone(),
            contributions,
            base_value,
            instance_score,
            std_errors: Vec::new(),
            efficiency_std_error: None,
        },
        coefficients,
        intercept,
        r_squared,
        top_features,
    })
}
