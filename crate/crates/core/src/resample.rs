//! Minority oversampling on an encoded training matrix.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    Smote,
    RandomOversample,
    #[default]
    None,
}

fn one() -> f64 {
    1.0
}
fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    #[serde(default)]
    pub method: ResampleMethod,
    /// Minority/majority ratio after resampling.
    #[serde(default = "one")]
    pub target_ratio: f64,
    #[serde(default = "five")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        ResamplePlan {
            method: ResampleMethod::None,
            target_ratio: 1.0,
            k_neighbors: 5,
            seed: 0,
        }
    }
}

impl ResamplePlan {
    pub fn smote(seed: u64) -> Self {
        ResamplePlan {
            method: ResampleMethod::Smote,
            seed,
            ..Default::default()
        }
    }

    pub fn random_oversample(seed: u64) -> Self {
        ResamplePlan {
            method: ResampleMethod::RandomOversample,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidResamplePlan(format!(
                "target ratio must lie in (0, 1], got {}",
                self.target_ratio
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::InvalidResamplePlan("k_neighbors must be >= 1".into()));
        }
        Ok(())
    }
}

/// Oversample the minority class of `(x, y)`. Original rows keep their order
/// and new rows are appended after them.
pub fn resample(x: &FeatureMatrix, y: &[u8], plan: &ResamplePlan) -> Result<(FeatureMatrix, Vec<u8>)> {
    plan.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(x.n_rows(), y.len()));
    }
    if plan.method == ResampleMethod::None {
        return Ok((x.clone(), y.to_vec()));
    }
    x.check_finite()?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass);
    }
    let minority_label = u8::from(positives * 2 <= y.len());
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let majority = y.len() - minority.len();
    let wanted = (plan.target_ratio * majority as f64).round() as usize;
    let extra = wanted.saturating_sub(minority.len());

    let mut rng = seed::rng(plan.seed);
    let mut out = x.clone();
    match plan.method {
        ResampleMethod::RandomOversample => {
            for _ in 0..extra {
                let pick = minority[rng.random_range(0..minority.len())];
                out.push_row(x.row(pick))?;
            }
        }
        ResampleMethod::Smote => {
            if minority.len() <= plan.k_neighbors {
                return Err(Error::TooFewMinority {
                    minority: minority.len(),
                    k: plan.k_neighbors,
                });
            }
            if extra > 0 {
                let neighbors = nearest_neighbors(x, &minority, plan.k_neighbors);
                let mut synthetic = vec![0.0; x.n_cols()];
                for _ in 0..extra {
                    let a = rng.random_range(0..minority.len());
                    let b = neighbors[a][rng.random_range(0..plan.k_neighbors)];
                    let u: f64 = rng.random();
                    let (xa, xb) = (x.row(minority[a]), x.row(minority[b]));
                    for (s, (p, q)) in synthetic.iter_mut().zip(xa.iter().zip(xb)) {
                        *s = p + u * (q - p);
                    }
                    out.push_row(&synthetic)?;
                }
            }
        }
        ResampleMethod::None => unreachable!(),
    }
    let mut labels = y.to_vec();
    labels.resize(out.n_rows(), minority_label);
    Ok((out, labels))
}

/// For each minority row, the positions (into `minority`) of its `k` nearest
/// minority rows by Euclidean distance, ties by position.
fn nearest_neighbors(x: &FeatureMatrix, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    minority
        .par_iter()
        .enumerate()
        .map(|(a, &ra)| {
            let row = x.row(ra);
            let mut dists: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &rb)| {
                    let d: f64 = row
                        .iter()
                        .zip(x.row(rb))
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum();
                    (d, b)
                })
                .collect();
            let cmp = |l: &(f64, usize), r: &(f64, usize)| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1));
            dists.select_nth_unstable_by(k - 1, cmp);
            dists.truncate(k);
            dists.sort_by(cmp);
            dists.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}
