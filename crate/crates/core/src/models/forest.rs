//! Gini trees and bagged forests.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Binned, ClassStats, Gini, Grower, Node};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: 10,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` means round(sqrt(d)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 300,
            max_depth: 12,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl CartParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidHyperparameter("cart: min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_samples_leaf == 0 || self.max_features == Some(0) {
            return Err(Error::InvalidHyperparameter(
                "forest: n_trees, min_samples_leaf and max_features must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn features_per_node(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().round() as usize)
            .clamp(1, d.max(1))
    }
}

fn grow(
    binned: &Binned,
    weights: &[f64],
    y: &[u8],
    max_depth: usize,
    min_samples_leaf: usize,
    features: &mut dyn FnMut() -> Vec<usize>,
) -> Node {
    let stats: Vec<ClassStats> = weights
        .iter()
        .zip(y)
        .map(|(&w, &l)| ClassStats {
            weight: w,
            positive: w * l as f64,
        })
        .collect();
    let crit = Gini {
        min_samples_leaf: min_samples_leaf as f64,
    };
    let grower = Grower {
        binned,
        stats: &stats,
        criterion: &crit,
        max_depth,
    };
    let rows = (0..y.len()).filter(|&i| weights[i] > 0.0).collect();
    grower.grow(rows, features)
}

pub(crate) fn fit_cart(params: &CartParams, x: &FeatureMatrix, y: &[u8]) -> Node {
    let binned = Binned::new(x);
    let all: Vec<usize> = (0..x.n_cols()).collect();
    grow(&binned, &vec![1.0; y.len()], y, params.max_depth, params.min_samples_leaf, &mut || {
        all.clone()
    })
}

/// Trees are independent given `seed + index`, so the parallel schedule
/// cannot affect the result.
pub(crate) fn fit_forest(params: &ForestParams, x: &FeatureMatrix, y: &[u8], seed: u64, balanced: bool) -> Vec<Node> {
    let binned = Binned::new(x);
    let d = x.n_cols();
    let per_node = params.features_per_node(d);
    let n = y.len();
    let by_class: [Vec<usize>; 2] = [
        (0..n).filter(|&i| y[i] == 0).collect(),
        (0..n).filter(|&i| y[i] == 1).collect(),
    ];
    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed.wrapping_add(t as u64));
            let mut weights = vec![0.0; n];
            if balanced {
                let m = by_class[0].len().min(by_class[1].len());
                for class in &by_class {
                    for _ in 0..m {
                        weights[class[rng.random_range(0..class.len())]] += 1.0;
                    }
                }
            } else {
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1.0;
                }
            }
            grow(&binned, &weights, y, params.max_depth, params.min_samples_leaf, &mut || {
                let mut f = sample(&mut rng, d, per_node).into_vec();
                f.sort_unstable();
                f
            })
        })
        .collect()
}
