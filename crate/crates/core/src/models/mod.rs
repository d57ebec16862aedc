//! Native learners and ensembles over encoded feature matrices.
//!
//! Every model maps a feature row to a risk score in [0, 1] and serialises to
//! a versioned JSON artifact.

mod forest;
mod gbdt;
mod linear;
mod neighbors;
mod tree;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::metrics;

pub use forest::{CartParams, ForestParams};
pub use gbdt::{logistic_grad_hess, logistic_loss, sigmoid, GbdtParams};
pub use linear::{Activation, LinearParams, LinearState};
pub use neighbors::{KnnParams, KnnState, NaiveBayesParams, NaiveBayesState};
pub use tree::Node;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EnsembleParams {
    #[serde(default)]
    pub members: Vec<ModelSpec>,
}

/// A model family with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    LinearRisk(LinearParams),
    Cart(CartParams),
    RandomForest(ForestParams),
    BalancedRandomForest(ForestParams),
    Gbdt(GbdtParams),
    Knn(KnnParams),
    NaiveBayes(NaiveBayesParams),
    /// Members weighted by their training AvRecall(10, 40).
    WeightedEnsemble(EnsembleParams),
    AverageEnsemble(EnsembleParams),
}

impl ModelSpec {
    pub const FAMILIES: [&'static str; 9] = [
        "linear_risk",
        "cart",
        "random_forest",
        "balanced_random_forest",
        "gbdt",
        "knn",
        "naive_bayes",
        "weighted_ensemble",
        "average_ensemble",
    ];

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::LinearRisk(_) => "linear_risk",
            ModelSpec::Cart(_) => "cart",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::BalancedRandomForest(_) => "balanced_random_forest",
            ModelSpec::Gbdt(_) => "gbdt",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::NaiveBayes(_) => "naive_bayes",
            ModelSpec::WeightedEnsemble(_) => "weighted_ensemble",
            ModelSpec::AverageEnsemble(_) => "average_ensemble",
        }
    }

    /// Default hyperparameters for a family name. Ensembles start empty.
    pub fn defaults(family: &str) -> Result<ModelSpec> {
        Ok(match family {
            "linear_risk" => ModelSpec::LinearRisk(Default::default()),
            "cart" => ModelSpec::Cart(Default::default()),
            "random_forest" => ModelSpec::RandomForest(Default::default()),
            "balanced_random_forest" => ModelSpec::BalancedRandomForest(Default::default()),
            "gbdt" => ModelSpec::Gbdt(Default::default()),
            "knn" => ModelSpec::Knn(Default::default()),
            "naive_bayes" => ModelSpec::NaiveBayes(Default::default()),
            "weighted_ensemble" => ModelSpec::WeightedEnsemble(Default::default()),
            "average_ensemble" => ModelSpec::AverageEnsemble(Default::default()),
            other => return Err(Error::InvalidHyperparameter(format!("unknown model family `{other}`"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::LinearRisk(p) => p.validate(),
            ModelSpec::Cart(p) => p.validate(),
            ModelSpec::RandomForest(p) | ModelSpec::BalancedRandomForest(p) => p.validate(),
            ModelSpec::Gbdt(p) => p.validate(),
            ModelSpec::Knn(p) => p.validate(),
            ModelSpec::NaiveBayes(p) => p.validate(),
            ModelSpec::WeightedEnsemble(e) | ModelSpec::AverageEnsemble(e) => {
                if e.members.is_empty() {
                    return Err(Error::InvalidHyperparameter("ensemble needs at least one member".into()));
                }
                e.members.iter().try_for_each(ModelSpec::validate)
            }
        }
    }

    fn allows_single_class(&self) -> bool {
        matches!(self, ModelSpec::Cart(_) | ModelSpec::Knn(_))
    }
}

impl fmt::Display for ModelSpec {
    /// Compact JSON of the hyperparameters, used in leaderboards.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let json = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&json)
    }
}

/// Members and their mixing weights; weights are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub members: Vec<Model>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Linear(LinearState),
    Tree { root: Node },
    Forest { trees: Vec<Node> },
    Boosted { trees: Vec<Node> },
    Knn(KnnState),
    NaiveBayes(NaiveBayesState),
    Ensemble(EnsembleWeights),
    /// Single-class training data.
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub rounds_completed: usize,
    /// Mean training log-loss before the first and after every boosting round.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_loss: Vec<f64>,
    pub state: ModelState,
}

/// Anything that scores feature rows; lets explainers work on plain functions.
pub trait Scorer: Sync {
    fn n_features(&self) -> usize;
    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>>;
}

impl Scorer for Model {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }
    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_proba(x)
    }
}

/// Scorer over a row function.
pub struct FnScorer<F> {
    pub width: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Scorer for FnScorer<F> {
    fn n_features(&self) -> usize {
        self.width
    }
    fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                actual: x.n_cols(),
            });
        }
        Ok(x.rows().map(&self.f).collect())
    }
}

fn check_training(x: &FeatureMatrix, y: &[u8]) -> Result<(usize, usize)> {
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(x.n_rows(), y.len()));
    }
    if y.len() < 2 {
        return Err(Error::TooFewRows(y.len()));
    }
    x.check_finite()?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    Ok((positives, y.len() - positives))
}

/// Train `spec` on `(x, y)`.
pub fn fit(spec: &ModelSpec, x: &FeatureMatrix, y: &[u8], seed: u64) -> Result<Model> {
    spec.validate()?;
    let (positives, negatives) = check_training(x, y)?;
    let single = positives == 0 || negatives == 0;
    if single && !spec.allows_single_class() {
        return Err(Error::SingleClass);
    }
    let mut rounds_completed = 0;
    let mut training_loss = Vec::new();
    let state = if single {
        ModelState::Constant {
            value: (positives > 0) as u8 as f64,
        }
    } else {
        match spec {
            ModelSpec::LinearRisk(p) => ModelState::Linear(linear::fit(p, x, y, seed)),
            ModelSpec::Cart(p) => ModelState::Tree {
                root: forest::fit_cart(p, x, y),
            },
            ModelSpec::RandomForest(p) => ModelState::Forest {
                trees: forest::fit_forest(p, x, y, seed, false),
            },
            ModelSpec::BalancedRandomForest(p) => ModelState::Forest {
                trees: forest::fit_forest(p, x, y, seed, true),
            },
            ModelSpec::Gbdt(p) => {
                let boosted = gbdt::fit(p, x, y);
                rounds_completed = boosted.trees.len();
                training_loss = boosted.training_loss;
                ModelState::Boosted { trees: boosted.trees }
            }
            ModelSpec::Knn(p) => ModelState::Knn(KnnState::fit(p, x, y)),
            ModelSpec::NaiveBayes(p) => ModelState::NaiveBayes(NaiveBayesState::fit(p, x, y)),
            ModelSpec::WeightedEnsemble(e) | ModelSpec::AverageEnsemble(e) => {
                let members = e
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, m)| fit(m, x, y, seed.wrapping_add(i as u64)))
                    .collect::<Result<Vec<_>>>()?;
                let weights = if matches!(spec, ModelSpec::WeightedEnsemble(_)) {
                    let perf = members
                        .iter()
                        .map(|m| metrics::av_recall_10_40(&m.predict_proba(x)?, y))
                        .collect::<Result<Vec<_>>>()?;
                    derive_weights(members, &perf)?
                } else {
                    average(members)
                };
                ModelState::Ensemble(weights)
            }
        }
    };
    Ok(Model {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        feature_names: x.names().to_vec(),
        seed,
        rounds_completed,
        training_loss,
        state,
    })
}

impl Model {
    /// Wrap already-fitted members as an ensemble model.
    pub fn from_ensemble(weights: EnsembleWeights, weighted: bool) -> Result<Model> {
        let first = weights
            .members
            .first()
            .ok_or_else(|| Error::InvalidWeights("ensemble has no members".into()))?;
        let feature_names = first.feature_names.clone();
        let params = EnsembleParams {
            members: weights.members.iter().map(|m| m.spec.clone()).collect(),
        };
        Ok(Model {
            format_version: MODEL_FORMAT_VERSION,
            spec: if weighted {
                ModelSpec::WeightedEnsemble(params)
            } else {
                ModelSpec::AverageEnsemble(params)
            },
            feature_names,
            seed: first.seed,
            rounds_completed: 0,
            training_loss: Vec::new(),
            state: ModelState::Ensemble(weights),
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Risk score in [0, 1] for every row of `x`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::WidthMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        x.check_finite()?;
        if let ModelState::Ensemble(w) = &self.state {
            return ensemble_predict(w, x);
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            ModelState::Linear(s) => s.activation.apply(s.linear_score(row)),
            ModelState::Tree { root } => root.predict(row),
            ModelState::Forest { trees } => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
            ModelState::Boosted { trees } => sigmoid(gbdt::margin(trees, row)),
            ModelState::Knn(s) => s.predict_row(row),
            ModelState::NaiveBayes(s) => s.predict_row(row),
            ModelState::Constant { value } => *value,
            ModelState::Ensemble(_) => unreachable!("ensembles predict whole matrices"),
        }
    }

    /// Raw boosting margin or linear score; `None` for other families.
    pub fn margin(&self, row: &[f64]) -> Option<f64> {
        match &self.state {
            ModelState::Boosted { trees } => Some(gbdt::margin(trees, row)),
            ModelState::Linear(s) => Some(s.linear_score(row)),
            _ => None,
        }
    }

    /// Parameter count: total leaves for tree models, d + 1 for the linear
    /// scorer, k for kNN, class means, variances and prior for naive Bayes,
    /// and the member sum for ensembles.
    pub fn complexity(&self) -> f64 {
        let d = self.n_features();
        match &self.state {
            ModelState::Linear(_) => (d + 1) as f64,
            ModelState::Tree { root } => root.leaves() as f64,
            ModelState::Forest { trees } | ModelState::Boosted { trees } => {
                trees.iter().map(Node::leaves).sum::<usize>() as f64
            }
            ModelState::Knn(s) => s.k as f64,
            ModelState::NaiveBayes(_) => (4 * d + 1) as f64,
            ModelState::Ensemble(w) => w.members.iter().map(Model::complexity).sum(),
            ModelState::Constant { .. } => 1.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let model: Model = serde_json::from_str(s)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidHyperparameter(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

fn check_weights(w: &EnsembleWeights) -> Result<()> {
    if w.members.len() != w.weights.len() || w.members.is_empty() {
        return Err(Error::InvalidWeights(format!(
            "{} members but {} weights",
            w.members.len(),
            w.weights.len()
        )));
    }
    if w.weights.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
    }
    let sum: f64 = w.weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Weighted mixture of member scores.
pub fn ensemble_predict(w: &EnsembleWeights, x: &FeatureMatrix) -> Result<Vec<f64>> {
    check_weights(w)?;
    let mut out = vec![0.0; x.n_rows()];
    for (m, &wi) in w.members.iter().zip(&w.weights) {
        for (o, p) in out.iter_mut().zip(m.predict_proba(x)?) {
            *o += wi * p;
        }
    }
    // Weights summing to 1 within rounding can push a score a hair past 1.
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(out)
}

/// Mixture-weighted sum of the members' mean logistic losses.
pub fn ensemble_loss(w: &EnsembleWeights, x: &FeatureMatrix, y: &[u8]) -> Result<f64> {
    check_weights(w)?;
    let mut total = 0.0;
    for (m, &wi) in w.members.iter().zip(&w.weights) {
        total += wi * metrics::log_loss(y, &m.predict_proba(x)?)?;
    }
    Ok(total)
}

/// Weights proportional to each member's performance.
pub fn derive_weights(members: Vec<Model>, performance: &[f64]) -> Result<EnsembleWeights> {
    if members.len() != performance.len() {
        return Err(Error::LengthMismatch(members.len(), performance.len()));
    }
    if members.is_empty() {
        return Err(Error::InvalidWeights("ensemble has no members".into()));
    }
    if performance.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::InvalidWeights("performances must be finite and non-negative".into()));
    }
    let sum: f64 = performance.iter().sum();
    if sum == 0.0 {
        return Err(Error::AllZeroPerformance);
    }
    Ok(EnsembleWeights {
        members,
        weights: performance.iter().map(|p| p / sum).collect(),
    })
}

/// Equal weights.
pub fn average(members: Vec<Model>) -> EnsembleWeights {
    let w = 1.0 / members.len() as f64;
    EnsembleWeights {
        weights: vec![w; members.len()],
        members,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> (FeatureMatrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn every_family_scores_within_unit_interval() {
        let (x, y) = separable(40);
        for fam in &ModelSpec::FAMILIES[..7] {
            let mut spec = ModelSpec::defaults(fam).unwrap();
            if let ModelSpec::RandomForest(p) | ModelSpec::BalancedRandomForest(p) = &mut spec {
                p.n_trees = 10;
            }
            if let ModelSpec::Gbdt(p) = &mut spec {
                p.rounds = 20;
            }
            let m = fit(&spec, &x, &y, 1).unwrap();
            let s = m.predict_proba(&x).unwrap();
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)), "{fam}");
            assert!(m.complexity() >= 1.0);
        }
    }

    #[test]
    fn single_class_rules() {
        let (x, _) = separable(6);
        let y = vec![1; 6];
        assert!(matches!(fit(&ModelSpec::defaults("gbdt").unwrap(), &x, &y, 0), Err(Error::SingleClass)));
        let m = fit(&ModelSpec::defaults("cart").unwrap(), &x, &y, 0).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![1.0; 6]);
    }

    #[test]
    fn width_and_empty() {
        let (x, y) = separable(10);
        let m = fit(&ModelSpec::defaults("naive_bayes").unwrap(), &x, &y, 0).unwrap();
        let narrow = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(m.predict_proba(&narrow), Err(Error::WidthMismatch { expected: 2, actual: 1 })));
        let empty = FeatureMatrix::empty(x.names().to_vec());
        assert!(m.predict_proba(&empty).unwrap().is_empty());
    }

    #[test]
    fn weights_normalise() {
        let (x, y) = separable(10);
        let m = fit(&ModelSpec::defaults("cart").unwrap(), &x, &y, 0).unwrap();
        let w = derive_weights(vec![m.clone(), m.clone()], &[0.8, 0.2]).unwrap();
        assert_eq!(w.weights, vec![0.8, 0.2]);
        assert!(matches!(derive_weights(vec![m.clone()], &[0.0]), Err(Error::AllZeroPerformance)));
        assert_eq!(derive_weights(vec![m], &[0.3]).unwrap().weights, vec![1.0]);
    }

    #[test]
    fn spec_serde_uses_defaults() {
        let s: ModelSpec = serde_json::from_str(r#"{"family":"gbdt","rounds":50}"#).unwrap();
        match s {
            ModelSpec::Gbdt(p) => {
                assert_eq!(p.rounds, 50);
                assert_eq!(p.max_depth, 6);
            }
            _ => panic!(),
        }
        let t: ModelSpec = toml::from_str("family = \"knn\"\nk = 3\n").unwrap();
        assert_eq!(t, ModelSpec::Knn(KnnParams { k: 3 }));
    }
}
