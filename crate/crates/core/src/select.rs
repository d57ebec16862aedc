//! Encoder search with a fixed booster, then per-family model search, then a
//! final refit on the whole modelling split scored on the passive split.
//!
//! Every candidate's objective is `1 - AvRecall(10, 40)` on validation plus a
//! weighted complexity term. Leaderboards sort by objective, ties by the
//! candidate's generation index.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Dataset, FeatureMatrix};
use crate::encode::{fit_transform, transform, EncoderKind, FitOptions, FittedEncoder};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalReport};
use crate::models::{self, fit, EnsembleWeights, Model, ModelSpec};
use crate::preprocess::SplitBundle;
use crate::resample::{resample, ResamplePlan};
use crate::seed;

/// Values for one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis {
    Values { values: Vec<f64> },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    /// Inclusive integer range.
    IntRange { low: i64, high: i64 },
}

impl Axis {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Axis::Values { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
            Axis::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Axis::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low <= high,
            Axis::IntRange { low, high } => low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSearchSpace(format!("axis `{name}` is empty or malformed")))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Axis::Values { values } => values[rng.random_range(0..values.len())],
            Axis::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(*low..*high)
                }
            }
            Axis::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.random_range(low.ln()..high.ln()).exp()
                }
            }
            Axis::IntRange { low, high } => rng.random_range(*low..=*high) as f64,
        }
    }
}

/// A family template and the hyperparameters to vary on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpace {
    pub template: ModelSpec,
    #[serde(default)]
    pub axes: BTreeMap<String, Axis>,
}

impl FamilySpace {
    pub fn fixed(template: ModelSpec) -> Self {
        FamilySpace {
            template,
            axes: BTreeMap::new(),
        }
    }
}

fn default_budget() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub families: Vec<FamilySpace>,
    /// Maximum configurations tried per family.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidSearchSpace("budget must be >= 1".into()));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidSearchSpace("no model families".into()));
        }
        for f in &self.families {
            for (name, axis) in &f.axes {
                axis.validate(name)?;
            }
        }
        Ok(())
    }

    /// Booster-only space used by encoder search.
    pub fn gbdt_grid(rounds: &[f64], depths: &[f64], learning_rates: &[f64]) -> Self {
        let mut axes = BTreeMap::new();
        axes.insert("rounds".into(), Axis::Values { values: rounds.to_vec() });
        axes.insert("max_depth".into(), Axis::Values { values: depths.to_vec() });
        axes.insert(
            "learning_rate".into(),
            Axis::Values {
                values: learning_rates.to_vec(),
            },
        );
        SearchSpace {
            families: vec![FamilySpace {
                template: ModelSpec::defaults("gbdt").expect("known family"),
                axes,
            }],
            budget: default_budget(),
            seed: 0,
        }
    }

    /// Configurations for one family: the full grid (in key order, last key
    /// fastest) when every axis is a value list and it fits the budget,
    /// otherwise `budget` seeded random draws.
    pub fn configurations(&self, family: &FamilySpace) -> Result<Vec<ModelSpec>> {
        let grid_only = family.axes.values().all(|a| matches!(a, Axis::Values { .. }));
        let grid_size: usize = family
            .axes
            .values()
            .map(|a| match a {
                Axis::Values { values } => values.len(),
                _ => usize::MAX,
            })
            .try_fold(1usize, |acc, n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        let mut points: Vec<BTreeMap<&str, f64>> = Vec::new();
        if grid_only && grid_size <= self.budget {
            points.push(BTreeMap::new());
            for (name, axis) in &family.axes {
                let Axis::Values { values } = axis else { unreachable!() };
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        values.iter().map(move |&v| {
                            let mut q = p.clone();
                            q.insert(name.as_str(), v);
                            q
                        })
                    })
                    .collect();
            }
        } else {
            let mut rng = seed::rng(seed::derive(self.seed, &format!("search:{}", family.template.family())));
            for _ in 0..self.budget {
                points.push(
                    family
                        .axes
                        .iter()
                        .map(|(name, axis)| (name.as_str(), axis.sample(&mut rng)))
                        .collect(),
                );
            }
        }
        points.iter().map(|p| apply_params(&family.template, p)).collect()
    }
}

/// Overwrite hyperparameters of a spec by field name.
fn apply_params(template: &ModelSpec, params: &BTreeMap<&str, f64>) -> Result<ModelSpec> {
    let mut json = serde_json::to_value(template)?;
    let obj = json.as_object_mut().expect("specs serialise to objects");
    for (&name, &v) in params {
        let slot = obj.get_mut(name).ok_or_else(|| {
            Error::InvalidSearchSpace(format!("`{}` has no hyperparameter `{name}`", template.family()))
        })?;
        *slot = match slot {
            Value::Number(n) if !n.is_f64() => Value::from(v.round().max(0.0) as u64),
            Value::Null => Value::from(v.round().max(0.0) as u64),
            _ => serde_json::Number::from_f64(v)
                .map(Value::Number)
                .ok_or_else(|| Error::InvalidSearchSpace(format!("`{name}` must be finite")))?,
        };
    }
    let spec: ModelSpec = serde_json::from_value(json)?;
    spec.validate()?;
    Ok(spec)
}

/// Train, validation and test matrices under one encoder. The passive split
/// is deliberately absent.
#[derive(Debug, Clone)]
pub struct EncodedSplits {
    pub encoder: FittedEncoder,
    pub train: FeatureMatrix,
    pub train_labels: Vec<u8>,
    pub validation: FeatureMatrix,
    pub validation_labels: Vec<u8>,
    pub test: FeatureMatrix,
    pub test_labels: Vec<u8>,
}

pub fn encode_splits(kind: &EncoderKind, splits: &SplitBundle, fit_options: &FitOptions) -> Result<EncodedSplits> {
    let (encoder, train) = fit_transform(kind, &splits.train, fit_options)?;
    Ok(EncodedSplits {
        train_labels: splits.train.labels()?.to_vec(),
        validation: transform(&encoder, &splits.validation)?,
        validation_labels: splits.validation.labels()?.to_vec(),
        test: transform(&encoder, &splits.test)?,
        test_labels: splits.test.labels()?.to_vec(),
        encoder,
        train,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Weight on encoded dimensionality during encoder search.
    pub beta: f64,
    /// Weight on model complexity during model search.
    pub alpha: f64,
    pub resample: ResamplePlan,
    pub fit_options: FitOptions,
    /// Size of the top-k average and weighted ensembles; 0 disables them.
    pub top_k_ensemble: usize,
    pub seed: u64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            beta: 0.0,
            alpha: 0.0,
            resample: ResamplePlan::default(),
            fit_options: FitOptions::default(),
            top_k_ensemble: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Generation order; the tie-break after the objective.
    pub index: usize,
    pub encoder: EncoderKind,
    pub spec: ModelSpec,
    pub validation_av_recall: f64,
    /// Encoded width during encoder search, model complexity during model search.
    pub complexity: f64,
    pub objective: f64,
    pub test_recall_at_20: Option<f64>,
    pub test_av_recall: Option<f64>,
    /// Mixing weights of a weighted ensemble candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFailure {
    pub index: usize,
    pub candidate: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub best_encoder: EncoderKind,
    pub best_spec: ModelSpec,
    /// Weight applied to `complexity` in every objective.
    pub regularization: f64,
    pub leaderboard: Vec<LeaderboardEntry>,
    pub failures: Vec<CandidateFailure>,
}

impl SelectionResult {
    pub fn best(&self) -> &LeaderboardEntry {
        &self.leaderboard[0]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn leaderboard_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank",
            "index",
            "encoder",
            "family",
            "params",
            "val_av_recall",
            "complexity",
            "val_objective",
            "test_recall_at_20",
            "test_av_recall",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (rank, e) in self.leaderboard.iter().enumerate() {
            w.write_record([
                (rank + 1).to_string(),
                e.index.to_string(),
                e.encoder.to_string(),
                e.spec.family().to_string(),
                e.spec.to_string(),
                e.validation_av_recall.to_string(),
                e.complexity.to_string(),
                e.objective.to_string(),
                opt(e.test_recall_at_20),
                opt(e.test_av_recall),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn objective(av_recall: f64, weight: f64, complexity: f64) -> f64 {
    1.0 - av_recall + weight * complexity
}

fn test_metrics(scores: &[f64], labels: &[u8]) -> (Option<f64>, Option<f64>) {
    (
        metrics::recall_at_k(scores, labels, 20.0).ok(),
        metrics::av_recall_10_40(scores, labels).ok(),
    )
}

fn training_data(enc: &EncodedSplits, plan: &ResamplePlan) -> Result<(FeatureMatrix, Vec<u8>)> {
    resample(&enc.train, &enc.train_labels, plan)
}

struct Evaluated {
    entry: LeaderboardEntry,
    model: Model,
}

fn evaluate(
    index: usize,
    encoder: &EncoderKind,
    spec: &ModelSpec,
    enc: &EncodedSplits,
    train: &(FeatureMatrix, Vec<u8>),
    weight: f64,
    complexity: Option<f64>,
    seed: u64,
) -> Result<Evaluated> {
    let model = fit(spec, &train.0, &train.1, seed)?;
    let val = model.predict_proba(&enc.validation)?;
    let av = metrics::av_recall_10_40(&val, &enc.validation_labels)?;
    let complexity = complexity.unwrap_or_else(|| model.complexity());
    let test = model.predict_proba(&enc.test)?;
    let (r20, tav) = test_metrics(&test, &enc.test_labels);
    Ok(Evaluated {
        entry: LeaderboardEntry {
            index,
            encoder: encoder.clone(),
            spec: spec.clone(),
            validation_av_recall: av,
            complexity,
            objective: objective(av, weight, complexity),
            test_recall_at_20: r20,
            test_av_recall: tav,
            ensemble_weights: None,
        },
        model,
    })
}

fn sort_board(board: &mut [LeaderboardEntry]) {
    board.sort_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)));
}

fn split_outcomes(
    outcomes: Vec<(usize, String, Result<Evaluated>)>,
) -> (Vec<Evaluated>, Vec<CandidateFailure>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (index, candidate, r) in outcomes {
        match r {
            Ok(e) => ok.push(e),
            Err(e) => failed.push(CandidateFailure {
                index,
                candidate,
                error: e.to_string(),
            }),
        }
    }
    (ok, failed)
}

/// Pick the encoder whose best booster configuration minimises
/// `1 - AvRecall + beta * width` on validation.
pub fn select_encoder(
    candidates: &[EncoderKind],
    splits: &SplitBundle,
    space: &SearchSpace,
    options: &SelectOptions,
) -> Result<SelectionResult> {
    space.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidSearchSpace("no encoder candidates".into()));
    }
    let booster = space
        .families
        .iter()
        .find(|f| matches!(f.template, ModelSpec::Gbdt(_)))
        .cloned()
        .unwrap_or_else(|| FamilySpace::fixed(ModelSpec::defaults("gbdt").expect("known family")));
    let configs = space.configurations(&booster)?;
    let per_encoder = configs.len();

    let outcomes: Vec<Vec<(usize, String, Result<Evaluated>)>> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, kind)| {
            let prepared = encode_splits(kind, splits, &options.fit_options)
                .and_then(|enc| training_data(&enc, &options.resample).map(|t| (enc, t)));
            configs
                .iter()
                .enumerate()
                .map(|(j, spec)| {
                    let index = i * per_encoder + j;
                    let label = format!("{kind} / {spec}");
                    let r = match &prepared {
                        Ok((enc, train)) => evaluate(
                            index,
                            kind,
                            spec,
                            enc,
                            train,
                            options.beta,
                            Some(enc.encoder.width() as f64),
                            seed::derive(options.seed, &format!("encoder-search:{index}")),
                        ),
                        Err(e) => Err(Error::Config(e.to_string())),
                    };
                    (index, label, r)
                })
                .collect()
        })
        .collect();
    let (ok, failures) = split_outcomes(outcomes.into_iter().flatten().collect());
    let mut leaderboard: Vec<LeaderboardEntry> = ok.into_iter().map(|e| e.entry).collect();
    if leaderboard.is_empty() {
        return Err(Error::AllCandidatesFailed);
    }
    sort_board(&mut leaderboard);
    Ok(SelectionResult {
        best_encoder: leaderboard[0].encoder.clone(),
        best_spec: leaderboard[0].spec.clone(),
        regularization: options.beta,
        leaderboard,
        failures,
    })
}

/// Search every family in `space` on already-encoded splits, minimising
/// `1 - AvRecall + alpha * complexity`; optionally adds top-k ensembles.
pub fn select_model(encoded: &EncodedSplits, space: &SearchSpace, options: &SelectOptions) -> Result<SelectionResult> {
    space.validate()?;
    let encoder = encoded.encoder.kind().clone();
    let train = training_data(encoded, &options.resample)?;
    let mut candidates: Vec<ModelSpec> = Vec::new();
    for family in &space.families {
        candidates.extend(space.configurations(family)?);
    }
    let outcomes: Vec<(usize, String, Result<Evaluated>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let seed = seed::derive(options.seed, &format!("model-search:{index}"));
            (
                index,
                spec.to_string(),
                evaluate(index, &encoder, spec, encoded, &train, options.alpha, None, seed),
            )
        })
        .collect();
    let (mut ok, mut failures) = split_outcomes(outcomes);
    if ok.is_empty() {
        return Err(Error::AllCandidatesFailed);
    }
    ok.sort_by(|a, b| {
        a.entry
            .objective
            .total_cmp(&b.entry.objective)
            .then(a.entry.index.cmp(&b.entry.index))
    });

    let mut leaderboard: Vec<LeaderboardEntry> = Vec::new();
    let k = options.top_k_ensemble.min(ok.len());
    if k >= 2 {
        let members: Vec<Model> = ok[..k].iter().map(|e| e.model.clone()).collect();
        let perf: Vec<f64> = ok[..k].iter().map(|e| e.entry.validation_av_recall).collect();
        let next = candidates.len();
        for (offset, weighted) in [(0, false), (1, true)] {
            let index = next + offset;
            let built = if weighted {
                models::derive_weights(members.clone(), &perf)
            } else {
                Ok(models::average(members.clone()))
            };
            match built.and_then(|w| ensemble_entry(index, &encoder, w, weighted, encoded, options.alpha)) {
                Ok(e) => leaderboard.push(e),
                Err(e) => failures.push(CandidateFailure {
                    index,
                    candidate: format!("top-{k} {}", if weighted { "weighted" } else { "average" }),
                    error: e.to_string(),
                }),
            }
        }
    }
    leaderboard.extend(ok.into_iter().map(|e| e.entry));
    sort_board(&mut leaderboard);
    Ok(SelectionResult {
        best_encoder: encoder,
        best_spec: leaderboard[0].spec.clone(),
        regularization: options.alpha,
        leaderboard,
        failures,
    })
}

fn ensemble_entry(
    index: usize,
    encoder: &EncoderKind,
    weights: EnsembleWeights,
    weighted: bool,
    enc: &EncodedSplits,
    alpha: f64,
) -> Result<LeaderboardEntry> {
    let mixing = weights.weights.clone();
    let model = Model::from_ensemble(weights, weighted)?;
    let val = model.predict_proba(&enc.validation)?;
    let av = metrics::av_recall_10_40(&val, &enc.validation_labels)?;
    let complexity = model.complexity();
    let (r20, tav) = test_metrics(&model.predict_proba(&enc.test)?, &enc.test_labels);
    Ok(LeaderboardEntry {
        index,
        encoder: encoder.clone(),
        spec: model.spec.clone(),
        validation_av_recall: av,
        complexity,
        objective: objective(av, alpha, complexity),
        test_recall_at_20: r20,
        test_av_recall: tav,
        ensemble_weights: weighted.then_some(mixing),
    })
}

#[derive(Debug, Clone)]
pub struct FinalFit {
    pub encoder: FittedEncoder,
    pub model: Model,
    pub passive_scores: Vec<f64>,
    pub report: EvalReport,
}

/// Refit the chosen encoder and model on the whole modelling split and score
/// the passive split.
pub fn final_fit_predict(
    best: &SelectionResult,
    modeling: &Dataset,
    passive: &Dataset,
    options: &SelectOptions,
) -> Result<FinalFit> {
    let (encoder, x) = fit_transform(&best.best_encoder, modeling, &options.fit_options)?;
    let (x, y) = resample(&x, modeling.labels()?, &options.resample)?;
    let seed = seed::derive(options.seed, "final-fit");
    let model = match (&best.best_spec, &best.best().ensemble_weights) {
        (ModelSpec::WeightedEnsemble(p), Some(w)) => {
            let members = p
                .members
                .iter()
                .enumerate()
                .map(|(i, m)| fit(m, &x, &y, seed.wrapping_add(i as u64)))
                .collect::<Result<Vec<_>>>()?;
            Model::from_ensemble(
                EnsembleWeights {
                    members,
                    weights: w.clone(),
                },
                true,
            )?
        }
        (spec, _) => fit(spec, &x, &y, seed)?,
    };
    let xp = transform(&encoder, passive)?;
    let passive_scores = model.predict_proba(&xp)?;
    let report = metrics::classification_report(&passive_scores, passive.labels()?, 0.5)?;
    Ok(FinalFit {
        encoder,
        model,
        passive_scores,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_integer_fields() {
        let space = SearchSpace::gbdt_grid(&[10.0, 20.0], &[2.0, 3.0], &[0.1]);
        let configs = space.configurations(&space.families[0]).unwrap();
        assert_eq!(configs.len(), 4);
        // learning_rate < max_depth < rounds in key order; rounds varies fastest.
        match (&configs[0], &configs[1], &configs[2]) {
            (ModelSpec::Gbdt(a), ModelSpec::Gbdt(b), ModelSpec::Gbdt(c)) => {
                assert_eq!((a.max_depth, a.rounds), (2, 10));
                assert_eq!((b.max_depth, b.rounds), (2, 20));
                assert_eq!((c.max_depth, c.rounds), (3, 10));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn oversized_grid_falls_back_to_seeded_draws() {
        let mut space = SearchSpace::gbdt_grid(&[10.0, 20.0, 30.0], &[2.0, 3.0, 4.0], &[0.1, 0.2]);
        space.budget = 5;
        let a = space.configurations(&space.families[0]).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, space.configurations(&space.families[0]).unwrap());
    }

    #[test]
    fn unknown_and_optional_fields() {
        let fam = FamilySpace {
            template: ModelSpec::defaults("random_forest").unwrap(),
            axes: BTreeMap::from([("max_features".to_string(), Axis::Values { values: vec![2.0] })]),
        };
        let space = SearchSpace {
            families: vec![fam],
            budget: 4,
            seed: 0,
        };
        match &space.configurations(&space.families[0]).unwrap()[0] {
            ModelSpec::RandomForest(p) => assert_eq!(p.max_features, Some(2)),
            _ => panic!(),
        }
        let bad = FamilySpace {
            template: ModelSpec::defaults("knn").unwrap(),
            axes: BTreeMap::from([("depth".to_string(), Axis::Values { values: vec![2.0] })]),
        };
        assert!(matches!(space.configurations(&bad), Err(Error::InvalidSearchSpace(_))));
    }

    #[test]
    fn search_space_validation() {
        let mut s = SearchSpace::gbdt_grid(&[10.0], &[2.0], &[0.1]);
        s.budget = 0;
        assert!(s.validate().is_err());
        let s = SearchSpace {
            families: vec![FamilySpace {
                template: ModelSpec::defaults("gbdt").unwrap(),
                axes: BTreeMap::from([("rounds".to_string(), Axis::Values { values: vec![] })]),
            }],
            budget: 3,
            seed: 0,
        };
        assert!(s.validate().is_err());
    }
}
