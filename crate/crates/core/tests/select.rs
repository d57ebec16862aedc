use std::collections::BTreeMap;

use tbrisk::data::Column;
use tbrisk::encode::{EncoderKind, FitOptions};
use tbrisk::models::ModelSpec;
use tbrisk::preprocess::{clean, temporal_split, SplitBundle};
use tbrisk::select::{
    encode_splits, final_fit_predict, select_encoder, select_model, Axis, FamilySpace, SearchSpace, SelectOptions,
};
use tbrisk::synthgen::{generate, GenConfig, DATE_COLUMN};

fn splits(n: usize, seed: u64) -> SplitBundle {
    let cfg = GenConfig {
        n_rows: n,
        seed,
        ..Default::default()
    };
    let (raw, _) = generate(&cfg).unwrap();
    let (ds, _) = clean(&raw, &cfg.cleaning_plan()).unwrap();
    temporal_split(&ds, DATE_COLUMN, 183, (0.7, 0.15, 0.15)).unwrap()
}

fn small_booster() -> SearchSpace {
    SearchSpace::gbdt_grid(&[15.0, 30.0], &[3.0], &[0.2])
}

fn encoders() -> Vec<EncoderKind> {
    vec![
        EncoderKind::Target { smoothing: 10.0 },
        EncoderKind::Ordinal,
        EncoderKind::MinHash {
            signature_length: 8,
            ngram: 3,
            seed: 0,
        },
    ]
}

#[test]
fn passive_rows_never_influence_selection() {
    let mut b = splits(2500, 3);
    let opts = SelectOptions::default();
    let before = select_encoder(&encoders(), &b, &small_booster(), &opts).unwrap();

    // Flip every passive label and cut the partition down to a single row.
    let flipped: Vec<u8> = b.passive.labels().unwrap().iter().map(|v| 1 - v).collect();
    let target = b.passive.schema().target().name.clone();
    b.passive = b.passive.replace_column(&target, Column::labels(flipped)).unwrap().take(&[0]);
    let after = select_encoder(&encoders(), &b, &small_booster(), &opts).unwrap();
    assert_eq!(before, after);
}

#[test]
fn objectives_follow_the_formula_and_order() {
    let b = splits(2500, 4);
    for beta in [0.0, 0.003, 1.0] {
        let opts = SelectOptions {
            beta,
            ..Default::default()
        };
        let r = select_encoder(&encoders(), &b, &small_booster(), &opts).unwrap();
        assert_eq!(r.leaderboard.len(), 6);
        for e in &r.leaderboard {
            let expected = 1.0 - e.validation_av_recall + beta * e.complexity;
            assert!((e.objective - expected).abs() < 1e-12);
        }
        for w in r.leaderboard.windows(2) {
            assert!(
                w[0].objective < w[1].objective || (w[0].objective == w[1].objective && w[0].index < w[1].index)
            );
        }
    }
}

#[test]
fn large_width_penalty_picks_the_narrowest_encoder() {
    let b = splits(2500, 5);
    let unpenalised = select_encoder(&encoders(), &b, &small_booster(), &SelectOptions::default()).unwrap();
    let heavy = SelectOptions {
        beta: 1.0,
        ..Default::default()
    };
    let r = select_encoder(&encoders(), &b, &small_booster(), &heavy).unwrap();
    let narrowest = r.leaderboard.iter().map(|e| e.complexity).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best().complexity, narrowest);
    assert_ne!(r.best_encoder.name(), "minhash");
    // Selected width never grows as the penalty grows.
    assert!(r.best().complexity <= unpenalised.best().complexity);
}

fn model_space() -> SearchSpace {
    let mut cart = BTreeMap::new();
    cart.insert("max_depth".to_string(), Axis::Values { values: vec![2.0, 6.0] });
    let mut forest = BTreeMap::new();
    forest.insert("n_trees".to_string(), Axis::Values { values: vec![20.0] });
    forest.insert("max_depth".to_string(), Axis::IntRange { low: 4, high: 8 });
    SearchSpace {
        families: vec![
            FamilySpace::fixed(ModelSpec::defaults("naive_bayes").unwrap()),
            FamilySpace {
                template: ModelSpec::defaults("cart").unwrap(),
                axes: cart,
            },
            FamilySpace {
                template: ModelSpec::defaults("random_forest").unwrap(),
                axes: forest,
            },
        ],
        budget: 2,
        seed: 7,
    }
}

#[test]
fn model_search_with_ensembles_and_final_fit() {
    let b = splits(2500, 6);
    let opts = SelectOptions {
        top_k_ensemble: 3,
        ..Default::default()
    };
    let enc = encode_splits(&EncoderKind::Target { smoothing: 10.0 }, &b, &FitOptions::default()).unwrap();
    let r = select_model(&enc, &model_space(), &opts).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    // 1 + 2 + 2 base candidates plus two ensembles.
    assert_eq!(r.leaderboard.len(), 7);
    let weighted = r
        .leaderboard
        .iter()
        .find(|e| e.ensemble_weights.is_some())
        .expect("weighted ensemble entry");
    let w = weighted.ensemble_weights.as_ref().unwrap();
    assert_eq!(w.len(), 3);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    assert_eq!(r, select_model(&enc, &model_space(), &opts).unwrap());

    let modeling = b.modeling().unwrap();
    let fitted = final_fit_predict(&r, &modeling, &b.passive, &opts).unwrap();
    assert_eq!(fitted.passive_scores.len(), b.passive.n_rows());
    assert!(fitted.passive_scores.iter().all(|p| (0.0..=1.0).contains(p)));
    assert_eq!(fitted.report.n, b.passive.n_rows());
}

#[test]
fn complexity_penalty_prefers_smaller_models() {
    let b = splits(2000, 8);
    let enc = encode_splits(&EncoderKind::Ordinal, &b, &FitOptions::default()).unwrap();
    let opts = SelectOptions {
        alpha: 1.0,
        top_k_ensemble: 0,
        ..Default::default()
    };
    let r = select_model(&enc, &model_space(), &opts).unwrap();
    let smallest = r.leaderboard.iter().map(|e| e.complexity).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best().complexity, smallest);
    let csv = r.leaderboard_csv().unwrap();
    assert_eq!(csv.lines().count(), r.leaderboard.len() + 1);
    assert!(csv.starts_with("rank,index,encoder,family,params,val_av_recall"));
}

#[test]
fn identical_candidates_tie_to_the_earlier_one() {
    let b = splits(2000, 6);
    let twice = vec![EncoderKind::Ordinal, EncoderKind::Ordinal];
    let result = select_encoder(&twice, &b, &small_booster(), &SelectOptions::default()).unwrap();
    // One entry per encoder and configuration; the copies score alike.
    let board = &result.leaderboard;
    assert_eq!(board.len(), 4);
    for w in board.windows(2) {
        assert!(w[0].objective < w[1].objective || (w[0].objective == w[1].objective && w[0].index < w[1].index));
    }
    assert_eq!(board[0].objective, board[1].objective);
    assert!(result.best().index < 2, "the first copy wins: {}", result.best().index);

    // A lone candidate wins by default.
    let one = select_encoder(&[EncoderKind::Ordinal], &b, &small_booster(), &SelectOptions::default()).unwrap();
    assert_eq!(one.leaderboard.len(), 2);
    assert_eq!(one.best_encoder, EncoderKind::Ordinal);
}

#[test]
fn passive_without_positives_is_noted_not_fatal() {
    let mut b = splits(2000, 7);
    let target = b.passive.schema().target().name.clone();
    let zeros = vec![0u8; b.passive.n_rows()];
    b.passive = b.passive.replace_column(&target, Column::labels(zeros)).unwrap();
    let opts = SelectOptions::default();
    let result = select_encoder(&[EncoderKind::Ordinal], &b, &small_booster(), &opts).unwrap();
    let fit = final_fit_predict(&result, &b.modeling().unwrap(), &b.passive, &opts).unwrap();
    assert_eq!(fit.passive_scores.len(), b.passive.n_rows());
    assert_eq!(fit.report.positives, 0);
    assert!(fit.report.auc_roc.is_none());
    assert!(fit.report.recall_at_20().is_none());
    assert!(!fit.report.notes.is_empty());
}
