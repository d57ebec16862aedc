use std::collections::BTreeMap;

use tbrisk::data::Dataset;
use tbrisk::encode::iv_rank;
use tbrisk::metrics::auc_roc;
use tbrisk::synthgen::{generate, GenConfig, LEAK_COLUMN, POSITIVE_LABEL, TARGET_COLUMN};

/// Labels read straight off the outcome text.
fn labels(ds: &Dataset) -> Vec<u8> {
    let col = ds.column(TARGET_COLUMN).unwrap();
    (0..ds.n_rows()).map(|r| u8::from(col.cell_str(r).as_deref() == Some(POSITIVE_LABEL))).collect()
}

fn with_labels(ds: &Dataset, cfg: &GenConfig) -> Dataset {
    tbrisk::preprocess::clean(ds, &cfg.cleaning_plan()).unwrap().0
}

#[test]
fn empty_signal_gives_uninformative_labels() {
    let cfg = GenConfig {
        n_rows: 100_000,
        prevalence: 0.5,
        signal: BTreeMap::new(),
        seed: 17,
        ..Default::default()
    };
    let (ds, truth) = generate(&cfg).unwrap();
    let y = labels(&ds);
    let rate = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    assert!((0.49..=0.51).contains(&rate), "{rate}");
    assert_eq!(truth.realized_prevalence, rate);
    // No categorical column carries information about the label. Under
    // independence IV is close to a chi-square with mean (k - 1)(1/E + 1/N)
    // for k levels, E events and N non-events.
    let cleaned = with_labels(&ds, &cfg);
    let events = y.iter().filter(|&&v| v == 1).count() as f64;
    let scale = 1.0 / events + 1.0 / (y.len() as f64 - events);
    for row in iv_rank(&cleaned).unwrap().rows {
        let null_mean = (row.bins.len() - 1) as f64 * scale;
        assert!(row.information_value < 2.0 * null_mean + 1e-3, "{} {}", row.column, row.information_value);
    }
}

#[test]
fn outcome_rate_rises_across_log_odds_deciles() {
    let cfg = GenConfig {
        n_rows: 50_000,
        seed: 3,
        ..Default::default()
    };
    let (ds, truth) = generate(&cfg).unwrap();
    let y = labels(&ds);
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| truth.log_odds[a].total_cmp(&truth.log_odds[b]));
    let rates: Vec<f64> = order
        .chunks(y.len() / 10)
        .map(|c| c.iter().map(|&i| y[i] as f64).sum::<f64>() / c.len() as f64)
        .collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]), "{rates:?}");
    // Noise-free log-odds separate well but not perfectly.
    let auc = auc_roc(&truth.log_odds, &y).unwrap().unwrap();
    assert!((0.9..0.99).contains(&auc), "{auc}");
}

#[test]
fn missingness_matches_requested_fractions() {
    for seed in 0..5 {
        let fractions = [("age", 0.07), ("gender", 0.2), ("tb_unit", 0.013), ("weight", 0.5)];
        let cfg = GenConfig {
            n_rows: 4_000 + seed as usize * 777,
            missingness: fractions.iter().map(|(k, f)| (k.to_string(), *f)).collect(),
            seed,
            ..Default::default()
        };
        let (ds, _) = generate(&cfg).unwrap();
        let n = ds.n_rows() as f64;
        for (name, f) in fractions {
            let col = ds.column(name).unwrap();
            let observed = (0..ds.n_rows()).filter(|&r| col.cell_str(r).is_none()).count() as f64 / n;
            assert!((observed - f).abs() <= 2.0 / n.sqrt(), "{name}: {observed} vs {f}");
        }
    }
}

#[test]
fn leak_column_nearly_reveals_the_label() {
    let cfg = GenConfig {
        n_rows: 20_000,
        leak_column: true,
        seed: 8,
        ..Default::default()
    };
    let (ds, _) = generate(&cfg).unwrap();
    let y = labels(&ds);
    let leak = ds.column(LEAK_COLUMN).unwrap();
    let flag: Vec<f64> = (0..ds.n_rows()).map(|r| f64::from(u8::from(leak.cell_str(r).as_deref() == Some("closed")))).collect();
    // A binary score that flips 5% of labels at random has AUC 0.95.
    let auc = auc_roc(&flag, &y).unwrap().unwrap();
    assert!((auc - 0.95).abs() < 0.01, "{auc}");
    let cleaned = with_labels(&ds, &cfg);
    assert_eq!(iv_rank(&cleaned).unwrap().rows[0].column, LEAK_COLUMN);
}

#[test]
fn configs_parse_from_toml() {
    let cfg = GenConfig::from_toml_str("n_rows = 500\nprevalence = 0.3\nseed = 9\nleak_column = true\n").unwrap();
    assert_eq!(cfg.n_rows, 500);
    assert!(cfg.leak_column);
    assert_eq!(cfg.categorical, GenConfig::default().categorical);
    let (ds, truth) = generate(&cfg).unwrap();
    assert_eq!(ds.n_rows(), 500);
    assert_eq!(truth.realized_prevalence, 0.3);
}
