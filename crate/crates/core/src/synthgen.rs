//! Seeded registry-like data with planted, recoverable signal.
//!
//! Each row's log-odds is an intercept plus per-feature contributions: a
//! coefficient times a seeded level effect for categorical columns, or times
//! the standardised value for numeric ones. The intercept is bisected so the
//! realised label rate matches the requested prevalence.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::data::{parse_date, Column, ColumnSpec, Dataset, Role, Schema};
use crate::error::{Error, Result};
use crate::preprocess::CleaningPlan;
use crate::seed;

pub const POSITIVE_LABEL: &str = "LFU";
pub const NEGATIVE_LABEL: &str = "Cured";
pub const ID_COLUMN: &str = "patient_id";
pub const DATE_COLUMN: &str = "notification_date";
pub const TARGET_COLUMN: &str = "outcome";
pub const LEAK_COLUMN: &str = "patient_status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub cardinality: usize,
    #[serde(default = "default_zipf")]
    pub zipf_exponent: f64,
    /// Explicit level names, most frequent first; generated when absent.
    #[serde(default)]
    pub levels: Option<Vec<String>>,
    /// Prefix for generated level names.
    #[serde(default)]
    pub prefix: Option<String>,
}

fn default_zipf() -> f64 {
    1.1
}

impl CategoricalSpec {
    pub fn generated(name: &str, prefix: &str, cardinality: usize) -> Self {
        CategoricalSpec {
            name: name.into(),
            cardinality,
            zipf_exponent: default_zipf(),
            levels: None,
            prefix: Some(prefix.into()),
        }
    }

    pub fn named(name: &str, levels: &[&str], zipf_exponent: f64) -> Self {
        CategoricalSpec {
            name: name.into(),
            cardinality: levels.len(),
            zipf_exponent,
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            prefix: None,
        }
    }

    pub fn level_names(&self) -> Vec<String> {
        match &self.levels {
            Some(l) => l.clone(),
            None => {
                let prefix = self.prefix.as_deref().unwrap_or(&self.name);
                (1..=self.cardinality).map(|j| format!("{prefix} {j:03}")).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSpec {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    /// Decimal places kept; `None` keeps full precision.
    #[serde(default)]
    pub decimals: Option<u32>,
}

/// Coefficient shifts applied to rows dated on or after `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub cutoff: String,
    pub shift: BTreeMap<String, f64>,
}

/// A cohort whose shared signal is scaled by `attenuation` and which carries
/// extra coefficients of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakCohort {
    pub column: String,
    pub value: String,
    pub attenuation: f64,
    #[serde(default)]
    pub own_signal: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_rows: usize,
    pub date_start: String,
    pub date_end: String,
    pub prevalence: f64,
    pub categorical: Vec<CategoricalSpec>,
    pub numeric: Vec<NumericSpec>,
    /// Feature name to log-odds coefficient.
    pub signal: BTreeMap<String, f64>,
    pub noise_std: f64,
    /// Column name to fraction of cells blanked after labelling.
    pub missingness: BTreeMap<String, f64>,
    pub drift: Option<DriftSpec>,
    pub weak_cohort: Option<WeakCohort>,
    pub leak_column: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        let categorical = vec![
            CategoricalSpec::named("gender", &["Male", "Female", "Transgender"], 1.5),
            CategoricalSpec::generated("diagnosing_facility", "Facility", 300),
            CategoricalSpec::generated("tb_unit", "TU", 40),
            CategoricalSpec::named("hiv_status", &["Negative", "Unknown", "Positive"], 2.0),
            CategoricalSpec::named("diabetes_status", &["Non-diabetic", "Unknown", "Diabetic"], 1.5),
            CategoricalSpec::named(
                "key_population",
                &["None", "Migrant", "Urban slum", "Tribal", "Prisoner", "Health worker"],
                1.6,
            ),
            CategoricalSpec::named(
                "type_of_case",
                &["New", "Retreatment", "Transfer in", "Relapse"],
                1.8,
            ),
        ];
        let numeric = vec![
            NumericSpec {
                name: "age".into(),
                mean: 40.0,
                std: 16.0,
                min: Some(1.0),
                max: Some(90.0),
                decimals: Some(0),
            },
            NumericSpec {
                name: "weight".into(),
                mean: 50.0,
                std: 10.0,
                min: Some(5.0),
                max: Some(120.0),
                decimals: Some(1),
            },
        ];
        // Scaled so the noise-free log-odds rank at AUC near 0.96.
        let signal = [
            ("age", -1.5),
            ("weight", -1.8),
            ("gender", 0.8),
            ("diagnosing_facility", 2.0),
            ("tb_unit", 2.0),
            ("hiv_status", 1.5),
            ("diabetes_status", 0.8),
            ("key_population", 1.65),
            ("type_of_case", 2.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        GenConfig {
            n_rows: 10_000,
            date_start: "2018-01-01".into(),
            date_end: "2023-12-31".into(),
            prevalence: 0.2213,
            categorical,
            numeric,
            signal,
            noise_std: 0.3,
            missingness: BTreeMap::from([("weight".to_string(), 0.03), ("hiv_status".to_string(), 0.02)]),
            drift: None,
            weak_cohort: None,
            leak_column: false,
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Default roster plus a uniform four-level `region` column whose "West"
    /// level has attenuated shared signal and reversed age and weight effects.
    pub fn weak_cohort_scenario(n_rows: usize, seed: u64) -> Self {
        let mut cfg = GenConfig {
            n_rows,
            seed,
            ..Default::default()
        };
        cfg.categorical
            .push(CategoricalSpec::named("region", &["North", "South", "East", "West"], 0.0));
        cfg.weak_cohort = Some(WeakCohort {
            column: "region".into(),
            value: "West".into(),
            attenuation: 0.3,
            own_signal: BTreeMap::from([("age".to_string(), 2.0), ("weight".to_string(), 1.5)]),
        });
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Cleaning plan that binarises the generated outcome column.
    pub fn cleaning_plan(&self) -> CleaningPlan {
        CleaningPlan {
            target_positive_values: [POSITIVE_LABEL.to_string()].into(),
            target_negative_values: [NEGATIVE_LABEL.to_string()].into(),
            ..CleaningPlan::default()
        }
    }

    fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.categorical
            .iter()
            .map(|c| c.name.as_str())
            .chain(self.numeric.iter().map(|n| n.name.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGenConfig(m));
        if self.n_rows < 2 {
            return bad(format!("n_rows must be >= 2, got {}", self.n_rows));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return bad(format!("prevalence must lie in (0, 1), got {}", self.prevalence));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and >= 0".into());
        }
        let (Some(start), Some(end)) = (parse_date(&self.date_start), parse_date(&self.date_end)) else {
            return bad("date range must be YYYY-MM-DD".into());
        };
        if start > end {
            return bad("date_start is after date_end".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in self.feature_names() {
            if !seen.insert(name) || [ID_COLUMN, DATE_COLUMN, TARGET_COLUMN, LEAK_COLUMN].contains(&name) {
                return bad(format!("duplicate or reserved column `{name}`"));
            }
        }
        for c in &self.categorical {
            if c.cardinality < 2 || c.level_names().len() != c.cardinality {
                return bad(format!("`{}` needs >= 2 levels matching its cardinality", c.name));
            }
            if !(c.zipf_exponent >= 0.0) {
                return bad(format!("`{}` zipf exponent must be >= 0", c.name));
            }
        }
        for n in &self.numeric {
            if !(n.std >= 0.0 && n.mean.is_finite() && n.std.is_finite()) {
                return bad(format!("`{}` needs finite mean and std >= 0", n.name));
            }
        }
        let known = |k: &str| seen.contains(k);
        for k in self.signal.keys() {
            if !known(k) {
                return bad(format!("signal names unknown feature `{k}`"));
            }
        }
        for (k, &f) in &self.missingness {
            if !(known(k) || k == DATE_COLUMN) {
                return bad(format!("missingness names unknown column `{k}`"));
            }
            if !(0.0..1.0).contains(&f) {
                return bad(format!("missingness for `{k}` must lie in [0, 1)"));
            }
        }
        if let Some(d) = &self.drift {
            if parse_date(&d.cutoff).is_none() || d.shift.keys().any(|k| !known(k)) {
                return bad("drift needs a YYYY-MM-DD cutoff and known features".into());
            }
        }
        if let Some(w) = &self.weak_cohort {
            let Some(spec) = self.categorical.iter().find(|c| c.name == w.column) else {
                return bad(format!("weak cohort column `{}` is not categorical", w.column));
            };
            if !spec.level_names().contains(&w.value) {
                return bad(format!("weak cohort value `{}` is not a level of `{}`", w.value, w.column));
            }
            if w.own_signal.keys().any(|k| !known(k)) {
                return bad("weak cohort signal names an unknown feature".into());
            }
        }
        Ok(())
    }
}

/// The planted model behind a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    /// Per categorical column, the effect of each level in level order.
    pub level_effects: BTreeMap<String, Vec<(String, f64)>>,
    /// Noise-free log-odds of every row.
    pub log_odds: Vec<f64>,
    pub realized_prevalence: f64,
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn sigmoid(z: f64) -> f64 {
    crate::models::sigmoid(z)
}

pub fn generate(cfg: &GenConfig) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.n_rows;
    let start = parse_date(&cfg.date_start).expect("validated");
    let end = parse_date(&cfg.date_end).expect("validated");

    let mut rng = seed::rng(seed::derive(cfg.seed, "synthgen:dates"));
    let dates: Vec<i32> = (0..n).map(|_| rng.random_range(start..=end)).collect();

    // Categorical draws and level effects.
    let mut cat_values: Vec<Vec<usize>> = Vec::new();
    let mut level_effects = BTreeMap::new();
    for c in &cfg.categorical {
        let mut rng = seed::rng(seed::derive(cfg.seed, &format!("synthgen:levels:{}", c.name)));
        let zipf = Zipf::new(c.cardinality as f64, c.zipf_exponent)
            .map_err(|e| Error::InvalidGenConfig(format!("`{}`: {e}", c.name)))?;
        let values: Vec<usize> = (0..n).map(|_| zipf.sample(&mut rng) as usize - 1).collect();
        let mut erng = seed::rng(seed::derive(cfg.seed, &format!("synthgen:effects:{}", c.name)));
        let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
        let effects: Vec<f64> = (0..c.cardinality).map(|_| std_normal.sample(&mut erng)).collect();
        level_effects.insert(
            c.name.clone(),
            c.level_names().into_iter().zip(effects).collect::<Vec<_>>(),
        );
        cat_values.push(values);
    }

    let mut num_values: Vec<Vec<f64>> = Vec::new();
    for s in &cfg.numeric {
        let mut rng = seed::rng(seed::derive(cfg.seed, &format!("synthgen:numeric:{}", s.name)));
        let dist = Normal::new(s.mean, s.std).map_err(|e| Error::InvalidGenConfig(e.to_string()))?;
        num_values.push(
            (0..n)
                .map(|_| {
                    let mut v = dist.sample(&mut rng);
                    if let Some(lo) = s.min {
                        v = v.max(lo);
                    }
                    if let Some(hi) = s.max {
                        v = v.min(hi);
                    }
                    if let Some(d) = s.decimals {
                        let f = 10f64.powi(d as i32);
                        v = (v * f).round() / f;
                    }
                    v
                })
                .collect(),
        );
    }

    // Per-feature contribution of a row under a coefficient map.
    let contribution = |coef: &BTreeMap<String, f64>, i: usize| -> f64 {
        let mut z = 0.0;
        for (c, values) in cfg.categorical.iter().zip(&cat_values) {
            if let Some(b) = coef.get(&c.name) {
                z += b * level_effects[&c.name][values[i]].1;
            }
        }
        for (s, values) in cfg.numeric.iter().zip(&num_values) {
            if let Some(b) = coef.get(&s.name) {
                let sd = if s.std > 0.0 { s.std } else { 1.0 };
                z += b * (values[i] - s.mean) / sd;
            }
        }
        z
    };
    let drift_cutoff = cfg.drift.as_ref().map(|d| parse_date(&d.cutoff).expect("validated"));
    let weak = cfg.weak_cohort.as_ref().map(|w| {
        let col = cfg.categorical.iter().position(|c| c.name == w.column).expect("validated");
        let level = cfg.categorical[col]
            .level_names()
            .iter()
            .position(|l| *l == w.value)
            .expect("validated");
        (w, col, level)
    });
    let signal: Vec<f64> = (0..n)
        .map(|i| {
            let mut z = contribution(&cfg.signal, i);
            if let (Some(cut), Some(d)) = (drift_cutoff, &cfg.drift) {
                if dates[i] >= cut {
                    z += contribution(&d.shift, i);
                }
            }
            if let Some((w, col, level)) = weak {
                if cat_values[col][i] == level {
                    z = w.attenuation * z + contribution(&w.own_signal, i);
                }
            }
            z
        })
        .collect();

    let mut rng = seed::rng(seed::derive(cfg.seed, "synthgen:labels"));
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).expect("valid normal");
    let noisy: Vec<f64> = signal
        .iter()
        .map(|z| z + if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 })
        .collect();
    let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let target = (cfg.prevalence * n as f64).round() as usize;
    let count = |b: f64| {
        noisy
            .iter()
            .zip(&uniforms)
            .filter(|(z, u)| **u < sigmoid(b + **z))
            .count()
    };
    let bound = 30.0;
    if target == 0 || target == n || count(-bound) > target || count(bound) < target {
        return Err(Error::InfeasiblePrevalence(cfg.prevalence));
    }
    // Smallest intercept reaching the target count.
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let intercept = hi;
    let labels: Vec<bool> = noisy
        .iter()
        .zip(&uniforms)
        .map(|(z, u)| *u < sigmoid(intercept + z))
        .collect();
    let positives = labels.iter().filter(|&&l| l).count();

    // Assemble columns, then blank cells.
    let mut specs = vec![ColumnSpec::new(ID_COLUMN, Role::Identifier)];
    let mut columns = vec![Column::categorical(
        &(1..=n).map(|i| Some(format!("P{i:07}"))).collect::<Vec<_>>(),
    )];
    let missing_rows = |name: &str| -> Vec<bool> {
        let mut mask = vec![false; n];
        if let Some(&f) = cfg.missingness.get(name) {
            let mut rng = seed::rng(seed::derive(cfg.seed, &format!("synthgen:missing:{name}")));
            for i in sample(&mut rng, n, (f * n as f64).round() as usize) {
                mask[i] = true;
            }
        }
        mask
    };
    for (c, values) in cfg.categorical.iter().zip(&cat_values) {
        let names = c.level_names();
        let mask = missing_rows(&c.name);
        let cells: Vec<Option<&str>> = values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| (!m).then(|| names[v].as_str()))
            .collect();
        specs.push(ColumnSpec::new(&c.name, Role::Categorical));
        columns.push(Column::categorical(&cells));
    }
    for (s, values) in cfg.numeric.iter().zip(&num_values) {
        let mask = missing_rows(&s.name);
        let cells: Vec<Option<f64>> = values.iter().zip(&mask).map(|(&v, &m)| (!m).then_some(v)).collect();
        specs.push(ColumnSpec::new(&s.name, Role::Numeric));
        columns.push(Column::numeric(&cells));
    }
    if cfg.leak_column {
        let mut rng = seed::rng(seed::derive(cfg.seed, "synthgen:leak"));
        let cells: Vec<Option<&str>> = labels
            .iter()
            .map(|&l| {
                let flipped = rng.random::<f64>() < 0.05;
                Some(if l != flipped { "closed" } else { "active" })
            })
            .collect();
        specs.push(ColumnSpec::new(LEAK_COLUMN, Role::Categorical));
        columns.push(Column::categorical(&cells));
    }
    let date_mask = missing_rows(DATE_COLUMN);
    specs.push(ColumnSpec::new(DATE_COLUMN, Role::Date));
    columns.push(Column::dates(
        &dates.iter().zip(&date_mask).map(|(&d, &m)| (!m).then_some(d)).collect::<Vec<_>>(),
    ));
    specs.push(ColumnSpec::new(TARGET_COLUMN, Role::Target));
    columns.push(Column::categorical(
        &labels
            .iter()
            .map(|&l| Some(if l { POSITIVE_LABEL } else { NEGATIVE_LABEL }))
            .collect::<Vec<_>>(),
    ));

    let dataset = Dataset::new(Schema::new(specs)?, columns)?;
    let mut coefficients = cfg.signal.clone();
    coefficients.insert("intercept".into(), intercept);
    let truth = GroundTruth {
        intercept,
        coefficients,
        level_effects,
        log_odds: signal.iter().map(|z| intercept + z).collect(),
        realized_prevalence: positives as f64 / n as f64,
    };
    Ok((dataset, truth))
}
