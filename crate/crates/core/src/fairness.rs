//! Per-cohort evaluation, cohort data expansion and post-hoc score balancing.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnSpec, Dataset, Role};
use crate::error::{Error, Result};
use crate::metrics::{self, EvalReport};
use crate::seed;

/// Placeholder cohort value for a missing cell.
pub const MISSING_COHORT: &str = "(missing)";

/// Recall@20 below this marks a cohort as lower performing.
pub const DEFAULT_RECALL_FLOOR: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CohortKey {
    pub column: String,
    pub value: String,
}

impl CohortKey {
    pub fn new(column: impl Into<String>, value: impl Into<String>) -> Self {
        CohortKey {
            column: column.into(),
            value: value.into(),
        }
    }
}

impl fmt::Display for CohortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.column, self.value)
    }
}

/// Per-row cohort keys for one categorical column.
pub fn cohort_keys(ds: &Dataset, column: &str) -> Result<Vec<CohortKey>> {
    let spec = ds
        .schema()
        .column(column)
        .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
    if spec.role != Role::Categorical {
        return Err(Error::WrongRole {
            column: column.to_string(),
            expected: "categorical",
            actual: spec.role.as_str(),
        });
    }
    let col = ds.column(column)?.as_categorical().expect("categorical role");
    Ok(col
        .values()
        .map(|v| CohortKey::new(column, v.unwrap_or(MISSING_COHORT)))
        .collect())
}

/// Upper-exclusive age band edges; default bands 0-14, 15-29, 30-44, 45-59, 60+.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeBands {
    pub edges: Vec<f64>,
}

impl Default for AgeBands {
    fn default() -> Self {
        AgeBands {
            edges: vec![15.0, 30.0, 45.0, 60.0],
        }
    }
}

impl AgeBands {
    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty()
            || self.edges.iter().any(|e| !e.is_finite() || *e <= 0.0)
            || self.edges.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidPlan("age band edges must be positive and increasing".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        let mut low = 0.0;
        for e in &self.edges {
            out.push(format!("{low}-{}", e - 1.0));
            low = *e;
        }
        out.push(format!("{low}+"));
        out
    }

    pub fn band(&self, age: f64) -> usize {
        self.edges.iter().take_while(|&&e| age >= e).count()
    }

    /// Adds a categorical column `name` holding each row's band of `column`.
    pub fn apply(&self, ds: &Dataset, column: &str, name: &str) -> Result<Dataset> {
        self.validate()?;
        let spec = ds
            .schema()
            .column(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        if spec.role != Role::Numeric {
            return Err(Error::WrongRole {
                column: column.to_string(),
                expected: "numeric",
                actual: spec.role.as_str(),
            });
        }
        let labels = self.labels();
        let col = ds.column(column)?;
        let banded: Vec<Option<&str>> = (0..ds.n_rows())
            .map(|r| col.numeric_at(r).map(|v| labels[self.band(v)].as_str()))
            .collect();
        ds.with_column(ColumnSpec::new(name, Role::Categorical), Column::categorical(&banded))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub key: CohortKey,
    pub n: usize,
    pub positives: usize,
    pub report: EvalReport,
    pub recall_at_20: Option<f64>,
    pub av_recall: Option<f64>,
    /// Why ranking metrics are absent, if they are.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disparity {
    /// Max minus min Recall@20 over cohorts with positives.
    pub recall_at_20_spread: Option<f64>,
    pub floor: f64,
    pub below_floor: Vec<CohortKey>,
    pub below_floor_mean_recall_at_20: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub n: usize,
    pub entries: Vec<CohortEntry>,
    pub disparity: Disparity,
}

impl CohortReport {
    pub fn entry(&self, key: &CohortKey) -> Option<&CohortEntry> {
        self.entries.iter().find(|e| &e.key == key)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cohort_column", "cohort_value", "n", "recall_at_20", "av_recall"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for e in &self.entries {
            w.write_record([
                e.key.column.clone(),
                e.key.value.clone(),
                e.n.to_string(),
                opt(e.recall_at_20),
                opt(e.av_recall),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn check_aligned(scores: &[f64], labels: &[u8], cohorts: &[CohortKey]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.len() != cohorts.len() {
        return Err(Error::LengthMismatch(scores.len(), cohorts.len()));
    }
    Ok(())
}

fn groups(cohorts: &[CohortKey]) -> BTreeMap<&CohortKey, Vec<usize>> {
    let mut g: BTreeMap<&CohortKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in cohorts.iter().enumerate() {
        g.entry(k).or_default().push(i);
    }
    g
}

/// Metrics computed independently inside each cohort.
pub fn cohort_report(
    scores: &[f64],
    labels: &[u8],
    cohorts: &[CohortKey],
    threshold: f64,
    floor: f64,
) -> Result<CohortReport> {
    check_aligned(scores, labels, cohorts)?;
    let mut entries = Vec::new();
    for (key, rows) in groups(cohorts) {
        let s: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
        let y: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
        let positives = y.iter().filter(|&&v| v == 1).count();
        let report = metrics::classification_report(&s, &y, threshold)?;
        let (recall_at_20, av_recall, flag) = if positives == 0 {
            (None, None, Some("no positive labels in cohort".to_string()))
        } else {
            (
                Some(metrics::recall_at_k(&s, &y, 20.0)?),
                Some(metrics::av_recall_10_40(&s, &y)?),
                None,
            )
        };
        entries.push(CohortEntry {
            key: key.clone(),
            n: rows.len(),
            positives,
            report,
            recall_at_20,
            av_recall,
            flag,
        });
    }
    let disparity = disparity(&entries, floor);
    Ok(CohortReport {
        n: scores.len(),
        entries,
        disparity,
    })
}

fn disparity(entries: &[CohortEntry], floor: f64) -> Disparity {
    let recalls: Vec<f64> = entries.iter().filter_map(|e| e.recall_at_20).collect();
    let spread = if recalls.is_empty() {
        None
    } else {
        let max = recalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = recalls.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max - min)
    };
    let below: Vec<&CohortEntry> = entries
        .iter()
        .filter(|e| e.recall_at_20.is_some_and(|r| r < floor))
        .collect();
    let mean = (!below.is_empty())
        .then(|| below.iter().map(|e| e.recall_at_20.unwrap()).sum::<f64>() / below.len() as f64);
    Disparity {
        recall_at_20_spread: spread,
        floor,
        below_floor: below.iter().map(|e| e.key.clone()).collect(),
        below_floor_mean_recall_at_20: mean,
    }
}

/// Share of each cohort's positives that fall in the global top `k` percent.
/// Cohorts without positives are omitted.
pub fn selection_recall(
    scores: &[f64],
    labels: &[u8],
    cohorts: &[CohortKey],
    k: f64,
) -> Result<BTreeMap<CohortKey, f64>> {
    check_aligned(scores, labels, cohorts)?;
    if !(k > 0.0 && k <= 100.0) {
        return Err(Error::InvalidK(k));
    }
    let chosen = metrics::selected_count(k, scores.len());
    let mut selected = vec![false; scores.len()];
    for &r in &metrics::ranking(scores)[..chosen] {
        selected[r] = true;
    }
    let mut out = BTreeMap::new();
    for (key, rows) in groups(cohorts) {
        let pos = rows.iter().filter(|&&r| labels[r] == 1).count();
        if pos > 0 {
            let hit = rows.iter().filter(|&&r| labels[r] == 1 && selected[r]).count();
            out.insert(key.clone(), hit as f64 / pos as f64);
        }
    }
    Ok(out)
}

/// Max minus min over a cohort metric map.
pub fn spread(values: &BTreeMap<CohortKey, f64>) -> Option<f64> {
    let max = values.values().copied().reduce(f64::max)?;
    let min = values.values().copied().reduce(f64::min)?;
    Some(max - min)
}

/// Fraction of each cohort selected by a global top `k` percent cut.
pub fn selection_rates(scores: &[f64], cohorts: &[CohortKey], k: f64) -> Result<BTreeMap<CohortKey, f64>> {
    if scores.len() != cohorts.len() {
        return Err(Error::LengthMismatch(scores.len(), cohorts.len()));
    }
    if !(k > 0.0 && k <= 100.0) {
        return Err(Error::InvalidK(k));
    }
    let chosen = metrics::selected_count(k, scores.len());
    let mut selected = vec![false; scores.len()];
    for &r in &metrics::ranking(scores)[..chosen] {
        selected[r] = true;
    }
    Ok(groups(cohorts)
        .into_iter()
        .map(|(key, rows)| {
            let hit = rows.iter().filter(|&&r| selected[r]).count();
            (key.clone(), hit as f64 / rows.len() as f64)
        })
        .collect())
}

/// Duplicates rows of each listed cohort, sampled with replacement, until
/// the cohort holds `ceil(factor * original)` rows. Extra rows are appended
/// after the original rows.
pub fn expand_cohort_data(train: &Dataset, low: &[CohortKey], factor: f64, seed: u64) -> Result<Dataset> {
    if !(factor.is_finite() && factor >= 1.0) {
        return Err(Error::InvalidPlan(format!("expansion factor {factor} must be >= 1")));
    }
    let mut extra = Vec::new();
    let mut cache: BTreeMap<&str, Vec<CohortKey>> = BTreeMap::new();
    for (i, key) in low.iter().enumerate() {
        if !cache.contains_key(key.column.as_str()) {
            cache.insert(key.column.as_str(), cohort_keys(train, &key.column)?);
        }
        let members: Vec<usize> = cache[key.column.as_str()]
            .iter()
            .enumerate()
            .filter(|(_, k)| *k == key)
            .map(|(r, _)| r)
            .collect();
        if members.is_empty() {
            return Err(Error::UnknownCohort {
                column: key.column.clone(),
                value: key.value.clone(),
            });
        }
        let target = (factor * members.len() as f64 - 1e-9).ceil() as usize;
        let mut rng = seed::rng(seed::derive(seed, &format!("expand:{i}:{key}")));
        for _ in members.len()..target {
            extra.push(members[rng.random_range(0..members.len())]);
        }
    }
    if extra.is_empty() {
        return Ok(train.clone());
    }
    let rows: Vec<usize> = (0..train.n_rows()).chain(extra).collect();
    Ok(train.take(&rows))
}

/// Replaces each score by its within-cohort fractional rank
/// `(rank - 0.5) / cohort_size`, ranking ascending with ties at their mid rank.
pub fn posthoc_balance(scores: &[f64], cohorts: &[CohortKey]) -> Result<Vec<f64>> {
    if scores.len() != cohorts.len() {
        return Err(Error::LengthMismatch(scores.len(), cohorts.len()));
    }
    let mut out = vec![0.0; scores.len()];
    for rows in groups(cohorts).into_values() {
        let mut order = rows.clone();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let size = order.len() as f64;
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() && scores[order[j]] == scores[order[i]] {
                j += 1;
            }
            // Ranks i+1..=j share their mean.
            let mid = (i + 1 + j) as f64 / 2.0;
            for &r in &order[i..j] {
                out[r] = (mid - 0.5) / size;
            }
            i = j;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(values: &[&str]) -> Vec<CohortKey> {
        values.iter().map(|v| CohortKey::new("c", *v)).collect()
    }

    #[test]
    fn age_band_labels() {
        let b = AgeBands::default();
        assert_eq!(b.labels(), vec!["0-14", "15-29", "30-44", "45-59", "60+"]);
        assert_eq!(b.band(0.0), 0);
        assert_eq!(b.band(14.9), 0);
        assert_eq!(b.band(15.0), 1);
        assert_eq!(b.band(59.0), 3);
        assert_eq!(b.band(88.0), 4);
    }

    #[test]
    fn balance_uses_mid_ranks() {
        let s = [0.9, 0.1, 0.5, 0.5, 0.3];
        let out = posthoc_balance(&s, &keys(&["a", "a", "a", "a", "b"])).unwrap();
        assert_eq!(out, vec![3.5 / 4.0, 0.5 / 4.0, 2.0 / 4.0, 2.0 / 4.0, 0.5]);
    }

    #[test]
    fn hand_built_disparity() {
        // A ranks its positives first; B ranks them last.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut cohorts = Vec::new();
        for i in 0..10 {
            scores.push(1.0 - i as f64 / 10.0);
            labels.push(u8::from(i < 2));
            cohorts.push(CohortKey::new("c", "A"));
        }
        for i in 0..10 {
            scores.push(1.0 - i as f64 / 10.0);
            labels.push(u8::from(i >= 8));
            cohorts.push(CohortKey::new("c", "B"));
        }
        let r = cohort_report(&scores, &labels, &cohorts, 0.5, 0.7).unwrap();
        // Top 20% of ten rows is two rows: both positives in A, none in B.
        assert_eq!(r.entries[0].recall_at_20, Some(1.0));
        assert_eq!(r.entries[1].recall_at_20, Some(0.0));
        assert_eq!(r.disparity.recall_at_20_spread, Some(1.0));
        assert_eq!(r.disparity.below_floor, vec![CohortKey::new("c", "B")]);
    }

    #[test]
    fn cohorts_without_positives_are_flagged() {
        let r = cohort_report(&[0.2, 0.4], &[0, 0], &keys(&["x", "x"]), 0.5, 0.7).unwrap();
        assert!(r.entries[0].flag.is_some());
        assert_eq!(r.disparity.recall_at_20_spread, None);
    }
}
