use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kind::EncoderKind;
use super::text::{jaccard, minhash, ngrams};
use crate::data::{ColumnData, Dataset, FeatureMatrix, Role};
use crate::error::{Error, Result};
use crate::seed;

pub const ENCODER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub count: usize,
    pub positives: usize,
}

/// Learned mapping for one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    pub stats: BTreeMap<String, CategoryStats>,
    pub values: BTreeMap<String, Vec<f64>>,
    /// Used for missing cells and for unseen categories (except the
    /// string-similarity encoders, which map unseen strings directly).
    pub fallback: Vec<f64>,
    /// Training rows the table was computed from.
    pub total_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ColumnEncoder {
    Categorical { name: String, table: CategoryTable },
    /// Passed through; missing cells take the training mean.
    Numeric { name: String, mean: f64 },
}

impl ColumnEncoder {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoder::Categorical { name, .. } | ColumnEncoder::Numeric { name, .. } => name,
        }
    }
}

/// Frozen encoder. Transforming data never modifies it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEncoder {
    pub format_version: u32,
    kind: EncoderKind,
    target_prior: f64,
    fitted_on: usize,
    columns: Vec<ColumnEncoder>,
}

/// Options that only affect the train-time encodings returned by [`fit_transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Encode each training row with statistics fit on the other folds.
    pub out_of_fold: Option<usize>,
    pub seed: u64,
}

impl FittedEncoder {
    pub fn kind(&self) -> &EncoderKind {
        &self.kind
    }

    pub fn target_prior(&self) -> f64 {
        self.target_prior
    }

    pub fn fitted_on(&self) -> usize {
        self.fitted_on
    }

    pub fn columns(&self) -> &[ColumnEncoder] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnEncoder> {
        self.columns.iter().find(|c| c.name() == name)
    }

    /// Encoded dimensionality.
    pub fn width(&self) -> usize {
        self.columns.iter().map(|c| self.column_width(c)).sum()
    }

    fn column_width(&self, c: &ColumnEncoder) -> usize {
        match c {
            ColumnEncoder::Categorical { .. } => self.kind.width(),
            ColumnEncoder::Numeric { .. } => 1,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                ColumnEncoder::Categorical { name, .. } if self.kind.width() > 1 => {
                    names.extend((0..self.kind.width()).map(|j| format!("{name}_{j}")));
                }
                _ => names.push(c.name().to_string()),
            }
        }
        names
    }

    /// Names of the source columns, one per emitted feature.
    pub fn feature_sources(&self) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        for c in &self.columns {
            let categorical = matches!(c, ColumnEncoder::Categorical { .. });
            for _ in 0..self.column_width(c) {
                out.push((c.name().to_string(), categorical));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let enc: FittedEncoder = serde_json::from_str(text)?;
        if enc.format_version != ENCODER_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported encoder format version {}",
                enc.format_version
            )));
        }
        Ok(enc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Encoding of a category string that may be absent from the table.
    fn lookup(&self, table: &CategoryTable, value: &str, grams: &GramCache) -> Vec<f64> {
        if let Some(v) = table.values.get(value) {
            return v.clone();
        }
        match self.kind {
            EncoderKind::SimilarityCount { ngram } => {
                vec![similarity_value(&ngrams(value, ngram), table, &grams.get(table, ngram))]
            }
            EncoderKind::MinHash {
                signature_length,
                ngram,
                seed,
            } => minhash(&ngrams(value, ngram), signature_length, seed),
            _ => table.fallback.clone(),
        }
    }
}

/// Gram sets of a table's categories, built on first unseen lookup.
#[derive(Default)]
struct GramCache {
    cache: std::sync::Mutex<BTreeMap<usize, std::sync::Arc<Vec<BTreeSet<String>>>>>,
}

impl GramCache {
    fn get(&self, table: &CategoryTable, n: usize) -> std::sync::Arc<Vec<BTreeSet<String>>> {
        let key = table as *const CategoryTable as usize;
        let mut cache = self.cache.lock().expect("gram cache lock");
        cache
            .entry(key)
            .or_insert_with(|| {
                std::sync::Arc::new(table.stats.keys().map(|c| ngrams(c, n)).collect())
            })
            .clone()
    }
}

fn similarity_value(grams: &BTreeSet<String>, table: &CategoryTable, known: &[BTreeSet<String>]) -> f64 {
    if table.total_rows == 0 {
        return 0.0;
    }
    table
        .stats
        .values()
        .zip(known)
        .map(|(s, g)| jaccard(grams, g) * s.count as f64)
        .sum::<f64>()
        / table.total_rows as f64
}

/// Smoothed weight of evidence: ln(non-event share / event share).
pub(crate) fn woe_value(
    count: usize,
    positives: usize,
    col_total: usize,
    col_positives: usize,
    n_categories: usize,
    epsilon: f64,
) -> (f64, f64, f64) {
    let k = n_categories as f64;
    let non_event_share = ((count - positives) as f64 + epsilon)
        / ((col_total - col_positives) as f64 + k * epsilon);
    let event_share = (positives as f64 + epsilon) / (col_positives as f64 + k * epsilon);
    ((non_event_share / event_share).ln(), non_event_share, event_share)
}

struct Totals {
    rows: usize,
    positives: usize,
    prior: f64,
}

/// Per-category tallies over non-missing cells.
pub(crate) fn category_stats(
    ds: &Dataset,
    column: &str,
    labels: &[u8],
) -> Result<BTreeMap<String, CategoryStats>> {
    let col = ds.column(column)?;
    let cat = col.as_categorical().ok_or_else(|| Error::WrongRole {
        column: column.to_string(),
        expected: "categorical",
        actual: "non-categorical",
    })?;
    let mut by_code = vec![CategoryStats { count: 0, positives: 0 }; cat.dictionary().len()];
    for (&code, &y) in cat.codes().iter().zip(labels) {
        if code != crate::data::MISSING_CODE {
            by_code[code as usize].count += 1;
            by_code[code as usize].positives += y as usize;
        }
    }
    Ok(cat
        .dictionary()
        .iter()
        .zip(by_code)
        .filter(|(_, s)| s.count > 0)
        .map(|(k, s)| (k.clone(), s))
        .collect())
}

fn build_table(
    kind: &EncoderKind,
    column: &str,
    stats: BTreeMap<String, CategoryStats>,
    totals: &Totals,
) -> Result<CategoryTable> {
    let prior = totals.prior;
    let n_all = totals.rows as f64;
    let k = stats.len();
    let col_total: usize = stats.values().map(|s| s.count).sum();
    let col_pos: usize = stats.values().map(|s| s.positives).sum();
    let global_odds = |eps: f64| {
        (totals.positives as f64 + eps) / ((totals.rows - totals.positives) as f64 + eps)
    };

    let mut values = BTreeMap::new();
    let fallback: Vec<f64> = match *kind {
        EncoderKind::SimilarityCount { ngram } => {
            let grams: Vec<BTreeSet<String>> = stats.keys().map(|c| ngrams(c, ngram)).collect();
            let table = CategoryTable {
                stats: stats.clone(),
                values: BTreeMap::new(),
                fallback: vec![0.0],
                total_rows: totals.rows,
            };
            for (c, g) in stats.keys().zip(&grams) {
                values.insert(c.clone(), vec![similarity_value(g, &table, &grams)]);
            }
            vec![0.0]
        }
        EncoderKind::MinHash {
            signature_length,
            ngram,
            seed,
        } => {
            for c in stats.keys() {
                values.insert(c.clone(), minhash(&ngrams(c, ngram), signature_length, seed));
            }
            vec![1.0; signature_length]
        }
        EncoderKind::Ordinal => {
            for (i, c) in stats.keys().enumerate() {
                values.insert(c.clone(), vec![i as f64]);
            }
            vec![k as f64]
        }
        _ => {
            for (c, s) in &stats {
                let n = s.count as f64;
                let np = s.positives as f64;
                let v = match *kind {
                    EncoderKind::Target { smoothing: m } => (np + m * prior) / (n + m),
                    EncoderKind::LeaveOneOut => np / n,
                    EncoderKind::OrderedTarget { prior_weight: a, .. } => {
                        (np + a * prior) / (n + a)
                    }
                    EncoderKind::NormalizedCount => n / n_all,
                    EncoderKind::Woe { epsilon } => {
                        woe_value(s.count, s.positives, col_total, col_pos, k, epsilon).0
                    }
                    EncoderKind::ProbabilityRatio { epsilon } => {
                        (np + epsilon) / (n - np + epsilon)
                    }
                    EncoderKind::OddsRatio { epsilon } => {
                        (np + epsilon) / (n - np + epsilon) / global_odds(epsilon)
                    }
                    EncoderKind::LogOddsRatio { epsilon } => {
                        ((np + epsilon) / (n - np + epsilon) / global_odds(epsilon)).ln()
                    }
                    EncoderKind::Gap { smoothing: m } => (np + m * prior) / (n + m) - prior,
                    EncoderKind::Ordinal
                    | EncoderKind::SimilarityCount { .. }
                    | EncoderKind::MinHash { .. } => unreachable!(),
                };
                values.insert(c.clone(), vec![v]);
            }
            match *kind {
                EncoderKind::Target { .. }
                | EncoderKind::LeaveOneOut
                | EncoderKind::OrderedTarget { .. } => vec![prior],
                EncoderKind::ProbabilityRatio { epsilon } => vec![global_odds(epsilon)],
                EncoderKind::OddsRatio { .. } => vec![1.0],
                _ => vec![0.0],
            }
        }
    };

    for (c, v) in values.iter().chain(std::iter::once((&"<fallback>".to_string(), &fallback))) {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEncoding {
                column: column.to_string(),
                category: c.clone(),
            });
        }
    }
    Ok(CategoryTable {
        stats,
        values,
        fallback,
        total_rows: totals.rows,
    })
}

fn check_target(kind: &EncoderKind, labels: &[u8]) -> Result<Totals> {
    let rows = labels.len();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if kind.is_target_aware() {
        if positives == 0 {
            return Err(Error::DegenerateTarget("negative"));
        }
        if positives == rows {
            return Err(Error::DegenerateTarget("positive"));
        }
    }
    let prior = if rows == 0 {
        0.0
    } else {
        positives as f64 / rows as f64
    };
    Ok(Totals {
        rows,
        positives,
        prior,
    })
}

/// Learns per-column mappings from `train` only.
pub fn fit_encoder(kind: &EncoderKind, train: &Dataset) -> Result<FittedEncoder> {
    kind.validate()?;
    let labels = train.labels()?;
    let totals = check_target(kind, labels)?;

    let specs: Vec<(String, Role)> = train
        .schema()
        .columns()
        .iter()
        .filter(|c| matches!(c.role, Role::Categorical | Role::Numeric))
        .map(|c| (c.name.clone(), c.role))
        .collect();
    let columns = specs
        .par_iter()
        .map(|(name, role)| -> Result<ColumnEncoder> {
            match role {
                Role::Categorical => {
                    let stats = category_stats(train, name, labels)?;
                    Ok(ColumnEncoder::Categorical {
                        name: name.clone(),
                        table: build_table(kind, name, stats, &totals)?,
                    })
                }
                _ => {
                    let col = train.column(name)?;
                    let observed: Vec<f64> =
                        (0..col.len()).filter_map(|r| col.numeric_at(r)).collect();
                    let mean = if observed.is_empty() {
                        0.0
                    } else {
                        observed.iter().sum::<f64>() / observed.len() as f64
                    };
                    Ok(ColumnEncoder::Numeric {
                        name: name.clone(),
                        mean,
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FittedEncoder {
        format_version: ENCODER_FORMAT_VERSION,
        kind: kind.clone(),
        target_prior: totals.prior,
        fitted_on: totals.rows,
        columns,
    })
}

/// Applies frozen mappings. Categorical cells that are missing or unseen take
/// the column fallback; numeric cells that are missing take the training mean.
pub fn transform(enc: &FittedEncoder, ds: &Dataset) -> Result<FeatureMatrix> {
    let width = enc.width();
    let n = ds.n_rows();
    let grams = GramCache::default();

    // Per column: offset, width, and either a per-dictionary-code lookup or a numeric source.
    enum Source<'a> {
        Cat {
            codes: &'a [u32],
            mapped: Vec<Vec<f64>>,
            fallback: &'a [f64],
        },
        Num {
            values: &'a [f64],
            missing: &'a [bool],
            mean: f64,
        },
    }
    let mut sources = Vec::with_capacity(enc.columns.len());
    for c in &enc.columns {
        let spec = ds.schema().column(c.name()).ok_or_else(|| {
            Error::SchemaMismatch(format!("column `{}` is absent", c.name()))
        })?;
        let col = ds.column(c.name())?;
        match (c, col.data()) {
            (ColumnEncoder::Categorical { table, .. }, ColumnData::Categorical(cat))
                if spec.role == Role::Categorical =>
            {
                let mapped = cat
                    .dictionary()
                    .par_iter()
                    .map(|s| enc.lookup(table, s, &grams))
                    .collect();
                sources.push(Source::Cat {
                    codes: cat.codes(),
                    mapped,
                    fallback: &table.fallback,
                });
            }
            (ColumnEncoder::Numeric { mean, .. }, ColumnData::Numeric(values)) => {
                sources.push(Source::Num {
                    values,
                    missing: col.missing(),
                    mean: *mean,
                });
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` has role {}, encoder expects otherwise",
                    c.name(),
                    spec.role
                )))
            }
        }
    }

    let mut values = vec![0.0; n * width];
    if width > 0 {
        values.par_chunks_mut(width).enumerate().for_each(|(r, row)| {
            let mut offset = 0;
            for src in &sources {
                match src {
                    Source::Cat {
                        codes,
                        mapped,
                        fallback,
                    } => {
                        let v: &[f64] = match codes[r] {
                            crate::data::MISSING_CODE => fallback,
                            code => &mapped[code as usize],
                        };
                        row[offset..offset + v.len()].copy_from_slice(v);
                        offset += v.len();
                    }
                    Source::Num {
                        values,
                        missing,
                        mean,
                    } => {
                        row[offset] = if missing[r] { *mean } else { values[r] };
                        offset += 1;
                    }
                }
            }
        });
    }
    FeatureMatrix::new(n, enc.feature_names(), values)
}

/// Fits on `train` and returns the encodings to train downstream models on.
///
/// Leave-one-out rows exclude their own label; ordered target rows only see
/// earlier rows of a seeded permutation; with `out_of_fold = Some(k)` every
/// target-aware encoding comes from encoders fit on the other folds.
pub fn fit_transform(
    kind: &EncoderKind,
    train: &Dataset,
    options: &FitOptions,
) -> Result<(FittedEncoder, FeatureMatrix)> {
    let enc = fit_encoder(kind, train)?;
    if let (Some(k), true) = (options.out_of_fold, kind.is_target_aware()) {
        let matrix = out_of_fold(kind, train, k, options.seed)?;
        return Ok((enc, matrix));
    }
    let matrix = transform(&enc, train)?;
    let matrix = match kind {
        EncoderKind::LeaveOneOut | EncoderKind::OrderedTarget { .. } => {
            train_time_overrides(&enc, train, matrix)?
        }
        _ => matrix,
    };
    Ok((enc, matrix))
}

fn train_time_overrides(
    enc: &FittedEncoder,
    train: &Dataset,
    matrix: FeatureMatrix,
) -> Result<FeatureMatrix> {
    let labels = train.labels()?;
    let prior = enc.target_prior;
    let width = matrix.n_cols();
    let names = matrix.names().to_vec();
    let mut values = matrix.values().to_vec();
    for (j, c) in enc.columns.iter().enumerate() {
        let ColumnEncoder::Categorical { name, table } = c else {
            continue;
        };
        let codes = train
            .column(name)?
            .as_categorical()
            .expect("checked by transform")
            .codes();
        let dict = train.column(name)?.as_categorical().expect("categorical").dictionary();
        match enc.kind {
            EncoderKind::LeaveOneOut => {
                for (r, &code) in codes.iter().enumerate() {
                    if code == crate::data::MISSING_CODE {
                        continue;
                    }
                    let s = table.stats[&dict[code as usize]];
                    values[r * width + j] = if s.count <= 1 {
                        prior
                    } else {
                        (s.positives as f64 - labels[r] as f64) / (s.count - 1) as f64
                    };
                }
            }
            EncoderKind::OrderedTarget { prior_weight, seed } => {
                let mut order: Vec<usize> = (0..train.n_rows()).collect();
                order.shuffle(&mut seed::rng(seed));
                let mut running = vec![(0.0f64, 0.0f64); dict.len()];
                for r in order {
                    let code = codes[r];
                    if code == crate::data::MISSING_CODE {
                        continue;
                    }
                    let (sum, count) = &mut running[code as usize];
                    values[r * width + j] = (*sum + prior_weight * prior) / (*count + prior_weight);
                    *sum += labels[r] as f64;
                    *count += 1.0;
                }
            }
            _ => unreachable!("only called for row-aware kinds"),
        }
    }
    FeatureMatrix::new(train.n_rows(), names, values)
}

fn out_of_fold(kind: &EncoderKind, train: &Dataset, k: usize, seed: u64) -> Result<FeatureMatrix> {
    let n = train.n_rows();
    if k < 2 || k > n {
        return Err(Error::InvalidEncoderParam(format!(
            "out_of_fold needs 2 <= k <= rows, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, "encode/out_of_fold")));
    let mut fold_of = vec![0usize; n];
    for (pos, &r) in order.iter().enumerate() {
        fold_of[r] = pos % k;
    }
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut names = Vec::new();
    for f in 0..k {
        let held: Vec<usize> = (0..n).filter(|&r| fold_of[r] == f).collect();
        let rest: Vec<usize> = (0..n).filter(|&r| fold_of[r] != f).collect();
        let enc = fit_encoder(kind, &train.take(&rest))?;
        let m = transform(&enc, &train.take(&held))?;
        names = m.names().to_vec();
        for (i, &r) in held.iter().enumerate() {
            rows[r] = Some(m.row(i).to_vec());
        }
    }
    let values = rows.into_iter().flat_map(|r| r.expect("every row held out once")).collect();
    FeatureMatrix::new(n, names, values)
}
