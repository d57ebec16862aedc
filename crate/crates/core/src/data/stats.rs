use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset};
use crate::error::Result;

/// Summary over the non-missing cells of one column.
///
/// `std` uses the population convention (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub n_rows: usize,
    pub missing_count: usize,
    pub missing_fraction: f64,
    /// Distinct non-missing categories (categorical-like columns only).
    pub cardinality: Option<usize>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub value_counts: BTreeMap<String, usize>,
}

pub fn column_stats(ds: &Dataset, column: &str) -> Result<ColumnStats> {
    let col = ds.column(column)?;
    let n_rows = col.len();
    let missing_count = col.missing_count();
    let missing_fraction = if n_rows == 0 {
        0.0
    } else {
        missing_count as f64 / n_rows as f64
    };
    let mut stats = ColumnStats {
        n_rows,
        missing_count,
        missing_fraction,
        cardinality: None,
        mean: None,
        std: None,
        min: None,
        max: None,
        value_counts: BTreeMap::new(),
    };

    let numeric: Option<Vec<f64>> = match col.data() {
        ColumnData::Categorical(c) => {
            for v in c.values().flatten() {
                *stats.value_counts.entry(v.to_string()).or_default() += 1;
            }
            stats.cardinality = Some(stats.value_counts.len());
            None
        }
        ColumnData::Numeric(v) => Some(
            v.iter()
                .zip(col.missing())
                .filter(|(_, &m)| !m)
                .map(|(&x, _)| x)
                .collect(),
        ),
        ColumnData::Date(v) => Some(
            v.iter()
                .zip(col.missing())
                .filter(|(_, &m)| !m)
                .map(|(&x, _)| x as f64)
                .collect(),
        ),
        ColumnData::Label(v) => {
            for &y in v {
                *stats.value_counts.entry(y.to_string()).or_default() += 1;
            }
            stats.cardinality = Some(stats.value_counts.len());
            Some(v.iter().map(|&y| y as f64).collect())
        }
    };

    if let Some(values) = numeric.filter(|v| !v.is_empty()) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        stats.mean = Some(mean);
        stats.std = Some(var.sqrt());
        stats.min = values.iter().copied().reduce(f64::min);
        stats.max = values.iter().copied().reduce(f64::max);
    }
    Ok(stats)
}
