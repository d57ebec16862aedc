use serde::{Deserialize, Serialize};

use super::fitted::{category_stats, woe_value};
use super::kind::DEFAULT_EPSILON;
use crate::data::{Dataset, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WoeBin {
    pub category: String,
    pub count: usize,
    pub events: usize,
    pub non_event_share: f64,
    pub event_share: f64,
    pub woe: f64,
    /// (non_event_share - event_share) * woe
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvRow {
    pub column: String,
    pub information_value: f64,
    pub bins: Vec<WoeBin>,
}

/// Categorical columns ranked by information value, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvTable {
    pub rows: Vec<IvRow>,
}

/// Information value of every categorical column with the default smoothing.
pub fn iv_rank(train: &Dataset) -> Result<IvTable> {
    iv_rank_with(train, DEFAULT_EPSILON)
}

pub fn iv_rank_with(train: &Dataset, epsilon: f64) -> Result<IvTable> {
    let labels = train.labels()?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::DegenerateTarget("negative"));
    }
    if positives == labels.len() {
        return Err(Error::DegenerateTarget("positive"));
    }
    let mut rows = Vec::new();
    for name in train.schema().names_with_role(Role::Categorical) {
        let stats = category_stats(train, name, labels)?;
        let total: usize = stats.values().map(|s| s.count).sum();
        let events: usize = stats.values().map(|s| s.positives).sum();
        let bins: Vec<WoeBin> = stats
            .iter()
            .map(|(category, s)| {
                let (woe, non_event_share, event_share) =
                    woe_value(s.count, s.positives, total, events, stats.len(), epsilon);
                WoeBin {
                    category: category.clone(),
                    count: s.count,
                    events: s.positives,
                    non_event_share,
                    event_share,
                    woe,
                    contribution: (non_event_share - event_share) * woe,
                }
            })
            .collect();
        rows.push(IvRow {
            column: name.to_string(),
            information_value: bins.iter().map(|b| b.contribution).sum(),
            bins,
        });
    }
    rows.sort_by(|a, b| {
        b.information_value
            .total_cmp(&a.information_value)
            .then_with(|| a.column.cmp(&b.column))
    });
    Ok(IvTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnSpec, Schema};

    #[test]
    fn constant_column_has_zero_iv() {
        let schema = Schema::new(vec![
            ColumnSpec::new("k", Role::Categorical),
            ColumnSpec::new("y", Role::Target),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                Column::categorical(&[Some("same"); 6]),
                Column::labels(vec![1, 0, 0, 1, 0, 0]),
            ],
        )
        .unwrap();
        let t = iv_rank(&ds).unwrap();
        assert_eq!(t.rows[0].information_value, 0.0);
        assert_eq!(t.rows[0].bins[0].woe, 0.0);
    }
}
