use serde::{Deserialize, Serialize};

use crate::data::{format_date, ColumnData, Dataset, Role};
use crate::error::{Error, Result};

pub const DEFAULT_PASSIVE_WINDOW_DAYS: i32 = 183;
pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Last/first dates of each partition, in days since the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryDates {
    pub train_end: i32,
    pub val_end: i32,
    pub test_end: i32,
    pub passive_start: i32,
}

impl BoundaryDates {
    pub fn to_iso(&self) -> [String; 4] {
        [
            format_date(self.train_end),
            format_date(self.val_end),
            format_date(self.test_end),
            format_date(self.passive_start),
        ]
    }
}

/// Chronological train / validation / test / passive partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub passive: Dataset,
    pub boundary_dates: BoundaryDates,
}

impl SplitBundle {
    /// Train, validation and test stacked back together in date order.
    pub fn modeling(&self) -> Result<Dataset> {
        Dataset::concat(&[&self.train, &self.validation, &self.test])
    }
}

/// Partition sizes for a modeling split of `m` rows: floor at the first
/// cumulative ratio, floor at the second, remainder to test.
pub fn partition_sizes(m: usize, ratios: (f64, f64, f64)) -> (usize, usize, usize) {
    // The epsilon keeps products like 0.7 * 10 from flooring to 6.
    let cut1 = ((ratios.0 * m as f64) + 1e-9).floor() as usize;
    let cut2 = (((ratios.0 + ratios.1) * m as f64) + 1e-9).floor() as usize;
    let cut1 = cut1.min(m);
    let cut2 = cut2.clamp(cut1, m);
    (cut1, cut2 - cut1, m - cut2)
}

/// Splits off every row dated within `passive_window_days` of the latest date
/// as the passive hold-out, then cuts the rest chronologically by `ratios`.
pub fn temporal_split(
    ds: &Dataset,
    date_column: &str,
    passive_window_days: i32,
    ratios: (f64, f64, f64),
) -> Result<SplitBundle> {
    let spec = ds
        .schema()
        .column(date_column)
        .ok_or_else(|| Error::UnknownColumn(date_column.to_string()))?;
    if spec.role != Role::Date {
        return Err(Error::WrongRole {
            column: date_column.to_string(),
            expected: "date",
            actual: spec.role.as_str(),
        });
    }
    let (r0, r1, r2) = ratios;
    if [r0, r1, r2].iter().any(|r| !(r.is_finite() && *r >= 0.0))
        || ((r0 + r1 + r2) - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidRatios(format!(
            "({r0}, {r1}, {r2}) must be non-negative and sum to 1"
        )));
    }
    if passive_window_days < 0 {
        return Err(Error::InvalidRatios("passive window must be non-negative".into()));
    }
    let col = ds.column(date_column)?;
    if col.missing_count() > 0 {
        return Err(Error::MissingDates(date_column.to_string()));
    }
    let ColumnData::Date(dates) = col.data() else {
        unreachable!("date role implies date storage")
    };
    let Some(&max_date) = dates.iter().max() else {
        return Err(Error::EmptyPartition("train"));
    };
    let cutoff = max_date - passive_window_days;

    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    order.sort_by_key(|&r| dates[r]);
    let (passive, modeling): (Vec<usize>, Vec<usize>) =
        order.into_iter().partition(|&r| dates[r] >= cutoff);

    let (n_train, n_val, _) = partition_sizes(modeling.len(), ratios);
    let train = &modeling[..n_train];
    let validation = &modeling[n_train..n_train + n_val];
    let test = &modeling[n_train + n_val..];
    for (name, part) in [
        ("train", train),
        ("validation", validation),
        ("test", test),
        ("passive", passive.as_slice()),
    ] {
        if part.is_empty() {
            return Err(Error::EmptyPartition(name));
        }
    }

    let boundary_dates = BoundaryDates {
        train_end: dates[*train.last().expect("nonempty")],
        val_end: dates[*validation.last().expect("nonempty")],
        test_end: dates[*test.last().expect("nonempty")],
        passive_start: dates[passive[0]],
    };
    Ok(SplitBundle {
        train: ds.take(train),
        validation: ds.take(validation),
        test: ds.take(test),
        passive: ds.take(&passive),
        boundary_dates,
    })
}
