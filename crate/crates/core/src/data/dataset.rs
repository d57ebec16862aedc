use std::borrow::Cow;
use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::schema::{ColumnSpec, Role, Schema};
use crate::error::{Error, Result};

/// Code stored for missing categorical cells. Never indexes the dictionary.
pub const MISSING_CODE: u32 = u32::MAX;

/// Dictionary-coded strings. Dictionary order is first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoricalColumn {
    dictionary: Vec<String>,
    codes: Vec<u32>,
}

impl CategoricalColumn {
    pub fn from_values<S: AsRef<str>>(values: &[Option<S>]) -> Self {
        let mut lookup: HashMap<String, u32> = HashMap::new();
        let mut dictionary = Vec::new();
        let codes = values
            .iter()
            .map(|v| match v {
                None => MISSING_CODE,
                Some(s) => {
                    let s = s.as_ref();
                    if let Some(&code) = lookup.get(s) {
                        code
                    } else {
                        let code = dictionary.len() as u32;
                        dictionary.push(s.to_string());
                        lookup.insert(s.to_string(), code);
                        code
                    }
                }
            })
            .collect();
        Self { dictionary, codes }
    }

    pub fn dictionary(&self) -> &[String] {
        &self.dictionary
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn get(&self, row: usize) -> Option<&str> {
        match self.codes[row] {
            MISSING_CODE => None,
            code => Some(self.dictionary[code as usize].as_str()),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = Option<&str>> + '_ {
        (0..self.codes.len()).map(move |i| self.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    /// Categorical, identifier, and not-yet-binarized target columns.
    Categorical(CategoricalColumn),
    Numeric(Vec<f64>),
    /// Days since 1970-01-01.
    Date(Vec<i32>),
    /// Binarized target.
    Label(Vec<u8>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(c) => c.codes.len(),
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Date(v) => v.len(),
            ColumnData::Label(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> &'static str {
        match self {
            ColumnData::Categorical(_) => "categorical",
            ColumnData::Numeric(_) => "numeric",
            ColumnData::Date(_) => "date",
            ColumnData::Label(_) => "label",
        }
    }
}

/// Column storage plus its missingness mask. Missing numeric/date cells hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    data: ColumnData,
    missing: Vec<bool>,
}

impl Column {
    pub fn categorical<S: AsRef<str>>(values: &[Option<S>]) -> Self {
        let missing = values.iter().map(Option::is_none).collect();
        Self {
            data: ColumnData::Categorical(CategoricalColumn::from_values(values)),
            missing,
        }
    }

    pub fn numeric(values: &[Option<f64>]) -> Self {
        Self {
            data: ColumnData::Numeric(values.iter().map(|v| v.unwrap_or(0.0)).collect()),
            missing: values.iter().map(Option::is_none).collect(),
        }
    }

    pub fn dates(values: &[Option<i32>]) -> Self {
        Self {
            data: ColumnData::Date(values.iter().map(|v| v.unwrap_or(0)).collect()),
            missing: values.iter().map(Option::is_none).collect(),
        }
    }

    pub fn labels(values: Vec<u8>) -> Self {
        let missing = vec![false; values.len()];
        Self {
            data: ColumnData::Label(values),
            missing,
        }
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn as_categorical(&self) -> Option<&CategoricalColumn> {
        match &self.data {
            ColumnData::Categorical(c) => Some(c),
            _ => None,
        }
    }

    /// Numeric value; `None` when missing or not a numeric column.
    pub fn numeric_at(&self, row: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numeric(v) if !self.missing[row] => Some(v[row]),
            _ => None,
        }
    }

    pub fn date_at(&self, row: usize) -> Option<i32> {
        match &self.data {
            ColumnData::Date(v) if !self.missing[row] => Some(v[row]),
            _ => None,
        }
    }

    /// Cell rendered as text, as written to CSV.
    pub fn cell_str(&self, row: usize) -> Option<Cow<'_, str>> {
        if self.missing[row] {
            return None;
        }
        Some(match &self.data {
            ColumnData::Categorical(c) => Cow::Borrowed(c.get(row)?),
            ColumnData::Numeric(v) => Cow::Owned(format_f64(v[row])),
            ColumnData::Date(v) => Cow::Owned(format_date(v[row])),
            ColumnData::Label(v) => Cow::Owned(v[row].to_string()),
        })
    }

    pub(crate) fn take(&self, rows: &[usize]) -> Column {
        let missing = rows.iter().map(|&r| self.missing[r]).collect();
        let data = match &self.data {
            ColumnData::Categorical(c) => ColumnData::Categorical(CategoricalColumn {
                dictionary: c.dictionary.clone(),
                codes: rows.iter().map(|&r| c.codes[r]).collect(),
            }),
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Date(v) => ColumnData::Date(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Label(v) => ColumnData::Label(rows.iter().map(|&r| v[r]).collect()),
        };
        Column { data, missing }
    }

    fn concat(parts: &[&Column]) -> Result<Column> {
        let first = parts[0];
        let missing: Vec<bool> = parts.iter().flat_map(|c| c.missing.iter().copied()).collect();
        let data = match &first.data {
            ColumnData::Categorical(_) => {
                let mut values: Vec<Option<String>> = Vec::with_capacity(missing.len());
                for part in parts {
                    let c = part.as_categorical().ok_or_else(|| {
                        Error::SchemaMismatch("column storage differs between parts".into())
                    })?;
                    values.extend(c.values().map(|v| v.map(str::to_string)));
                }
                return Ok(Column::categorical(&values));
            }
            ColumnData::Numeric(_) => ColumnData::Numeric(concat_vec(parts, |d| match d {
                ColumnData::Numeric(v) => Some(v),
                _ => None,
            })?),
            ColumnData::Date(_) => ColumnData::Date(concat_vec(parts, |d| match d {
                ColumnData::Date(v) => Some(v),
                _ => None,
            })?),
            ColumnData::Label(_) => ColumnData::Label(concat_vec(parts, |d| match d {
                ColumnData::Label(v) => Some(v),
                _ => None,
            })?),
        };
        Ok(Column { data, missing })
    }
}

fn concat_vec<T: Copy>(
    parts: &[&Column],
    pick: impl Fn(&ColumnData) -> Option<&Vec<T>>,
) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in parts {
        let v = pick(&p.data)
            .ok_or_else(|| Error::SchemaMismatch("column storage differs between parts".into()))?;
        out.extend_from_slice(v);
    }
    Ok(out)
}

pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

pub fn format_date(days: i32) -> String {
    (epoch() + chrono::Duration::days(days as i64))
        .format("%Y-%m-%d")
        .to_string()
}

/// Parses a strict `YYYY-MM-DD` date into days since the epoch.
pub fn parse_date(text: &str) -> Option<i32> {
    let t = text.trim();
    let bytes = t.as_bytes();
    if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
        return None;
    }
    let date = NaiveDate::parse_from_str(t, "%Y-%m-%d").ok()?;
    Some((date - epoch()).num_days() as i32)
}

/// Immutable column-oriented table. All transformations return new datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    n_rows: usize,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if schema.len() != columns.len() {
            return Err(Error::SchemaMismatch(format!(
                "schema has {} columns, {} supplied",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.len() != n_rows || col.data.len() != n_rows {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            let ok = matches!(
                (spec.role, &col.data),
                (Role::Categorical | Role::Identifier, ColumnData::Categorical(_))
                    | (Role::Numeric, ColumnData::Numeric(_))
                    | (Role::Date, ColumnData::Date(_))
                    | (Role::Target, ColumnData::Categorical(_) | ColumnData::Label(_))
            );
            if !ok {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` with role {} cannot hold {} storage",
                    spec.name,
                    spec.role,
                    col.data.kind()
                )));
            }
            match &col.data {
                ColumnData::Categorical(c) => {
                    let k = c.dictionary.len() as u32;
                    for (code, &miss) in c.codes.iter().zip(&col.missing) {
                        if miss != (*code == MISSING_CODE) || (!miss && *code >= k) {
                            return Err(Error::SchemaMismatch(format!(
                                "column `{}` has an invalid dictionary code",
                                spec.name
                            )));
                        }
                    }
                }
                ColumnData::Label(v) => {
                    if v.iter().any(|&y| y > 1) || col.missing.iter().any(|&m| m) {
                        return Err(Error::SchemaMismatch(
                            "binarized target must be 0/1 with no missing cells".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(Self {
            schema,
            n_rows,
            columns,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> impl Iterator<Item = (&ColumnSpec, &Column)> {
        self.schema.columns().iter().zip(&self.columns)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.schema
            .index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_at(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn target(&self) -> &Column {
        &self.columns[self.schema.target_index()]
    }

    /// Binarized labels; errors when the target still holds raw values.
    pub fn labels(&self) -> Result<&[u8]> {
        match &self.target().data {
            ColumnData::Label(v) => Ok(v),
            _ => Err(Error::TargetNotBinary),
        }
    }

    /// Rows in the given order (indices may repeat).
    pub fn take(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            n_rows: rows.len(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
        }
    }

    /// Stacks datasets that share a schema.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let Some(first) = parts.first() else {
            return Err(Error::SchemaMismatch("nothing to concatenate".into()));
        };
        if parts.iter().any(|p| p.schema != first.schema) {
            return Err(Error::SchemaMismatch("schemas differ".into()));
        }
        let columns = (0..first.columns.len())
            .map(|j| {
                let cols: Vec<&Column> = parts.iter().map(|p| &p.columns[j]).collect();
                Column::concat(&cols)
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(first.schema.clone(), columns)
    }

    pub fn drop_column(&self, name: &str) -> Result<Dataset> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        let mut columns = self.columns.clone();
        columns.remove(idx);
        Dataset::new(self.schema.without(name), columns)
    }

    pub fn replace_column(&self, name: &str, column: Column) -> Result<Dataset> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Dataset::new(self.schema.clone(), columns)
    }

    pub fn with_column(&self, spec: ColumnSpec, column: Column) -> Result<Dataset> {
        let schema = self.schema.with_appended(spec)?;
        let mut columns = self.columns.clone();
        columns.push(column);
        Dataset::new(schema, columns)
    }
}
