//! Typed column-oriented datasets, schemas, CSV ingestion and column summaries.

mod csv_io;
mod dataset;
mod matrix;
mod schema;
mod stats;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv, CsvOptions};
pub use dataset::{
    format_date, parse_date, CategoricalColumn, Column, ColumnData, Dataset, MISSING_CODE,
};
pub use matrix::FeatureMatrix;
pub use schema::{ColumnSpec, Role, Schema};
pub use stats::{column_stats, ColumnStats};
