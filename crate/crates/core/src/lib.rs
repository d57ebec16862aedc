//! Treatment-outcome risk prediction on registry-style tabular data.
//!
//! The crate covers the whole modelling path: typed ingestion ([`data`]),
//! cleaning and chronological splitting ([`preprocess`]), categorical
//! encoders ([`encode`]), class rebalancing ([`resample`]), native learners
//! ([`models`]), ranking metrics ([`metrics`]), encoder/model search
//! ([`select`]), attributions ([`explain`]), cohort analysis ([`fairness`])
//! and a seeded synthetic registry generator ([`synthgen`]).

pub mod data;
pub mod encode;
pub mod metrics;
pub mod models;
pub mod error;
pub mod explain;
pub mod fairness;
pub mod preprocess;
pub mod resample;
pub mod seed;
pub mod select;
pub mod synthgen;

pub use error::{Error, Result};
