//! Categorical encoders with strict fit/transform separation, and
//! information-value ranking of categorical columns.

mod fitted;
mod iv;
mod kind;
pub mod text;

pub use fitted::{
    fit_encoder, fit_transform, transform, CategoryStats, CategoryTable, ColumnEncoder,
    FitOptions, FittedEncoder, ENCODER_FORMAT_VERSION,
};
pub use iv::{iv_rank, iv_rank_with, IvRow, IvTable, WoeBin};
pub use kind::{
    EncoderKind, DEFAULT_EPSILON, DEFAULT_NGRAM, DEFAULT_SIGNATURE_LENGTH, DEFAULT_SMOOTHING,
};
