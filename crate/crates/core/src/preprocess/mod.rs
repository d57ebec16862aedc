//! Registry cleaning and chronological splitting with a passive hold-out.

mod clean;
mod split;

pub use clean::{
    clean, CleaningEvent, CleaningLog, CleaningPlan, ImputeRule, ImputeStrategy, Replacement,
};
pub use split::{
    partition_sizes, temporal_split, BoundaryDates, SplitBundle, DEFAULT_PASSIVE_WINDOW_DAYS,
    DEFAULT_RATIOS,
};
