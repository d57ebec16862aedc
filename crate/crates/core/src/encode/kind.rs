use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING: f64 = 20.0;
/// Additive count added to event and non-event tallies in ratio/log encoders.
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_NGRAM: usize = 3;
pub const DEFAULT_SIGNATURE_LENGTH: usize = 8;

fn smoothing() -> f64 {
    DEFAULT_SMOOTHING
}
fn epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn one() -> f64 {
    1.0
}
fn ngram() -> usize {
    DEFAULT_NGRAM
}
fn signature_length() -> usize {
    DEFAULT_SIGNATURE_LENGTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderKind {
    Target {
        #[serde(default = "smoothing")]
        smoothing: f64,
    },
    LeaveOneOut,
    OrderedTarget {
        #[serde(default = "one")]
        prior_weight: f64,
        #[serde(default)]
        seed: u64,
    },
    NormalizedCount,
    Ordinal,
    Woe {
        #[serde(default = "epsilon")]
        epsilon: f64,
    },
    ProbabilityRatio {
        #[serde(default = "epsilon")]
        epsilon: f64,
    },
    OddsRatio {
        #[serde(default = "epsilon")]
        epsilon: f64,
    },
    LogOddsRatio {
        #[serde(default = "epsilon")]
        epsilon: f64,
    },
    SimilarityCount {
        #[serde(default = "ngram")]
        ngram: usize,
    },
    #[serde(rename = "minhash")]
    MinHash {
        #[serde(default = "signature_length")]
        signature_length: usize,
        #[serde(default = "ngram")]
        ngram: usize,
        #[serde(default)]
        seed: u64,
    },
    Gap {
        #[serde(default = "smoothing")]
        smoothing: f64,
    },
}

impl EncoderKind {
    pub const NAMES: [&'static str; 12] = [
        "target",
        "leave_one_out",
        "ordered_target",
        "normalized_count",
        "ordinal",
        "woe",
        "probability_ratio",
        "odds_ratio",
        "log_odds_ratio",
        "similarity_count",
        "minhash",
        "gap",
    ];

    /// Every kind with default parameters, in [`Self::NAMES`] order.
    pub fn all_defaults() -> Vec<EncoderKind> {
        Self::NAMES
            .iter()
            .map(|n| n.parse().expect("known name"))
            .collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            EncoderKind::Target { .. } => "target",
            EncoderKind::LeaveOneOut => "leave_one_out",
            EncoderKind::OrderedTarget { .. } => "ordered_target",
            EncoderKind::NormalizedCount => "normalized_count",
            EncoderKind::Ordinal => "ordinal",
            EncoderKind::Woe { .. } => "woe",
            EncoderKind::ProbabilityRatio { .. } => "probability_ratio",
            EncoderKind::OddsRatio { .. } => "odds_ratio",
            EncoderKind::LogOddsRatio { .. } => "log_odds_ratio",
            EncoderKind::SimilarityCount { .. } => "similarity_count",
            EncoderKind::MinHash { .. } => "minhash",
            EncoderKind::Gap { .. } => "gap",
        }
    }

    /// Whether the encoding reads the label.
    pub fn is_target_aware(&self) -> bool {
        !matches!(
            self,
            EncoderKind::NormalizedCount
                | EncoderKind::Ordinal
                | EncoderKind::SimilarityCount { .. }
                | EncoderKind::MinHash { .. }
        )
    }

    /// Features emitted per categorical column.
    pub fn width(&self) -> usize {
        match self {
            EncoderKind::MinHash {
                signature_length, ..
            } => *signature_length,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEncoderParam(msg));
        match *self {
            EncoderKind::Target { smoothing } | EncoderKind::Gap { smoothing } => {
                if !(smoothing.is_finite() && smoothing >= 0.0) {
                    return bad(format!("smoothing must be >= 0, got {smoothing}"));
                }
            }
            EncoderKind::OrderedTarget { prior_weight, .. } => {
                if !(prior_weight.is_finite() && prior_weight > 0.0) {
                    return bad(format!("prior weight must be > 0, got {prior_weight}"));
                }
            }
            EncoderKind::Woe { epsilon }
            | EncoderKind::ProbabilityRatio { epsilon }
            | EncoderKind::OddsRatio { epsilon }
            | EncoderKind::LogOddsRatio { epsilon } => {
                if !(epsilon.is_finite() && epsilon >= 0.0) {
                    return bad(format!("epsilon must be >= 0, got {epsilon}"));
                }
            }
            EncoderKind::SimilarityCount { ngram } => {
                if ngram == 0 {
                    return bad("n-gram size must be >= 1".into());
                }
            }
            EncoderKind::MinHash {
                signature_length,
                ngram,
                ..
            } => {
                if signature_length == 0 || ngram == 0 {
                    return bad("signature length and n-gram size must be >= 1".into());
                }
            }
            EncoderKind::LeaveOneOut | EncoderKind::NormalizedCount | EncoderKind::Ordinal => {}
        }
        Ok(())
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        match self {
            EncoderKind::Target { smoothing } | EncoderKind::Gap { smoothing } => {
                write!(f, "(m={smoothing})")
            }
            EncoderKind::OrderedTarget { prior_weight, seed } => {
                write!(f, "(a={prior_weight},seed={seed})")
            }
            EncoderKind::Woe { epsilon }
            | EncoderKind::ProbabilityRatio { epsilon }
            | EncoderKind::OddsRatio { epsilon }
            | EncoderKind::LogOddsRatio { epsilon } => write!(f, "(eps={epsilon})"),
            EncoderKind::SimilarityCount { ngram } => write!(f, "(n={ngram})"),
            EncoderKind::MinHash {
                signature_length,
                ngram,
                seed,
            } => write!(f, "(len={signature_length},n={ngram},seed={seed})"),
            _ => Ok(()),
        }
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    /// Parses a bare kind name into its default parameterisation.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "target" => EncoderKind::Target {
                smoothing: DEFAULT_SMOOTHING,
            },
            "leave_one_out" => EncoderKind::LeaveOneOut,
            "ordered_target" => EncoderKind::OrderedTarget {
                prior_weight: 1.0,
                seed: 0,
            },
            "normalized_count" => EncoderKind::NormalizedCount,
            "ordinal" => EncoderKind::Ordinal,
            "woe" => EncoderKind::Woe {
                epsilon: DEFAULT_EPSILON,
            },
            "probability_ratio" => EncoderKind::ProbabilityRatio {
                epsilon: DEFAULT_EPSILON,
            },
            "odds_ratio" => EncoderKind::OddsRatio {
                epsilon: DEFAULT_EPSILON,
            },
            "log_odds_ratio" => EncoderKind::LogOddsRatio {
                epsilon: DEFAULT_EPSILON,
            },
            "similarity_count" => EncoderKind::SimilarityCount {
                ngram: DEFAULT_NGRAM,
            },
            "minhash" => EncoderKind::MinHash {
                signature_length: DEFAULT_SIGNATURE_LENGTH,
                ngram: DEFAULT_NGRAM,
                seed: 0,
            },
            "gap" => EncoderKind::Gap {
                smoothing: DEFAULT_SMOOTHING,
            },
            other => {
                return Err(Error::InvalidEncoderParam(format!(
                    "unknown encoder `{other}`"
                )))
            }
        })
    }
}
