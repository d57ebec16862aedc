//! `PipelineConfig`: the TOML file every subcommand reads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tbrisk::encode::EncoderKind;
use tbrisk::explain::SurrogateConfig;
use tbrisk::fairness::{AgeBands, DEFAULT_RECALL_FLOOR};
use tbrisk::models::ModelSpec;
use tbrisk::preprocess::{CleaningPlan, DEFAULT_PASSIVE_WINDOW_DAYS, DEFAULT_RATIOS};
use tbrisk::resample::ResamplePlan;
use tbrisk::select::{Axis, FamilySpace, SearchSpace};
use tbrisk::synthgen::GenConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; `--seed` overrides it. One of the two must be given.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Relative to the config file. `--out` overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    /// Defaults to the generator's plan for synthetic data.
    #[serde(default)]
    pub cleaning: Option<CleaningPlan>,
    #[serde(default)]
    pub split: SplitOptions,
    #[serde(default = "EncoderKind::all_defaults")]
    pub encoders: Vec<EncoderKind>,
    #[serde(default = "default_encoder_search")]
    pub encoder_search: SearchSpace,
    #[serde(default = "default_model_search")]
    pub model_search: SearchSpace,
    #[serde(default)]
    pub selection: SelectionOptions,
    #[serde(default)]
    pub resample: ResamplePlan,
    #[serde(default)]
    pub train: TrainOptions,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub explain: ExplainOptions,
    #[serde(default)]
    pub fairness: FairnessOptions,
}

/// Either a CSV file with its schema, or generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<GenConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOptions {
    /// Defaults to the first date column of the schema.
    pub date_column: Option<String>,
    pub passive_window_days: i32,
    pub ratios: (f64, f64, f64),
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            date_column: None,
            passive_window_days: DEFAULT_PASSIVE_WINDOW_DAYS,
            ratios: DEFAULT_RATIOS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionOptions {
    pub beta: f64,
    pub alpha: f64,
    pub top_k_ensemble: usize,
    /// Folds for out-of-fold target encodings of training rows.
    pub out_of_fold: Option<usize>,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            beta: 0.0,
            alpha: 0.0,
            top_k_ensemble: 5,
            out_of_fold: None,
        }
    }
}

/// Encoder and model used by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub encoder: EncoderKind,
    pub model: ModelSpec,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            encoder: EncoderKind::Target { smoothing: 20.0 },
            model: ModelSpec::defaults("gbdt").expect("known family"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Cut-off for the confusion-matrix metrics.
    pub threshold: f64,
    /// Percentages listed in `recall_at_k.csv`.
    pub k: Vec<u32>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions {
            threshold: 0.5,
            k: vec![10, 20, 30, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainOptions {
    /// Identifier values of the rows to explain.
    pub rows: Vec<String>,
    pub n_permutations: usize,
    /// Training rows used as the Shapley background.
    pub background_rows: usize,
    /// Test rows averaged into `importance.csv`; 0 skips it.
    pub global_rows: usize,
    pub surrogate: SurrogateConfig,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions {
            rows: Vec::new(),
            n_permutations: 500,
            background_rows: 100,
            global_rows: 0,
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessOptions {
    pub cohort_columns: Vec<String>,
    /// Numeric column banded into an `age_band` cohort column.
    pub age_column: Option<String>,
    pub age_bands: AgeBands,
    pub recall_floor: f64,
    /// Percentage selected when comparing cohorts globally.
    pub k: f64,
    pub expansion_factor: f64,
}

impl Default for FairnessOptions {
    fn default() -> Self {
        FairnessOptions {
            cohort_columns: Vec::new(),
            age_column: None,
            age_bands: AgeBands::default(),
            recall_floor: DEFAULT_RECALL_FLOOR,
            k: 20.0,
            expansion_factor: 2.0,
        }
    }
}

fn default_encoder_search() -> SearchSpace {
    SearchSpace::gbdt_grid(&[100.0], &[3.0, 4.0], &[0.1])
}

fn default_model_search() -> SearchSpace {
    let values = |v: &[f64]| Axis::Values { values: v.to_vec() };
    SearchSpace {
        families: vec![
            FamilySpace {
                template: ModelSpec::defaults("gbdt").expect("known family"),
                axes: BTreeMap::from([
                    ("rounds".to_string(), values(&[100.0, 200.0])),
                    ("max_depth".to_string(), values(&[3.0, 4.0])),
                    ("learning_rate".to_string(), values(&[0.05, 0.1])),
                ]),
            },
            FamilySpace {
                template: ModelSpec::defaults("random_forest").expect("known family"),
                axes: BTreeMap::from([("max_depth".to_string(), values(&[8.0, 12.0]))]),
            },
            FamilySpace::fixed(ModelSpec::defaults("linear_risk").expect("known family")),
        ],
        budget: 8,
        seed: 0,
    }
}

impl PipelineConfig {
    /// Reads the file and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| anyhow!("invalid config {}: {}", path.display(), e.message()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        rebase(&mut cfg.data.csv);
        rebase(&mut cfg.data.schema);
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.schema, &self.data.synthetic) {
            (Some(csv), Some(schema), None) => {
                for p in [csv, schema] {
                    if !p.is_file() {
                        bail!("data file not found: {}", p.display());
                    }
                }
            }
            (None, None, Some(gen)) => gen.validate()?,
            _ => bail!("data needs either `csv` and `schema`, or `synthetic`"),
        }
        if self.encoders.is_empty() {
            bail!("encoders is empty");
        }
        for kind in &self.encoders {
            kind.validate()?;
        }
        self.encoder_search.validate()?;
        self.model_search.validate()?;
        self.resample.validate()?;
        self.train.encoder.validate()?;
        self.train.model.validate()?;
        self.fairness.age_bands.validate()?;
        if !(self.fairness.expansion_factor >= 1.0) {
            bail!("fairness.expansion_factor must be >= 1");
        }
        if !(self.fairness.k > 0.0 && self.fairness.k <= 100.0) {
            bail!("fairness.k must lie in (0, 100]");
        }
        if let Some(k) = self.metrics.k.iter().find(|&&k| k == 0 || k > 100) {
            bail!("metrics.k entry {k} must lie in 1..=100");
        }
        Ok(())
    }

    /// Digests of the input files, keyed by role.
    pub fn input_digests(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (role, path) in [("csv", &self.data.csv), ("schema", &self.data.schema)] {
            if let Some(p) = path {
                let bytes = std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
                out.insert(role.to_string(), hex(&Sha256::digest(&bytes)));
            }
        }
        Ok(out)
    }

    /// SHA-256 of the canonical JSON form. Input files count by content, not
    /// path; the seed is recorded separately and the output directory does
    /// not affect results.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.seed = None;
        canonical.output_dir = None;
        canonical.data.csv = None;
        canonical.data.schema = None;
        let json = serde_json::to_string(&(canonical, self.input_digests()?))?;
        Ok(hex(&Sha256::digest(json.as_bytes())))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
