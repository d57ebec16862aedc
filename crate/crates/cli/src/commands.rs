//! Subcommand bodies. Each reads the config through [`Pipeline`] and writes
//! its artifacts through a [`Recorder`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use serde::Serialize;
use serde_json::{json, Value};
use tbrisk::data::{write_csv, CsvOptions, Dataset, Role, Schema};
use tbrisk::encode::{fit_transform, iv_rank, transform, FitOptions, FittedEncoder};
use tbrisk::explain::{local_surrogate, mean_abs_contributions, shapley_sample, SurrogateConfig, TrainStats};
use tbrisk::fairness::{cohort_keys, cohort_report, expand_cohort_data, posthoc_balance, selection_recall, spread, CohortKey};
use tbrisk::metrics::{classification_report, points_csv, pr_points, roc_points, EvalReport};
use tbrisk::models::{fit, Model};
use tbrisk::preprocess::{clean, temporal_split, CleaningLog, CleaningPlan, SplitBundle};
use tbrisk::resample::{resample, ResamplePlan};
use tbrisk::seed;
use tbrisk::select::{encode_splits, final_fit_predict, select_encoder, select_model, SearchSpace, SelectOptions};
use tbrisk::synthgen::{generate, GenConfig};

use crate::config::PipelineConfig;
use crate::manifest::{Manifest, Recorder, Status, MANIFEST_FILE};

const AGE_BAND_COLUMN: &str = "age_band";

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub manifest: Manifest,
}

fn csv_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(buf)
}

fn id_column(schema: &Schema) -> Option<String> {
    schema.names_with_role(Role::Identifier).next().map(str::to_string)
}

fn ids(ds: &Dataset) -> Result<Vec<String>> {
    Ok(match id_column(ds.schema()) {
        Some(name) => {
            let col = ds.column(&name)?;
            (0..ds.n_rows()).map(|r| col.cell_str(r).map(|s| s.into_owned()).unwrap_or_default()).collect()
        }
        None => (0..ds.n_rows()).map(|r| r.to_string()).collect(),
    })
}

/// `m` rows spread evenly over `0..n`.
fn strided(n: usize, m: usize) -> Vec<usize> {
    let m = m.min(n);
    (0..m).map(|i| i * n / m).collect()
}

impl Pipeline {
    fn derive(&self, label: &str) -> u64 {
        seed::derive(self.seed, label)
    }

    fn gen_config(&self) -> Option<GenConfig> {
        self.cfg.data.synthetic.clone().map(|g| GenConfig {
            seed: self.derive("synthgen"),
            ..g
        })
    }

    fn raw(&self) -> Result<Dataset> {
        if let Some(gen) = self.gen_config() {
            return Ok(generate(&gen)?.0);
        }
        let (csv, schema) = (self.cfg.data.csv.as_ref(), self.cfg.data.schema.as_ref());
        let (Some(csv), Some(schema)) = (csv, schema) else {
            bail!("data needs either `csv` and `schema`, or `synthetic`");
        };
        let schema = Schema::load(schema)?;
        Ok(tbrisk::data::load_csv(csv, &schema, &CsvOptions::default())?)
    }

    fn plan(&self) -> CleaningPlan {
        match (&self.cfg.cleaning, self.gen_config()) {
            (Some(plan), _) => plan.clone(),
            (None, Some(gen)) => gen.cleaning_plan(),
            (None, None) => CleaningPlan::default(),
        }
    }

    fn cleaned(&self) -> Result<(Dataset, CleaningLog)> {
        Ok(clean(&self.raw()?, &self.plan())?)
    }

    fn date_column(&self, schema: &Schema) -> Result<String> {
        match &self.cfg.split.date_column {
            Some(c) => Ok(c.clone()),
            None => schema
                .names_with_role(Role::Date)
                .next()
                .map(str::to_string)
                .ok_or_else(|| anyhow!("no date column to split on; set split.date_column")),
        }
    }

    fn splits(&self) -> Result<SplitBundle> {
        let (ds, _) = self.cleaned()?;
        let s = &self.cfg.split;
        Ok(temporal_split(&ds, &self.date_column(ds.schema())?, s.passive_window_days, s.ratios)?)
    }

    fn select_options(&self) -> SelectOptions {
        let s = &self.cfg.selection;
        SelectOptions {
            beta: s.beta,
            alpha: s.alpha,
            resample: self.resample_plan(),
            fit_options: self.fit_options(),
            top_k_ensemble: s.top_k_ensemble,
            seed: self.derive("select"),
        }
    }

    fn resample_plan(&self) -> ResamplePlan {
        ResamplePlan {
            seed: self.derive("resample"),
            ..self.cfg.resample.clone()
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            out_of_fold: self.cfg.selection.out_of_fold,
            seed: self.derive("out-of-fold"),
        }
    }

    fn space(&self, space: &SearchSpace, label: &str) -> SearchSpace {
        SearchSpace {
            seed: self.derive(label),
            ..space.clone()
        }
    }

    /// Encoder and model from an earlier `train` or `select` run.
    fn trained(&self) -> Result<(FittedEncoder, Model)> {
        let enc = FittedEncoder::load(self.manifest.artifact(&self.out, "encoder.json")?)?;
        let model = Model::load(&self.manifest.artifact(&self.out, "model.json")?)?;
        Ok((enc, model))
    }

    /// Encode `train`, resample, and fit `model.spec` the way `train` does.
    fn refit(&self, kind: &tbrisk::encode::EncoderKind, spec: &tbrisk::models::ModelSpec, train: &Dataset, label: &str) -> Result<(FittedEncoder, Model)> {
        let (enc, x) = fit_transform(kind, train, &self.fit_options())?;
        let (x, y) = resample(&x, train.labels()?, &self.resample_plan())?;
        let model = fit(spec, &x, &y, self.derive(label))?;
        Ok((enc, model))
    }
}

fn score(enc: &FittedEncoder, model: &Model, ds: &Dataset) -> Result<Vec<f64>> {
    Ok(model.predict_proba(&transform(enc, ds)?)?)
}

fn eval_report(scores: &[f64], ds: &Dataset, threshold: f64) -> Result<EvalReport> {
    Ok(classification_report(scores, ds.labels()?, threshold)?)
}

pub fn generate_data(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let gen = p.gen_config().ok_or_else(|| anyhow!("generate needs data.synthetic in the config"))?;
    let (ds, truth) = generate(&gen)?;
    rec.write("data.csv", csv_bytes(&ds)?)?;
    rec.write("schema.toml", ds.schema().to_toml_string())?;
    rec.json("ground_truth.json", &truth)
}

pub fn clean_data(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let (ds, log) = p.cleaned()?;
    rec.write("cleaned.csv", csv_bytes(&ds)?)?;
    rec.write("cleaned_schema.toml", ds.schema().to_toml_string())?;
    rec.json("cleaning_log.json", &log)
}

pub fn split_data(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let b = p.splits()?;
    let parts = [("train", &b.train), ("validation", &b.validation), ("test", &b.test), ("passive", &b.passive)];
    let mut rows = BTreeMap::new();
    for (name, ds) in parts {
        rec.write(&format!("{name}.csv"), csv_bytes(ds)?)?;
        rows.insert(name, ds.n_rows());
    }
    let [train_end, validation_end, test_end, passive_start] = b.boundary_dates.to_iso();
    rec.json(
        "split.json",
        &json!({
            "rows": rows,
            "boundary_dates": {
                "train_end": train_end,
                "validation_end": validation_end,
                "test_end": test_end,
                "passive_start": passive_start,
            },
        }),
    )
}

pub fn encode_bench(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let b = p.splits()?;
    rec.json("iv.json", &iv_rank(&b.train)?)?;
    let space = p.space(&p.cfg.encoder_search, "encoder-space");
    let result = select_encoder(&p.cfg.encoders, &b, &space, &p.select_options())?;
    rec.write("encoder_leaderboard.csv", result.leaderboard_csv()?)?;
    rec.write("encoder_selection.json", result.to_json()? + "\n")
}

pub fn train(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let b = p.splits()?;
    let t = &p.cfg.train;
    let (enc, model) = p.refit(&t.encoder, &t.model, &b.train, "train")?;
    let validation = eval_report(&score(&enc, &model, &b.validation)?, &b.validation, p.cfg.metrics.threshold)?;
    rec.write("encoder.json", enc.to_json()? + "\n")?;
    rec.write("model.json", model.to_json()? + "\n")?;
    rec.json("validation_report.json", &validation)
}

pub fn evaluate(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let (enc, model) = p.trained()?;
    let b = p.splits()?;
    let threshold = p.cfg.metrics.threshold;
    let mut table = String::from("split,k,recall\n");
    for (name, ds) in [("test", &b.test), ("passive", &b.passive)] {
        let scores = score(&enc, &model, ds)?;
        let r = eval_report(&scores, ds, threshold)?;
        for k in &p.cfg.metrics.k {
            let v = r.recall_at.get(k).map_or(String::new(), |v| v.to_string());
            table.push_str(&format!("{name},{k},{v}\n"));
        }
        let labels = ds.labels()?;
        rec.write(&format!("{name}_roc.csv"), points_csv(("fpr", "tpr"), &roc_points(&scores, labels).unwrap_or_default()))?;
        rec.write(&format!("{name}_pr.csv"), points_csv(("recall", "precision"), &pr_points(&scores, labels).unwrap_or_default()))?;
        rec.json(&format!("{name}_report.json"), &r)?;
    }
    rec.write("recall_at_k.csv", table)
}

pub fn select(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let b = p.splits()?;
    let opts = p.select_options();
    let encoders = select_encoder(&p.cfg.encoders, &b, &p.space(&p.cfg.encoder_search, "encoder-space"), &opts)?;
    rec.write("encoder_leaderboard.csv", encoders.leaderboard_csv()?)?;
    let encoded = encode_splits(&encoders.best_encoder, &b, &opts.fit_options)?;
    let models = select_model(&encoded, &p.space(&p.cfg.model_search, "model-space"), &opts)?;
    rec.write("model_leaderboard.csv", models.leaderboard_csv()?)?;
    rec.json("selection.json", &json!({ "encoder_search": encoders, "model_search": models }))?;

    // Only the final refit and its report touch the passive rows.
    let fitted = final_fit_predict(&models, &b.modeling()?, &b.passive, &opts)?;
    rec.write("encoder.json", fitted.encoder.to_json()? + "\n")?;
    rec.write("model.json", fitted.model.to_json()? + "\n")?;
    rec.json("passive_report.json", &fitted.report)?;
    let mut scores = String::from("id,score,label\n");
    for ((id, s), y) in ids(&b.passive)?.iter().zip(&fitted.passive_scores).zip(b.passive.labels()?) {
        scores.push_str(&format!("{id},{s},{y}\n"));
    }
    rec.write("passive_scores.csv", scores)
}

#[derive(Serialize)]
struct RowExplanation {
    id: String,
    score: f64,
    shapley: tbrisk::explain::Attribution,
    surrogate: tbrisk::explain::SurrogateFit,
}

pub fn explain(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let o = &p.cfg.explain;
    if o.rows.is_empty() {
        bail!("explain.rows is empty");
    }
    let (enc, model) = p.trained()?;
    let b = p.splits()?;
    let modeling = b.modeling()?;
    if id_column(modeling.schema()).is_none() {
        bail!("explain needs an identifier column to look rows up");
    }
    let known = ids(&modeling)?;
    let picked: Vec<usize> = o
        .rows
        .iter()
        .map(|id| {
            known
                .iter()
                .position(|k| k == id)
                .ok_or_else(|| anyhow!("row id {id} not found outside the passive window"))
        })
        .collect::<Result<_>>()?;

    let train_x = transform(&enc, &b.train)?;
    let background = train_x.take(&strided(train_x.n_rows(), o.background_rows));
    let stats = TrainStats::from_sources(&train_x, &enc.feature_sources())?;
    let x = transform(&enc, &modeling.take(&picked))?;
    let scores = model.predict_proba(&x)?;

    let mut explanations = Vec::new();
    let mut table = String::from("id,feature,value,shapley,surrogate\n");
    for (i, id) in o.rows.iter().enumerate() {
        let shapley = shapley_sample(&model, x.row(i), &background, o.n_permutations, p.derive(&format!("explain:shapley:{id}")))?;
        let cfg = SurrogateConfig {
            seed: p.derive(&format!("explain:surrogate:{id}")),
            ..o.surrogate
        };
        let surrogate = local_surrogate(&model, x.row(i), &cfg, &stats)?;
        for (j, name) in shapley.feature_names.iter().enumerate() {
            table.push_str(&format!(
                "{id},{name},{},{},{}\n",
                x.get(i, j),
                shapley.contributions[j],
                surrogate.attribution.contributions[j]
            ));
        }
        explanations.push(RowExplanation {
            id: id.clone(),
            score: scores[i],
            shapley,
            surrogate,
        });
    }
    rec.json("explanations.json", &explanations)?;
    rec.write("explanations.csv", table)?;

    if o.global_rows > 0 {
        let test_x = transform(&enc, &b.test)?;
        let rows: Vec<usize> = strided(test_x.n_rows(), o.global_rows);
        let attributions = rows
            .iter()
            .map(|&r| Ok(shapley_sample(&model, test_x.row(r), &background, o.n_permutations, p.derive(&format!("explain:global:{r}")))?))
            .collect::<Result<Vec<_>>>()?;
        let mut importance = String::from("feature,mean_abs_shapley\n");
        for (name, v) in mean_abs_contributions(&attributions) {
            importance.push_str(&format!("{name},{v}\n"));
        }
        rec.write("importance.csv", importance)?;
    }
    Ok(())
}

fn by_value(map: &BTreeMap<CohortKey, f64>) -> BTreeMap<String, f64> {
    map.iter().map(|(k, v)| (k.value.clone(), *v)).collect()
}

pub fn fairness(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let o = &p.cfg.fairness;
    let mut columns = o.cohort_columns.clone();
    let b = p.splits()?;
    let (mut train, mut test) = (b.train.clone(), b.test.clone());
    if let Some(age) = &o.age_column {
        train = o.age_bands.apply(&train, age, AGE_BAND_COLUMN)?;
        test = o.age_bands.apply(&test, age, AGE_BAND_COLUMN)?;
        columns.push(AGE_BAND_COLUMN.to_string());
    }
    if columns.is_empty() {
        bail!("fairness needs cohort_columns or age_column");
    }
    let (enc, model) = p.trained()?;
    let scores = score(&enc, &model, &b.test)?;
    let labels = b.test.labels()?;
    let strip = |ds: &Dataset| -> Result<Dataset> {
        Ok(if ds.schema().column(AGE_BAND_COLUMN).is_some() { ds.drop_column(AGE_BAND_COLUMN)? } else { ds.clone() })
    };

    // Baseline refit on the training split for a like-for-like expansion comparison.
    let (base_enc, base_model) = p.refit(enc.kind(), &model.spec, &strip(&train)?, "fairness:refit")?;
    let base_scores = score(&base_enc, &base_model, &b.test)?;

    let mut sections = Vec::new();
    let mut table = String::new();
    for column in &columns {
        let keys = cohort_keys(&test, column)?;
        let cohorts = cohort_report(&scores, labels, &keys, p.cfg.metrics.threshold, o.recall_floor)?;
        let csv = cohorts.to_csv()?;
        if table.is_empty() {
            table.push_str(&csv);
        } else {
            table.push_str(csv.split_once('\n').map_or("", |(_, rest)| rest));
        }
        let before = selection_recall(&scores, labels, &keys, o.k)?;
        let balanced = posthoc_balance(&scores, &keys)?;
        let after = selection_recall(&balanced, labels, &keys, o.k)?;

        let weakest = cohorts
            .entries
            .iter()
            .filter_map(|e| e.recall_at_20.map(|r| (r, &e.key)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
            .map(|(_, k)| k.clone());
        let expansion = match weakest {
            Some(weak) => {
                let expanded = expand_cohort_data(&train, std::slice::from_ref(&weak), o.expansion_factor, p.derive(&format!("fairness:expand:{column}")))?;
                let (e, m) = p.refit(enc.kind(), &model.spec, &strip(&expanded)?, "fairness:refit")?;
                let expanded_scores = score(&e, &m, &b.test)?;
                let within = |s: &[f64]| -> Result<Option<f64>> {
                    let r = cohort_report(s, labels, &keys, p.cfg.metrics.threshold, o.recall_floor)?;
                    Ok(r.entry(&weak).and_then(|e| e.recall_at_20))
                };
                json!({
                    "cohort": weak.value,
                    "factor": o.expansion_factor,
                    "training_rows": expanded.n_rows(),
                    "recall_at_20_before": within(&base_scores)?,
                    "recall_at_20_after": within(&expanded_scores)?,
                })
            }
            None => Value::Null,
        };
        sections.push(json!({
            "column": column,
            "cohorts": cohorts,
            "balance": {
                "k": o.k,
                "selection_recall_before": by_value(&before),
                "selection_recall_after": by_value(&after),
                "spread_before": spread(&before),
                "spread_after": spread(&after),
            },
            "expansion": expansion,
        }));
    }
    rec.json("fairness.json", &json!({ "columns": sections }))?;
    rec.write("cohorts.csv", table)
}

pub fn summarize(p: &Pipeline, rec: &mut Recorder) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    for (command, run) in &p.manifest.runs {
        if command == "report" || run.status != Status::Complete {
            continue;
        }
        for name in run.artifacts.keys().filter(|n| n.ends_with(".json")) {
            let path = p.manifest.artifact(&p.out, name)?;
            let text = std::fs::read_to_string(&path)?;
            artifacts.insert(name.clone(), serde_json::from_str::<Value>(&text)?);
        }
    }
    if artifacts.is_empty() {
        bail!("nothing to report; {MANIFEST_FILE} lists no complete runs");
    }
    rec.json(
        "summary.json",
        &json!({
            "config_hash": p.manifest.config_hash,
            "seed": p.manifest.seed,
            "inputs": p.manifest.inputs,
            "runs": p.manifest.runs,
            "artifacts": artifacts,
        }),
    )
}
