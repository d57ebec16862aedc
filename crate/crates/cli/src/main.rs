mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};

use commands::Pipeline;
use config::PipelineConfig;
use manifest::{Manifest, Recorder, RunRecord, Status};

/// Treatment-outcome risk pipeline driven by one TOML config.
#[derive(Parser)]
#[command(name = "tbrisk", version)]
struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "TBRISK_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write a synthetic registry CSV, its schema and the planted model.
    Generate,
    /// Apply the cleaning plan.
    Clean,
    /// Chronological train/validation/test/passive split.
    Split,
    /// Information values and the encoder leaderboard.
    EncodeBench,
    /// Fit the configured encoder and model on the training split.
    Train,
    /// Score test and passive splits with the trained model.
    Evaluate,
    /// Encoder search, model search, final refit and passive report.
    Select,
    /// Shapley and surrogate attributions for chosen rows.
    Explain,
    /// Cohort report, post-hoc balance and cohort expansion.
    Fairness,
    /// Merge every JSON artifact into summary.json.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Clean => "clean",
            Command::Split => "split",
            Command::EncodeBench => "encode-bench",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Select => "select",
            Command::Explain => "explain",
            Command::Fairness => "fairness",
            Command::Report => "report",
        }
    }

    fn run(self, p: &Pipeline, rec: &mut Recorder) -> Result<()> {
        match self {
            Command::Generate => commands::generate_data(p, rec),
            Command::Clean => commands::clean_data(p, rec),
            Command::Split => commands::split_data(p, rec),
            Command::EncodeBench => commands::encode_bench(p, rec),
            Command::Train => commands::train(p, rec),
            Command::Evaluate => commands::evaluate(p, rec),
            Command::Select => commands::select(p, rec),
            Command::Explain => commands::explain(p, rec),
            Command::Fairness => commands::fairness(p, rec),
            Command::Report => commands::summarize(p, rec),
        }
    }
}

/// The error chain on one line.
fn one_line(e: &anyhow::Error) -> String {
    e.chain()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(": ")
        .replace(['\n', '\r'], " ")
}

fn setup(cli: &Cli) -> Result<Pipeline> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot size the worker pool")?;
    }
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    let cfg = PipelineConfig::load(path)?;
    cfg.validate()?;
    let seed = cli
        .seed
        .or(cfg.seed)
        .ok_or_else(|| anyhow!("no seed: set `seed` in the config or pass --seed"))?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| anyhow!("no output directory: set `output_dir` in the config or pass --out"))?;
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    let manifest = Manifest::open(&out, &cfg.hash()?, seed, cfg.input_digests()?)?;
    Ok(Pipeline {
        cfg,
        seed,
        out,
        manifest,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let mut pipeline = match setup(&cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {name}: config: {}", one_line(&e));
            return ExitCode::from(2);
        }
    };
    let mut rec = Recorder::new(&pipeline.out);
    let result = cli.command.run(&pipeline, &mut rec);
    let run = RunRecord {
        status: if result.is_ok() { Status::Complete } else { Status::Incomplete },
        artifacts: rec.artifacts,
        error: result.as_ref().err().map(one_line),
    };
    pipeline.manifest.record(name, run);
    let saved = pipeline.manifest.save(&pipeline.out);
    match result.and(saved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {name}: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
