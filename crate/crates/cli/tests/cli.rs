use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 11
encoders = [{ kind = "target", smoothing = 10.0 }, { kind = "ordinal" }]

[data.synthetic]
n_rows = 3000

[encoder_search]
[[encoder_search.families]]
template = { family = "gbdt", rounds = 30, max_depth = 3 }

[model_search]
[[model_search.families]]
template = { family = "gbdt", max_depth = 3 }
axes.rounds = { kind = "values", values = [20, 40] }
[[model_search.families]]
template = { family = "linear_risk" }

[selection]
top_k_ensemble = 2

[train]
encoder = { kind = "target", smoothing = 10.0 }
model = { family = "gbdt", rounds = 30, max_depth = 3 }

[explain]
rows = ["P0000001"]
n_permutations = 50
background_rows = 30
global_rows = 5
surrogate = { n_samples = 300 }

[fairness]
cohort_columns = ["gender"]
age_column = "age"
"#;

fn tbrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbrisk"))
        .args(args)
        .env_remove("TBRISK_JOBS")
        .output()
        .expect("binary runs")
}

fn run_ok(config: &Path, out: &Path, command: &str, extra: &[&str]) {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), command];
    args.extend(extra);
    let o = tbrisk(&args);
    assert!(o.status.success(), "{command} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn select_lists_its_artifacts_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    run_ok(&cfg, &out, "select", &[]);
    let m = manifest(&out);
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let run = &m["runs"]["select"];
    assert_eq!(run["status"], "complete");
    for name in ["encoder_leaderboard.csv", "model_leaderboard.csv", "model.json", "passive_report.json"] {
        assert!(run["artifacts"].get(name).is_some(), "{name} missing from {run}");
        assert!(out.join(name).is_file());
    }
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(!text.contains("time"), "manifest carries no timestamps");
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for command in ["generate", "split", "train", "evaluate", "select", "explain", "fairness", "report"] {
        run_ok(&cfg, &a, command, &["--jobs", "1"]);
        run_ok(&cfg, &b, command, &["--jobs", "4"]);
    }
    assert_eq!(files(&a), files(&b));

    // A different seed changes the data but not the config hash.
    let c = tmp.path().join("c");
    run_ok(&cfg, &c, "generate", &["--seed", "12"]);
    assert_eq!(manifest(&c)["config_hash"], manifest(&a)["config_hash"]);
    assert_eq!(manifest(&c)["seed"], 12);
    assert_ne!(std::fs::read(c.join("data.csv")).unwrap(), std::fs::read(a.join("data.csv")).unwrap());
}

#[test]
fn missing_schema_path_is_a_one_line_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("rows.csv"), "a,b\n").unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "seed = 1\n[data]\ncsv = \"rows.csv\"\nschema = \"nowhere/schema.toml\"\n",
    );
    let o = tbrisk(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "clean"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error: clean:"), "{err}");
    assert!(err.contains("nowhere/schema.toml"), "{err}");
}

#[test]
fn seed_is_mandatory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "noseed.toml", "[data.synthetic]\nn_rows = 100\n");
    let o = tbrisk(&["--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "generate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn failed_runs_are_marked_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    let o = tbrisk(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "evaluate"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(err.contains("encoder.json"), "{err}");
    let run = &manifest(&out)["runs"]["evaluate"];
    assert_eq!(run["status"], "incomplete");
    assert!(run["error"].as_str().unwrap().contains("encoder.json"));
}

#[test]
fn passive_rows_do_not_reach_the_leaderboards() {
    let tmp = tempfile::tempdir().unwrap();
    let gen_cfg = write_config(tmp.path(), "gen.toml", SMALL);
    let data = tmp.path().join("data");
    run_ok(&gen_cfg, &data, "generate", &[]);
    run_ok(&gen_cfg, &data, "split", &[]);
    let split: Value = serde_json::from_str(&std::fs::read_to_string(data.join("split.json")).unwrap()).unwrap();
    let passive_start = split["boundary_dates"]["passive_start"].as_str().unwrap().to_string();

    // Flip every outcome dated inside the passive window.
    let text = std::fs::read_to_string(data.join("data.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let date_at = header.split(',').position(|h| h == "notification_date").unwrap();
    let mut flipped = format!("{header}\n");
    for line in lines {
        let mut cells: Vec<&str> = line.split(',').collect();
        if cells[date_at] >= passive_start.as_str() {
            let last = cells.len() - 1;
            cells[last] = if cells[last] == "LFU" { "Cured" } else { "LFU" };
        }
        flipped.push_str(&cells.join(","));
        flipped.push('\n');
    }
    std::fs::write(tmp.path().join("flipped.csv"), flipped).unwrap();
    std::fs::copy(data.join("data.csv"), tmp.path().join("original.csv")).unwrap();
    std::fs::copy(data.join("schema.toml"), tmp.path().join("schema.toml")).unwrap();

    let body = SMALL.split_once("[data.synthetic]\nn_rows = 3000\n").unwrap();
    let csv_config = |file: &str| {
        format!(
            "{}[data]\ncsv = \"{file}\"\nschema = \"schema.toml\"\n[cleaning]\ntarget_positive_values = [\"LFU\"]\ntarget_negative_values = [\"Cured\"]\n{}",
            body.0, body.1
        )
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&write_config(tmp.path(), "a.toml", &csv_config("original.csv")), &a, "select", &[]);
    run_ok(&write_config(tmp.path(), "b.toml", &csv_config("flipped.csv")), &b, "select", &[]);
    for name in ["encoder_leaderboard.csv", "model_leaderboard.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(
        std::fs::read(a.join("passive_report.json")).unwrap(),
        std::fs::read(b.join("passive_report.json")).unwrap()
    );
    assert_ne!(manifest(&a)["inputs"]["csv"], manifest(&b)["inputs"]["csv"]);
}

#[test]
fn report_merges_json_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL);
    let out = tmp.path().join("out");
    for command in ["split", "train", "evaluate", "report"] {
        run_ok(&cfg, &out, command, &[]);
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for name in ["split.json", "validation_report.json", "test_report.json", "passive_report.json"] {
        assert!(summary["artifacts"].get(name).is_some(), "{name}");
    }
    assert_eq!(summary["config_hash"], manifest(&out)["config_hash"]);
}
