use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnData, Dataset, Role};
use crate::error::{Error, Result};

fn default_sparse_threshold() -> f64 {
    0.15
}

/// Declarative cleaning recipe, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningPlan {
    /// Non-target columns missing in more than this fraction of rows are dropped.
    #[serde(default = "default_sparse_threshold")]
    pub sparse_threshold: f64,
    #[serde(default)]
    pub replacements: Vec<Replacement>,
    #[serde(default)]
    pub impute_rules: Vec<ImputeRule>,
    pub target_positive_values: BTreeSet<String>,
    /// When non-empty, raw targets outside both sets are rejected.
    #[serde(default)]
    pub target_negative_values: BTreeSet<String>,
}

impl Default for CleaningPlan {
    fn default() -> Self {
        Self {
            sparse_threshold: default_sparse_threshold(),
            replacements: Vec::new(),
            impute_rules: Vec::new(),
            target_positive_values: BTreeSet::from(["1".to_string()]),
            target_negative_values: BTreeSet::new(),
        }
    }
}

impl CleaningPlan {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

/// Value rewrite. `to = None` turns matching cells into missing cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub column: String,
    pub from: String,
    #[serde(default)]
    pub to: Option<String>,
    /// Strict: exact match. Otherwise trimmed, case-insensitive match.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputeRule {
    pub column: String,
    pub strategy: ImputeStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputeStrategy {
    CopyFromColumn { source: String },
    Mean,
    Mode,
    Constant { value: String },
    /// Fill from rows that agree on every source column, when those rows
    /// unanimously carry a single value.
    CrossVerify { sources: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningEvent {
    pub action: String,
    pub column: String,
    pub affected_rows: usize,
}

pub type CleaningLog = Vec<CleaningEvent>;

fn event(action: &str, column: &str, affected_rows: usize) -> CleaningEvent {
    CleaningEvent {
        action: action.to_string(),
        column: column.to_string(),
        affected_rows,
    }
}

/// Applies a cleaning plan.
///
/// Order: rows with a missing target are dropped, replacements run, sparse
/// columns are dropped, imputation rules run in order, then the target is
/// binarized. Each imputation rule only fills cells that are still missing.
pub fn clean(ds: &Dataset, plan: &CleaningPlan) -> Result<(Dataset, CleaningLog)> {
    validate_plan(ds, plan)?;
    let mut log = CleaningLog::new();
    let target_name = ds.schema().target().name.clone();

    let mut out = ds.clone();
    let target = out.target();
    let missing_target = target.missing_count();
    if missing_target > 0 {
        let keep: Vec<usize> = (0..out.n_rows()).filter(|&r| !target.is_missing(r)).collect();
        out = out.take(&keep);
        log.push(event("drop_missing_target", &target_name, missing_target));
    }

    for rep in &plan.replacements {
        if out.schema().index_of(&rep.column).is_none() {
            log.push(event("skip_rule_absent_column", &rep.column, 0));
            continue;
        }
        let (next, affected) = apply_replacement(&out, rep)?;
        if affected > 0 {
            out = next;
        }
        log.push(event(
            if rep.strict { "strict_replace" } else { "replace" },
            &rep.column,
            affected,
        ));
    }

    if out.n_rows() > 0 {
        let sparse: Vec<(String, usize)> = out
            .columns()
            .filter(|(spec, col)| {
                spec.role != Role::Target
                    && col.missing_count() as f64 / out.n_rows() as f64 > plan.sparse_threshold
            })
            .map(|(spec, col)| (spec.name.clone(), col.missing_count()))
            .collect();
        for (name, missing) in sparse {
            out = out.drop_column(&name)?;
            log.push(event("drop_sparse_column", &name, missing));
        }
    }

    for rule in &plan.impute_rules {
        if let Some(absent) = rule_columns(rule).find(|c| out.schema().index_of(c).is_none()) {
            log.push(event("skip_rule_absent_column", absent, 0));
            continue;
        }
        let (next, filled) = apply_impute(&out, rule)?;
        if filled > 0 {
            out = next;
        }
        log.push(event(impute_action(&rule.strategy), &rule.column, filled));
    }

    let (next, positives) = binarize_target(&out, plan)?;
    if let Some(next) = next {
        out = next;
        log.push(event("binarize_target", &target_name, positives));
    }
    Ok((out, log))
}

fn rule_columns(rule: &ImputeRule) -> impl Iterator<Item = &str> {
    let sources: Vec<&str> = match &rule.strategy {
        ImputeStrategy::CopyFromColumn { source } => vec![source.as_str()],
        ImputeStrategy::CrossVerify { sources } => sources.iter().map(String::as_str).collect(),
        _ => Vec::new(),
    };
    std::iter::once(rule.column.as_str()).chain(sources)
}

fn impute_action(s: &ImputeStrategy) -> &'static str {
    match s {
        ImputeStrategy::CopyFromColumn { .. } => "impute_copy",
        ImputeStrategy::Mean => "impute_mean",
        ImputeStrategy::Mode => "impute_mode",
        ImputeStrategy::Constant { .. } => "impute_constant",
        ImputeStrategy::CrossVerify { .. } => "impute_cross_verify",
    }
}

fn validate_plan(ds: &Dataset, plan: &CleaningPlan) -> Result<()> {
    if !(plan.sparse_threshold > 0.0 && plan.sparse_threshold < 1.0) {
        return Err(Error::InvalidPlan(format!(
            "sparse_threshold {} outside (0, 1)",
            plan.sparse_threshold
        )));
    }
    let schema = ds.schema();
    // Rules naming absent columns are skipped at run time, so re-running a
    // plan after it dropped a sparse column is a no-op.
    let role_of = |name: &str| schema.column(name).map(|c| c.role);
    for rep in &plan.replacements {
        if role_of(&rep.column) == Some(Role::Date) {
            return Err(Error::InvalidPlan(format!(
                "replacements on date column `{}` are not supported",
                rep.column
            )));
        }
    }
    for rule in &plan.impute_rules {
        let Some(role) = role_of(&rule.column) else { continue };
        if role == Role::Target {
            return Err(Error::InvalidPlan("the target column cannot be imputed".into()));
        }
        match &rule.strategy {
            ImputeStrategy::CopyFromColumn { source } => {
                let Some(src) = role_of(source) else { continue };
                let compatible = src == role
                    || matches!(
                        (src, role),
                        (Role::Categorical | Role::Identifier, Role::Categorical | Role::Identifier)
                    );
                if !compatible {
                    return Err(Error::InvalidPlan(format!(
                        "cannot copy {src} column `{source}` into {role} column `{}`",
                        rule.column
                    )));
                }
            }
            ImputeStrategy::Mean if role != Role::Numeric => {
                return Err(Error::InvalidPlan(format!(
                    "mean imputation needs a numeric column, `{}` is {role}",
                    rule.column
                )));
            }
            ImputeStrategy::CrossVerify { sources } => {
                if sources.is_empty() {
                    return Err(Error::InvalidPlan("cross_verify needs source columns".into()));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn matches_value(cell: &str, from: &str, strict: bool) -> bool {
    if strict {
        cell == from
    } else {
        cell.trim().to_lowercase() == from.trim().to_lowercase()
    }
}

fn apply_replacement(ds: &Dataset, rep: &Replacement) -> Result<(Dataset, usize)> {
    let col = ds.column(&rep.column)?;
    let n = ds.n_rows();
    match col.data() {
        ColumnData::Categorical(c) => {
            let mut affected = 0;
            let values: Vec<Option<String>> = c
                .values()
                .map(|v| match v {
                    Some(s) if matches_value(s, &rep.from, rep.strict) => {
                        if rep.to.as_deref() != Some(s) {
                            affected += 1;
                        }
                        rep.to.clone()
                    }
                    other => other.map(str::to_string),
                })
                .collect();
            Ok((ds.replace_column(&rep.column, Column::categorical(&values))?, affected))
        }
        ColumnData::Numeric(_) => {
            let from: f64 = rep.from.trim().parse().map_err(|_| {
                Error::InvalidPlan(format!("`{}` is not numeric for `{}`", rep.from, rep.column))
            })?;
            let to = match &rep.to {
                None => None,
                Some(t) => Some(t.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidPlan(format!("`{t}` is not numeric for `{}`", rep.column))
                })?),
            };
            let mut affected = 0;
            let values: Vec<Option<f64>> = (0..n)
                .map(|r| match col.numeric_at(r) {
                    Some(x) if x == from => {
                        if to != Some(x) {
                            affected += 1;
                        }
                        to
                    }
                    other => other,
                })
                .collect();
            Ok((ds.replace_column(&rep.column, Column::numeric(&values))?, affected))
        }
        ColumnData::Label(_) | ColumnData::Date(_) => Ok((ds.clone(), 0)),
    }
}

/// Current cell values of a column as text, for role-agnostic rules.
fn text_cells(col: &Column) -> Vec<Option<String>> {
    (0..col.len())
        .map(|r| col.cell_str(r).map(|s| s.into_owned()))
        .collect()
}

fn rebuild(name: &str, role: Role, cells: &[Option<String>]) -> Result<Column> {
    Ok(match role {
        Role::Numeric => Column::numeric(
            &cells
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(s) => s.parse::<f64>().map(Some).map_err(|_| {
                        Error::InvalidPlan(format!("`{s}` is not numeric for `{name}`"))
                    }),
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        Role::Date => Column::dates(
            &cells
                .iter()
                .map(|c| match c {
                    None => Ok(None),
                    Some(s) => crate::data::parse_date(s).map(Some).ok_or_else(|| {
                        Error::InvalidPlan(format!("`{s}` is not a date for `{name}`"))
                    }),
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        _ => Column::categorical(cells),
    })
}

fn apply_impute(ds: &Dataset, rule: &ImputeRule) -> Result<(Dataset, usize)> {
    let col = ds.column(&rule.column)?;
    let role = ds.schema().column(&rule.column).expect("checked").role;
    let mut cells = text_cells(col);
    let mut filled = 0;

    match &rule.strategy {
        ImputeStrategy::CopyFromColumn { source } => {
            let Ok(src) = ds.column(source) else {
                return Ok((ds.clone(), 0));
            };
            for (r, cell) in cells.iter_mut().enumerate() {
                if cell.is_none() {
                    if let Some(v) = src.cell_str(r) {
                        *cell = Some(v.into_owned());
                        filled += 1;
                    }
                }
            }
        }
        ImputeStrategy::Mean => {
            let observed: Vec<f64> = (0..col.len()).filter_map(|r| col.numeric_at(r)).collect();
            if observed.is_empty() {
                return Ok((ds.clone(), 0));
            }
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            let values: Vec<Option<f64>> = (0..col.len())
                .map(|r| {
                    col.numeric_at(r).or_else(|| {
                        filled += 1;
                        Some(mean)
                    })
                })
                .collect();
            if filled == 0 {
                return Ok((ds.clone(), 0));
            }
            return Ok((ds.replace_column(&rule.column, Column::numeric(&values))?, filled));
        }
        ImputeStrategy::Mode => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            let snapshot = cells.clone();
            for v in snapshot.iter().flatten() {
                *counts.entry(v.as_str()).or_default() += 1;
            }
            // BTreeMap iteration is ordered, so ties resolve to the smallest value.
            let Some(mode) = counts
                .iter()
                .fold(None::<(&str, usize)>, |best, (&v, &n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ => Some((v, n)),
                })
                .map(|(v, _)| v.to_string())
            else {
                return Ok((ds.clone(), 0));
            };
            for cell in cells.iter_mut().filter(|c| c.is_none()) {
                *cell = Some(mode.clone());
                filled += 1;
            }
        }
        ImputeStrategy::Constant { value } => {
            for cell in cells.iter_mut().filter(|c| c.is_none()) {
                *cell = Some(value.clone());
                filled += 1;
            }
        }
        ImputeStrategy::CrossVerify { sources } => {
            let src_cols: Vec<&Column> = sources
                .iter()
                .filter_map(|s| ds.column(s).ok())
                .collect();
            if src_cols.len() != sources.len() {
                return Ok((ds.clone(), 0));
            }
            let key = |r: usize| -> Option<Vec<String>> {
                src_cols
                    .iter()
                    .map(|c| c.cell_str(r).map(|s| s.into_owned()))
                    .collect()
            };
            let mut seen: HashMap<Vec<String>, Option<String>> = HashMap::new();
            for (r, cell) in cells.iter().enumerate() {
                let (Some(v), Some(k)) = (cell, key(r)) else {
                    continue;
                };
                seen.entry(k)
                    .and_modify(|slot| {
                        if slot.as_deref() != Some(v.as_str()) {
                            *slot = None;
                        }
                    })
                    .or_insert_with(|| Some(v.clone()));
            }
            for r in 0..cells.len() {
                if cells[r].is_some() {
                    continue;
                }
                if let Some(Some(v)) = key(r).and_then(|k| seen.get(&k).cloned()) {
                    cells[r] = Some(v);
                    filled += 1;
                }
            }
        }
    }

    if filled == 0 {
        return Ok((ds.clone(), 0));
    }
    let column = rebuild(&rule.column, role, &cells)?;
    Ok((ds.replace_column(&rule.column, column)?, filled))
}

fn binarize_target(ds: &Dataset, plan: &CleaningPlan) -> Result<(Option<Dataset>, usize)> {
    let target = ds.target();
    let Some(raw) = target.as_categorical() else {
        return Ok((None, 0));
    };
    let mut labels = Vec::with_capacity(ds.n_rows());
    for v in raw.values() {
        let v = v.expect("missing targets were dropped").trim();
        if plan.target_positive_values.contains(v) {
            labels.push(1u8);
        } else if plan.target_negative_values.is_empty()
            || plan.target_negative_values.contains(v)
        {
            labels.push(0u8);
        } else {
            return Err(Error::TargetUnmappable(v.to_string()));
        }
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let name = ds.schema().target().name.clone();
    Ok((Some(ds.replace_column(&name, Column::labels(labels))?), positives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_csv, ColumnSpec, Schema};

    fn registry(weight: &[Option<f64>], age: &[Option<f64>], outcome: &[Option<&str>]) -> Dataset {
        let schema = Schema::new(vec![
            ColumnSpec::new("Age", Role::Numeric),
            ColumnSpec::new("Weight", Role::Numeric),
            ColumnSpec::new("Outcome", Role::Target),
        ])
        .unwrap();
        Dataset::new(
            schema,
            vec![
                Column::numeric(age),
                Column::numeric(weight),
                Column::categorical(outcome),
            ],
        )
        .unwrap()
    }

    fn plan() -> CleaningPlan {
        CleaningPlan {
            target_positive_values: BTreeSet::from(["LFU".to_string()]),
            target_negative_values: BTreeSet::from(["Cured".to_string()]),
            ..CleaningPlan::default()
        }
    }

    #[test]
    fn weight_copies_age_then_mean() {
        // 25 rows, one missing Weight (4%); its Age is present.
        let n = 25;
        let mut weight: Vec<Option<f64>> = (0..n).map(|i| Some(40.0 + i as f64)).collect();
        weight[3] = None;
        let mut age: Vec<Option<f64>> = (0..n).map(|i| Some(20.0 + i as f64)).collect();
        let outcome: Vec<Option<&str>> = (0..n).map(|i| Some(if i % 4 == 0 { "LFU" } else { "Cured" })).collect();
        let ds = registry(&weight, &age, &outcome);
        let mut p = plan();
        p.impute_rules = vec![
            ImputeRule {
                column: "Weight".into(),
                strategy: ImputeStrategy::CopyFromColumn { source: "Age".into() },
            },
            ImputeRule {
                column: "Weight".into(),
                strategy: ImputeStrategy::Mean,
            },
        ];
        let (out, log) = clean(&ds, &p).unwrap();
        assert_eq!(out.column("Weight").unwrap().numeric_at(3), Some(23.0));
        assert_eq!(log.iter().find(|e| e.action == "impute_copy").unwrap().affected_rows, 1);
        assert_eq!(log.iter().find(|e| e.action == "impute_mean").unwrap().affected_rows, 0);

        // Same row with Age also missing falls through to the mean of observed weights.
        age[3] = None;
        let ds = registry(&weight, &age, &outcome);
        let (out, _) = clean(&ds, &p).unwrap();
        let observed: Vec<f64> = weight.iter().flatten().copied().collect();
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        assert_eq!(out.column("Weight").unwrap().numeric_at(3), Some(mean));
    }

    #[test]
    fn column_over_threshold_is_dropped() {
        let n = 20;
        let weight: Vec<Option<f64>> = (0..n).map(|i| if i < 4 { None } else { Some(50.0) }).collect();
        let age: Vec<Option<f64>> = (0..n).map(|_| Some(30.0)).collect();
        let outcome: Vec<Option<&str>> = (0..n).map(|_| Some("Cured")).collect();
        let (out, log) = clean(&registry(&weight, &age, &outcome), &plan()).unwrap();
        assert!(out.column("Weight").is_err());
        assert!(log.contains(&event("drop_sparse_column", "Weight", 4)));
    }

    #[test]
    fn identity_plan_is_byte_identical() {
        let schema = Schema::new(vec![
            ColumnSpec::new("g", Role::Categorical),
            ColumnSpec::new("w", Role::Numeric),
            ColumnSpec::new("y", Role::Target),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                Column::categorical(&[Some("x"), Some("y"), Some("x")]),
                Column::numeric(&[Some(1.5), Some(2.0), Some(-3.0)]),
                Column::labels(vec![0, 1, 0]),
            ],
        )
        .unwrap();
        let (out, log) = clean(&ds, &CleaningPlan::default()).unwrap();
        assert_eq!(out, ds);
        assert!(log.is_empty());
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_csv(&ds, &mut a).unwrap();
        write_csv(&out, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replacements_strict_and_loose() {
        let schema = Schema::new(vec![
            ColumnSpec::new("hiv", Role::Categorical),
            ColumnSpec::new("y", Role::Target),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                Column::categorical(&[Some(" Reactive "), Some("reactive"), Some("Reactive"), Some("unk")]),
                Column::categorical(&[Some("1"), Some("0"), Some("0"), Some("0")]),
            ],
        )
        .unwrap();
        let strict = CleaningPlan {
            replacements: vec![Replacement {
                column: "hiv".into(),
                from: "Reactive".into(),
                to: Some("Positive".into()),
                strict: true,
            }],
            ..CleaningPlan::default()
        };
        let (out, log) = clean(&ds, &strict).unwrap();
        assert_eq!(log[0].affected_rows, 1);
        let hiv = out.column("hiv").unwrap();
        assert_eq!(hiv.cell_str(2).unwrap(), "Positive");
        assert_eq!(hiv.cell_str(0).unwrap(), " Reactive ");

        let loose = CleaningPlan {
            replacements: vec![
                Replacement {
                    column: "hiv".into(),
                    from: "REACTIVE".into(),
                    to: Some("Positive".into()),
                    strict: false,
                },
                Replacement {
                    column: "hiv".into(),
                    from: "unk".into(),
                    to: None,
                    strict: true,
                },
            ],
            ..CleaningPlan::default()
        };
        let (out, log) = clean(&ds, &loose).unwrap();
        assert_eq!(log[0].affected_rows, 3);
        // 1 of 4 now missing (25%) exceeds the threshold, so the column goes.
        assert!(out.column("hiv").is_err());
        assert_eq!(out.labels().unwrap(), [1, 0, 0, 0]);
    }

    #[test]
    fn target_binarization_and_unmappable() {
        let age = [Some(1.0), Some(2.0), Some(3.0), Some(4.0)];
        let ds = registry(&age, &age, &[Some("LFU"), Some("Cured"), None, Some("Cured")]);
        let (out, log) = clean(&ds, &plan()).unwrap();
        assert_eq!(out.labels().unwrap(), [1, 0, 0]);
        assert!(log.contains(&event("drop_missing_target", "Outcome", 1)));

        let ds = registry(&age, &age, &[Some("LFU"), Some("Died"), Some("Cured"), Some("Cured")]);
        assert!(matches!(clean(&ds, &plan()), Err(Error::TargetUnmappable(v)) if v == "Died"));
    }

    #[test]
    fn mode_and_cross_verify() {
        let schema = Schema::new(vec![
            ColumnSpec::new("test", Role::Categorical),
            ColumnSpec::new("basis", Role::Categorical),
            ColumnSpec::new("y", Role::Target),
        ])
        .unwrap();
        let ds = Dataset::new(
            schema,
            vec![
                Column::categorical(&[Some("smear"); 8].iter().copied().chain([Some("cbnaat"), Some("cbnaat"), Some("xray"), Some("xray")]).collect::<Vec<_>>()),
                Column::categorical(&[
                    Some("micro"), Some("micro"), Some("micro"), Some("micro"), Some("micro"), Some("micro"), Some("micro"), None,
                    Some("micro"), Some("micro"), Some("clinical"), None,
                ]),
                Column::labels(vec![0; 12]),
            ],
        )
        .unwrap();
        let p = CleaningPlan {
            sparse_threshold: 0.2,
            impute_rules: vec![ImputeRule {
                column: "basis".into(),
                strategy: ImputeStrategy::CrossVerify { sources: vec!["test".into()] },
            }],
            ..CleaningPlan::default()
        };
        let (out, log) = clean(&ds, &p).unwrap();
        let basis = out.column("basis").unwrap();
        assert_eq!(basis.cell_str(7).unwrap(), "micro");
        // "xray" rows disagree only with themselves: one observed value, so it fills.
        assert_eq!(basis.cell_str(11).unwrap(), "clinical");
        assert_eq!(log[0].affected_rows, 2);

        let p = CleaningPlan {
            sparse_threshold: 0.2,
            impute_rules: vec![ImputeRule { column: "basis".into(), strategy: ImputeStrategy::Mode }],
            ..CleaningPlan::default()
        };
        let (out, _) = clean(&ds, &p).unwrap();
        assert_eq!(out.column("basis").unwrap().cell_str(11).unwrap(), "micro");
    }

    #[test]
    fn invalid_plans() {
        let age = [Some(1.0)];
        let ds = registry(&age, &age, &[Some("LFU")]);
        let mut p = plan();
        p.sparse_threshold = 1.0;
        assert!(matches!(clean(&ds, &p), Err(Error::InvalidPlan(_))));
        let mut p = plan();
        p.impute_rules.push(ImputeRule { column: "Nope".into(), strategy: ImputeStrategy::Mean });
        let (_, log) = clean(&ds, &p).unwrap();
        assert!(log.iter().any(|e| e.action == "skip_rule_absent_column" && e.column == "Nope"));
    }

    #[test]
    fn plan_from_toml() {
        let p = CleaningPlan::from_toml_str(
            r#"
            target_positive_values = ["LFU"]
            target_negative_values = ["Cured"]

            [[replacements]]
            column = "hiv"
            from = "Reactive"
            to = "Positive"
            strict = true

            [[impute_rules]]
            column = "Weight"
            strategy = { kind = "copy_from_column", source = "Age" }

            [[impute_rules]]
            column = "Weight"
            strategy = { kind = "mean" }
            "#,
        )
        .unwrap();
        assert_eq!(p.sparse_threshold, 0.15);
        assert_eq!(p.impute_rules.len(), 2);
        assert_eq!(p.impute_rules[1].strategy, ImputeStrategy::Mean);
    }
}
