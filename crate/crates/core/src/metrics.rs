//! Confusion, ranking and curve metrics.
//!
//! `k` is a percentage of the ranked list. Rows are ranked by descending
//! score with ties broken by ascending row index, which makes every ranking
//! metric deterministic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    Ok(labels.iter().filter(|&&y| y == 1).count())
}

/// Row indices from highest to lowest score, ties by row index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Rows selected by a top-`k`% cut of `n` rows: ceil(k * n / 100).
pub fn selected_count(k: f64, n: usize) -> usize {
    let raw = k * n as f64 / 100.0;
    // Absorbs representation error so that exact products do not round up.
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

fn validate_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 && k <= 100.0 {
        Ok(())
    } else {
        Err(Error::InvalidK(k))
    }
}

/// Fraction of all positives found in the top `k`% of the ranking.
pub fn recall_at_k(scores: &[f64], labels: &[u8], k: f64) -> Result<f64> {
    validate_k(k)?;
    let positives = check(scores, labels)?;
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let take = selected_count(k, scores.len());
    let found = ranking(scores)[..take]
        .iter()
        .filter(|&&r| labels[r] == 1)
        .count();
    Ok(found as f64 / positives as f64)
}

/// Recall at every integer percent 1..=100 from a single sort.
pub fn recall_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<f64>> {
    let positives = check(scores, labels)?;
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let order = ranking(scores);
    let mut cumulative = Vec::with_capacity(order.len() + 1);
    cumulative.push(0usize);
    for &r in &order {
        cumulative.push(cumulative.last().unwrap() + labels[r] as usize);
    }
    Ok((1..=100)
        .map(|k| cumulative[selected_count(k as f64, order.len())] as f64 / positives as f64)
        .collect())
}

/// Mean of Recall@k over the integer percents `a..=b`.
pub fn av_recall(scores: &[f64], labels: &[u8], a: u32, b: u32) -> Result<f64> {
    if a == 0 || a > b || b > 100 {
        return Err(Error::InvalidK(if a == 0 { 0.0 } else { b as f64 }));
    }
    let curve = recall_curve(scores, labels)?;
    let terms = &curve[(a - 1) as usize..b as usize];
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// AvRecall(10, 40).
pub fn av_recall_10_40(scores: &[f64], labels: &[u8]) -> Result<f64> {
    av_recall(scores, labels, 10, 40)
}

/// Area under the ROC curve via the rank statistic; tied pairs count one half.
/// `None` when either class is absent.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<Option<f64>> {
    let positives = check(scores, labels)?;
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the midrank keeps everything in exact integers.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].total_cmp(&scores[order[i]]).is_eq() {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        for &r in &order[i..=j] {
            if labels[r] == 1 {
                twice_rank_sum += twice_mid;
            }
        }
        i = j + 1;
    }
    let p = positives as u64;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(Some((twice_u as f64 / 2.0) / (positives as f64 * negatives as f64)))
}

/// (false positive rate, true positive rate) at every distinct threshold,
/// from (0, 0) to (1, 1).
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let positives = check(scores, labels)?;
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(Vec::new());
    }
    let mut points = vec![(0.0, 0.0)];
    for (tp, fp) in threshold_counts(scores, labels) {
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(points)
}

/// (recall, precision) at every distinct threshold, highest threshold first.
pub fn pr_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    let positives = check(scores, labels)?;
    if positives == 0 {
        return Ok(Vec::new());
    }
    Ok(threshold_counts(scores, labels)
        .map(|(tp, fp)| (tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64))
        .collect())
}

/// Cumulative (tp, fp) after admitting each distinct score, descending.
fn threshold_counts<'a>(
    scores: &'a [f64],
    labels: &'a [u8],
) -> impl Iterator<Item = (usize, usize)> + 'a {
    let order = ranking(scores);
    let mut i = 0;
    let (mut tp, mut fp) = (0usize, 0usize);
    std::iter::from_fn(move || {
        if i >= order.len() {
            return None;
        }
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]].total_cmp(&s).is_eq() {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        Some((tp, fp))
    })
}

/// Mean binary cross-entropy with probabilities clipped away from 0 and 1.
pub fn log_loss(labels: &[u8], probs: &[f64]) -> Result<f64> {
    check(probs, labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let eps = 1e-15;
    Ok(labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    pub threshold: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when a class is missing.
    pub auc_roc: Option<f64>,
    /// Recall@k for k = 1..=100; empty without positives.
    pub recall_at: BTreeMap<u32, f64>,
    pub av_recall_10_40: Option<f64>,
    pub roc_points: Vec<(f64, f64)>,
    pub pr_points: Vec<(f64, f64)>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn recall_at_20(&self) -> Option<f64> {
        self.recall_at.get(&20).copied()
    }
}

/// Full metric bundle at a decision threshold (score >= threshold is positive).
pub fn classification_report(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    let positives = check(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::LengthMismatch(0, 0));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    let mut notes = Vec::new();
    let (recall_at, av) = if positives == 0 {
        notes.push(Error::NoPositives.to_string());
        (BTreeMap::new(), None)
    } else {
        let curve = recall_curve(scores, labels)?;
        let av = curve[9..40].iter().sum::<f64>() / 31.0;
        ((1..=100u32).zip(curve).collect(), Some(av))
    };
    let auc = auc_roc(scores, labels)?;
    if auc.is_none() && positives > 0 {
        notes.push("no negative labels".to_string());
    }
    Ok(EvalReport {
        n: scores.len(),
        positives,
        threshold,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        accuracy: ratio(tp + tn, scores.len()),
        precision,
        recall,
        f1,
        auc_roc: auc,
        recall_at,
        av_recall_10_40: av,
        roc_points: roc_points(scores, labels)?,
        pr_points: pr_points(scores, labels)?,
        notes,
    })
}

/// Two-column CSV for external plotting.
pub fn points_csv(header: (&str, &str), points: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (x, y) in points {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}
