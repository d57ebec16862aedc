//! Binary decision trees shared by CART, the forests and the booster.
//!
//! Candidate thresholds are midpoints between adjacent distinct training
//! values present in a node. Each feature is pre-ranked once so that a node
//! can gather its per-value statistics either with a dense histogram over
//! ranks or, for small nodes, by sorting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Features used by any split, with repetition.
    pub fn split_features(&self, out: &mut Vec<usize>) {
        if let Node::Split {
            feature,
            left,
            right,
            ..
        } = self
        {
            out.push(*feature);
            left.split_features(out);
            right.split_features(out);
        }
    }
}

/// Per-feature dense ranks of the training values.
pub(crate) struct Binned {
    uniq: Vec<Vec<f64>>,
    codes: Vec<Vec<u32>>,
}

impl Binned {
    pub fn new(x: &FeatureMatrix) -> Self {
        let (uniq, codes) = (0..x.n_cols())
            .into_par_iter()
            .map(|j| {
                let col = x.column(j);
                let mut u = col.clone();
                u.sort_by(f64::total_cmp);
                u.dedup();
                let codes = col
                    .iter()
                    .map(|v| u.binary_search_by(|p| p.total_cmp(v)).expect("present") as u32)
                    .collect();
                (u, codes)
            })
            .unzip();
        Binned { uniq, codes }
    }

    pub fn n_features(&self) -> usize {
        self.uniq.len()
    }
}

pub(crate) trait Stats: Copy + Default + Send + Sync {
    fn add(&mut self, other: &Self);
    fn minus(&self, other: &Self) -> Self;
}

/// Split scoring. `None` marks a candidate that violates a child constraint.
pub(crate) trait Criterion<S>: Sync {
    fn gain(&self, left: &S, right: &S, parent: &S) -> Option<f64>;
    fn leaf(&self, total: &S) -> f64;
    /// Whether a node is worth trying to split at all.
    fn splittable(&self, _total: &S, _rows: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    code: u32,
    threshold: f64,
}

/// Rows above which a node's feature scans run in parallel.
const PAR_ROWS: usize = 4096;

pub(crate) struct Grower<'a, S, C> {
    pub binned: &'a Binned,
    pub stats: &'a [S],
    pub criterion: &'a C,
    pub max_depth: usize,
}

impl<S: Stats, C: Criterion<S>> Grower<'_, S, C> {
    /// Grow depth-first, left before right. `features` picks the candidate
    /// features at each node and is called in that visiting order.
    pub fn grow(&self, rows: Vec<usize>, features: &mut dyn FnMut() -> Vec<usize>) -> Node {
        self.grow_node(rows, 0, features)
    }

    fn grow_node(&self, rows: Vec<usize>, depth: usize, features: &mut dyn FnMut() -> Vec<usize>) -> Node {
        let mut total = S::default();
        for &r in &rows {
            total.add(&self.stats[r]);
        }
        let leaf = Node::Leaf {
            value: self.criterion.leaf(&total),
        };
        if depth >= self.max_depth || rows.len() < 2 || !self.criterion.splittable(&total, rows.len()) {
            return leaf;
        }
        let candidates = features();
        let Some(best) = self.best_split(&rows, &candidates, &total) else {
            return leaf;
        };
        let codes = &self.binned.codes[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| codes[r] <= best.code);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow_node(left, depth + 1, features)),
            right: Box::new(self.grow_node(right, depth + 1, features)),
        }
    }

    fn best_split(&self, rows: &[usize], features: &[usize], total: &S) -> Option<Candidate> {
        let per_feature: Vec<Option<Candidate>> = if rows.len() >= PAR_ROWS {
            features.par_iter().map(|&f| self.scan(rows, f, total)).collect()
        } else {
            features.iter().map(|&f| self.scan(rows, f, total)).collect()
        };
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            let better = match best {
                None => true,
                Some(b) => c.gain > b.gain || (c.gain == b.gain && c.feature < b.feature),
            };
            if better {
                best = Some(c);
            }
        }
        best
    }

    /// Best positive-gain threshold for one feature; the lowest threshold
    /// wins among equal gains.
    fn scan(&self, rows: &[usize], feature: usize, total: &S) -> Option<Candidate> {
        let uniq = &self.binned.uniq[feature];
        if uniq.len() < 2 {
            return None;
        }
        let codes = &self.binned.codes[feature];
        let buckets: Vec<(u32, S)> = if uniq.len() <= 4 * rows.len() {
            let mut hist = vec![S::default(); uniq.len()];
            let mut seen = vec![false; uniq.len()];
            for &r in rows {
                let c = codes[r] as usize;
                hist[c].add(&self.stats[r]);
                seen[c] = true;
            }
            hist.into_iter()
                .enumerate()
                .filter(|(c, _)| seen[*c])
                .map(|(c, s)| (c as u32, s))
                .collect()
        } else {
            let mut sorted: Vec<usize> = rows.to_vec();
            sorted.sort_by_key(|&r| (codes[r], r));
            let mut out: Vec<(u32, S)> = Vec::new();
            for r in sorted {
                match out.last_mut() {
                    Some((c, s)) if *c == codes[r] => s.add(&self.stats[r]),
                    _ => out.push((codes[r], self.stats[r])),
                }
            }
            out
        };
        let mut left = S::default();
        let mut best: Option<Candidate> = None;
        for pair in buckets.windows(2) {
            left.add(&pair[0].1);
            let right = total.minus(&left);
            let Some(gain) = self.criterion.gain(&left, &right, total) else {
                continue;
            };
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                let (a, b) = (uniq[pair[0].0 as usize], uniq[pair[1].0 as usize]);
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Candidate {
                    gain,
                    feature,
                    code: pair[0].0,
                    threshold,
                });
            }
        }
        best
    }
}

/// Weighted class tallies for Gini trees.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ClassStats {
    pub weight: f64,
    pub positive: f64,
}

impl Stats for ClassStats {
    fn add(&mut self, o: &Self) {
        self.weight += o.weight;
        self.positive += o.positive;
    }
    fn minus(&self, o: &Self) -> Self {
        ClassStats {
            weight: self.weight - o.weight,
            positive: self.positive - o.positive,
        }
    }
}

/// Gini impurity decrease, scaled by node weight.
pub(crate) struct Gini {
    pub min_samples_leaf: f64,
}

fn weighted_gini(s: &ClassStats) -> f64 {
    if s.weight <= 0.0 {
        0.0
    } else {
        2.0 * s.positive * (s.weight - s.positive) / s.weight
    }
}

impl Criterion<ClassStats> for Gini {
    fn gain(&self, l: &ClassStats, r: &ClassStats, p: &ClassStats) -> Option<f64> {
        if l.weight < self.min_samples_leaf || r.weight < self.min_samples_leaf {
            return None;
        }
        Some(weighted_gini(p) - weighted_gini(l) - weighted_gini(r))
    }

    fn leaf(&self, s: &ClassStats) -> f64 {
        if s.weight > 0.0 {
            s.positive / s.weight
        } else {
            0.0
        }
    }

    fn splittable(&self, s: &ClassStats, _rows: usize) -> bool {
        s.positive > 0.0 && s.positive < s.weight && s.weight >= 2.0 * self.min_samples_leaf
    }
}

/// First and second derivatives of the loss summed over a node.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradStats {
    pub grad: f64,
    pub hess: f64,
}

impl Stats for GradStats {
    fn add(&mut self, o: &Self) {
        self.grad += o.grad;
        self.hess += o.hess;
    }
    fn minus(&self, o: &Self) -> Self {
        GradStats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
        }
    }
}

/// Second-order regularised gain with shrunken Newton leaf weights.
pub(crate) struct NewtonGain {
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
    pub learning_rate: f64,
}

impl NewtonGain {
    fn score(&self, s: &GradStats) -> f64 {
        s.grad * s.grad / (s.hess + self.lambda)
    }
}

impl Criterion<GradStats> for NewtonGain {
    fn gain(&self, l: &GradStats, r: &GradStats, p: &GradStats) -> Option<f64> {
        if l.hess < self.min_child_hessian || r.hess < self.min_child_hessian {
            return None;
        }
        Some(0.5 * (self.score(l) + self.score(r) - self.score(p)) - self.gamma)
    }

    fn leaf(&self, s: &GradStats) -> f64 {
        let denom = s.hess + self.lambda;
        if denom <= 0.0 {
            0.0
        } else {
            -s.grad / denom * self.learning_rate
        }
    }

    fn splittable(&self, s: &GradStats, _rows: usize) -> bool {
        s.hess >= 2.0 * self.min_child_hessian
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_gini(rows: &[Vec<f64>], y: &[u8], depth: usize) -> Node {
        let x = FeatureMatrix::from_rows(rows).unwrap();
        let binned = Binned::new(&x);
        let stats: Vec<ClassStats> = y
            .iter()
            .map(|&v| ClassStats {
                weight: 1.0,
                positive: v as f64,
            })
            .collect();
        let crit = Gini { min_samples_leaf: 1.0 };
        let g = Grower {
            binned: &binned,
            stats: &stats,
            criterion: &crit,
            max_depth: depth,
        };
        let all: Vec<usize> = (0..x.n_cols()).collect();
        g.grow((0..y.len()).collect(), &mut || all.clone())
    }

    #[test]
    fn midpoint_threshold_and_leaf_posteriors() {
        let t = fit_gini(&[vec![1.0], vec![2.0], vec![4.0], vec![8.0]], &[0, 0, 1, 1], 3);
        match &t {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 3.0),
            _ => panic!("expected a split"),
        }
        assert_eq!(t.predict(&[2.9]), 0.0);
        assert_eq!(t.predict(&[3.1]), 1.0);
        assert_eq!(t.leaves(), 2);
    }

    #[test]
    fn single_leaf_counts() {
        let t = fit_gini(&[vec![1.0], vec![1.0], vec![1.0], vec![1.0]], &[1, 1, 1, 0], 4);
        assert_eq!(t, Node::Leaf { value: 0.75 });
    }

    #[test]
    fn equal_gain_prefers_lower_feature() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let t = fit_gini(&rows, &[0, 0, 1, 1], 1);
        assert!(matches!(t, Node::Split { feature: 0, .. }));
    }

    #[test]
    fn histogram_and_sort_paths_agree() {
        // 40 distinct values in nodes of 5 rows forces the sort path deeper down.
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![((i * 17) % 40) as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from((i * 17) % 40 % 3 == 0)).collect();
        let t = fit_gini(&rows, &y, 40);
        for (r, &v) in rows.iter().zip(&y) {
            assert_eq!(t.predict(r), v as f64);
        }
    }
}
