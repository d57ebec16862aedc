//! Second-order gradient boosting on the logistic loss.

use serde::{Deserialize, Serialize};

use super::tree::{Binned, GradStats, Grower, NewtonGain, Node};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub gamma: f64,
    pub min_child_hessian: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            lambda_l2: 1.0,
            gamma: 0.0,
            min_child_hessian: 1.0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparameter(format!("gbdt: {m}")));
        if self.rounds == 0 {
            return bad("rounds must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda_l2 >= 0.0 && self.gamma >= 0.0 && self.min_child_hessian >= 0.0) {
            return bad("lambda_l2, gamma and min_child_hessian must be >= 0");
        }
        if !(self.lambda_l2.is_finite() && self.gamma.is_finite() && self.min_child_hessian.is_finite()) {
            return bad("regularisers must be finite");
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss of a raw margin.
pub fn logistic_loss(label: u8, margin: f64) -> f64 {
    // log(1 + e^m) - y m, written to avoid overflow.
    let softplus = if margin > 0.0 {
        margin + (-margin).exp().ln_1p()
    } else {
        margin.exp().ln_1p()
    };
    softplus - label as f64 * margin
}

/// First and second derivative of [`logistic_loss`] in the margin.
pub fn logistic_grad_hess(label: u8, margin: f64) -> (f64, f64) {
    let p = sigmoid(margin);
    (p - label as f64, p * (1.0 - p))
}

pub(crate) struct Boosted {
    pub trees: Vec<Node>,
    pub training_loss: Vec<f64>,
}

pub(crate) fn fit(params: &GbdtParams, x: &FeatureMatrix, y: &[u8]) -> Boosted {
    let binned = Binned::new(x);
    let crit = NewtonGain {
        lambda: params.lambda_l2,
        gamma: params.gamma,
        min_child_hessian: params.min_child_hessian,
        learning_rate: params.learning_rate,
    };
    let n = y.len();
    let mut margin = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut training_loss = Vec::with_capacity(params.rounds + 1);
    let mean_loss = |m: &[f64]| y.iter().zip(m).map(|(&l, &v)| logistic_loss(l, v)).sum::<f64>() / n as f64;
    training_loss.push(mean_loss(&margin));
    let all: Vec<usize> = (0..binned.n_features()).collect();
    for _ in 0..params.rounds {
        let stats: Vec<GradStats> = y
            .iter()
            .zip(&margin)
            .map(|(&l, &m)| {
                let (grad, hess) = logistic_grad_hess(l, m);
                GradStats { grad, hess }
            })
            .collect();
        let grower = Grower {
            binned: &binned,
            stats: &stats,
            criterion: &crit,
            max_depth: params.max_depth,
        };
        let tree = grower.grow((0..n).collect(), &mut || all.clone());
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict(x.row(i));
        }
        training_loss.push(mean_loss(&margin));
        trees.push(tree);
    }
    Boosted { trees, training_loss }
}

pub(crate) fn margin(trees: &[Node], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict(row)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(logistic_loss(1, 800.0).abs() < 1e-300);
        assert!((logistic_loss(0, 800.0) - 800.0).abs() < 1e-9);
    }

    #[test]
    fn balanced_root_leaf_is_zero() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let params = GbdtParams {
            rounds: 1,
            max_depth: 0,
            lambda_l2: 0.0,
            ..Default::default()
        };
        let b = fit(&params, &x, &[1, 0, 1, 0]);
        assert_eq!(b.trees[0], Node::Leaf { value: 0.0 });
    }

    #[test]
    fn unbalanced_root_leaf_is_newton_step() {
        let x = FeatureMatrix::from_rows(&vec![vec![0.0]; 4]).unwrap();
        let params = GbdtParams {
            rounds: 1,
            max_depth: 0,
            lambda_l2: 0.0,
            learning_rate: 1.0,
            ..Default::default()
        };
        // g = 0.5 - y, h = 0.25: three positives give -G/H = 1.0 / 1.0.
        let b = fit(&params, &x, &[1, 1, 1, 0]);
        assert_eq!(b.trees[0], Node::Leaf { value: 1.0 });
    }
}
