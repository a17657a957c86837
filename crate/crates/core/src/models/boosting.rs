//! Gradient-boosted regression trees on the logistic (K = 2) or softmax
//! (K > 2, one tree per class per round) loss.

use serde::{Deserialize, Serialize};

use super::tree::{SumStats, TreeBuilder};
use super::{check_trainable, class_priors, Hyperparameters, ProbabilityModel, Tree};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    /// Initial raw score per output (one output for K = 2).
    pub init: Vec<f64>,
    /// `rounds[r][k]`: tree for output `k` in round `r`.
    pub rounds: Vec<Vec<Tree>>,
    /// Training log-loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl BoostingModel {
    fn outputs(&self) -> usize {
        self.init.len()
    }

    fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for round in &self.rounds {
            for (acc, tree) in s.iter_mut().zip(round) {
                *acc += self.learning_rate * tree.leaf_value(x)[0];
            }
        }
        s
    }

    fn proba_from_scores(&self, s: &[f64]) -> Vec<f64> {
        if self.outputs() == 1 {
            let p = sigmoid(s[0]);
            vec![1.0 - p, p]
        } else {
            softmax(s)
        }
    }

    pub(crate) fn trees(&self) -> Vec<&Tree> {
        self.rounds.iter().flatten().collect()
    }
}

impl ProbabilityModel for BoostingModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        self.proba_from_scores(&self.raw_scores(x))
    }
    fn kind(&self) -> &str {
        "gradient_boosting"
    }
}

fn log_loss(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -(p[y].max(1e-300)).ln())
        .sum::<f64>()
        / n
}

pub fn fit_gradient_boosting(
    train: &Dataset,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<BoostingModel> {
    hp.validate()?;
    check_trainable(train)?;
    let n = train.n_samples();
    let k = train.n_classes();
    let priors = class_priors(train);
    let outputs = if k == 2 { 1 } else { k };
    let init: Vec<f64> = if k == 2 {
        vec![(priors[1] / priors[0]).ln()]
    } else {
        priors.iter().map(|p| p.ln()).collect()
    };

    let mut model = BoostingModel {
        n_features: train.n_features(),
        n_classes: k,
        learning_rate: hp.learning_rate,
        init: init.clone(),
        rounds: Vec::with_capacity(hp.n_rounds),
        loss_history: Vec::with_capacity(hp.n_rounds + 1),
    };
    let mut scores: Vec<Vec<f64>> = vec![init; n];
    let mut probs: Vec<Vec<f64>> = scores.iter().map(|s| model.proba_from_scores(s)).collect();
    model.loss_history.push(log_loss(&probs, &train.labels));

    let rows: Vec<usize> = (0..n).collect();
    let leaf_scale = if outputs == 1 {
        1.0
    } else {
        (k as f64 - 1.0) / k as f64
    };
    let builder = TreeBuilder {
        features: &train.features,
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        max_features: None,
        seed,
    };
    for round in 0..hp.n_rounds {
        let mut trees = Vec::with_capacity(outputs);
        for out in 0..outputs {
            let class = if outputs == 1 { 1 } else { out };
            let grad: Vec<f64> = (0..n)
                .map(|i| (train.labels[i] == class) as u8 as f64 - probs[i][class])
                .collect();
            let hess: Vec<f64> = (0..n).map(|i| probs[i][class] * (1.0 - probs[i][class])).collect();
            let root = SumStats::new(&grad, Some(&hess), leaf_scale, &rows);
            trees.push(builder.build(rows.clone(), root));
        }
        for (i, s) in scores.iter_mut().enumerate() {
            for (acc, tree) in s.iter_mut().zip(&trees) {
                *acc += hp.learning_rate * tree.leaf_value(&train.features[i])[0];
            }
            probs[i] = model.proba_from_scores(s);
        }
        let loss = log_loss(&probs, &train.labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: round });
        }
        model.loss_history.push(loss);
        model.rounds.push(trees);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthConfig};

    fn data(k: usize, sep: f64, seed: u64) -> Dataset {
        synthesize(&SynthConfig {
            class_counts: vec![40; k],
            d_continuous: 3,
            d_genotype: 1,
            informative_features: vec![0, 1],
            separation: sep,
            noise_level: 1.0,
            seed,
            ..Default::default()
        })
        .unwrap()
        .dataset
    }

    #[test]
    fn zero_learning_rate_gives_priors() {
        let mut ds = data(3, 2.0, 1);
        ds.labels[0] = 1; // unbalance priors slightly
        let hp = Hyperparameters {
            learning_rate: 0.0,
            n_rounds: 7,
            ..Default::default()
        };
        let m = fit_gradient_boosting(&ds, &hp, 0).unwrap();
        let priors = class_priors(&ds);
        for row in &ds.features {
            for (p, q) in m.predict_proba_row(row).iter().zip(&priors) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        let bin = data(2, 2.0, 2);
        let m = fit_gradient_boosting(&bin, &hp, 0).unwrap();
        assert!((m.predict_proba_row(&bin.features[0])[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn training_loss_is_non_increasing() {
        for k in [2, 3] {
            let ds = data(k, 1.0, 5);
            let hp = Hyperparameters {
                n_rounds: 40,
                max_depth: 3,
                ..Default::default()
            };
            let m = fit_gradient_boosting(&ds, &hp, 0).unwrap();
            for w in m.loss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "k={k}: {:?}", m.loss_history);
            }
        }
    }

    #[test]
    fn separable_binary_reaches_full_accuracy() {
        let ds = data(2, 6.0, 3);
        let hp = Hyperparameters {
            n_rounds: 50,
            max_depth: 3,
            ..Default::default()
        };
        let m = fit_gradient_boosting(&ds, &hp, 0).unwrap();
        let pred = m.predict(&ds.features);
        assert_eq!(pred, ds.labels);
    }
}
