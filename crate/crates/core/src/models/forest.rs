use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::build_classification_tree;
use super::{check_trainable, Hyperparameters, ProbabilityModel, TreeModel};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<TreeModel>,
    /// Out-of-bag accuracy, when bootstrapping left every row out of at
    /// least one tree.
    pub oob_accuracy: Option<f64>,
}

impl ProbabilityModel for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.tree.leaf_value(x)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
    fn kind(&self) -> &str {
        "random_forest"
    }
}

/// Bagged CART trees with per-split feature subsampling. Each tree draws its
/// bootstrap sample and feature subsets from its own derived seed, so the
/// result does not depend on the rayon thread count.
pub fn fit_random_forest(train: &Dataset, hp: &Hyperparameters, seed: u64) -> Result<ForestModel> {
    hp.validate()?;
    check_trainable(train)?;
    let n = train.n_samples();
    let fitted: Vec<(TreeModel, Vec<bool>)> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = seed::derive(seed, &[t as u64]);
            let mut in_bag = vec![!hp.bootstrap; n];
            let rows: Vec<usize> = if hp.bootstrap {
                let mut rng = seed::derived_rng(tree_seed, &[u64::MAX]);
                (0..n)
                    .map(|_| {
                        let r = rng.random_range(0..n);
                        in_bag[r] = true;
                        r
                    })
                    .collect()
            } else {
                (0..n).collect()
            };
            let tree = build_classification_tree(train, rows, hp, hp.max_features, tree_seed);
            (
                TreeModel {
                    n_features: train.n_features(),
                    n_classes: train.n_classes(),
                    tree,
                },
                in_bag,
            )
        })
        .collect();

    let oob_accuracy = hp.bootstrap.then(|| oob_accuracy(train, &fitted)).flatten();
    Ok(ForestModel {
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        trees: fitted.into_iter().map(|(t, _)| t).collect(),
        oob_accuracy,
    })
}

fn oob_accuracy(train: &Dataset, fitted: &[(TreeModel, Vec<bool>)]) -> Option<f64> {
    let mut correct = 0usize;
    let mut scored = 0usize;
    for (i, row) in train.features.iter().enumerate() {
        let mut p = vec![0.0; train.n_classes()];
        let mut votes = 0;
        for (tree, in_bag) in fitted {
            if !in_bag[i] {
                votes += 1;
                for (acc, v) in p.iter_mut().zip(tree.tree.leaf_value(row)) {
                    *acc += v;
                }
            }
        }
        if votes > 0 {
            scored += 1;
            correct += (super::argmax(&p) == train.labels[i]) as usize;
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthConfig};
    use crate::models::{fit_tree, MaxFeatures};

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let ds = synthesize(&SynthConfig {
            class_counts: vec![20, 30, 15],
            d_continuous: 4,
            d_genotype: 1,
            informative_features: vec![0, 2],
            ..Default::default()
        })
        .unwrap()
        .dataset;
        let hp = Hyperparameters {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let forest = fit_random_forest(&ds, &hp, 3).unwrap();
        let tree = fit_tree(&ds, &hp, 99).unwrap();
        assert_eq!(forest.trees[0], tree);
        for row in &ds.features {
            assert_eq!(forest.predict_proba_row(row), tree.predict_proba_row(row));
        }
    }

    #[test]
    fn separable_data_has_high_oob_accuracy() {
        for s in 0..10 {
            let ds = synthesize(&SynthConfig {
                class_counts: vec![60, 60],
                d_continuous: 4,
                d_genotype: 0,
                informative_features: vec![0],
                noise_level: 0.2,
                separation: 4.0,
                seed: s,
                ..Default::default()
            })
            .unwrap()
            .dataset;
            let hp = Hyperparameters {
                n_trees: 30,
                ..Default::default()
            };
            let f = fit_random_forest(&ds, &hp, s).unwrap();
            let oob = f.oob_accuracy.unwrap();
            assert!(oob >= 0.95, "seed {s}: oob {oob}");
        }
    }

    #[test]
    fn thread_count_does_not_change_forest() {
        let ds = synthesize(&SynthConfig {
            class_counts: vec![25, 25, 25],
            ..Default::default()
        })
        .unwrap()
        .dataset;
        let hp = Hyperparameters {
            n_trees: 16,
            ..Default::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let eight = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| fit_random_forest(&ds, &hp, 4).unwrap());
        let b = eight.install(|| fit_random_forest(&ds, &hp, 4).unwrap());
        assert_eq!(a, b);
    }
}
