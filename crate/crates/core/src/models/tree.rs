//! CART trees: Gini classification trees and squared-error regression trees
//! (the latter used as boosting base learners).

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{check_trainable, Hyperparameters, MaxFeatures, ProbabilityModel};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::seed;

/// Gains within this distance count as ties.
const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity decrease weighted by the node's share of training rows.
        impurity_decrease: f64,
        n_samples: usize,
    },
    Leaf {
        value: Vec<f64>,
        n_samples: usize,
    },
}

/// Flat binary tree; node 0 is the root. Rows go left when
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value, .. } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Summed weighted impurity decrease per feature.
    pub fn impurity_decreases(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for node in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                out[*feature] += impurity_decrease;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Split statistics

/// Running sufficient statistics for one side of a candidate split.
pub(crate) trait SplitStats: Clone {
    fn add(&mut self, row: usize);
    fn remove(&mut self, row: usize);
    fn count(&self) -> usize;
    /// Impurity times node size (so that gains are additive).
    fn weighted_impurity(&self) -> f64;
    fn leaf_value(&self) -> Vec<f64>;
    /// Zeroed accumulator over the same targets.
    fn empty(&self) -> Self;
}

#[derive(Clone)]
pub(crate) struct ClassCounts<'a> {
    labels: &'a [usize],
    counts: Vec<usize>,
    n: usize,
}

impl<'a> ClassCounts<'a> {
    pub(crate) fn new(labels: &'a [usize], n_classes: usize, rows: &[usize]) -> Self {
        let mut s = ClassCounts {
            labels,
            counts: vec![0; n_classes],
            n: 0,
        };
        for &r in rows {
            s.add(r);
        }
        s
    }

}

impl SplitStats for ClassCounts<'_> {
    fn empty(&self) -> Self {
        ClassCounts {
            labels: self.labels,
            counts: vec![0; self.counts.len()],
            n: 0,
        }
    }
    fn add(&mut self, row: usize) {
        self.counts[self.labels[row]] += 1;
        self.n += 1;
    }
    fn remove(&mut self, row: usize) {
        self.counts[self.labels[row]] -= 1;
        self.n -= 1;
    }
    fn count(&self) -> usize {
        self.n
    }
    fn weighted_impurity(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        let sq: f64 = self.counts.iter().map(|&c| (c * c) as f64).sum();
        n - sq / n
    }
    fn leaf_value(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Squared-error statistics over targets `y`, with Newton leaf values
/// `sum(y) / sum(h)` when hessians are supplied.
#[derive(Clone)]
pub(crate) struct SumStats<'a> {
    y: &'a [f64],
    hess: Option<&'a [f64]>,
    sum: f64,
    sum_sq: f64,
    sum_h: f64,
    n: usize,
    leaf_scale: f64,
}

impl<'a> SumStats<'a> {
    pub(crate) fn new(y: &'a [f64], hess: Option<&'a [f64]>, leaf_scale: f64, rows: &[usize]) -> Self {
        let mut s = SumStats {
            y,
            hess,
            sum: 0.0,
            sum_sq: 0.0,
            sum_h: 0.0,
            n: 0,
            leaf_scale,
        };
        for &r in rows {
            s.add(r);
        }
        s
    }

}

impl SplitStats for SumStats<'_> {
    fn empty(&self) -> Self {
        SumStats {
            sum: 0.0,
            sum_sq: 0.0,
            sum_h: 0.0,
            n: 0,
            ..self.clone()
        }
    }
    fn add(&mut self, row: usize) {
        let v = self.y[row];
        self.sum += v;
        self.sum_sq += v * v;
        self.sum_h += self.hess.map_or(1.0, |h| h[row]);
        self.n += 1;
    }
    fn remove(&mut self, row: usize) {
        let v = self.y[row];
        self.sum -= v;
        self.sum_sq -= v * v;
        self.sum_h -= self.hess.map_or(1.0, |h| h[row]);
        self.n -= 1;
    }
    fn count(&self) -> usize {
        self.n
    }
    fn weighted_impurity(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.sum_sq - self.sum * self.sum / self.n as f64).max(0.0)
    }
    fn leaf_value(&self) -> Vec<f64> {
        let v = if self.hess.is_some() {
            self.sum / (self.sum_h + 1e-9)
        } else {
            self.sum / self.n.max(1) as f64
        };
        vec![(self.leaf_scale * v).clamp(-10.0, 10.0)]
    }
}

// ---------------------------------------------------------------------------
// Builder

pub(crate) struct TreeBuilder<'a> {
    pub features: &'a [Vec<f64>],
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all, in index order.
    pub max_features: Option<usize>,
    pub seed: u64,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl TreeBuilder<'_> {
    pub(crate) fn build<S: SplitStats>(&self, rows: Vec<usize>, root: S) -> Tree {
        let mut nodes = Vec::new();
        let n_total = rows.len().max(1) as f64;
        let mut split_counter = 0u64;
        self.grow(&mut nodes, rows, root, 0, n_total, &mut split_counter);
        Tree { nodes }
    }

    fn grow<S: SplitStats>(
        &self,
        nodes: &mut Vec<Node>,
        rows: Vec<usize>,
        stats: S,
        depth: usize,
        n_total: f64,
        split_counter: &mut u64,
    ) -> usize {
        let id = nodes.len();
        let n = rows.len();
        nodes.push(Node::Leaf {
            value: stats.leaf_value(),
            n_samples: n,
        });
        let impurity = stats.weighted_impurity();
        if depth >= self.max_depth || n < 2 * self.min_samples_leaf || impurity <= 1e-12 {
            return id;
        }
        let Some(choice) = self.best_split(&rows, &stats, split_counter) else {
            return id;
        };
        let left_stats = rebuild(&stats, &choice.left);
        let right_stats = rebuild(&stats, &choice.right);
        let left = self.grow(nodes, choice.left, left_stats, depth + 1, n_total, split_counter);
        let right = self.grow(nodes, choice.right, right_stats, depth + 1, n_total, split_counter);
        nodes[id] = Node::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
            impurity_decrease: choice.gain.max(0.0) / n_total,
            n_samples: n,
        };
        id
    }

    fn candidate_features(&self, split_counter: &mut u64) -> Vec<usize> {
        let d = self.features.first().map_or(0, Vec::len);
        match self.max_features {
            Some(m) if m < d => {
                let mut rng = seed::derived_rng(self.seed, &[*split_counter]);
                *split_counter += 1;
                let mut f = sample(&mut rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split<S: SplitStats>(
        &self,
        rows: &[usize],
        parent: &S,
        split_counter: &mut u64,
    ) -> Option<SplitChoice> {
        let parent_impurity = parent.weighted_impurity();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for feature in self.candidate_features(split_counter) {
            order.sort_by(|&a, &b| {
                self.features[a][feature]
                    .total_cmp(&self.features[b][feature])
                    .then(a.cmp(&b))
            });
            let mut left = rebuild(parent, &[]);
            let mut right = parent.clone();
            for pos in 0..order.len() - 1 {
                let r = order[pos];
                left.add(r);
                right.remove(r);
                let v = self.features[r][feature];
                let next = self.features[order[pos + 1]][feature];
                if v == next {
                    continue;
                }
                if left.count() < self.min_samples_leaf || right.count() < self.min_samples_leaf {
                    continue;
                }
                let gain = parent_impurity - left.weighted_impurity() - right.weighted_impurity();
                if gain < -GAIN_TIE_EPS {
                    continue;
                }
                let threshold = v + (next - v) / 2.0;
                if best.is_none_or(|(_, _, g)| gain > g + GAIN_TIE_EPS) {
                    best = Some((feature, threshold, gain));
                }
            }
        }
        let (feature, threshold, gain) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.features[r][feature] <= threshold);
        Some(SplitChoice {
            feature,
            threshold,
            gain,
            left,
            right,
        })
    }
}

fn rebuild<S: SplitStats>(template: &S, rows: &[usize]) -> S {
    let mut s = template.empty();
    for &r in rows {
        s.add(r);
    }
    s
}

// ---------------------------------------------------------------------------
// Classification tree model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub tree: Tree,
}

impl ProbabilityModel for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        self.tree.leaf_value(x).to_vec()
    }
    fn kind(&self) -> &str {
        "tree"
    }
}

pub(crate) fn build_classification_tree(
    train: &Dataset,
    rows: Vec<usize>,
    hp: &Hyperparameters,
    max_features: MaxFeatures,
    seed: u64,
) -> Tree {
    let d = train.n_features();
    let m = max_features.resolve(d);
    let builder = TreeBuilder {
        features: &train.features,
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        max_features: (m < d).then_some(m),
        seed,
    };
    let root = ClassCounts::new(&train.labels, train.n_classes(), &rows);
    builder.build(rows, root)
}

/// CART with Gini impurity over all features.
pub fn fit_tree(train: &Dataset, hp: &Hyperparameters, seed: u64) -> Result<TreeModel> {
    hp.validate()?;
    check_trainable(train)?;
    let rows: Vec<usize> = (0..train.n_samples()).collect();
    let tree = build_classification_tree(train, rows, hp, MaxFeatures::All, seed);
    Ok(TreeModel {
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureKind;
    use crate::models::{gini_importance, Model};

    fn ds(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
        let d = features[0].len();
        let k = labels.iter().max().unwrap() + 1;
        Dataset::new(
            features,
            labels,
            (0..d).map(|j| format!("f{j}")).collect(),
            vec![FeatureKind::Continuous; d],
            (0..k).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_threshold_gives_depth_one_tree() {
        let data = ds(
            vec![
                vec![0.3, 1.0],
                vec![0.9, 2.0],
                vec![0.1, 3.0],
                vec![0.5, 7.0],
                vec![0.2, 8.0],
                vec![0.8, 9.0],
            ],
            vec![0, 0, 0, 1, 1, 1],
        );
        let m = fit_tree(&data, &Hyperparameters::default(), 0).unwrap();
        assert_eq!(m.tree.depth(), 1);
        match &m.tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 1);
                assert_eq!(*threshold, 5.0);
            }
            _ => panic!("expected split"),
        }
        assert_eq!(m.predict(&data.features), data.labels);
        let imp = gini_importance(&Model::Tree(m)).unwrap();
        assert_eq!(imp, vec![0.0, 1.0]);
    }

    #[test]
    fn pure_leaves_are_one_hot() {
        let data = ds(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1, 1],
        );
        let m = fit_tree(&data, &Hyperparameters::default(), 0).unwrap();
        assert_eq!(m.predict_proba_row(&[0.5]), vec![1.0, 0.0]);
        assert_eq!(m.predict_proba_row(&[2.5]), vec![0.0, 1.0]);
    }

    #[test]
    fn xor_needs_depth_two() {
        let data = ds(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
        );
        let hp = Hyperparameters {
            max_depth: 2,
            ..Default::default()
        };
        let m = fit_tree(&data, &hp, 0).unwrap();
        assert_eq!(m.predict(&data.features), data.labels);
        let shallow = fit_tree(
            &data,
            &Hyperparameters {
                max_depth: 1,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert!(shallow.predict(&data.features) != data.labels);
    }

    #[test]
    fn hand_computed_gini_importance() {
        // Root: x0 <= 4.5 and x1 <= 0.5 both reduce weighted impurity from
        // 3 to 2 (gain 1); the lower feature index wins. Right child
        // (x0 = 5..8) splits perfectly on x1 with gain 2. Normalized by 8
        // rows: raw (1/8, 2/8) -> (1/3, 2/3).
        let x0 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let x1 = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let y = vec![0, 0, 0, 0, 1, 0, 1, 0];
        let data = ds(x0.iter().zip(x1).map(|(&a, b)| vec![a, b]).collect(), y);
        let hp = Hyperparameters {
            max_depth: 2,
            ..Default::default()
        };
        let m = fit_tree(&data, &hp, 0).unwrap();
        match &m.tree.nodes[0] {
            Node::Split {
                feature,
                threshold,
                impurity_decrease,
                ..
            } => {
                assert_eq!((*feature, *threshold), (0, 4.5));
                assert!((impurity_decrease - 1.0 / 8.0).abs() < 1e-12);
            }
            _ => panic!("expected split"),
        }
        let imp = gini_importance(&Model::Tree(m)).unwrap();
        assert!((imp[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((imp[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let data = ds(
            (0..10).map(|i| vec![i as f64]).collect(),
            vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1],
        );
        let hp = Hyperparameters {
            min_samples_leaf: 3,
            max_depth: 10,
            ..Default::default()
        };
        let m = fit_tree(&data, &hp, 0).unwrap();
        for node in &m.tree.nodes {
            if let Node::Leaf { n_samples, .. } = node {
                assert!(*n_samples >= 3);
            }
        }
    }
}
