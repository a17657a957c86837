//! Probability-emitting classifiers and the [`ProbabilityModel`] contract
//! every explainer consumes.

mod boosting;
mod forest;
mod logistic;
mod tree;

pub use boosting::{fit_gradient_boosting, BoostingModel};
pub use forest::{fit_random_forest, ForestModel};
pub use logistic::{fit_logistic, LogisticModel};
pub use tree::{fit_tree, Node, Tree, TreeModel};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained predictor that maps a feature row to class probabilities.
///
/// Rows returned by `predict_proba_row` have length `n_classes()`, entries
/// in `[0, 1]` and sum to one. Prediction is a pure function of the model
/// state and the input.
pub trait ProbabilityModel: Send + Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64>;

    fn kind(&self) -> &str {
        "custom"
    }

    fn predict_proba(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba_row(r)).collect()
    }

    /// Argmax class; ties go to the lowest class id.
    fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.predict_proba_row(x))
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict_class(r)).collect()
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for &M {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_proba_row(x)
    }
    fn kind(&self) -> &str {
        (**self).kind()
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for Box<M> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_proba_row(x)
    }
    fn kind(&self) -> &str {
        (**self).kind()
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for Arc<M> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_proba_row(x)
    }
    fn kind(&self) -> &str {
        (**self).kind()
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Tree,
    RandomForest,
    GradientBoosting,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Tree => "tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
        }
    }

    pub fn is_tree_based(self) -> bool {
        !matches!(self, ModelKind::Logistic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).max(1),
            MaxFeatures::Count(n) => n.clamp(1, d.max(1)),
        }
    }
}

/// Training knobs shared by every model kind; each kind reads the ones it
/// needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    /// Boosting shrinkage.
    pub learning_rate: f64,
    pub n_rounds: usize,
    /// Logistic initial step size.
    pub step_size: f64,
    /// Logistic L2 penalty on weights (intercepts are not penalized).
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            max_depth: 6,
            min_samples_leaf: 1,
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            learning_rate: 0.1,
            n_rounds: 100,
            step_size: 1.0,
            l2: 1e-3,
            max_iter: 10_000,
            tol: 1e-8,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, value: f64, reason: &'static str) -> Result<()> {
            Err(Error::Hyperparameter {
                name,
                value,
                reason,
            })
        }
        if self.max_depth == 0 {
            return bad("max_depth", 0.0, "must be >= 1");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf", 0.0, "must be >= 1");
        }
        if self.n_trees == 0 {
            return bad("n_trees", 0.0, "must be >= 1");
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return bad("max_features", 0.0, "must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", self.learning_rate, "must lie in [0, 1]");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size", self.step_size, "must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2", self.l2, "must be finite and >= 0");
        }
        if !(self.tol > 0.0) {
            return bad("tol", self.tol, "must be positive");
        }
        Ok(())
    }
}

fn check_trainable(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    train.check_classes_nonempty()
}

/// Any of the implemented classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Tree(TreeModel),
    RandomForest(ForestModel),
    GradientBoosting(BoostingModel),
}

impl Model {
    pub fn model_kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::Tree(_) => ModelKind::Tree,
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::GradientBoosting(_) => ModelKind::GradientBoosting,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocumentRef {
            format_version: MODEL_FORMAT_VERSION,
            model: self,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: doc.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(doc.model)
    }

    /// The trees making up a tree-based model.
    pub fn trees(&self) -> Result<Vec<&Tree>> {
        match self {
            Model::Logistic(_) => Err(Error::NotTreeBased("logistic".into())),
            Model::Tree(m) => Ok(vec![&m.tree]),
            Model::RandomForest(m) => Ok(m.trees.iter().map(|t| &t.tree).collect()),
            Model::GradientBoosting(m) => Ok(m.trees()),
        }
    }
}

#[derive(Serialize)]
struct ModelDocumentRef<'a> {
    format_version: u32,
    model: &'a Model,
}

#[derive(Deserialize)]
struct ModelDocument {
    format_version: u32,
    model: Model,
}

impl ProbabilityModel for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_features(),
            Model::Tree(m) => m.n_features(),
            Model::RandomForest(m) => m.n_features(),
            Model::GradientBoosting(m) => m.n_features(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Model::Logistic(m) => m.n_classes(),
            Model::Tree(m) => m.n_classes(),
            Model::RandomForest(m) => m.n_classes(),
            Model::GradientBoosting(m) => m.n_classes(),
        }
    }

    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Model::Logistic(m) => m.predict_proba_row(x),
            Model::Tree(m) => m.predict_proba_row(x),
            Model::RandomForest(m) => m.predict_proba_row(x),
            Model::GradientBoosting(m) => m.predict_proba_row(x),
        }
    }

    fn kind(&self) -> &str {
        self.model_kind().as_str()
    }
}

pub fn fit(kind: ModelKind, train: &Dataset, hp: &Hyperparameters, seed: u64) -> Result<Model> {
    Ok(match kind {
        ModelKind::Logistic => Model::Logistic(fit_logistic(train, hp, seed)?),
        ModelKind::Tree => Model::Tree(fit_tree(train, hp, seed)?),
        ModelKind::RandomForest => Model::RandomForest(fit_random_forest(train, hp, seed)?),
        ModelKind::GradientBoosting => {
            Model::GradientBoosting(fit_gradient_boosting(train, hp, seed)?)
        }
    })
}

/// Impurity-based importance: per-feature weighted impurity decrease summed
/// over each tree's splits, averaged over trees and normalized to sum 1.
/// A model with no splits at all yields an all-zero vector.
pub fn gini_importance(model: &Model) -> Result<Vec<f64>> {
    let trees = model.trees()?;
    let d = model.n_features();
    let mut total = vec![0.0; d];
    for tree in &trees {
        for (t, v) in total.iter_mut().zip(tree.impurity_decreases(d)) {
            *t += v;
        }
    }
    let n = trees.len().max(1) as f64;
    for t in &mut total {
        *t /= n;
    }
    Ok(normalize(total))
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        for x in &mut v {
            *x /= sum;
        }
    }
    v
}

pub(crate) fn class_priors(train: &Dataset) -> Vec<f64> {
    let n = train.n_samples() as f64;
    train.class_counts().iter().map(|&c| c as f64 / n).collect()
}
