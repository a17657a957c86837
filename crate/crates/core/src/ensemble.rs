//! Multiclass decomposition (one-vs-one, one-vs-all) and the two-bank
//! bagging ensemble for an imbalanced majority class.
//!
//! The bagging variant splits the majority class of the training set into
//! two disjoint halves. Each half, together with every minority-class row,
//! trains one bank of one-vs-one binary models. A bank scores class `c` by
//! summing `P(c)` over the pairs involving `c`; the ensemble sums the two
//! banks' score vectors and takes the argmax (ties to the lowest class id).

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::{self, argmax, Hyperparameters, Model, ModelKind, ProbabilityModel};
use crate::seed;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskNegative {
    Class(usize),
    Rest,
}

/// One binary subproblem. In the task's relabeled view, label 1 is the
/// positive class and label 0 the negative class (or "rest").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTask {
    pub positive: usize,
    pub negative: TaskNegative,
    pub mask: Vec<bool>,
}

impl BinaryTask {
    pub fn rows(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// The task's training rows relabeled to {0 = negative, 1 = positive}.
    pub fn view(&self, ds: &Dataset) -> Dataset {
        let rows = self.rows();
        let mut out = ds.subset(&rows);
        out.labels = rows
            .iter()
            .map(|&i| (ds.labels[i] == self.positive) as usize)
            .collect();
        let negative = match self.negative {
            TaskNegative::Class(c) => ds.class_names[c].clone(),
            TaskNegative::Rest => format!("not {}", ds.class_names[self.positive]),
        };
        out.class_names = vec![negative, ds.class_names[self.positive].clone()];
        out
    }
}

/// One task per unordered class pair `(a, b)`, `a < b`, in lexicographic
/// order; the higher class id is the positive class.
pub fn decompose_ovo(train: &Dataset) -> Vec<BinaryTask> {
    ovo_pairs(train.n_classes())
        .into_iter()
        .map(|(neg, pos)| BinaryTask {
            positive: pos,
            negative: TaskNegative::Class(neg),
            mask: train.labels.iter().map(|&y| y == neg || y == pos).collect(),
        })
        .collect()
}

pub fn decompose_ova(train: &Dataset) -> Vec<BinaryTask> {
    (0..train.n_classes())
        .map(|c| BinaryTask {
            positive: c,
            negative: TaskNegative::Rest,
            mask: vec![true; train.n_samples()],
        })
        .collect()
}

/// `(negative, positive)` pairs with `negative < positive`.
pub fn ovo_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect()
}

// ---------------------------------------------------------------------------
// One-vs-one bank

/// A complete set of pairwise binary models. `models[t]` answers pair
/// `pairs[t] = (negative, positive)` with probabilities `[P(neg), P(pos)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoBank<M = Model> {
    pub n_classes: usize,
    pub n_features: usize,
    pub pairs: Vec<(usize, usize)>,
    pub models: Vec<M>,
}

impl<M: ProbabilityModel> OvoBank<M> {
    pub fn new(n_classes: usize, n_features: usize, models: Vec<M>) -> Result<Self> {
        let pairs = ovo_pairs(n_classes);
        if models.len() != pairs.len() {
            return Err(Error::Dimension {
                expected: pairs.len(),
                got: models.len(),
            });
        }
        Ok(OvoBank {
            n_classes,
            n_features,
            pairs,
            models,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_classes];
        for (&(neg, pos), m) in self.pairs.iter().zip(&self.models) {
            let p = m.predict_proba_row(x);
            scores[neg] += p[0];
            scores[pos] += p[1];
        }
        scores
    }
}

/// Summed pairwise probability per class and the winning class (ties to the
/// lowest id).
pub fn ovo_predict<M: ProbabilityModel>(bank: &OvoBank<M>, x: &[f64]) -> (usize, Vec<f64>) {
    let scores = bank.scores(x);
    (argmax(&scores), scores)
}

fn normalized(scores: Vec<f64>) -> Vec<f64> {
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.into_iter().map(|s| s / total).collect()
    } else {
        let k = scores.len() as f64;
        vec![1.0 / k; scores.len()]
    }
}

impl<M: ProbabilityModel> ProbabilityModel for OvoBank<M> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        normalized(self.scores(x))
    }
    fn kind(&self) -> &str {
        "ovo"
    }
}

fn fit_tasks(
    train: &Dataset,
    tasks: &[BinaryTask],
    kind: ModelKind,
    hp: &Hyperparameters,
    seed: u64,
    bank: usize,
) -> Result<Vec<Model>> {
    tasks
        .par_iter()
        .enumerate()
        .map(|(t, task)| {
            let view = task.view(train);
            models::fit(kind, &view, hp, seed::derive(seed, &[bank as u64, t as u64])).map_err(|e| {
                Error::TaskFit {
                    bank,
                    positive: task.positive,
                    negative: match task.negative {
                        TaskNegative::Class(c) => c.to_string(),
                        TaskNegative::Rest => "rest".into(),
                    },
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Plain one-vs-one (no bagging).
pub fn fit_ovo(train: &Dataset, kind: ModelKind, hp: &Hyperparameters, seed: u64) -> Result<OvoBank> {
    check_multiclass(train)?;
    let tasks = decompose_ovo(train);
    let models = fit_tasks(train, &tasks, kind, hp, seed, 0)?;
    OvoBank::new(train.n_classes(), train.n_features(), models)
}

// ---------------------------------------------------------------------------
// One-vs-all

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// `models[c]`: class `c` (label 1) vs the rest (label 0).
    pub models: Vec<Model>,
}

impl OvaModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.predict_proba_row(x)[1]).collect()
    }
}

impl ProbabilityModel for OvaModel {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        normalized(self.scores(x))
    }
    fn kind(&self) -> &str {
        "ova"
    }
}

pub fn fit_ova(train: &Dataset, kind: ModelKind, hp: &Hyperparameters, seed: u64) -> Result<OvaModel> {
    check_multiclass(train)?;
    let tasks = decompose_ova(train);
    let models = fit_tasks(train, &tasks, kind, hp, seed, 0)?;
    Ok(OvaModel {
        n_classes: train.n_classes(),
        n_features: train.n_features(),
        models,
    })
}

fn check_multiclass(train: &Dataset) -> Result<()> {
    if train.n_classes() < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    train.check_classes_nonempty()
}

// ---------------------------------------------------------------------------
// Bagging with one-vs-one

/// Largest class; ties go to the lowest id.
pub fn majority_class(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Row masks of the two bagging subsets: every non-majority row plus one
/// half of the shuffled majority rows (the first half takes the odd row).
pub fn bagging_split(train: &Dataset, seed: u64) -> Result<(Vec<bool>, Vec<bool>)> {
    let majority = majority_class(&train.class_counts());
    let mut rows = train.rows_of_class(majority);
    if rows.len() < 2 {
        return Err(Error::ClassTooSmall {
            class: majority,
            count: rows.len(),
            needed: 2,
        });
    }
    rows.shuffle(&mut seed::derived_rng(seed, &[0xBA6]));
    let cut = rows.len().div_ceil(2);
    let base: Vec<bool> = train.labels.iter().map(|&y| y != majority).collect();
    let mut a = base.clone();
    let mut b = base;
    for &r in &rows[..cut] {
        a[r] = true;
    }
    for &r in &rows[cut..] {
        b[r] = true;
    }
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedOvoEnsemble {
    pub n_classes: usize,
    pub n_features: usize,
    pub majority_class: usize,
    pub model_kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    /// Training-set row indices of the majority-class half each bank saw.
    pub majority_halves: [Vec<usize>; 2],
    pub banks: [OvoBank; 2],
}

pub fn fit_bagged_ovo(
    train: &Dataset,
    kind: ModelKind,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<BaggedOvoEnsemble> {
    check_multiclass(train)?;
    hp.validate()?;
    let (mask_a, mask_b) = bagging_split(train, seed)?;
    let majority = majority_class(&train.class_counts());
    let mut banks = Vec::with_capacity(2);
    let mut halves = Vec::with_capacity(2);
    for (b, mask) in [mask_a, mask_b].into_iter().enumerate() {
        let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        halves.push(
            rows.iter()
                .copied()
                .filter(|&i| train.labels[i] == majority)
                .collect::<Vec<_>>(),
        );
        let subset = train.subset(&rows);
        let tasks = decompose_ovo(&subset);
        let models = fit_tasks(&subset, &tasks, kind, hp, seed, b)?;
        banks.push(OvoBank::new(train.n_classes(), train.n_features(), models)?);
    }
    let [h0, h1]: [Vec<usize>; 2] = halves.try_into().expect("two halves");
    let [b0, b1]: [OvoBank; 2] = banks.try_into().expect("two banks");
    Ok(BaggedOvoEnsemble {
        n_classes: train.n_classes(),
        n_features: train.n_features(),
        majority_class: majority,
        model_kind: kind,
        hyperparameters: hp.clone(),
        majority_halves: [h0, h1],
        banks: [b0, b1],
    })
}

impl BaggedOvoEnsemble {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let a = self.banks[0].scores(x);
        let b = self.banks[1].scores(x);
        a.into_iter().zip(b).map(|(p, q)| p + q).collect()
    }

    /// The binary subproblem `(a, b)`: the two banks' pair models averaged,
    /// with output order `[P(lower id), P(higher id)]`.
    pub fn pair_model(&self, a: usize, b: usize) -> Result<PairModel<'_>> {
        let (neg, pos) = (a.min(b), a.max(b));
        let t = self.banks[0]
            .pairs
            .iter()
            .position(|&p| p == (neg, pos))
            .ok_or_else(|| Error::Config(format!("no class pair ({a}, {b})")))?;
        Ok(PairModel {
            negative: neg,
            positive: pos,
            members: [&self.banks[0].models[t], &self.banks[1].models[t]],
        })
    }

    /// Member models, bank-major.
    pub fn members(&self) -> impl Iterator<Item = &Model> {
        self.banks.iter().flat_map(|b| b.models.iter())
    }

    /// Mean of the members' normalized impurity importances.
    pub fn gini_importance(&self) -> Result<Vec<f64>> {
        mean_gini(self.members())
    }

    pub fn save_bundle(&self, dir: impl AsRef<Path>) -> Result<String> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut members = Vec::new();
        for (b, bank) in self.banks.iter().enumerate() {
            for (&(neg, pos), model) in bank.pairs.iter().zip(&bank.models) {
                let file = format!("member_b{b}_{neg}v{pos}.json");
                let bytes = model.to_json()?.into_bytes();
                std::fs::write(dir.join(&file), &bytes).map_err(|e| Error::io(dir.join(&file), e))?;
                members.push(MemberRef {
                    bank: b,
                    negative: neg,
                    positive: pos,
                    file,
                    sha256: artifact::sha256_hex(&bytes),
                });
            }
        }
        let manifest = BundleManifest {
            format_version: BUNDLE_FORMAT_VERSION,
            n_classes: self.n_classes,
            n_features: self.n_features,
            majority_class: self.majority_class,
            model_kind: self.model_kind,
            hyperparameters: self.hyperparameters.clone(),
            majority_halves: self.majority_halves.clone(),
            members,
        };
        artifact::write_json(dir.join("manifest.json"), &manifest)
    }

    pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(Error::MissingModelBundle(dir.to_path_buf()));
        }
        let manifest: BundleManifest = artifact::read_json(&manifest_path)?;
        if manifest.format_version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Version {
                found: manifest.format_version,
                expected: BUNDLE_FORMAT_VERSION,
            });
        }
        let mut models: [Vec<Model>; 2] = [Vec::new(), Vec::new()];
        let pairs = ovo_pairs(manifest.n_classes);
        for m in &manifest.members {
            let path = dir.join(&m.file);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if artifact::sha256_hex(&bytes) != m.sha256 {
                return Err(Error::Checksum(path));
            }
            let expected = pairs.get(models[m.bank].len()).copied();
            if m.bank > 1 || expected != Some((m.negative, m.positive)) {
                return Err(Error::Config(format!("unexpected bundle member {}", m.file)));
            }
            let text = String::from_utf8_lossy(&bytes);
            models[m.bank].push(Model::from_json(&text)?);
        }
        let [m0, m1] = models;
        Ok(BaggedOvoEnsemble {
            n_classes: manifest.n_classes,
            n_features: manifest.n_features,
            majority_class: manifest.majority_class,
            model_kind: manifest.model_kind,
            hyperparameters: manifest.hyperparameters,
            majority_halves: manifest.majority_halves,
            banks: [
                OvoBank::new(manifest.n_classes, manifest.n_features, m0)?,
                OvoBank::new(manifest.n_classes, manifest.n_features, m1)?,
            ],
        })
    }
}

pub(crate) fn mean_gini<'a>(members: impl Iterator<Item = &'a Model>) -> Result<Vec<f64>> {
    let mut total: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for m in members {
        let imp = models::gini_importance(m)?;
        match &mut total {
            Some(t) => t.iter_mut().zip(&imp).for_each(|(a, b)| *a += b),
            None => total = Some(imp),
        }
        n += 1;
    }
    let mut total = total.ok_or(Error::Empty("ensemble members"))?;
    total.iter_mut().for_each(|v| *v /= n as f64);
    Ok(models::normalize(total))
}

/// Summed bank scores; argmax with ties to the lowest class id.
pub fn bagged_predict(ens: &BaggedOvoEnsemble, x: &[f64]) -> usize {
    argmax(&ens.scores(x))
}

/// Normalized summed scores (`score / sum(score)`), so the ensemble meets
/// the probability-row contract.
impl ProbabilityModel for BaggedOvoEnsemble {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        normalized(self.scores(x))
    }
    fn kind(&self) -> &str {
        "bagged_ovo"
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PairModel<'a> {
    pub negative: usize,
    pub positive: usize,
    pub members: [&'a Model; 2],
}

impl PairModel<'_> {
    pub fn gini_importance(&self) -> Result<Vec<f64>> {
        mean_gini(self.members.iter().copied())
    }
}

impl ProbabilityModel for PairModel<'_> {
    fn n_features(&self) -> usize {
        self.members[0].n_features()
    }
    fn n_classes(&self) -> usize {
        2
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let a = self.members[0].predict_proba_row(x);
        let b = self.members[1].predict_proba_row(x);
        vec![(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }
    fn kind(&self) -> &str {
        "ovo_pair"
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MemberRef {
    bank: usize,
    negative: usize,
    positive: usize,
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleManifest {
    format_version: u32,
    n_classes: usize,
    n_features: usize,
    majority_class: usize,
    model_kind: ModelKind,
    hyperparameters: Hyperparameters,
    majority_halves: [Vec<usize>; 2],
    members: Vec<MemberRef>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, FeatureKind, SynthConfig};
    use proptest::prelude::*;

    /// Constant two-class probabilities, for hand-set voting cases.
    struct Fixed(Vec<f64>);

    impl ProbabilityModel for Fixed {
        fn n_features(&self) -> usize {
            1
        }
        fn n_classes(&self) -> usize {
            self.0.len()
        }
        fn predict_proba_row(&self, _x: &[f64]) -> Vec<f64> {
            self.0.clone()
        }
    }

    fn fixed_bank(k: usize, probs: &[(f64, f64)]) -> OvoBank<Fixed> {
        OvoBank::new(k, 1, probs.iter().map(|&(a, b)| Fixed(vec![a, b])).collect()).unwrap()
    }

    fn labelled(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        Dataset::new(
            labels.iter().enumerate().map(|(i, _)| vec![i as f64]).collect(),
            labels,
            vec!["x".into()],
            vec![FeatureKind::Continuous],
            (0..counts.len()).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn ovo_task_layout() {
        let ds = labelled(&[2, 3, 2]);
        let tasks = decompose_ovo(&ds);
        let pairs: Vec<(usize, TaskNegative)> = tasks.iter().map(|t| (t.positive, t.negative)).collect();
        assert_eq!(
            pairs,
            vec![
                (1, TaskNegative::Class(0)),
                (2, TaskNegative::Class(0)),
                (2, TaskNegative::Class(1))
            ]
        );
        for t in &tasks {
            let TaskNegative::Class(neg) = t.negative else { unreachable!() };
            for (i, &m) in t.mask.iter().enumerate() {
                assert_eq!(m, ds.labels[i] == neg || ds.labels[i] == t.positive);
            }
        }
        assert_eq!(decompose_ovo(&labelled(&[2, 2])).len(), 1);
        assert_eq!(decompose_ovo(&labelled(&[2, 2, 2, 2])).len(), 6);
    }

    #[test]
    fn ova_views_keep_class_frequencies() {
        let ds = labelled(&[2, 5, 3]);
        let tasks = decompose_ova(&ds);
        assert_eq!(tasks.len(), 3);
        for t in &tasks {
            let view = t.view(&ds);
            assert_eq!(view.n_samples(), 10);
            assert_eq!(view.class_counts()[1], ds.class_counts()[t.positive]);
        }
        assert_eq!(decompose_ova(&labelled(&[3, 3])).len(), 2);
    }

    #[test]
    fn ovo_hand_summed_scores() {
        let bank = fixed_bank(3, &[(0.6, 0.4), (0.7, 0.3), (0.2, 0.8)]);
        let (class, scores) = ovo_predict(&bank, &[0.0]);
        let expected = [1.3, 0.6, 1.1];
        for (s, e) in scores.iter().zip(expected) {
            assert!((s - e).abs() < 1e-12);
        }
        assert_eq!(class, 0);

        // class 1 wins each of its pairs with 0.9
        let bank = fixed_bank(3, &[(0.1, 0.9), (0.5, 0.5), (0.9, 0.1)]);
        assert_eq!(ovo_predict(&bank, &[0.0]).0, 1);

        let bin = fixed_bank(2, &[(0.3, 0.7)]);
        assert_eq!(ovo_predict(&bin, &[0.0]).0, 1);
    }

    #[test]
    fn bagged_vote_sums_banks() {
        let a = [1.3, 0.6, 1.1];
        let b = [0.5, 1.6, 0.9];
        let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        assert_eq!(argmax(&sum), 1);
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
    }

    #[test]
    fn bagging_split_sizes_and_partition() {
        let ds = labelled(&[4, 10, 3]);
        let (a, b) = bagging_split(&ds, 1).unwrap();
        assert_eq!(a.iter().filter(|&&m| m).count(), 12);
        assert_eq!(b.iter().filter(|&&m| m).count(), 12);
        for i in 0..ds.n_samples() {
            if ds.labels[i] == 1 {
                assert!(a[i] ^ b[i]);
            } else {
                assert!(a[i] && b[i]);
            }
        }
        assert_eq!(majority_class(&[2, 2, 2]), 0);
        let odd = labelled(&[2, 7, 1]);
        let (a, b) = bagging_split(&odd, 0).unwrap();
        assert_eq!(a.iter().filter(|&&m| m).count(), 7);
        assert_eq!(b.iter().filter(|&&m| m).count(), 6);
    }

    fn synth(seed: u64) -> Dataset {
        synthesize(&SynthConfig {
            class_counts: vec![40, 80, 30],
            d_continuous: 4,
            d_genotype: 2,
            informative_features: vec![0, 1, 4],
            seed,
            ..Default::default()
        })
        .unwrap()
        .dataset
    }

    fn quick() -> Hyperparameters {
        Hyperparameters {
            n_trees: 10,
            max_depth: 4,
            ..Default::default()
        }
    }

    #[test]
    fn bagged_ensemble_structure() {
        let ds = synth(1);
        let ens = fit_bagged_ovo(&ds, ModelKind::RandomForest, &quick(), 5).unwrap();
        assert_eq!(ens.members().count(), 6);
        assert_eq!(ens.majority_class, 1);
        let mut all: Vec<usize> = ens.majority_halves.concat();
        all.sort_unstable();
        assert_eq!(all, ds.rows_of_class(1));
        assert!(ens.majority_halves[0].iter().all(|r| !ens.majority_halves[1].contains(r)));
        let again = fit_bagged_ovo(&ds, ModelKind::RandomForest, &quick(), 5).unwrap();
        assert_eq!(ens, again);
        for row in &ds.features {
            let p = ens.predict_proba_row(row);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert_eq!(argmax(&p), bagged_predict(&ens, row));
        }
        let pair = ens.pair_model(2, 1).unwrap();
        assert_eq!((pair.negative, pair.positive), (1, 2));
        let imp = ens.gini_importance().unwrap();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn banks_agree_on_balanced_data() {
        let mut agree = 0;
        let mut total = 0;
        for s in 0..3 {
            let ds = synthesize(&SynthConfig {
                class_counts: vec![150, 150, 150],
                d_continuous: 4,
                d_genotype: 1,
                informative_features: vec![0, 1, 2],
                separation: 3.0,
                seed: s,
                ..Default::default()
            })
            .unwrap()
            .dataset;
            let (train, test) = crate::dataset::stratified_split(&ds, 0.3, s).unwrap();
            let ens = fit_bagged_ovo(&train, ModelKind::RandomForest, &quick(), s).unwrap();
            for row in &test.features {
                agree += (ovo_predict(&ens.banks[0], row).0 == ovo_predict(&ens.banks[1], row).0) as usize;
                total += 1;
            }
        }
        assert!(agree as f64 / total as f64 >= 0.9, "{agree}/{total}");
    }

    #[test]
    fn bundle_round_trip_and_checksum() {
        let ds = synth(2);
        let ens = fit_bagged_ovo(&ds, ModelKind::GradientBoosting, &Hyperparameters {
            n_rounds: 5,
            ..quick()
        }, 1)
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        ens.save_bundle(dir.path()).unwrap();
        let back = BaggedOvoEnsemble::load_bundle(dir.path()).unwrap();
        assert_eq!(back, ens);

        let member = dir.path().join("member_b0_0v1.json");
        let text = std::fs::read_to_string(&member).unwrap();
        std::fs::write(&member, text.replace("\"learning_rate\"", " \"learning_rate\"")).unwrap();
        assert!(matches!(
            BaggedOvoEnsemble::load_bundle(dir.path()),
            Err(Error::Checksum(_))
        ));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            BaggedOvoEnsemble::load_bundle(empty.path()),
            Err(Error::MissingModelBundle(_))
        ));
    }

    #[test]
    fn fit_errors_carry_task_context() {
        let ds = synth(3);
        let hp = Hyperparameters {
            learning_rate: 2.0,
            ..quick()
        };
        assert!(fit_bagged_ovo(&ds, ModelKind::GradientBoosting, &hp, 0).is_err());
        let err = fit_tasks(&ds, &decompose_ovo(&ds), ModelKind::Tree, &hp, 0, 1).unwrap_err();
        assert!(matches!(err, Error::TaskFit { bank: 1, positive: 1, .. }));
    }

    proptest! {
        #[test]
        fn ovo_is_equivariant_under_relabeling(
            probs in proptest::collection::vec(0.0f64..1.0, 6),
            perm_idx in 0usize..24,
        ) {
            let k = 4;
            let mut perms = Vec::new();
            permutations(&mut (0..k).collect::<Vec<_>>(), 0, &mut perms);
            let perm = &perms[perm_idx];
            // original bank
            let pairs = ovo_pairs(k);
            let bank = fixed_bank(k, &probs.iter().map(|&p| (1.0 - p, p)).collect::<Vec<_>>());
            // relabeled: class c becomes perm[c]
            let relabeled: Vec<(f64, f64)> = ovo_pairs(k)
                .iter()
                .map(|&(a, b)| {
                    let t = pairs.iter().position(|&(x, y)| {
                        (perm[x], perm[y]) == (a, b) || (perm[x], perm[y]) == (b, a)
                    }).unwrap();
                    let (x, _) = pairs[t];
                    let p_pos = probs[t];
                    // probability for new class a (lower id)
                    let p_a = if perm[x] == a { 1.0 - p_pos } else { p_pos };
                    (p_a, 1.0 - p_a)
                })
                .collect();
            let bank2 = fixed_bank(k, &relabeled);
            let (c1, s1) = ovo_predict(&bank, &[0.0]);
            let (c2, s2) = ovo_predict(&bank2, &[0.0]);
            for c in 0..k {
                prop_assert!((s1[c] - s2[perm[c]]).abs() < 1e-12);
            }
            prop_assert_eq!(perm[c1], c2);
        }

        #[test]
        fn bagging_split_partitions_majority(seed in 0u64..10_000, n_major in 2usize..40) {
            let ds = labelled(&[3, n_major, 2]);
            let (a, b) = bagging_split(&ds, seed).unwrap();
            let majority = majority_class(&ds.class_counts());
            for i in 0..ds.n_samples() {
                if ds.labels[i] == majority {
                    prop_assert!(a[i] ^ b[i]);
                } else {
                    prop_assert!(a[i] && b[i]);
                }
            }
        }
    }

    fn permutations(v: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
        if i == v.len() {
            out.push(v.clone());
            return;
        }
        for j in i..v.len() {
            v.swap(i, j);
            permutations(v, i + 1, out);
            v.swap(i, j);
        }
    }
}
