//! Metrics, nested cross-validation with grid search, and the paired t-test
//! used to compare classifiers fold by fold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{stratified_kfold, Dataset};
use crate::ensemble::{fit_bagged_ovo, fit_ova, fit_ovo};
use crate::error::{Error, Result};
use crate::models::{Hyperparameters, ModelKind, ProbabilityModel};
use crate::seed;

fn check_pair(y_true: &[usize], y_pred: &[usize]) -> Result<usize> {
    if y_true.is_empty() {
        return Err(Error::Empty("label vector"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    Ok(y_true.iter().chain(y_pred).max().map_or(0, |m| m + 1))
}

/// `matrix[true][pred]` counts.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    m
}

/// Unweighted mean of per-class recall over classes present in `y_true`.
pub fn balanced_accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let k = check_pair(y_true, y_pred)?;
    let cm = confusion_matrix(y_true, y_pred, k);
    let recalls: Vec<f64> = (0..k)
        .filter_map(|c| {
            let support: usize = cm[c].iter().sum();
            (support > 0).then(|| cm[c][c] as f64 / support as f64)
        })
        .collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Support-weighted mean of per-class F1. A class with no true positives
/// (including zero-division cases) scores F1 = 0.
pub fn weighted_f1(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    let k = check_pair(y_true, y_pred)?;
    let cm = confusion_matrix(y_true, y_pred, k);
    let n = y_true.len() as f64;
    let mut total = 0.0;
    for c in 0..k {
        let tp = cm[c][c] as f64;
        let support: usize = cm[c].iter().sum();
        let predicted: usize = cm.iter().map(|row| row[c]).sum();
        if support == 0 || tp == 0.0 {
            continue;
        }
        let precision = tp / predicted as f64;
        let recall = tp / support as f64;
        total += 2.0 * precision * recall / (precision + recall) * support as f64;
    }
    Ok(total / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub balanced_accuracy: f64,
    pub weighted_f1: f64,
}

pub fn score<M: ProbabilityModel + ?Sized>(model: &M, test: &Dataset) -> Result<Metrics> {
    let pred = model.predict(&test.features);
    Ok(Metrics {
        balanced_accuracy: balanced_accuracy(&test.labels, &pred)?,
        weighted_f1: weighted_f1(&test.labels, &pred)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation over outer folds.
    pub std: f64,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> MetricStats {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        MetricStats { mean, max, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub hyperparameters: Hyperparameters,
    /// Index into the grid of the chosen entry.
    pub grid_index: usize,
    /// Mean inner balanced accuracy of every grid entry.
    pub inner_scores: Vec<f64>,
    pub balanced_accuracy: f64,
    pub weighted_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    /// Rows (of the input dataset) held out as this fold's test set.
    pub outer_test_indices: Vec<usize>,
    /// Rows the inner grid search was allowed to see.
    pub selection_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub model_kind: ModelKind,
    pub outer_k: usize,
    pub inner_k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub balanced_accuracy: MetricStats,
    pub weighted_f1: MetricStats,
}

impl CvSummary {
    pub fn fold_values(&self, metric: Metric) -> Vec<f64> {
        self.folds
            .iter()
            .map(|f| match metric {
                Metric::BalancedAccuracy => f.balanced_accuracy,
                Metric::WeightedF1 => f.weighted_f1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BalancedAccuracy,
    WeightedF1,
}

/// Mean inner-CV balanced accuracy of one configuration of the bagged
/// one-vs-one ensemble.
fn inner_score(
    ds: &Dataset,
    folds: &[Vec<usize>],
    kind: ModelKind,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<f64> {
    let scores: Vec<f64> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let train_idx = complement(ds.n_samples(), test_idx);
            let ens = fit_bagged_ovo(&ds.subset(&train_idx), kind, hp, seed::derive(seed, &[f as u64]))?;
            let test = ds.subset(test_idx);
            balanced_accuracy(&test.labels, &ens.predict(&test.features))
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

fn complement(n: usize, sorted: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted.len());
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Stratified `outer_k` x `inner_k` nested cross-validation of the bagged
/// one-vs-one ensemble. For each outer fold the grid entry with the best
/// mean inner balanced accuracy (first entry on ties) is refit on the full
/// outer-train part and scored on the outer-test part.
pub fn nested_cv(
    ds: &Dataset,
    kind: ModelKind,
    grid: &[Hyperparameters],
    outer_k: usize,
    inner_k: usize,
    seed: u64,
) -> Result<CvSummary> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    for hp in grid {
        hp.validate()?;
    }
    let outer = stratified_kfold(&ds.labels, ds.n_classes(), outer_k, seed::derive(seed, &[0]))?;
    let folds: Vec<FoldReport> = outer
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let train_idx = complement(ds.n_samples(), test_idx);
            let outer_train = ds.subset(&train_idx);
            let fold_seed = seed::derive(seed, &[1, f as u64]);
            let inner = stratified_kfold(
                &outer_train.labels,
                outer_train.n_classes(),
                inner_k,
                seed::derive(fold_seed, &[0]),
            )?;
            let inner_scores: Vec<f64> = grid
                .par_iter()
                .enumerate()
                .map(|(g, hp)| inner_score(&outer_train, &inner, kind, hp, seed::derive(fold_seed, &[1, g as u64])))
                .collect::<Result<_>>()?;
            let mut best = 0;
            for (g, &s) in inner_scores.iter().enumerate() {
                if s > inner_scores[best] {
                    best = g;
                }
            }
            let ens = fit_bagged_ovo(&outer_train, kind, &grid[best], seed::derive(fold_seed, &[2]))?;
            let test = ds.subset(test_idx);
            let pred = ens.predict(&test.features);
            Ok(FoldReport {
                fold: f,
                hyperparameters: grid[best].clone(),
                grid_index: best,
                inner_scores,
                balanced_accuracy: balanced_accuracy(&test.labels, &pred)?,
                weighted_f1: weighted_f1(&test.labels, &pred)?,
                confusion: confusion_matrix(&test.labels, &pred, ds.n_classes()),
                outer_test_indices: test_idx.clone(),
                selection_indices: train_idx,
            })
        })
        .collect::<Result<_>>()?;

    let ba: Vec<f64> = folds.iter().map(|f| f.balanced_accuracy).collect();
    let f1: Vec<f64> = folds.iter().map(|f| f.weighted_f1).collect();
    Ok(CvSummary {
        model_kind: kind,
        outer_k,
        inner_k,
        seed,
        balanced_accuracy: MetricStats::from_values(&ba),
        weighted_f1: MetricStats::from_values(&f1),
        folds,
    })
}

/// Single train/test-split scores of the three decomposition schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub one_vs_all: Metrics,
    pub one_vs_one: Metrics,
    pub bagging: Metrics,
}

pub fn split_scores(
    train: &Dataset,
    test: &Dataset,
    kind: ModelKind,
    hp: &Hyperparameters,
    seed: u64,
) -> Result<SplitScores> {
    let ova = fit_ova(train, kind, hp, seed::derive(seed, &[0]))?;
    let ovo = fit_ovo(train, kind, hp, seed::derive(seed, &[1]))?;
    let bag = fit_bagged_ovo(train, kind, hp, seed::derive(seed, &[2]))?;
    Ok(SplitScores {
        one_vs_all: score(&ova, test)?,
        one_vs_one: score(&ovo, test)?,
        bagging: score(&bag, test)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
}

/// Two-sided paired t-test on `a - b`. All-zero differences give `t = 0,
/// p = 1`; constant non-zero differences give `t = ±inf, p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Config("paired t-test needs at least two pairs".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0 }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                p: 0.0,
            }
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest { t, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthConfig};

    #[test]
    fn worked_example_metrics() {
        let t = [0, 0, 1, 1, 2, 2];
        let p = [0, 1, 1, 1, 2, 0];
        assert!((balanced_accuracy(&t, &p).unwrap() - 0.6667).abs() < 1e-4);
        assert!((weighted_f1(&t, &p).unwrap() - 0.6556).abs() < 1e-4);
        assert_eq!(balanced_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(weighted_f1(&t, &t).unwrap(), 1.0);
        assert!((balanced_accuracy(&t, &[1; 6]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(weighted_f1(&[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap(), 0.0);
        assert!(balanced_accuracy(&[], &[]).is_err());
        assert!(weighted_f1(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn absent_classes_are_skipped() {
        // class 2 never occurs in y_true
        let ba = balanced_accuracy(&[0, 0, 1, 1], &[0, 2, 1, 1]).unwrap();
        assert!((ba - 0.75).abs() < 1e-12);
    }

    #[test]
    fn t_test_reference_values() {
        // scipy.stats.ttest_rel on these differences: t = 1.772810520855837,
        // p = 0.15094405366901748.
        let d = [0.5, -0.2, 0.3, 0.1, 0.4];
        let r = paired_t_test(&d, &[0.0; 5]).unwrap();
        assert!((r.t - 1.772_810_520_855_837).abs() < 1e-9);
        assert!((r.p - 0.150_944_053_669_017_48).abs() < 1e-8);
        let a = [0.81, 0.85, 0.79, 0.88, 0.83];
        let b = [0.78, 0.86, 0.75, 0.84, 0.80];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 2.803_652_103_289_397_5).abs() < 1e-9);
        assert!((r.p - 0.048_630_233_857_306_28).abs() < 1e-8);
    }

    #[test]
    fn t_test_conventions() {
        let x = [0.3, 0.4, 0.5];
        assert_eq!(paired_t_test(&x, &x).unwrap(), TTest { t: 0.0, p: 1.0 });
        let r = paired_t_test(&[2.0; 5], &[1.0; 5]).unwrap();
        assert_eq!(r.t, f64::INFINITY);
        assert_eq!(r.p, 0.0);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }

    fn small(seed: u64, informative: Vec<usize>) -> Dataset {
        synthesize(&SynthConfig {
            class_counts: vec![30, 50, 25],
            d_continuous: 4,
            d_genotype: 1,
            informative_features: informative,
            separation: 3.0,
            seed,
            ..Default::default()
        })
        .unwrap()
        .dataset
    }

    fn quick() -> Hyperparameters {
        Hyperparameters {
            n_trees: 8,
            max_depth: 3,
            ..Default::default()
        }
    }

    #[test]
    fn nested_cv_is_deterministic_and_audited() {
        let ds = small(1, vec![0, 1]);
        let grid = vec![
            quick(),
            Hyperparameters {
                max_depth: 1,
                ..quick()
            },
        ];
        let a = nested_cv(&ds, ModelKind::RandomForest, &grid, 5, 4, 9).unwrap();
        let b = nested_cv(&ds, ModelKind::RandomForest, &grid, 5, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds.len(), 5);
        let mut seen: Vec<usize> = Vec::new();
        for f in &a.folds {
            assert!(f.outer_test_indices.iter().all(|i| !f.selection_indices.contains(i)));
            assert_eq!(f.outer_test_indices.len() + f.selection_indices.len(), ds.n_samples());
            let row_sums: Vec<usize> = f.confusion.iter().map(|r| r.iter().sum()).collect();
            let test = ds.subset(&f.outer_test_indices);
            assert_eq!(row_sums, test.class_counts());
            assert!((0.0..=1.0).contains(&f.balanced_accuracy));
            seen.extend(&f.outer_test_indices);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..ds.n_samples()).collect::<Vec<_>>());
        assert!(a.balanced_accuracy.mean <= a.balanced_accuracy.max);
        assert!(a.balanced_accuracy.std >= 0.0);
    }

    #[test]
    fn single_entry_grid_is_plain_cv() {
        let ds = small(2, vec![0]);
        let s = nested_cv(&ds, ModelKind::Tree, &[quick()], 5, 4, 3).unwrap();
        assert!(s.folds.iter().all(|f| f.grid_index == 0 && f.inner_scores.len() == 1));
    }

    #[test]
    fn noise_only_data_is_near_chance() {
        let mut means = Vec::new();
        for s in 0..5 {
            let ds = small(100 + s, vec![]);
            let cv = nested_cv(&ds, ModelKind::RandomForest, &[quick()], 5, 4, s).unwrap();
            means.push(cv.balanced_accuracy.mean);
        }
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        assert!((avg - 1.0 / 3.0).abs() <= 0.1, "{means:?}");
    }

    #[test]
    fn nested_cv_rejects_tiny_classes() {
        let ds = synthesize(&SynthConfig {
            class_counts: vec![3, 10, 10],
            ..Default::default()
        })
        .unwrap()
        .dataset;
        assert!(matches!(
            nested_cv(&ds, ModelKind::Tree, &[quick()], 5, 4, 0),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn split_scores_cover_three_schemes() {
        let ds = small(4, vec![0, 1, 2]);
        let (train, test) = crate::dataset::stratified_split(&ds, 0.2, 0).unwrap();
        let s = split_scores(&train, &test, ModelKind::GradientBoosting, &Hyperparameters {
            n_rounds: 20,
            max_depth: 2,
            ..Default::default()
        }, 0)
        .unwrap();
        for m in [s.one_vs_all, s.one_vs_one, s.bagging] {
            assert!(m.balanced_accuracy > 0.6, "{s:?}");
        }
    }
}
