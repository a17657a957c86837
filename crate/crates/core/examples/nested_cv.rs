//! Nested cross-validation for two classifiers and a paired t-test on their
//! per-fold balanced accuracies.

use unixplain::dataset::{synthesize, SynthConfig};
use unixplain::evaluation::{nested_cv, paired_t_test, Metric};
use unixplain::models::{Hyperparameters, ModelKind};

fn main() -> unixplain::Result<()> {
    let ds = synthesize(&SynthConfig { class_counts: vec![150, 250, 90], separation: 1.0, ..Default::default() })?.dataset;
    let forest_grid = vec![
        Hyperparameters { n_trees: 30, max_depth: 4, ..Default::default() },
        Hyperparameters { n_trees: 30, max_depth: 8, ..Default::default() },
    ];
    let logistic_grid = vec![
        Hyperparameters { l2: 1e-3, ..Default::default() },
        Hyperparameters { l2: 1e-1, ..Default::default() },
    ];
    let forest = nested_cv(&ds, ModelKind::RandomForest, &forest_grid, 5, 3, 11)?;
    let logistic = nested_cv(&ds, ModelKind::Logistic, &logistic_grid, 5, 3, 11)?;
    for cv in [&forest, &logistic] {
        println!(
            "{:>14}: balanced accuracy {:.4} +/- {:.4}, weighted F1 {:.4}",
            cv.model_kind.as_str(),
            cv.balanced_accuracy.mean,
            cv.balanced_accuracy.std,
            cv.weighted_f1.mean
        );
        for f in &cv.folds {
            println!("    fold {} picked grid entry {} -> {:.4}", f.fold, f.grid_index, f.balanced_accuracy);
        }
    }
    let t = paired_t_test(
        &forest.fold_values(Metric::BalancedAccuracy),
        &logistic.fold_values(Metric::BalancedAccuracy),
    )?;
    println!("paired t-test: t = {:.4}, p = {:.4}", t.t, t.p);
    Ok(())
}
