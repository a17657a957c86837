//! Fit the bagged one-vs-one ensemble and compare it with plain one-vs-one
//! and one-vs-all decompositions on a held-out split.

use unixplain::dataset::{stratified_split, synthesize, SynthConfig};
use unixplain::ensemble::fit_bagged_ovo;
use unixplain::evaluation::split_scores;
use unixplain::models::{Hyperparameters, ModelKind, ProbabilityModel};

fn main() -> unixplain::Result<()> {
    let ds = synthesize(&SynthConfig::default())?.dataset;
    let (train, test) = stratified_split(&ds, 0.2, 1)?;
    let hp = Hyperparameters { n_trees: 50, ..Default::default() };

    let ens = fit_bagged_ovo(&train, ModelKind::RandomForest, &hp, 2)?;
    println!("majority class {} split into halves of {} and {} rows", ens.majority_class, ens.majority_halves[0].len(), ens.majority_halves[1].len());
    println!("scores for the first test row: {:?}", ens.scores(&test.features[0]));
    println!("prediction {} (label {})", ens.predict_class(&test.features[0]), test.labels[0]);

    let s = split_scores(&train, &test, ModelKind::RandomForest, &hp, 2)?;
    for (name, m) in [("one-vs-all", s.one_vs_all), ("one-vs-one", s.one_vs_one), ("bagged one-vs-one", s.bagging)] {
        println!("{name:>18}: balanced accuracy {:.4}, weighted F1 {:.4}", m.balanced_accuracy, m.weighted_f1);
    }
    Ok(())
}
