//! Counterfactuals from the genetic search, the diversity-aware set search and
//! exhaustive enumeration, plus a frequency ranking over a test set.

use unixplain::counterfactual::{cf_frequency_ranking, CfConstraints, CfGenerator, CfTarget, DiceConfig, GaConfig};
use unixplain::dataset::{stratified_split, synthesize, SynthConfig};
use unixplain::models::{fit, Hyperparameters, ModelKind};

fn main() -> unixplain::Result<()> {
    let cfg = SynthConfig { class_counts: vec![80, 80], d_continuous: 4, d_genotype: 1, informative_features: vec![0, 1], ..Default::default() };
    let ds = synthesize(&cfg)?.dataset;
    let (train, test) = stratified_split(&ds, 0.25, 0)?;
    let model = fit(ModelKind::RandomForest, &train, &Hyperparameters { n_trees: 20, max_depth: 4, ..Default::default() }, 0)?;
    let cons = CfConstraints::from_train(&train, vec![true; train.n_features()], CfTarget::Flip)?;

    let x = &test.features[0];
    let generators = [
        CfGenerator::PermuteAttack(GaConfig::default()),
        CfGenerator::Dice(DiceConfig::default()),
        CfGenerator::Exhaustive { max_candidates: 2_000_000 },
    ];
    // Enumeration is only tractable over a couple of features.
    let narrow = CfConstraints::only(&train, &[0, 1], CfTarget::Flip)?;
    for g in &generators {
        let c = if matches!(g, CfGenerator::Exhaustive { .. }) { &narrow } else { &cons };
        let cfs = g.generate(&model, x, c, 3, 9)?;
        println!("{}: {} counterfactuals", g.name(), cfs.len());
        for cf in cfs {
            println!("    class {} -> {}, changed {:?}, l1 {:.3}", cf.original_class, cf.cf_class, cf.changed, cf.l1_distance);
        }
    }

    let ranking = cf_frequency_ranking(&model, &test, &cons, &generators[0], 5)?;
    println!("frequency ranking over {} instances ({} skipped):", ranking.instances, ranking.skipped.len());
    for e in &ranking.entries {
        println!("    {:>6}: changed {} times, direction {:+}", e.feature_name, e.count, e.direction);
    }
    Ok(())
}
