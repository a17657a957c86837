//! Necessity and sufficiency of the top SHAP features of a bagged ensemble's
//! class pair, summarized per counterfactual generator.

use unixplain::attribution::{background_sample, global_shap_ranking};
use unixplain::causality::{unified_report, UnifiedConfig};
use unixplain::counterfactual::{CfGenerator, DiceConfig, GaConfig};
use unixplain::dataset::{stratified_split, synthesize, SynthConfig};
use unixplain::ensemble::fit_bagged_ovo;
use unixplain::models::{Hyperparameters, ModelKind};

fn main() -> unixplain::Result<()> {
    let cfg = SynthConfig { class_counts: vec![80, 130, 50], d_continuous: 6, d_genotype: 2, informative_features: vec![0, 1, 6], ..Default::default() };
    let ds = synthesize(&cfg)?.dataset;
    let (train, test) = stratified_split(&ds, 0.25, 0)?;
    let ens = fit_bagged_ovo(&train, ModelKind::RandomForest, &Hyperparameters { n_trees: 20, ..Default::default() }, 0)?;
    let pair = ens.pair_model(1, 2)?;
    let rows: Vec<usize> = (0..test.n_samples()).filter(|&i| test.labels[i] >= 1).collect();
    let test = test.subset(&rows);

    let bg = background_sample(&train, 40, 1);
    let (shap, _) = global_shap_ranking(&pair, &test, &bg, 1, 128, 2)?;
    let ga = GaConfig { generations: 40, ..Default::default() };
    let cfg = UnifiedConfig {
        top_k: 3,
        generators: vec![CfGenerator::PermuteAttack(ga.clone()), CfGenerator::Dice(DiceConfig { ga, ..Default::default() })],
        max_contexts: Some(10),
        ..Default::default()
    };
    let report = unified_report(&pair, &test, &train, &shap.ranking, &cfg, 3)?;
    println!("{} contexts, nCF values {:?}", report.contexts.len(), report.n_cf_values);
    for row in report.rows() {
        println!("{:>15} {:?} {:?}: {:.3}", row.generator, row.measure, row.query, row.value);
    }
    Ok(())
}
