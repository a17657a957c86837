//! Kernel SHAP against exact Shapley values for one instance, then a global
//! ranking by mean absolute SHAP value.

use unixplain::attribution::{background_sample, exact_shapley, global_shap_ranking, kernel_shap};
use unixplain::dataset::{stratified_split, synthesize, SynthConfig};
use unixplain::models::{fit, Hyperparameters, ModelKind};

fn main() -> unixplain::Result<()> {
    let cfg = SynthConfig { class_counts: vec![120, 120], d_continuous: 6, d_genotype: 2, informative_features: vec![0, 1, 6], ..Default::default() };
    let ds = synthesize(&cfg)?.dataset;
    let (train, test) = stratified_split(&ds, 0.25, 0)?;
    let model = fit(ModelKind::RandomForest, &train, &Hyperparameters { n_trees: 40, ..Default::default() }, 0)?;
    let bg = background_sample(&train, 50, 1);

    let x = &test.features[0];
    let exact = exact_shapley(&model, x, &bg, 1)?;
    let approx = kernel_shap(&model, x, &bg, 1, 100, 2)?;
    println!("{:>8} {:>10} {:>10}", "feature", "exact", "kernel");
    for j in 0..ds.n_features() {
        println!("{:>8} {:>10.5} {:>10.5}", ds.feature_names[j], exact.values[j], approx.values[j]);
    }
    println!("base value {:.4}", exact.base_value.unwrap_or_default());

    let (global, _) = global_shap_ranking(&model, &test, &bg, 1, 256, 3)?;
    let names: Vec<&str> = global.ranking.iter().map(|&j| ds.feature_names[j].as_str()).collect();
    println!("global ranking: {names:?}");
    Ok(())
}
