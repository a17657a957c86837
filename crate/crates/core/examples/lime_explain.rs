//! Local surrogate explanation for a logistic model.

use unixplain::attribution::{lime_explain, LimeConfig};
use unixplain::dataset::{synthesize, SynthConfig};
use unixplain::models::{fit, Hyperparameters, ModelKind};

fn main() -> unixplain::Result<()> {
    let cfg = SynthConfig { class_counts: vec![150, 150], d_continuous: 8, d_genotype: 2, informative_features: vec![0, 3, 8], ..Default::default() };
    let ds = synthesize(&cfg)?.dataset;
    let model = fit(ModelKind::Logistic, &ds, &Hyperparameters::default(), 0)?;
    let ex = lime_explain(&model, &ds.features[5], &ds, 1, &LimeConfig { n_top: 5, ..Default::default() }, 4)?;
    println!("kernel width {:.3}, intercept {:.4}", ex.kernel_width, ex.intercept);
    for (j, w) in &ex.top {
        println!("{:>6}: {w:+.5}", ds.feature_names[*j]);
    }
    for w in &ex.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
