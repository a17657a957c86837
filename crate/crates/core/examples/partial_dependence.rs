//! Partial dependence curves for an informative and an uninformative
//! feature, written as SVG line charts.

use unixplain::attribution::{partial_dependence, PdpGrid};
use unixplain::dataset::{synthesize, SynthConfig};
use unixplain::models::{fit, Hyperparameters, ModelKind};
use unixplain::plot::line_chart;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig { class_counts: vec![100, 100, 100], d_continuous: 5, d_genotype: 1, informative_features: vec![0, 5], ..Default::default() };
    let ds = synthesize(&cfg)?.dataset;
    let model = fit(ModelKind::GradientBoosting, &ds, &Hyperparameters::default(), 0)?;
    let out = std::env::temp_dir().join("unixplain_pdp");
    std::fs::create_dir_all(&out)?;
    for feature in [0, 3, 5] {
        let curve = partial_dependence(&model, &ds, feature, &PdpGrid::default(), 2)?;
        let (lo, hi) = curve.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
        println!("{}: {} grid points, range {:.3}..{:.3}", curve.feature_name, curve.points.len(), lo, hi);
        let svg = line_chart(&format!("PD of {}", curve.feature_name), &curve.feature_name, "P(class 2)", &curve.points);
        let path = out.join(format!("pdp_{feature}.svg"));
        std::fs::write(&path, svg)?;
    }
    println!("charts in {}", out.display());
    Ok(())
}
