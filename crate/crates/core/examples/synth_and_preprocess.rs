//! Generate a synthetic cohort, standardize it against the control class and
//! split it into stratified train and test sets.

use unixplain::dataset::{standardize, stratified_split, synthesize, SynthConfig};

fn main() -> unixplain::Result<()> {
    let data = synthesize(&SynthConfig::default())?;
    let ds = &data.dataset;
    println!(
        "{} samples, {} features, classes {:?} with counts {:?}",
        ds.n_samples(),
        ds.n_features(),
        ds.class_names,
        ds.class_counts()
    );
    println!("informative features: {:?}", data.truth.informative_features);

    let scaled = standardize(ds, 0)?;
    let controls = scaled.rows_of_class(0);
    let mean0: f64 = controls.iter().map(|&i| scaled.features[i][0]).sum::<f64>() / controls.len() as f64;
    println!("feature 0 mean within the reference class after scaling: {mean0:.2e}");

    let (train, test) = stratified_split(&scaled, 0.2, 7)?;
    println!("train counts {:?}, test counts {:?}", train.class_counts(), test.class_counts());
    Ok(())
}
