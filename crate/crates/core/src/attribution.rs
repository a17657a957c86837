//! Feature attribution: exact Shapley values, Kernel SHAP, LIME and partial
//! dependence. All explainers only need [`ProbabilityModel`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, GENOTYPE_LEVELS};
use crate::error::{Error, Result};
use crate::models::ProbabilityModel;
use crate::seed;

pub const EXACT_SHAPLEY_MAX_FEATURES: usize = 15;
const KERNEL_SHAP_MAX_FEATURES: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    ExactShapley,
    KernelShap,
    Lime,
    Gini,
    CfFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scope")]
pub enum Scope {
    Local { instance: Option<usize> },
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub method: AttributionMethod,
    pub scope: Scope,
    pub values: Vec<f64>,
    pub base_value: Option<f64>,
    /// Feature indices by descending `|value|`, lower index first on ties.
    pub ranking: Vec<usize>,
}

/// Indices sorted by descending absolute value, ties to the lower index.
pub fn rank_by_magnitude(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

impl Attribution {
    pub fn local(method: AttributionMethod, values: Vec<f64>, base_value: Option<f64>) -> Self {
        Attribution {
            method,
            scope: Scope::Local { instance: None },
            ranking: rank_by_magnitude(&values),
            values,
            base_value,
        }
    }

    pub fn global(method: AttributionMethod, values: Vec<f64>) -> Self {
        Attribution {
            method,
            scope: Scope::Global,
            ranking: rank_by_magnitude(&values),
            values,
            base_value: None,
        }
    }

    pub fn with_instance(mut self, instance: usize) -> Self {
        self.scope = Scope::Local {
            instance: Some(instance),
        };
        self
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}

fn check_inputs<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Dataset,
    target_class: usize,
) -> Result<()> {
    if background.is_empty() {
        return Err(Error::Empty("background set"));
    }
    if x.len() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: x.len(),
        });
    }
    if background.n_features() != model.n_features() {
        return Err(Error::Dimension {
            expected: model.n_features(),
            got: background.n_features(),
        });
    }
    if target_class >= model.n_classes() {
        return Err(Error::UnknownLabel(format!("class id {target_class}")));
    }
    Ok(())
}

/// Coalition value: mean target probability over background rows with the
/// features in `mask` set to `x`'s values.
fn coalition_value<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Dataset,
    target_class: usize,
    mask: u64,
) -> f64 {
    let mut row = vec![0.0; x.len()];
    let mut total = 0.0;
    for b in &background.features {
        for j in 0..x.len() {
            row[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
        }
        total += model.predict_proba_row(&row)[target_class];
    }
    total / background.n_samples() as f64
}

/// Random subsample of up to `max_rows` rows, in original order.
pub fn background_sample(ds: &Dataset, max_rows: usize, seed: u64) -> Dataset {
    if ds.n_samples() <= max_rows {
        return ds.clone();
    }
    let mut rng = seed::rng(seed);
    let mut idx = sample_indices(&mut rng, ds.n_samples(), max_rows).into_vec();
    idx.sort_unstable();
    ds.subset(&idx)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Shapley values by enumerating all `2^d` coalitions.
pub fn exact_shapley<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Dataset,
    target_class: usize,
) -> Result<Attribution> {
    check_inputs(model, x, background, target_class)?;
    let d = x.len();
    if d > EXACT_SHAPLEY_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            features: d,
            limit: EXACT_SHAPLEY_MAX_FEATURES,
        });
    }
    let v: Vec<f64> = (0..1u64 << d)
        .into_par_iter()
        .map(|mask| coalition_value(model, x, background, target_class, mask))
        .collect();
    let weight: Vec<f64> = (0..d)
        .map(|s| (ln_factorial(s) + ln_factorial(d - s - 1) - ln_factorial(d)).exp())
        .collect();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..1u64 << d {
            if mask >> i & 1 == 0 {
                *p += weight[mask.count_ones() as usize] * (v[(mask | 1 << i) as usize] - v[mask as usize]);
            }
        }
    }
    Ok(Attribution::local(AttributionMethod::ExactShapley, phi, Some(v[0])))
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

fn kernel_weight(d: usize, s: usize) -> f64 {
    (d as f64 - 1.0) / (binomial(d, s) * s as f64 * (d - s) as f64)
}

/// All `s`-subsets of `d` features as bitmasks, in increasing order.
fn subsets_of_size(d: usize, s: usize) -> Vec<u64> {
    if s == 0 {
        return vec![0];
    }
    let limit = 1u128 << d;
    let mut out = Vec::new();
    let mut m: u128 = (1u128 << s) - 1;
    while m < limit {
        out.push(m as u64);
        let low = m & m.wrapping_neg();
        let ripple = m + low;
        m = (((ripple ^ m) >> 2) / low) | ripple;
    }
    out
}

/// Coalitions and their regression weights. Coalition sizes are enumerated
/// in complementary pairs `(s, d - s)` starting from `s = 1` while the budget
/// allows; the remaining sizes are sampled, sharing their total kernel weight.
fn kernel_coalitions(d: usize, n_samples: usize, seed: u64) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    let full = (1usize << d).saturating_sub(2);
    if n_samples >= full {
        for s in 1..d {
            let w = kernel_weight(d, s);
            for m in subsets_of_size(d, s) {
                out.insert(m, w);
            }
        }
        return out;
    }
    let mut used = 0usize;
    let mut remaining: Vec<usize> = Vec::new();
    for s in 1..=d / 2 {
        let sizes: Vec<usize> = if 2 * s == d { vec![s] } else { vec![s, d - s] };
        let count: f64 = sizes.iter().map(|&t| binomial(d, t)).sum();
        if s == 1 || (remaining.is_empty() && used as f64 + count <= n_samples as f64) {
            for t in sizes {
                let w = kernel_weight(d, t);
                for m in subsets_of_size(d, t) {
                    out.insert(m, w);
                }
            }
            used += count as usize;
        } else {
            remaining.extend(sizes);
        }
    }
    let m = n_samples.saturating_sub(used);
    if remaining.is_empty() || m == 0 {
        return out;
    }
    let size_mass: Vec<f64> = remaining
        .iter()
        .map(|&s| (d as f64 - 1.0) / (s as f64 * (d - s) as f64))
        .collect();
    let total: f64 = size_mass.iter().sum();
    let share = total / m as f64;
    let mut rng = seed::rng(seed);
    for _ in 0..m {
        let mut u = rng.random::<f64>() * total;
        let mut s = *remaining.last().unwrap();
        for (&size, &mass) in remaining.iter().zip(&size_mass) {
            if u < mass {
                s = size;
                break;
            }
            u -= mass;
        }
        let mask = sample_indices(&mut rng, d, s).into_iter().fold(0u64, |acc, j| acc | 1 << j);
        *out.entry(mask).or_insert(0.0) += share;
    }
    out
}

/// Kernel SHAP with the efficiency constraint imposed exactly: the last
/// feature's value is eliminated as `f(x) - base - sum(others)` before the
/// weighted least-squares solve.
pub fn kernel_shap<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    background: &Dataset,
    target_class: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    check_inputs(model, x, background, target_class)?;
    let d = x.len();
    if d > KERNEL_SHAP_MAX_FEATURES {
        return Err(Error::TooManyFeatures {
            features: d,
            limit: KERNEL_SHAP_MAX_FEATURES,
        });
    }
    if n_samples < d + 2 {
        return Err(Error::Hyperparameter {
            name: "n_samples",
            value: n_samples as f64,
            reason: "must be at least n_features + 2",
        });
    }
    let base = coalition_value(model, x, background, target_class, 0);
    let fx = model.predict_proba_row(x)[target_class];
    let delta = fx - base;
    if d == 1 {
        return Ok(Attribution::local(AttributionMethod::KernelShap, vec![delta], Some(base)));
    }
    let coalitions: Vec<(u64, f64)> = kernel_coalitions(d, n_samples, seed).into_iter().collect();
    let values: Vec<f64> = coalitions
        .par_iter()
        .map(|&(mask, _)| coalition_value(model, x, background, target_class, mask))
        .collect();

    let last = d - 1;
    let mut ata = DMatrix::<f64>::zeros(last, last);
    let mut atb = DVector::<f64>::zeros(last);
    for (&(mask, w), v) in coalitions.iter().zip(&values) {
        let z_last = (mask >> last & 1) as f64;
        let a: Vec<f64> = (0..last).map(|i| (mask >> i & 1) as f64 - z_last).collect();
        let t = v - base - z_last * delta;
        for i in 0..last {
            if a[i] == 0.0 {
                continue;
            }
            atb[i] += w * a[i] * t;
            for k in 0..last {
                ata[(i, k)] += w * a[i] * a[k];
            }
        }
    }
    let solved = ata.cholesky().ok_or(Error::Degenerate)?.solve(&atb);
    let mut phi: Vec<f64> = solved.iter().cloned().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    if phi.iter().any(|p| !p.is_finite()) {
        return Err(Error::Degenerate);
    }
    Ok(Attribution::local(AttributionMethod::KernelShap, phi, Some(base)))
}

/// Per-feature `(shap value, raw feature value)` pairs, features in ranking order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPlotData {
    pub features: Vec<usize>,
    pub feature_names: Vec<String>,
    pub points: Vec<Vec<(f64, f64)>>,
}

/// Kernel SHAP over every row of `test`; the global value of a feature is
/// its mean `|phi|`.
pub fn global_shap_ranking<M: ProbabilityModel + ?Sized>(
    model: &M,
    test: &Dataset,
    background: &Dataset,
    target_class: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(Attribution, SummaryPlotData)> {
    if test.is_empty() {
        return Err(Error::Empty("explained instances"));
    }
    let locals: Vec<Attribution> = test
        .features
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            kernel_shap(model, x, background, target_class, n_samples, seed::derive(seed, &[i as u64]))
                .map(|a| a.with_instance(i))
        })
        .collect::<Result<_>>()?;
    let d = test.n_features();
    let n = locals.len() as f64;
    let mean_abs: Vec<f64> = (0..d)
        .map(|j| locals.iter().map(|a| a.values[j].abs()).sum::<f64>() / n)
        .collect();
    let global = Attribution::global(AttributionMethod::KernelShap, mean_abs);
    let summary = SummaryPlotData {
        features: global.ranking.clone(),
        feature_names: global.ranking.iter().map(|&j| test.feature_names[j].clone()).collect(),
        points: global
            .ranking
            .iter()
            .map(|&j| locals.iter().zip(&test.features).map(|(a, x)| (a.values[j], x[j])).collect())
            .collect(),
    };
    Ok((global, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_perturbations: usize,
    /// Kernel width on standardized distance; `None` means `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    pub ridge: f64,
    pub n_top: usize,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_perturbations: 5000,
            kernel_width: None,
            ridge: 1e-3,
            n_top: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    /// Surrogate coefficients in raw feature units; positive pushes the target class.
    pub attribution: Attribution,
    pub intercept: f64,
    pub top: Vec<(usize, f64)>,
    pub kernel_width: f64,
    pub warnings: Vec<String>,
}

pub fn lime_explain<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    train: &Dataset,
    target_class: usize,
    cfg: &LimeConfig,
    seed: u64,
) -> Result<LimeExplanation> {
    check_inputs(model, x, train, target_class)?;
    let d = x.len();
    if cfg.n_perturbations < 2 {
        return Err(Error::Hyperparameter {
            name: "n_perturbations",
            value: cfg.n_perturbations as f64,
            reason: "must be at least 2",
        });
    }
    let mut warnings = Vec::new();
    if cfg.n_perturbations < 10 * d {
        warnings.push(format!(
            "{} perturbations is below the recommended 10 x {d} features",
            cfg.n_perturbations
        ));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (d as f64).sqrt());
    let scales = train.feature_scales();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| train.column(j)).collect();
    let mut rng = seed::rng(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let n = cfg.n_perturbations;
    let mut z = DMatrix::<f64>::zeros(n, d);
    let mut rows = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for r in 0..n {
        let mut p = x.to_vec();
        for j in 0..d {
            p[j] = match train.feature_kinds[j] {
                FeatureKind::Continuous => x[j] + scales[j] * unit.sample(&mut rng),
                FeatureKind::Genotype => columns[j][rng.random_range(0..columns[j].len())],
            };
            z[(r, j)] = (p[j] - x[j]) / scales[j];
        }
        let dist2: f64 = z.row(r).iter().map(|v| v * v).sum();
        weights.push((-dist2 / (width * width)).exp());
        rows.push(p);
    }
    let wsum: f64 = weights.iter().sum();
    if !(wsum > 0.0) {
        return Err(Error::ZeroKernelWeights);
    }
    let weights: Vec<f64> = weights.iter().map(|w| w / wsum).collect();
    let y: Vec<f64> = rows.par_iter().map(|p| model.predict_proba_row(p)[target_class]).collect();

    let zbar: Vec<f64> = (0..d).map(|j| (0..n).map(|r| weights[r] * z[(r, j)]).sum()).collect();
    let ybar: f64 = (0..n).map(|r| weights[r] * y[r]).sum();
    let mut ata = DMatrix::<f64>::identity(d, d) * cfg.ridge;
    let mut atb = DVector::<f64>::zeros(d);
    for r in 0..n {
        let w = weights[r];
        let c: Vec<f64> = (0..d).map(|j| z[(r, j)] - zbar[j]).collect();
        let t = y[r] - ybar;
        for i in 0..d {
            atb[i] += w * c[i] * t;
            for k in i..d {
                ata[(i, k)] += w * c[i] * c[k];
            }
        }
    }
    for i in 0..d {
        for k in 0..i {
            ata[(i, k)] = ata[(k, i)];
        }
    }
    let beta = ata.cholesky().ok_or(Error::Degenerate)?.solve(&atb);
    let coef: Vec<f64> = (0..d).map(|j| beta[j] / scales[j]).collect();
    let intercept = ybar - (0..d).map(|j| beta[j] * zbar[j]).sum::<f64>();
    let attribution = Attribution::local(AttributionMethod::Lime, coef, None);
    let top = attribution.top(cfg.n_top).iter().map(|&j| (j, attribution.values[j])).collect();
    Ok(LimeExplanation {
        attribution,
        intercept,
        top,
        kernel_width: width,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdpGrid {
    /// Equispaced points over the observed range for continuous features,
    /// the three genotype levels otherwise.
    Auto { points: usize },
    Values(Vec<f64>),
}

impl Default for PdpGrid {
    fn default() -> Self {
        PdpGrid::Auto { points: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: usize,
    pub feature_name: String,
    pub target_class: usize,
    pub points: Vec<(f64, f64)>,
}

pub fn pdp_grid_values(ds: &Dataset, feature: usize, grid: &PdpGrid) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if feature >= ds.n_features() {
        return Err(Error::Dimension {
            expected: ds.n_features(),
            got: feature,
        });
    }
    Ok(match grid {
        PdpGrid::Values(v) => v.clone(),
        PdpGrid::Auto { .. } if ds.feature_kinds[feature] == FeatureKind::Genotype => GENOTYPE_LEVELS.to_vec(),
        PdpGrid::Auto { points } => {
            let col = ds.column(feature);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if *points < 2 || lo == hi {
                vec![lo]
            } else {
                (0..*points)
                    .map(|i| lo + (hi - lo) * i as f64 / (*points - 1) as f64)
                    .collect()
            }
        }
    })
}

pub fn partial_dependence<M: ProbabilityModel + ?Sized>(
    model: &M,
    ds: &Dataset,
    feature: usize,
    grid: &PdpGrid,
    target_class: usize,
) -> Result<PdpCurve> {
    let values = pdp_grid_values(ds, feature, grid)?;
    if target_class >= model.n_classes() {
        return Err(Error::UnknownLabel(format!("class id {target_class}")));
    }
    let n = ds.n_samples() as f64;
    let points = values
        .par_iter()
        .map(|&v| {
            let mut row = vec![0.0; ds.n_features()];
            let mut total = 0.0;
            for x in &ds.features {
                row.copy_from_slice(x);
                row[feature] = v;
                total += model.predict_proba_row(&row)[target_class];
            }
            (v, total / n)
        })
        .collect();
    Ok(PdpCurve {
        feature,
        feature_name: ds.feature_names[feature].clone(),
        target_class,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SynthConfig};
    use crate::models::{fit, Hyperparameters, ModelKind};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    /// Binary model with `P(class 1) = clamp(bias + w . x)`.
    struct Linear {
        w: Vec<f64>,
        bias: f64,
    }

    impl ProbabilityModel for Linear {
        fn n_features(&self) -> usize {
            self.w.len()
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
            let p = (self.bias + self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).clamp(0.0, 1.0);
            vec![1.0 - p, p]
        }
    }

    struct Func<F>(usize, F);

    impl<F: Fn(&[f64]) -> f64 + Send + Sync> ProbabilityModel for Func<F> {
        fn n_features(&self) -> usize {
            self.0
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
            let p = (self.1)(x);
            vec![1.0 - p, p]
        }
    }

    fn rows(rows: Vec<Vec<f64>>) -> Dataset {
        let d = rows[0].len();
        let n = rows.len();
        Dataset::new(
            rows,
            (0..n).map(|i| i % 2).collect(),
            (0..d).map(|j| format!("f{j}")).collect(),
            vec![FeatureKind::Continuous; d],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn linear_model_exact_values() {
        let m = Linear {
            w: vec![0.2, -0.1],
            bias: 0.5,
        };
        let bg = rows(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let a = exact_shapley(&m, &[1.0, 1.0], &bg, 1).unwrap();
        assert!((a.values[0] - 0.2).abs() < 1e-12);
        assert!((a.values[1] + 0.1).abs() < 1e-12);
        assert!((a.base_value.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(a.ranking, vec![0, 1]);
    }

    #[test]
    fn constant_model_gives_zeros() {
        let m = Func(3, |_: &[f64]| 0.3);
        let bg = rows(vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 2.0]]);
        let x = [0.5, 0.5, 0.5];
        for a in [
            exact_shapley(&m, &x, &bg, 1).unwrap(),
            kernel_shap(&m, &x, &bg, 1, 8, 0).unwrap(),
        ] {
            assert!(a.values.iter().all(|v| v.abs() < 1e-12), "{a:?}");
        }
    }

    #[test]
    fn symmetric_features_share_credit() {
        let m = Func(3, |x: &[f64]| 0.5 * (x[0] * x[1]).tanh().abs() + 0.1 * x[2].sin().abs());
        let bg = rows(vec![vec![0.1, 0.1, 0.0], vec![-0.4, -0.4, 1.0], vec![0.3, 0.3, 2.0]]);
        let a = exact_shapley(&m, &[1.2, 1.2, 0.7], &bg, 1).unwrap();
        assert!((a.values[0] - a.values[1]).abs() < 1e-12);
    }

    #[test]
    fn exact_guard() {
        let m = Func(16, |_: &[f64]| 0.5);
        let bg = rows(vec![vec![0.0; 16]]);
        assert!(matches!(
            exact_shapley(&m, &[0.0; 16], &bg, 1),
            Err(Error::TooManyFeatures { .. })
        ));
        assert!(kernel_shap(&m, &[0.0; 16], &bg, 1, 17, 0).is_err());
    }

    fn random_background(d: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        rows((0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
    }

    #[test]
    fn full_kernel_matches_exact_on_nonlinear_model() {
        let m = Func(5, |x: &[f64]| {
            let z = x[0] * x[1] - 0.5 * x[2] + (x[3] * 2.0).sin();
            1.0 / (1.0 + (-z).exp())
        });
        let bg = random_background(5, 12, 1);
        let x = [0.4, -1.1, 0.9, 0.3, 1.7];
        let e = exact_shapley(&m, &x, &bg, 1).unwrap();
        let k = kernel_shap(&m, &x, &bg, 1, 1 << 5, 0).unwrap();
        for (a, b) in e.values.iter().zip(&k.values) {
            assert!((a - b).abs() < 1e-9, "{e:?} {k:?}");
        }
        // feature 4 is never read
        assert!(e.values[4].abs() < 1e-12);
        assert!(k.values[4].abs() < 1e-9);
    }

    #[test]
    fn kernel_error_shrinks_with_budget() {
        let m = Func(6, |x: &[f64]| {
            let z = x[0] * x[1] + x[2] - x[3] * x[4] + 0.3 * x[5];
            1.0 / (1.0 + (-z).exp())
        });
        let bg = random_background(6, 10, 2);
        let x = [1.0, 0.5, -0.7, 1.3, -0.2, 0.8];
        let e = exact_shapley(&m, &x, &bg, 1).unwrap();
        let err = |n: usize| {
            let k = kernel_shap(&m, &x, &bg, 1, n, 3).unwrap();
            k.values.iter().zip(&e.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e50, e200, efull) = (err(50), err(200), err(64));
        assert!(e50 >= e200 && e200 >= efull - 1e-12, "{e50} {e200} {efull}");
        assert!(efull < 1e-9);
    }

    #[test]
    fn coalition_budget_includes_small_and_large_sizes() {
        let c = kernel_coalitions(8, 20, 0);
        for j in 0..8 {
            assert!(c.contains_key(&(1 << j)));
            assert!(c.contains_key(&(0xFF ^ (1 << j))));
        }
        // total weight equals the full kernel mass
        let full: f64 = kernel_coalitions(8, 1000, 0).values().sum();
        let mut partial = kernel_coalitions(8, 60, 0);
        let sum: f64 = partial.values().sum();
        assert!((sum - full).abs() < 1e-9);
        partial.retain(|m, _| m.count_ones() == 4);
        assert!(!partial.is_empty());
    }

    #[test]
    fn global_ranking_finds_planted_features() {
        let synth = synthesize(&SynthConfig {
            class_counts: vec![120, 120],
            d_continuous: 6,
            d_genotype: 0,
            informative_features: vec![1, 4],
            separation: 3.0,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let ds = synth.dataset;
        let hp = Hyperparameters {
            n_trees: 30,
            max_depth: 4,
            ..Default::default()
        };
        let model = fit(ModelKind::RandomForest, &ds, &hp, 0).unwrap();
        let bg = background_sample(&ds, 30, 0);
        let test = ds.subset(&(0..20).collect::<Vec<_>>());
        let (global, summary) = global_shap_ranking(&model, &test, &bg, 1, 64, 0).unwrap();
        let mut top: Vec<usize> = global.top(2).to_vec();
        top.sort_unstable();
        assert_eq!(top, vec![1, 4]);
        let weakest_signal = global.values[1].min(global.values[4]);
        for j in [0, 2, 3, 5] {
            assert!(global.values[j] < weakest_signal);
        }
        assert!(summary.points.iter().all(|p| p.len() == 20));
        assert_eq!(summary.features, global.ranking);

        let one = test.subset(&[3]);
        let (g1, _) = global_shap_ranking(&model, &one, &bg, 1, 64, 5).unwrap();
        let local = kernel_shap(&model, &one.features[0], &bg, 1, 64, seed::derive(5, &[0])).unwrap();
        assert_eq!(g1.ranking, local.ranking);
    }

    #[test]
    fn lime_recovers_linear_weights() {
        let w = vec![0.03, -0.02, 0.01, 0.0, 0.025];
        let m = Linear { w: w.clone(), bias: 0.5 };
        let train = random_background(5, 200, 4);
        let ex = lime_explain(&m, &[0.1, 0.2, -0.3, 0.0, 0.5], &train, 1, &LimeConfig::default(), 0).unwrap();
        for (c, t) in ex.attribution.values.iter().zip(&w) {
            assert!((c - t).abs() < 2e-3, "{:?}", ex.attribution.values);
        }
        assert_eq!(ex.top[0].0, 0);
        assert!(ex.warnings.is_empty());
    }

    #[test]
    fn lime_constant_and_monotone() {
        let train = random_background(3, 100, 5);
        let x = [0.2, -0.3, 1.0];
        let c = lime_explain(&Func(3, |_: &[f64]| 0.7), &x, &train, 1, &LimeConfig::default(), 1).unwrap();
        assert!(c.attribution.values.iter().all(|v| v.abs() < 1e-6));
        let mono = Func(3, |x: &[f64]| 1.0 / (1.0 + (-2.0 * x[1]).exp()));
        let e = lime_explain(&mono, &x, &train, 1, &LimeConfig::default(), 2).unwrap();
        assert!(e.attribution.values[1] > 0.0);
        assert_eq!(e.attribution.ranking[0], 1);
    }

    #[test]
    fn lime_rejects_tiny_width() {
        let train = random_background(3, 50, 6);
        let cfg = LimeConfig {
            kernel_width: Some(1e-10),
            n_perturbations: 50,
            ..Default::default()
        };
        assert!(matches!(
            lime_explain(&Func(3, |_: &[f64]| 0.5), &[0.0; 3], &train, 1, &cfg, 0),
            Err(Error::ZeroKernelWeights)
        ));
        let warn = lime_explain(&Func(3, |_: &[f64]| 0.5), &[0.0; 3], &train, 1, &LimeConfig {
            n_perturbations: 20,
            ..Default::default()
        }, 0)
        .unwrap();
        assert_eq!(warn.warnings.len(), 1);
    }

    #[test]
    fn pdp_flat_and_brute_force() {
        let ds = random_background(3, 40, 7);
        let m = Func(3, |x: &[f64]| 1.0 / (1.0 + (-(0.8 * x[0] - 0.5 * x[1])).exp()));
        let flat = partial_dependence(&m, &ds, 2, &PdpGrid::default(), 1).unwrap();
        assert_eq!(flat.points.len(), 20);
        let (lo, hi) = flat
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.1), h.max(p.1)));
        assert!(hi - lo < 1e-12);
        let curve = partial_dependence(&m, &ds, 0, &PdpGrid::Values(vec![-1.0, 0.0, 2.5]), 1).unwrap();
        for &(v, pd) in &curve.points {
            let brute: f64 = ds
                .features
                .iter()
                .map(|x| 1.0 / (1.0 + (-(0.8 * v - 0.5 * x[1])).exp()))
                .sum::<f64>()
                / 40.0;
            assert!((pd - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn pdp_genotype_grid_has_three_points() {
        let ds = synthesize(&SynthConfig {
            class_counts: vec![20, 20, 20],
            d_continuous: 2,
            d_genotype: 1,
            informative_features: vec![0],
            ..Default::default()
        })
        .unwrap()
        .dataset;
        let m = fit(ModelKind::Tree, &ds, &Hyperparameters::default(), 0).unwrap();
        let c = partial_dependence(&m, &ds, 2, &PdpGrid::default(), 0).unwrap();
        assert_eq!(c.points.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert!(partial_dependence(&m, &ds.subset(&[]), 0, &PdpGrid::default(), 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn efficiency_holds(seed in 0u64..1000, d in 2usize..6, budget in 0usize..40) {
            let bg = random_background(d, 6, seed);
            let m = Func(d, move |x: &[f64]| {
                let z: f64 = x.iter().enumerate().map(|(j, v)| v * ((j + seed as usize) % 3) as f64 - 0.4 * v * v).sum();
                1.0 / (1.0 + (-z).exp())
            });
            let x = &bg.features[0].iter().map(|v| v * 0.7 + 0.1).collect::<Vec<_>>();
            let fx = m.predict_proba_row(x)[1];
            let e = exact_shapley(&m, x, &bg, 1).unwrap();
            prop_assert!((e.base_value.unwrap() + e.values.iter().sum::<f64>() - fx).abs() < 1e-6);
            let k = kernel_shap(&m, x, &bg, 1, d + 2 + budget, seed).unwrap();
            prop_assert!((k.base_value.unwrap() + k.values.iter().sum::<f64>() - fx).abs() < 1e-6);
            let mut sorted = k.ranking.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..d).collect::<Vec<_>>());
        }
    }
}
