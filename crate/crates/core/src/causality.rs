//! Necessity and sufficiency of feature subsets, measured with
//! counterfactuals, and the unified report that ties them to an attribution
//! ranking.
//!
//! Necessity of a subset is the fraction of requested counterfactuals that
//! are found (valid, with the subset changed) when only the subset may move.
//! Sufficiency is the drop in the fraction of unique valid counterfactuals
//! when the subset is frozen, relative to unrestricted generation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterfactual::{row_key, same_value, CfConstraints, CfGenerator, CfTarget, Counterfactual};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::ProbabilityModel;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// Test rows the model predicts as the target class.
    #[default]
    PredictedTarget,
    AllInstances,
}

/// Indices of `test` rows forming the context set for `target`.
pub fn context_set<M: ProbabilityModel + ?Sized>(
    model: &M,
    test: &Dataset,
    target: usize,
    mode: ContextMode,
) -> Vec<usize> {
    (0..test.n_samples())
        .filter(|&i| mode == ContextMode::AllInstances || model.predict_class(&test.features[i]) == target)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityQuery {
    pub features: Vec<usize>,
    /// Class the contexts are predicted as.
    pub target: usize,
    /// Row indices into the explained dataset.
    pub contexts: Vec<usize>,
    pub n_cf: usize,
    pub generator: CfGenerator,
}

impl CausalityQuery {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Empty("query feature subset"));
        }
        if self.contexts.is_empty() {
            return Err(Error::Empty("context set"));
        }
        if self.n_cf == 0 {
            return Err(Error::Config("n_cf must be at least 1".into()));
        }
        if let Some(&j) = self.features.iter().find(|&&j| j >= d) {
            return Err(Error::Dimension { expected: d, got: j });
        }
        Ok(())
    }
}

/// A fraction that keeps its integer parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: usize,
    pub denominator: usize,
    pub value: f64,
}

impl Fraction {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        Fraction {
            numerator,
            denominator,
            value: if denominator == 0 {
                0.0
            } else {
                numerator as f64 / denominator as f64
            },
        }
    }
}

fn check_contexts<M: ProbabilityModel + ?Sized>(model: &M, q: &CausalityQuery, test: &Dataset) -> Result<()> {
    q.validate(test.n_features())?;
    for &i in &q.contexts {
        let x = test.features.get(i).ok_or(Error::Dimension {
            expected: test.n_samples(),
            got: i,
        })?;
        if model.predict_class(x) != q.target {
            return Err(Error::Config(format!(
                "context row {i} is not predicted as class {}",
                q.target
            )));
        }
    }
    Ok(())
}

fn mask_of(d: usize, features: &[usize], value: bool) -> Vec<bool> {
    let mut m = vec![!value; d];
    for &j in features {
        m[j] = value;
    }
    m
}

/// Runs the generator on every context row with `mutable`; `None` when
/// nothing may change.
fn generate_all<M: ProbabilityModel + ?Sized>(
    model: &M,
    test: &Dataset,
    base: &CfConstraints,
    mutable: Vec<bool>,
    q: &CausalityQuery,
    seed: u64,
) -> Result<Vec<Vec<Counterfactual>>> {
    if !mutable.iter().any(|&m| m) {
        return Ok(vec![Vec::new(); q.contexts.len()]);
    }
    let cons = CfConstraints {
        target: CfTarget::Flip,
        ..base.with_mutable(mutable)?
    };
    q.contexts
        .par_iter()
        .map(|&i| q.generator.generate(model, &test.features[i], &cons, q.n_cf, seed::derive(seed, &[i as u64])))
        .collect()
}

fn count_unique(per_instance: &[Vec<Counterfactual>], n_cf: usize) -> usize {
    per_instance
        .iter()
        .map(|cfs| {
            cfs.iter()
                .filter(|c| c.valid)
                .map(|c| row_key(&c.modified))
                .collect::<BTreeSet<_>>()
                .len()
                .min(n_cf)
        })
        .sum()
}

/// Valid counterfactuals that changed the subset, over `n_cf * |U|`
/// requests. Each counterfactual is counted once.
pub fn necessity<M: ProbabilityModel + ?Sized>(
    model: &M,
    q: &CausalityQuery,
    test: &Dataset,
    base: &CfConstraints,
    seed: u64,
) -> Result<Fraction> {
    check_contexts(model, q, test)?;
    let mask = mask_of(test.n_features(), &q.features, true);
    let found = generate_all(model, test, base, mask, q, seed)?;
    let numerator = found
        .iter()
        .map(|cfs| {
            cfs.iter()
                .filter(|c| c.valid && q.features.iter().any(|&j| !same_value(c.modified[j], c.original[j])))
                .count()
                .min(q.n_cf)
        })
        .sum();
    Ok(Fraction::new(numerator, q.n_cf * q.contexts.len()))
}

/// Unique valid counterfactuals with every feature free, over `n_cf * |U|`.
pub fn free_fraction<M: ProbabilityModel + ?Sized>(
    model: &M,
    q: &CausalityQuery,
    test: &Dataset,
    base: &CfConstraints,
    seed: u64,
) -> Result<Fraction> {
    check_contexts(model, q, test)?;
    let found = generate_all(model, test, base, vec![true; test.n_features()], q, seed)?;
    Ok(Fraction::new(count_unique(&found, q.n_cf), q.n_cf * q.contexts.len()))
}

/// Unique valid counterfactuals with the subset frozen, over `n_cf * |U|`.
pub fn fixed_fraction<M: ProbabilityModel + ?Sized>(
    model: &M,
    q: &CausalityQuery,
    test: &Dataset,
    base: &CfConstraints,
    seed: u64,
) -> Result<Fraction> {
    check_contexts(model, q, test)?;
    let mask = mask_of(test.n_features(), &q.features, false);
    let found = generate_all(model, test, base, mask, q, seed)?;
    Ok(Fraction::new(count_unique(&found, q.n_cf), q.n_cf * q.contexts.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sufficiency {
    pub free: Fraction,
    pub fixed: Fraction,
    /// `free - fixed`, not clamped.
    pub value: f64,
}

pub fn sufficiency<M: ProbabilityModel + ?Sized>(
    model: &M,
    q: &CausalityQuery,
    test: &Dataset,
    base: &CfConstraints,
    seed: u64,
) -> Result<Sufficiency> {
    let free = free_fraction(model, q, test, base, seed::derive(seed, &[0]))?;
    let fixed = fixed_fraction(model, q, test, base, seed::derive(seed, &[1]))?;
    Ok(Sufficiency {
        value: free.value - fixed.value,
        free,
        fixed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnifiedConfig {
    pub top_k: usize,
    pub n_cf_values: Vec<usize>,
    pub generators: Vec<CfGenerator>,
    pub target: usize,
    pub context_mode: ContextMode,
    /// Keep only the first this-many context rows.
    pub max_contexts: Option<usize>,
}

impl Default for UnifiedConfig {
    fn default() -> Self {
        UnifiedConfig {
            top_k: 10,
            n_cf_values: vec![1, 2, 4, 8],
            generators: vec![
                CfGenerator::PermuteAttack(Default::default()),
                CfGenerator::Dice(Default::default()),
            ],
            target: 1,
            context_mode: ContextMode::PredictedTarget,
            max_contexts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QueryKind {
    Individual { feature: usize },
    Combined,
    Complement,
}

impl QueryKind {
    pub fn label(&self, names: &[String]) -> String {
        match self {
            QueryKind::Individual { feature } => names[*feature].clone(),
            QueryKind::Combined => "top_k_combined".into(),
            QueryKind::Complement => "complement".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcfResult {
    pub n_cf: usize,
    pub necessity: Fraction,
    pub sufficiency: Sufficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub features: Vec<usize>,
    pub per_n_cf: Vec<NcfResult>,
    /// Means over `per_n_cf`.
    pub necessity: f64,
    pub sufficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub generator: CfGenerator,
    pub queries: Vec<QueryResult>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalityReport {
    pub target: usize,
    pub context_mode: ContextMode,
    pub contexts: Vec<usize>,
    pub top_k: usize,
    pub ranking: Vec<usize>,
    pub feature_names: Vec<String>,
    pub n_cf_values: Vec<usize>,
    pub seed: u64,
    pub generators: Vec<GeneratorReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Necessity,
    Sufficiency,
}

/// One flattened line of the report, as plotted in a grouped bar chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub generator: String,
    pub measure: Measure,
    pub query: String,
    pub features: Vec<usize>,
    pub value: f64,
}

impl CausalityReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut out = Vec::new();
        for g in &self.generators {
            for measure in [Measure::Necessity, Measure::Sufficiency] {
                for q in &g.queries {
                    out.push(ReportRow {
                        generator: g.generator.name().into(),
                        measure,
                        query: q.kind.label(&self.feature_names),
                        features: q.features.clone(),
                        value: match measure {
                            Measure::Necessity => q.necessity,
                            Measure::Sufficiency => q.sufficiency,
                        },
                    });
                }
            }
        }
        out
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Necessity and sufficiency of each top-ranked feature, of the top-k set
/// and of its complement, per generator and per `n_cf`, then averaged over
/// `n_cf`. The unrestricted fraction is computed once per generator and
/// `n_cf` and shared by all queries.
pub fn unified_report<M: ProbabilityModel + ?Sized>(
    model: &M,
    test: &Dataset,
    train: &Dataset,
    ranking: &[usize],
    cfg: &UnifiedConfig,
    seed: u64,
) -> Result<CausalityReport> {
    let d = test.n_features();
    if cfg.top_k == 0 || cfg.top_k > d {
        return Err(Error::Config(format!("top_k must lie in 1..={d}, got {}", cfg.top_k)));
    }
    if ranking.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: ranking.len(),
        });
    }
    if cfg.n_cf_values.is_empty() || cfg.generators.is_empty() {
        return Err(Error::Config("need at least one n_cf value and one generator".into()));
    }
    let mut contexts = context_set(model, test, cfg.target, cfg.context_mode);
    if let Some(m) = cfg.max_contexts {
        contexts.truncate(m);
    }
    if contexts.is_empty() {
        return Err(Error::Empty("context set"));
    }
    let base = CfConstraints::all_mutable(train, CfTarget::Flip)?;
    // All-instances mode mixes predicted classes; the flip target handles
    // each row on its own terms.
    let target_of = |i: usize| match cfg.context_mode {
        ContextMode::PredictedTarget => cfg.target,
        ContextMode::AllInstances => model.predict_class(&test.features[i]),
    };

    let top: Vec<usize> = ranking[..cfg.top_k].to_vec();
    let complement: Vec<usize> = ranking[cfg.top_k..].to_vec();
    let mut queries: Vec<(QueryKind, Vec<usize>)> =
        top.iter().map(|&j| (QueryKind::Individual { feature: j }, vec![j])).collect();
    queries.push((QueryKind::Combined, top.clone()));
    let mut notes = Vec::new();
    if complement.is_empty() {
        notes.push("complement of the top-k set is empty; query skipped".to_string());
    } else {
        queries.push((QueryKind::Complement, complement));
    }

    // Contexts grouped by their predicted class so each query sees one target.
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &i in &contexts {
        let t = target_of(i);
        match groups.iter_mut().find(|(c, _)| *c == t) {
            Some((_, v)) => v.push(i),
            None => groups.push((t, vec![i])),
        }
    }
    groups.sort_by_key(|(c, _)| *c);

    let measure = |g: usize,
                   generator: &CfGenerator,
                   features: &[usize],
                   n_cf: usize,
                   kind: u64,
                   query_idx: u64|
     -> Result<Fraction> {
        let mut num = 0;
        let mut den = 0;
        for (target, rows) in &groups {
            let q = CausalityQuery {
                features: features.to_vec(),
                target: *target,
                contexts: rows.clone(),
                n_cf,
                generator: generator.clone(),
            };
            let s = seed::derive(seed, &[g as u64, kind, query_idx, n_cf as u64, *target as u64]);
            let f = match kind {
                0 => necessity(model, &q, test, &base, s)?,
                1 => free_fraction(model, &q, test, &base, s)?,
                _ => fixed_fraction(model, &q, test, &base, s)?,
            };
            num += f.numerator;
            den += f.denominator;
        }
        Ok(Fraction::new(num, den))
    };

    let generators = cfg
        .generators
        .iter()
        .enumerate()
        .map(|(g, generator)| {
            let free: Vec<Fraction> = cfg
                .n_cf_values
                .par_iter()
                .map(|&n| measure(g, generator, &top[..1], n, 1, 0))
                .collect::<Result<_>>()?;
            let queries = queries
                .par_iter()
                .enumerate()
                .map(|(qi, (kind, features))| {
                    let per_n_cf = cfg
                        .n_cf_values
                        .par_iter()
                        .zip(&free)
                        .map(|(&n, free)| {
                            let nec = measure(g, generator, features, n, 0, qi as u64)?;
                            let fixed = measure(g, generator, features, n, 2, qi as u64)?;
                            Ok(NcfResult {
                                n_cf: n,
                                necessity: nec,
                                sufficiency: Sufficiency {
                                    value: free.value - fixed.value,
                                    free: *free,
                                    fixed,
                                },
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(QueryResult {
                        kind: kind.clone(),
                        features: features.clone(),
                        necessity: mean(per_n_cf.iter().map(|r| r.necessity.value)),
                        sufficiency: mean(per_n_cf.iter().map(|r| r.sufficiency.value)),
                        per_n_cf,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GeneratorReport {
                generator: generator.clone(),
                queries,
                notes: notes.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CausalityReport {
        target: cfg.target,
        context_mode: cfg.context_mode,
        contexts,
        top_k: cfg.top_k,
        ranking: ranking.to_vec(),
        feature_names: test.feature_names.clone(),
        n_cf_values: cfg.n_cf_values.clone(),
        seed,
        generators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactual::{DiceConfig, GaConfig};
    use crate::dataset::FeatureKind;
    use rand::Rng;

    struct Threshold {
        d: usize,
        feature: usize,
    }

    impl ProbabilityModel for Threshold {
        fn n_features(&self) -> usize {
            self.d
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
            let p = 1.0 / (1.0 + (-4.0 * x[self.feature]).exp());
            vec![1.0 - p, p]
        }
    }

    struct Constant(usize);

    impl ProbabilityModel for Constant {
        fn n_features(&self) -> usize {
            self.0
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_proba_row(&self, _: &[f64]) -> Vec<f64> {
            vec![0.3, 0.7]
        }
    }

    fn data(d: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = seed::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| (rng.random_range(-2.0f64..2.0) * 10.0).round() / 10.0).collect())
            .collect();
        Dataset::new(
            rows,
            (0..n).map(|i| i % 2).collect(),
            (0..d).map(|j| format!("f{j}")).collect(),
            vec![FeatureKind::Continuous; d],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    fn query<M: ProbabilityModel>(m: &M, test: &Dataset, features: Vec<usize>, n_cf: usize, generator: CfGenerator) -> CausalityQuery {
        CausalityQuery {
            features,
            target: 1,
            contexts: context_set(m, test, 1, ContextMode::PredictedTarget),
            n_cf,
            generator,
        }
    }

    fn dice() -> CfGenerator {
        CfGenerator::Dice(DiceConfig::default())
    }

    #[test]
    fn ignored_feature_has_no_necessity() {
        let train = data(3, 60, 1);
        let m = Threshold { d: 3, feature: 0 };
        let base = CfConstraints::all_mutable(&train, CfTarget::Flip).unwrap();
        let q = query(&m, &train, vec![2], 2, dice());
        let n = necessity(&m, &q, &train, &base, 0).unwrap();
        assert_eq!(n.numerator, 0);
        assert_eq!(n.denominator, 2 * q.contexts.len());
    }

    #[test]
    fn single_cause_is_necessary_and_sufficient() {
        let train = data(3, 60, 2);
        let m = Threshold { d: 3, feature: 1 };
        let base = CfConstraints::all_mutable(&train, CfTarget::Flip).unwrap();
        let oracle = CfGenerator::Exhaustive { max_candidates: 100 };
        let q = query(&m, &train, vec![1], 4, oracle);
        assert_eq!(necessity(&m, &q, &train, &base, 0).unwrap().value, 1.0);
        let q = query(&m, &train, vec![1], 4, dice());
        assert!(necessity(&m, &q, &train, &base, 0).unwrap().value >= 0.9);
        let s = sufficiency(&m, &q, &train, &base, 0).unwrap();
        assert_eq!(s.fixed.numerator, 0);
        assert!(s.value >= 0.9, "{s:?}");
    }

    #[test]
    fn constant_model_scores_zero() {
        let train = data(2, 30, 3);
        let m = Constant(2);
        let base = CfConstraints::all_mutable(&train, CfTarget::Flip).unwrap();
        for g in [dice(), CfGenerator::PermuteAttack(GaConfig::default())] {
            let q = query(&m, &train, vec![0], 2, g);
            let s = sufficiency(&m, &q, &train, &base, 0).unwrap();
            assert_eq!((s.free.numerator, s.fixed.numerator, s.value), (0, 0, 0.0));
            assert_eq!(necessity(&m, &q, &train, &base, 0).unwrap().value, 0.0);
        }
    }

    #[test]
    fn contexts_must_match_target() {
        let train = data(2, 30, 4);
        let m = Threshold { d: 2, feature: 0 };
        let base = CfConstraints::all_mutable(&train, CfTarget::Flip).unwrap();
        let mut q = query(&m, &train, vec![0], 1, dice());
        q.contexts = (0..train.n_samples()).collect();
        assert!(necessity(&m, &q, &train, &base, 0).is_err());
        q.contexts.clear();
        assert!(matches!(necessity(&m, &q, &train, &base, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn oracle_necessity_grows_with_subset() {
        let train = data(3, 25, 5);
        // flips need x0 + x1 > 1 with x2 irrelevant
        struct Sum;
        impl ProbabilityModel for Sum {
            fn n_features(&self) -> usize {
                3
            }
            fn n_classes(&self) -> usize {
                2
            }
            fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
                let p = if x[0] + x[1] > 1.0 { 0.8 } else { 0.2 };
                vec![1.0 - p, p]
            }
        }
        let base = CfConstraints::all_mutable(&train, CfTarget::Flip).unwrap();
        let chain = [vec![2], vec![2, 0], vec![2, 0, 1]];
        for n_cf in [1, 4, 8] {
            let mut last = 0.0;
            for subset in &chain {
                let mut q = query(&Sum, &train, subset.clone(), n_cf, CfGenerator::Exhaustive { max_candidates: 100_000 });
                q.target = 1;
                q.contexts = context_set(&Sum, &train, 1, ContextMode::PredictedTarget);
                let v = necessity(&Sum, &q, &train, &base, 0).unwrap().value;
                assert!(v >= last, "{subset:?}: {v} < {last}");
                last = v;
            }
        }
    }

    fn small_cfg(top_k: usize) -> UnifiedConfig {
        let ga = GaConfig {
            generations: 30,
            ..Default::default()
        };
        UnifiedConfig {
            top_k,
            generators: vec![
                CfGenerator::PermuteAttack(ga.clone()),
                CfGenerator::Dice(DiceConfig {
                    ga,
                    ..Default::default()
                }),
            ],
            max_contexts: Some(8),
            ..Default::default()
        }
    }

    #[test]
    fn report_shape_and_counts() {
        let train = data(4, 40, 6);
        let m = Threshold { d: 4, feature: 2 };
        let ranking = vec![2, 0, 1, 3];
        let r = unified_report(&m, &train, &train, &ranking, &small_cfg(2), 3).unwrap();
        assert_eq!(r.generators.len(), 2);
        for g in &r.generators {
            assert_eq!(g.queries.len(), 2 + 2);
            assert_eq!(g.queries[2].kind, QueryKind::Combined);
            assert_eq!(g.queries[3].kind, QueryKind::Complement);
            assert_eq!(g.queries[3].features, vec![1, 3]);
            for q in &g.queries {
                assert_eq!(q.per_n_cf.iter().map(|p| p.n_cf).collect::<Vec<_>>(), vec![1, 2, 4, 8]);
                let avg = q.per_n_cf.iter().map(|p| p.necessity.value).sum::<f64>() / 4.0;
                assert!((avg - q.necessity).abs() < 1e-12);
                for p in &q.per_n_cf {
                    let n = &p.necessity;
                    assert!((n.numerator as f64 / n.denominator as f64 - n.value).abs() < 1e-12);
                    assert!((0.0..=1.0).contains(&n.value));
                    assert!((-1.0..=1.0).contains(&p.sufficiency.value));
                    let s = &p.sufficiency;
                    assert!((s.free.value - s.fixed.value - s.value).abs() < 1e-12);
                }
            }
        }
        assert_eq!(r.rows().len(), 2 * 2 * 4);
        let again = unified_report(&m, &train, &train, &ranking, &small_cfg(2), 3).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn full_top_k_skips_complement() {
        let train = data(3, 30, 7);
        let m = Threshold { d: 3, feature: 0 };
        let r = unified_report(&m, &train, &train, &[0, 1, 2], &small_cfg(3), 0).unwrap();
        for g in &r.generators {
            assert_eq!(g.queries.len(), 3 + 1);
            assert_eq!(g.notes.len(), 1);
        }
        assert!(unified_report(&m, &train, &train, &[0, 1, 2], &small_cfg(4), 0).is_err());
    }

    #[test]
    fn all_instances_mode() {
        let train = data(3, 30, 8);
        let m = Threshold { d: 3, feature: 0 };
        let cfg = UnifiedConfig {
            context_mode: ContextMode::AllInstances,
            n_cf_values: vec![1],
            ..small_cfg(1)
        };
        let r = unified_report(&m, &train, &train, &[0, 1, 2], &cfg, 0).unwrap();
        assert_eq!(r.contexts.len(), 8);
        assert!(r.generators[1].queries[0].necessity >= 0.9);
    }
}
