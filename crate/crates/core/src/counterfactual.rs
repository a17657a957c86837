//! Counterfactual generation under feature masks: a proximity-driven genetic
//! search (Permute-Attack style), a diversity-aware set search (DiCE style),
//! an exhaustive oracle for small problems, and counterfactual-frequency
//! feature ranking.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureKind, GENOTYPE_LEVELS};
use crate::error::{Error, Result};
use crate::models::{argmax, ProbabilityModel};
use crate::seed::{self, Rng as SeedRng};

const QUANT: f64 = 1e6;

/// Values are compared after rounding to 6 decimal places.
pub fn quantize(v: f64) -> i64 {
    (v * QUANT).round() as i64
}

pub fn row_key(row: &[f64]) -> Vec<i64> {
    row.iter().map(|&v| quantize(v)).collect()
}

pub fn same_value(a: f64, b: f64) -> bool {
    quantize(a) == quantize(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfTarget {
    /// Any class other than the original prediction.
    Flip,
    Class(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfConstraints {
    pub mutable: Vec<bool>,
    /// Candidate values per feature.
    pub domains: Vec<Vec<f64>>,
    /// Per-feature scale used for standardized L1 distances.
    pub scales: Vec<f64>,
    pub target: CfTarget,
}

impl CfConstraints {
    /// Domains are the distinct observed training values of each continuous
    /// feature and the three genotype levels otherwise.
    pub fn from_train(train: &Dataset, mutable: Vec<bool>, target: CfTarget) -> Result<Self> {
        let domains = (0..train.n_features())
            .map(|j| match train.feature_kinds[j] {
                FeatureKind::Genotype => GENOTYPE_LEVELS.to_vec(),
                FeatureKind::Continuous => {
                    let mut v = train.column(j);
                    v.sort_by(f64::total_cmp);
                    v.dedup_by(|a, b| same_value(*a, *b));
                    v
                }
            })
            .collect();
        let c = CfConstraints {
            mutable,
            domains,
            scales: train.feature_scales(),
            target,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn all_mutable(train: &Dataset, target: CfTarget) -> Result<Self> {
        Self::from_train(train, vec![true; train.n_features()], target)
    }

    /// Only the listed features may change.
    pub fn only(train: &Dataset, features: &[usize], target: CfTarget) -> Result<Self> {
        let mut mask = vec![false; train.n_features()];
        for &j in features {
            *mask.get_mut(j).ok_or(Error::Dimension {
                expected: train.n_features(),
                got: j,
            })? = true;
        }
        Self::from_train(train, mask, target)
    }

    /// Every feature except the listed ones may change.
    pub fn all_except(train: &Dataset, fixed: &[usize], target: CfTarget) -> Result<Self> {
        let mut mask = vec![true; train.n_features()];
        for &j in fixed {
            *mask.get_mut(j).ok_or(Error::Dimension {
                expected: train.n_features(),
                got: j,
            })? = false;
        }
        Self::from_train(train, mask, target)
    }

    pub fn with_mutable(&self, mutable: Vec<bool>) -> Result<Self> {
        let c = CfConstraints {
            mutable,
            ..self.clone()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n_features(&self) -> usize {
        self.mutable.len()
    }

    pub fn mutable_features(&self) -> Vec<usize> {
        (0..self.mutable.len()).filter(|&j| self.mutable[j]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mutable.len();
        if self.domains.len() != d || self.scales.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: self.domains.len().min(self.scales.len()),
            });
        }
        if !self.mutable.iter().any(|&m| m) {
            return Err(Error::Config("at least one feature must be mutable".into()));
        }
        if self.domains.iter().any(|v| v.is_empty()) {
            return Err(Error::Config("every feature needs a non-empty domain".into()));
        }
        Ok(())
    }

    fn satisfied(&self, original: usize, class: usize) -> bool {
        match self.target {
            CfTarget::Flip => class != original,
            CfTarget::Class(c) => class == c,
        }
    }

    /// Positive when the target is reached, negative otherwise.
    fn margin(&self, original: usize, probs: &[f64]) -> f64 {
        let best_except = |skip: usize| {
            probs
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &p)| p)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        match self.target {
            CfTarget::Flip => best_except(original) - probs[original],
            CfTarget::Class(c) => probs[c] - best_except(c),
        }
    }

    fn l1(&self, x: &[f64], row: &[f64]) -> f64 {
        x.iter().zip(row).zip(&self.scales).map(|((a, b), s)| (a - b).abs() / s).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub original: Vec<f64>,
    pub modified: Vec<f64>,
    pub changed: Vec<usize>,
    pub original_class: usize,
    pub cf_class: usize,
    pub valid: bool,
    pub sparsity: usize,
    /// Standardized L1 distance to the original.
    pub l1_distance: f64,
}

impl Counterfactual {
    pub fn key(&self) -> Vec<i64> {
        row_key(&self.modified)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub tournament: usize,
    pub lambda_sparsity: f64,
    pub lambda_distance: f64,
    pub elite: usize,
    /// Stop early once enough valid candidates exist and the best fitness has
    /// not improved for this many generations.
    pub patience: Option<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 100,
            mutation_rate: 0.2,
            tournament: 3,
            lambda_sparsity: 0.1,
            lambda_distance: 0.05,
            elite: 2,
            patience: Some(25),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, reason| {
            Err(Error::Hyperparameter {
                name,
                value,
                reason,
            })
        };
        if self.population < 2 {
            return bad("population", self.population as f64, "must be at least 2");
        }
        if self.tournament == 0 {
            return bad("tournament", 0.0, "must be positive");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate", self.mutation_rate, "must lie in [0, 1]");
        }
        if self.elite >= self.population {
            return bad("elite", self.elite as f64, "must be below the population size");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiceConfig {
    /// Search settings for the candidate pool.
    pub ga: GaConfig,
    pub lambda_validity: f64,
    pub lambda_proximity: f64,
    pub lambda_diversity: f64,
    /// Hinge target for the validity margin.
    pub hinge_margin: f64,
    pub pool_size: usize,
    pub swap_passes: usize,
}

impl Default for DiceConfig {
    fn default() -> Self {
        DiceConfig {
            ga: GaConfig::default(),
            lambda_validity: 1.0,
            lambda_proximity: 0.5,
            lambda_diversity: 1.0,
            hinge_margin: 0.05,
            pool_size: 100,
            swap_passes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "generator")]
pub enum CfGenerator {
    PermuteAttack(GaConfig),
    Dice(DiceConfig),
    /// Enumerates every combination of domain values of the mutable features.
    Exhaustive { max_candidates: usize },
}

impl CfGenerator {
    pub fn name(&self) -> &'static str {
        match self {
            CfGenerator::PermuteAttack(_) => "permute_attack",
            CfGenerator::Dice(_) => "dice",
            CfGenerator::Exhaustive { .. } => "exhaustive",
        }
    }

    pub fn generate<M: ProbabilityModel + ?Sized>(
        &self,
        model: &M,
        x: &[f64],
        cons: &CfConstraints,
        n_cf: usize,
        seed: u64,
    ) -> Result<Vec<Counterfactual>> {
        match self {
            CfGenerator::PermuteAttack(cfg) => permute_attack(model, x, cons, n_cf, cfg, seed),
            CfGenerator::Dice(cfg) => dice_generate(model, x, cons, n_cf, cfg, seed),
            CfGenerator::Exhaustive { max_candidates } => exhaustive(model, x, cons, n_cf, *max_candidates),
        }
    }
}

#[derive(Debug, Clone)]
struct Scored {
    row: Vec<f64>,
    class: usize,
    valid: bool,
    margin: f64,
    sparsity: usize,
    l1: f64,
    fitness: f64,
}

/// Shared state of one search: the instance, its constraints and a
/// prediction cache keyed by quantized rows.
struct Search<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    cons: &'a CfConstraints,
    original_class: usize,
    lambda_sparsity: f64,
    lambda_distance: f64,
    cache: HashMap<Vec<i64>, Vec<f64>>,
}

impl<'a, M: ProbabilityModel + ?Sized> Search<'a, M> {
    fn new(model: &'a M, x: &'a [f64], cons: &'a CfConstraints, ls: f64, ld: f64) -> Result<Self> {
        cons.validate()?;
        if x.len() != model.n_features() || cons.n_features() != x.len() {
            return Err(Error::Dimension {
                expected: model.n_features(),
                got: x.len(),
            });
        }
        if let CfTarget::Class(c) = cons.target {
            if c >= model.n_classes() {
                return Err(Error::UnknownLabel(format!("class id {c}")));
            }
        }
        Ok(Search {
            model,
            x,
            cons,
            original_class: model.predict_class(x),
            lambda_sparsity: ls,
            lambda_distance: ld,
            cache: HashMap::new(),
        })
    }

    /// Snap genes equal to the original (after quantization) back to it and
    /// keep immutable genes fixed.
    fn canonical(&self, mut row: Vec<f64>) -> Vec<f64> {
        for j in 0..row.len() {
            if !self.cons.mutable[j] || same_value(row[j], self.x[j]) {
                row[j] = self.x[j];
            }
        }
        row
    }

    fn score(&mut self, row: Vec<f64>) -> Scored {
        let key = row_key(&row);
        let probs = match self.cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                let p = self.model.predict_proba_row(&row);
                self.cache.insert(key, p.clone());
                p
            }
        };
        let class = argmax(&probs);
        let valid = self.cons.satisfied(self.original_class, class);
        let margin = self.cons.margin(self.original_class, &probs);
        let sparsity = row.iter().zip(self.x).filter(|(a, b)| a != b).count();
        let l1 = self.cons.l1(self.x, &row);
        let fitness = valid as u8 as f64 + margin.min(0.0)
            - self.lambda_sparsity * sparsity as f64
            - self.lambda_distance * l1;
        Scored {
            row,
            class,
            valid,
            margin,
            sparsity,
            l1,
            fitness,
        }
    }

    fn random_gene(&self, j: usize, rng: &mut SeedRng) -> f64 {
        *self.cons.domains[j].choose(rng).expect("validated non-empty domain")
    }

    fn mutate(&self, row: &mut [f64], rate: f64, rng: &mut SeedRng) {
        for j in 0..row.len() {
            if self.cons.mutable[j] && rng.random::<f64>() < rate {
                row[j] = if rng.random::<bool>() {
                    self.x[j]
                } else {
                    self.random_gene(j, rng)
                };
            }
        }
    }

    fn to_cf(&self, s: &Scored) -> Counterfactual {
        Counterfactual {
            original: self.x.to_vec(),
            modified: s.row.clone(),
            changed: (0..s.row.len()).filter(|&j| s.row[j] != self.x[j]).collect(),
            original_class: self.original_class,
            cf_class: s.class,
            valid: s.valid,
            sparsity: s.sparsity,
            l1_distance: s.l1,
        }
    }

    /// Revert changed genes one at a time while the candidate stays valid.
    fn polish(&mut self, s: Scored) -> Scored {
        let mut best = s;
        for j in 0..best.row.len() {
            if best.row[j] == self.x[j] {
                continue;
            }
            let mut trial = best.row.clone();
            trial[j] = self.x[j];
            let t = self.score(trial);
            if t.valid {
                best = t;
            }
        }
        best
    }

    /// Evolves a population and returns every distinct valid row seen,
    /// keyed by quantized row.
    fn evolve(&mut self, cfg: &GaConfig, uniform_init: bool, wanted: usize, rng: &mut SeedRng) -> BTreeMap<Vec<i64>, Scored> {
        let mutable = self.cons.mutable_features();
        let mut archive: BTreeMap<Vec<i64>, Scored> = BTreeMap::new();
        let mut pop: Vec<Scored> = (0..cfg.population)
            .map(|_| {
                let mut row = self.x.to_vec();
                if uniform_init {
                    for &j in &mutable {
                        row[j] = self.random_gene(j, rng);
                    }
                } else {
                    self.mutate(&mut row, cfg.mutation_rate, rng);
                    let j = *mutable.choose(rng).expect("validated mutable feature");
                    row[j] = self.random_gene(j, rng);
                }
                let row = self.canonical(row);
                self.score(row)
            })
            .collect();
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0usize;
        for _ in 0..cfg.generations {
            for s in &pop {
                if s.valid {
                    archive.entry(row_key(&s.row)).or_insert_with(|| s.clone());
                }
            }
            pop.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then_with(|| row_key(&a.row).cmp(&row_key(&b.row))));
            if pop[0].fitness > best + 1e-12 {
                best = pop[0].fitness;
                stale = 0;
            } else {
                stale += 1;
            }
            if let Some(p) = cfg.patience {
                if stale >= p && archive.len() >= wanted {
                    break;
                }
            }
            let mut next: Vec<Scored> = pop[..cfg.elite].to_vec();
            while next.len() < cfg.population {
                let a = tournament(&pop, cfg.tournament, rng);
                let b = tournament(&pop, cfg.tournament, rng);
                let mut child: Vec<f64> = (0..self.x.len())
                    .map(|j| if rng.random::<bool>() { pop[a].row[j] } else { pop[b].row[j] })
                    .collect();
                self.mutate(&mut child, cfg.mutation_rate, rng);
                let child = self.canonical(child);
                next.push(self.score(child));
            }
            pop = next;
        }
        for s in &pop {
            if s.valid {
                archive.entry(row_key(&s.row)).or_insert_with(|| s.clone());
            }
        }
        archive
    }
}

fn tournament(pop: &[Scored], size: usize, rng: &mut SeedRng) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].fitness > pop[best].fitness {
            best = c;
        }
    }
    best
}

fn by_fitness(a: &Scored, b: &Scored) -> std::cmp::Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| row_key(&a.row).cmp(&row_key(&b.row)))
}

/// Genetic search for up to `n_cf` distinct valid counterfactuals, best
/// fitness first. Genes take values from the feature domains. An empty
/// result means no valid counterfactual was found.
pub fn permute_attack<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    cons: &CfConstraints,
    n_cf: usize,
    cfg: &GaConfig,
    seed: u64,
) -> Result<Vec<Counterfactual>> {
    cfg.validate()?;
    let mut search = Search::new(model, x, cons, cfg.lambda_sparsity, cfg.lambda_distance)?;
    if n_cf == 0 {
        return Ok(Vec::new());
    }
    let mut rng = seed::rng(seed);
    let archive = search.evolve(cfg, false, n_cf, &mut rng);
    let mut ranked: Vec<Scored> = archive.into_values().collect();
    ranked.sort_by(by_fitness);
    let mut out: BTreeMap<Vec<i64>, Scored> = BTreeMap::new();
    for s in ranked {
        if out.len() >= n_cf {
            break;
        }
        let p = search.polish(s);
        out.entry(row_key(&p.row)).or_insert(p);
    }
    let mut result: Vec<Scored> = out.into_values().collect();
    result.sort_by(by_fitness);
    Ok(result.iter().map(|s| search.to_cf(s)).collect())
}

struct SetLoss<'c> {
    cfg: &'c DiceConfig,
    cons: &'c CfConstraints,
}

impl SetLoss<'_> {
    fn eval(&self, set: &[&Scored]) -> f64 {
        let hinge: f64 = set.iter().map(|s| (self.cfg.hinge_margin - s.margin).max(0.0)).sum();
        let proximity: f64 = set.iter().map(|s| s.l1).sum();
        let mut pair_sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                pair_sum += set[a]
                    .row
                    .iter()
                    .zip(&set[b].row)
                    .zip(&self.cons.scales)
                    .map(|((u, v), s)| (u - v).abs() / s)
                    .sum::<f64>();
                pairs += 1;
            }
        }
        let diversity = if pairs == 0 { 0.0 } else { pair_sum / pairs as f64 };
        self.cfg.lambda_validity * hinge + self.cfg.lambda_proximity * proximity - self.cfg.lambda_diversity * diversity
    }
}

/// Diversity-aware counterfactual set: a candidate pool from a genetic search
/// with random initialization, then greedy selection and swap refinement of
/// `n_cf` members minimizing hinge validity + proximity - mean pairwise
/// distance. Invalid members are dropped from the returned set.
pub fn dice_generate<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    cons: &CfConstraints,
    n_cf: usize,
    cfg: &DiceConfig,
    seed: u64,
) -> Result<Vec<Counterfactual>> {
    cfg.ga.validate()?;
    let mut search = Search::new(model, x, cons, cfg.ga.lambda_sparsity, cfg.ga.lambda_distance)?;
    if n_cf == 0 {
        return Ok(Vec::new());
    }
    let mut rng = seed::rng(seed);
    let mut pool: Vec<Scored> = search
        .evolve(&cfg.ga, true, n_cf.max(cfg.pool_size.min(4 * n_cf)), &mut rng)
        .into_values()
        .collect();
    pool.sort_by(by_fitness);
    pool.truncate(cfg.pool_size.max(n_cf));
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let loss = SetLoss { cfg, cons };
    let size = n_cf.min(pool.len());
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    while chosen.len() < size {
        let mut best: Option<(f64, usize)> = None;
        for c in 0..pool.len() {
            if chosen.contains(&c) {
                continue;
            }
            let mut set: Vec<&Scored> = chosen.iter().map(|&i| &pool[i]).collect();
            set.push(&pool[c]);
            let l = loss.eval(&set);
            if best.is_none_or(|(b, _)| l < b - 1e-12) {
                best = Some((l, c));
            }
        }
        chosen.push(best.expect("pool larger than chosen set").1);
    }
    for _ in 0..cfg.swap_passes {
        let mut improved = false;
        for slot in 0..chosen.len() {
            let current = loss.eval(&chosen.iter().map(|&i| &pool[i]).collect::<Vec<_>>());
            for c in 0..pool.len() {
                if chosen.contains(&c) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial[slot] = c;
                let l = loss.eval(&trial.iter().map(|&i| &pool[i]).collect::<Vec<_>>());
                if l < current - 1e-12 {
                    chosen = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(chosen
        .iter()
        .map(|&i| &pool[i])
        .filter(|s| s.valid)
        .map(|s| search.to_cf(s))
        .collect())
}

/// Every combination of domain values over the mutable features; returns the
/// `n_cf` valid ones with the fewest changes, then smallest distance.
pub fn exhaustive<M: ProbabilityModel + ?Sized>(
    model: &M,
    x: &[f64],
    cons: &CfConstraints,
    n_cf: usize,
    max_candidates: usize,
) -> Result<Vec<Counterfactual>> {
    let mut search = Search::new(model, x, cons, 0.0, 0.0)?;
    let mutable = cons.mutable_features();
    // Keeping the original value is always a candidate, even off-domain.
    let choices: Vec<Vec<f64>> = mutable
        .iter()
        .map(|&j| {
            let mut values = cons.domains[j].clone();
            if !values.iter().any(|&v| same_value(v, x[j])) {
                values.push(x[j]);
            }
            values
        })
        .collect();
    let total = choices
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
        .filter(|&t| t <= max_candidates)
        .ok_or(Error::TooManyFeatures {
            features: mutable.len(),
            limit: max_candidates,
        })?;
    let mut found: BTreeMap<Vec<i64>, Scored> = BTreeMap::new();
    let mut idx = vec![0usize; mutable.len()];
    for _ in 0..total {
        let mut row = x.to_vec();
        for (k, &j) in mutable.iter().enumerate() {
            row[j] = choices[k][idx[k]];
        }
        let s = search.score(search.canonical(row));
        if s.valid {
            found.entry(row_key(&s.row)).or_insert(s);
        }
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    let mut ranked: Vec<Scored> = found.into_values().collect();
    ranked.sort_by(|a, b| {
        a.sparsity
            .cmp(&b.sparsity)
            .then(a.l1.total_cmp(&b.l1))
            .then_with(|| row_key(&a.row).cmp(&row_key(&b.row)))
    });
    ranked.truncate(n_cf);
    Ok(ranked.iter().map(|s| search.to_cf(s)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub feature: usize,
    pub feature_name: String,
    pub count: usize,
    /// Sum of `x'_j - x_j` over counterfactuals.
    pub net_change: f64,
    /// Sign of `net_change`: -1, 0 or 1.
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRanking {
    pub generator: CfGenerator,
    pub seed: u64,
    pub instances: usize,
    pub found: usize,
    /// Test rows for which no counterfactual was found.
    pub skipped: Vec<usize>,
    pub entries: Vec<FrequencyEntry>,
}

/// One counterfactual per test row; features ranked by how often they were
/// changed (ties to the lower index).
pub fn cf_frequency_ranking<M: ProbabilityModel + ?Sized>(
    model: &M,
    test: &Dataset,
    cons: &CfConstraints,
    generator: &CfGenerator,
    seed: u64,
) -> Result<FrequencyRanking> {
    let results: Vec<Option<Counterfactual>> = test
        .features
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            generator
                .generate(model, x, cons, 1, seed::derive(seed, &[i as u64]))
                .map(|v| v.into_iter().next())
        })
        .collect::<Result<_>>()?;
    let d = test.n_features();
    let mut count = vec![0usize; d];
    let mut net = vec![0.0; d];
    let mut skipped = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            None => skipped.push(i),
            Some(cf) => {
                for &j in &cf.changed {
                    count[j] += 1;
                    net[j] += cf.modified[j] - cf.original[j];
                }
            }
        }
    }
    let mut entries: Vec<FrequencyEntry> = (0..d)
        .map(|j| FrequencyEntry {
            feature: j,
            feature_name: test.feature_names[j].clone(),
            count: count[j],
            net_change: net[j],
            direction: if net[j] > 0.0 {
                1
            } else if net[j] < 0.0 {
                -1
            } else {
                0
            },
        })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
    Ok(FrequencyRanking {
        generator: generator.clone(),
        seed,
        instances: test.n_samples(),
        found: test.n_samples() - skipped.len(),
        skipped,
        entries,
    })
}

/// Checks every invariant a returned counterfactual must satisfy.
pub fn check_counterfactual<M: ProbabilityModel + ?Sized>(
    model: &M,
    cons: &CfConstraints,
    cf: &Counterfactual,
) -> std::result::Result<(), String> {
    let changed: Vec<usize> = (0..cf.original.len())
        .filter(|&j| cf.modified[j] != cf.original[j])
        .collect();
    if changed != cf.changed {
        return Err(format!("changed set {:?} != {:?}", cf.changed, changed));
    }
    if cf.sparsity != changed.len() {
        return Err("sparsity mismatch".into());
    }
    if let Some(&j) = changed.iter().find(|&&j| !cons.mutable[j]) {
        return Err(format!("immutable feature {j} changed"));
    }
    for &j in &changed {
        if !cons.domains[j].iter().any(|&v| same_value(v, cf.modified[j])) {
            return Err(format!("feature {j} left its domain"));
        }
    }
    let class = model.predict_class(&cf.modified);
    if class != cf.cf_class {
        return Err(format!("re-prediction {class} != stored {}", cf.cf_class));
    }
    if !cf.valid || !cons.satisfied(cf.original_class, class) {
        return Err("target not reached".into());
    }
    Ok(())
}
