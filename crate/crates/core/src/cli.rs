//! Command-line driver. Each subcommand reads a JSON run config, consumes the
//! artifacts of earlier stages from the output directory and writes its own.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, sha256_hex};
use crate::attribution::{
    background_sample, global_shap_ranking, lime_explain, partial_dependence, Attribution, AttributionMethod,
    LimeConfig, PdpGrid,
};
use crate::causality::{unified_report, ContextMode, UnifiedConfig};
use crate::counterfactual::{cf_frequency_ranking, CfConstraints, CfGenerator, CfTarget};
use crate::dataset::{
    load_csv, residualize, standardize, stratified_split_indices, synthesize, write_csv, CovariateSpec, Dataset,
    FeatureKind, LoadOptions, SynthConfig,
};
use crate::ensemble::{fit_bagged_ovo, BaggedOvoEnsemble, PairModel};
use crate::error::{Error, Result};
use crate::evaluation::{nested_cv, paired_t_test, split_scores, CvSummary, Metric, SplitScores, TTest};
use crate::models::{Hyperparameters, ModelKind, ProbabilityModel};
use crate::{plot, seed};

pub const FORMAT_VERSION: u32 = 1;
const LABEL_COLUMN: &str = "diagnosis";

#[derive(Debug, Parser)]
#[command(name = "unixplain", version, about = "Explainable multiclass classification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainMethod {
    Shap,
    Lime,
    Pdp,
    Gini,
    CfFrequency,
}

impl ExplainMethod {
    fn stem(self) -> &'static str {
        match self {
            ExplainMethod::Shap => "shap",
            ExplainMethod::Lime => "lime",
            ExplainMethod::Pdp => "pdp",
            ExplainMethod::Gini => "gini",
            ExplainMethod::CfFrequency => "cf_frequency",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(Common),
    /// Residualize, standardize and split the dataset.
    Preprocess(Common),
    /// Fit the bagged one-vs-one ensemble on the training split.
    Train(Common),
    /// Single-split and nested cross-validation scores.
    Evaluate(Common),
    /// Explain the trained model's class-pair subproblem.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: ExplainMethod,
    },
    /// Necessity and sufficiency of top-ranked features.
    Unify(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth(c)
            | Command::Preprocess(c)
            | Command::Train(c)
            | Command::Evaluate(c)
            | Command::Unify(c) => c,
            Command::Explain { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Preprocess(_) => "preprocess",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Explain { .. } => "explain",
            Command::Unify(_) => "unify",
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
    #[serde(default)]
    pub causality: CausalityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synth(SynthConfig),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub label_column: String,
    #[serde(default)]
    pub class_order: Option<Vec<String>>,
    #[serde(default)]
    pub genotype_columns: Vec<String>,
    #[serde(default)]
    pub continuous_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Covariate columns regressed out of every continuous feature; empty
    /// disables residualization.
    pub covariates: Vec<String>,
    /// Class whose statistics drive residualization and z-scoring; the first
    /// class when unset.
    pub reference_class: Option<String>,
    pub standardize: bool,
    pub test_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            covariates: Vec::new(),
            reference_class: None,
            standardize: true,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    /// Grid for nested cross-validation; `[hyperparameters]` when empty.
    pub grid: Vec<Hyperparameters>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::RandomForest,
            hyperparameters: Hyperparameters::default(),
            grid: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub nested_cv: bool,
    pub outer_k: usize,
    pub inner_k: usize,
    /// Classifier kinds to evaluate; `[model.kind]` when empty.
    pub kinds: Vec<ModelKind>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            nested_cv: true,
            outer_k: 5,
            inner_k: 4,
            kinds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Class pair whose subproblem is explained; the last two classes when unset.
    pub pair: Option<[String; 2]>,
    /// Explained class within the pair; the pair's higher-id class when unset.
    pub target: Option<String>,
    pub max_instances: usize,
    pub background_size: usize,
    pub shap_samples: usize,
    pub lime: LimeConfig,
    /// Rows (within the explained test rows) explained by LIME.
    pub lime_instances: Vec<usize>,
    /// Features for partial dependence; the top three by Gini when empty.
    pub pdp_features: Vec<usize>,
    pub pdp_grid: PdpGrid,
    pub cf_generator: CfGenerator,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            pair: None,
            target: None,
            max_instances: 50,
            background_size: 100,
            shap_samples: 512,
            lime: LimeConfig::default(),
            lime_instances: vec![0],
            pdp_features: Vec::new(),
            pdp_grid: PdpGrid::default(),
            cf_generator: CfGenerator::PermuteAttack(Default::default()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingSource {
    Shap,
    Gini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CausalityConfig {
    pub ranking: RankingSource,
    pub top_k: usize,
    pub n_cf_values: Vec<usize>,
    pub generators: Vec<CfGenerator>,
    pub context_mode: ContextMode,
    pub max_contexts: Option<usize>,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        let u = UnifiedConfig::default();
        CausalityConfig {
            ranking: RankingSource::Shap,
            top_k: u.top_k,
            n_cf_values: u.n_cf_values,
            generators: u.generators,
            context_mode: u.context_mode,
            max_contexts: Some(40),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.preprocess.test_fraction > 0.0 && self.preprocess.test_fraction < 1.0) {
            return Err(Error::Config("preprocess.test_fraction must lie in (0, 1)".into()));
        }
        self.model.hyperparameters.validate()?;
        for hp in &self.model.grid {
            hp.validate()?;
        }
        if self.evaluation.outer_k < 2 || self.evaluation.inner_k < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if self.causality.n_cf_values.iter().any(|&n| n == 0) {
            return Err(Error::Config("causality.n_cf_values must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (after command-line overrides).
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

// ---------------------------------------------------------------------------
// Artifacts

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub format_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub payload: T,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    /// Artifact path (relative to the run directory) to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

struct Run {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    command: &'static str,
    written: BTreeMap<String, String>,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, payload: &T) -> Result<()> {
        let env = Envelope {
            format_version: FORMAT_VERSION,
            command: self.command.to_string(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            payload,
        };
        let sha = artifact::write_json(self.path(rel), &env)?;
        self.written.insert(rel.to_string(), sha);
        Ok(())
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        self.written.insert(rel.to_string(), sha256_hex(text.as_bytes()));
        Ok(())
    }

    fn record(&mut self, rel: &str) -> Result<()> {
        let sha = artifact::file_sha256(self.path(rel))?;
        self.written.insert(rel.to_string(), sha);
        Ok(())
    }

    fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let p = self.path(rel);
        if !p.exists() {
            return Err(Error::MissingArtifact(p));
        }
        let env: Envelope<T> = artifact::read_json(&p)?;
        if env.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: env.format_version,
                expected: FORMAT_VERSION,
            });
        }
        Ok(env.payload)
    }

    fn finish(self) -> Result<()> {
        let path = self.out.join("run_manifest.json");
        let mut manifest: RunManifest = if path.exists() {
            artifact::read_json(&path)?
        } else {
            RunManifest::default()
        };
        if manifest.config_hash != self.hash {
            manifest.artifacts.clear();
        }
        manifest.format_version = FORMAT_VERSION;
        manifest.config_hash = self.hash;
        manifest.seed = self.cfg.seed;
        manifest.artifacts.extend(self.written);
        artifact::write_json(&path, &manifest)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetManifest {
    source: String,
    csv: String,
    csv_sha256: String,
    n_samples: usize,
    class_names: Vec<String>,
    class_counts: Vec<usize>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    synth: Option<SynthConfig>,
    truth: Option<crate::dataset::SynthTruth>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PreprocessInfo {
    class_names: Vec<String>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    covariates: Vec<String>,
    reference_class: String,
    standardized: bool,
    train_indices: Vec<usize>,
    test_indices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainInfo {
    model_kind: ModelKind,
    hyperparameters: Hyperparameters,
    train_rows: usize,
    bundle_manifest_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierEvaluation {
    pub model_kind: ModelKind,
    pub split: SplitScores,
    pub cv: Option<CvSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KindComparison {
    pub a: ModelKind,
    pub b: ModelKind,
    pub metric: Metric,
    pub test: TTest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classifiers: Vec<ClassifierEvaluation>,
    pub comparisons: Vec<KindComparison>,
}

// ---------------------------------------------------------------------------
// Entry points

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are printed to stderr as `{"error": kind, "message": text}`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    cfg.output_dir = None;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut run = Run {
        hash: cfg.hash()?,
        cfg,
        out,
        command: cli.command.name(),
        written: BTreeMap::new(),
    };
    let body = |run: &mut Run| match &cli.command {
        Command::Synth(_) => cmd_synth(run),
        Command::Preprocess(_) => cmd_preprocess(run),
        Command::Train(_) => cmd_train(run),
        Command::Evaluate(_) => cmd_evaluate(run),
        Command::Explain { method, .. } => cmd_explain(run, *method),
        Command::Unify(_) => cmd_unify(run),
    };
    match common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| body(&mut run))?,
        None => body(&mut run)?,
    }
    run.finish()
}

fn cmd_synth(run: &mut Run) -> Result<()> {
    let DataSource::Synth(synth) = &run.cfg.data else {
        return Err(Error::Config("synth needs a synth data source".into()));
    };
    let mut synth = synth.clone();
    synth.seed = seed::derive(run.cfg.seed, &[0x5EED]);
    let data = synthesize(&synth)?;
    write_csv(&data.dataset, run.path("dataset.csv"), LABEL_COLUMN)?;
    run.record("dataset.csv")?;
    let manifest = dataset_manifest(&data.dataset, run, "synth", Some(synth), Some(data.truth))?;
    run.write_json("dataset_manifest.json", &manifest)
}

fn dataset_manifest(
    ds: &Dataset,
    run: &Run,
    source: &str,
    synth: Option<SynthConfig>,
    truth: Option<crate::dataset::SynthTruth>,
) -> Result<DatasetManifest> {
    Ok(DatasetManifest {
        source: source.into(),
        csv: "dataset.csv".into(),
        csv_sha256: artifact::file_sha256(run.path("dataset.csv"))?,
        n_samples: ds.n_samples(),
        class_names: ds.class_names.clone(),
        class_counts: ds.class_counts(),
        feature_names: ds.feature_names.clone(),
        feature_kinds: ds.feature_kinds.clone(),
        synth,
        truth,
    })
}

fn load_raw(run: &Run) -> Result<Dataset> {
    match &run.cfg.data {
        DataSource::Synth(_) => {
            let manifest: DatasetManifest = run.read_json("dataset_manifest.json")?;
            let path = run.path("dataset.csv");
            if artifact::file_sha256(&path)? != manifest.csv_sha256 {
                return Err(Error::Checksum(path));
            }
            load_csv(&path, &load_options(LABEL_COLUMN, &manifest.class_names, &manifest.feature_names, &manifest.feature_kinds))
        }
        DataSource::Csv(src) => {
            let mut opts = LoadOptions::new(src.label_column.clone());
            opts.class_order = src.class_order.clone();
            for c in &src.genotype_columns {
                opts.kind_overrides.insert(c.clone(), FeatureKind::Genotype);
            }
            for c in &src.continuous_columns {
                opts.kind_overrides.insert(c.clone(), FeatureKind::Continuous);
            }
            load_csv(&src.path, &opts)
        }
    }
}

fn load_options(label: &str, classes: &[String], names: &[String], kinds: &[FeatureKind]) -> LoadOptions {
    let mut opts = LoadOptions::new(label);
    opts.class_order = Some(classes.to_vec());
    opts.kind_overrides = names.iter().cloned().zip(kinds.iter().copied()).collect();
    opts
}

fn class_id(ds_classes: &[String], name: &str) -> Result<usize> {
    ds_classes
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::UnknownLabel(name.to_string()))
}

fn label_column(cfg: &RunConfig) -> &str {
    match &cfg.data {
        DataSource::Csv(src) => &src.label_column,
        DataSource::Synth(_) => LABEL_COLUMN,
    }
}

fn cmd_preprocess(run: &mut Run) -> Result<()> {
    let mut ds = load_raw(run)?;
    let p = run.cfg.preprocess.clone();
    let reference_name = p.reference_class.clone().unwrap_or_else(|| ds.class_names[0].clone());
    let reference = class_id(&ds.class_names, &reference_name)?;
    if !p.covariates.is_empty() {
        let columns = p
            .covariates
            .iter()
            .map(|c| {
                ds.feature_names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| Error::MissingColumn(c.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        ds = residualize(
            &ds,
            &CovariateSpec {
                covariate_columns: columns,
                reference_class: reference,
            },
        )?;
    }
    if p.standardize {
        ds = standardize(&ds, reference)?;
    }
    let (train, test) = stratified_split_indices(&ds, p.test_fraction, seed::derive(run.cfg.seed, &[0x5911]))?;
    write_csv(&ds, run.path("preprocessed.csv"), label_column(&run.cfg))?;
    run.record("preprocessed.csv")?;
    let info = PreprocessInfo {
        class_names: ds.class_names.clone(),
        feature_names: ds.feature_names.clone(),
        feature_kinds: ds.feature_kinds.clone(),
        covariates: p.covariates,
        reference_class: reference_name,
        standardized: p.standardize,
        train_indices: train,
        test_indices: test,
    };
    run.write_json("preprocess.json", &info)
}

struct Prepared {
    all: Dataset,
    train: Dataset,
    test: Dataset,
}

fn load_prepared(run: &Run) -> Result<Prepared> {
    let info: PreprocessInfo = run.read_json("preprocess.json")?;
    let path = run.path("preprocessed.csv");
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let all = load_csv(
        &path,
        &load_options(label_column(&run.cfg), &info.class_names, &info.feature_names, &info.feature_kinds),
    )?;
    Ok(Prepared {
        train: all.subset(&info.train_indices),
        test: all.subset(&info.test_indices),
        all,
    })
}

fn cmd_train(run: &mut Run) -> Result<()> {
    let data = load_prepared(run)?;
    let m = run.cfg.model.clone();
    let ens = fit_bagged_ovo(&data.train, m.kind, &m.hyperparameters, seed::derive(run.cfg.seed, &[0x7A1]))?;
    let sha = ens.save_bundle(run.path("model"))?;
    for entry in std::fs::read_dir(run.path("model")).map_err(|e| Error::io(run.path("model"), e))? {
        let entry = entry.map_err(|e| Error::io(run.path("model"), e))?;
        let name = format!("model/{}", entry.file_name().to_string_lossy());
        if name != "model/train.json" {
            run.record(&name)?;
        }
    }
    let info = TrainInfo {
        model_kind: m.kind,
        hyperparameters: m.hyperparameters.clone(),
        train_rows: data.train.n_samples(),
        bundle_manifest_sha256: sha,
    };
    run.write_json("model/train.json", &info)
}

fn cmd_evaluate(run: &mut Run) -> Result<()> {
    let data = load_prepared(run)?;
    let cfg = &run.cfg;
    let kinds = if cfg.evaluation.kinds.is_empty() {
        vec![cfg.model.kind]
    } else {
        cfg.evaluation.kinds.clone()
    };
    let grid = if cfg.model.grid.is_empty() {
        vec![cfg.model.hyperparameters.clone()]
    } else {
        cfg.model.grid.clone()
    };
    let classifiers = kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let s = seed::derive(cfg.seed, &[0xE7A, k as u64]);
            let split = split_scores(&data.train, &data.test, kind, &cfg.model.hyperparameters, seed::derive(s, &[0]))?;
            let cv = if cfg.evaluation.nested_cv {
                Some(nested_cv(
                    &data.all,
                    kind,
                    &grid,
                    cfg.evaluation.outer_k,
                    cfg.evaluation.inner_k,
                    seed::derive(s, &[1]),
                )?)
            } else {
                None
            };
            Ok(ClassifierEvaluation {
                model_kind: kind,
                split,
                cv,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    for a in 0..classifiers.len() {
        for b in a + 1..classifiers.len() {
            if let (Some(ca), Some(cb)) = (&classifiers[a].cv, &classifiers[b].cv) {
                for metric in [Metric::BalancedAccuracy, Metric::WeightedF1] {
                    comparisons.push(KindComparison {
                        a: classifiers[a].model_kind,
                        b: classifiers[b].model_kind,
                        metric,
                        test: paired_t_test(&ca.fold_values(metric), &cb.fold_values(metric))?,
                    });
                }
            }
        }
    }
    run.write_json("cv_summary.json", &EvaluationReport { classifiers, comparisons })
}

/// The trained ensemble and the rows of the explained class pair.
struct PairContext {
    ens: BaggedOvoEnsemble,
    negative: usize,
    positive: usize,
    target: usize,
    train: Dataset,
    test: Dataset,
}

impl PairContext {
    fn model(&self) -> Result<PairModel<'_>> {
        self.ens.pair_model(self.negative, self.positive)
    }
}

fn load_pair(run: &Run) -> Result<PairContext> {
    let ens = BaggedOvoEnsemble::load_bundle(run.path("model"))?;
    let data = load_prepared(run)?;
    let names = &data.all.class_names;
    let (a, b) = match &run.cfg.explain.pair {
        Some([a, b]) => (class_id(names, a)?, class_id(names, b)?),
        None if names.len() >= 2 => (names.len() - 2, names.len() - 1),
        None => return Err(Error::Config("need at least two classes".into())),
    };
    if a == b {
        return Err(Error::Config("explain.pair needs two different classes".into()));
    }
    let (negative, positive) = (a.min(b), a.max(b));
    let target = match &run.cfg.explain.target {
        None => 1,
        Some(t) => {
            let id = class_id(names, t)?;
            if id == positive {
                1
            } else if id == negative {
                0
            } else {
                return Err(Error::Config(format!("target {t} is not in the explained pair")));
            }
        }
    };
    let pick = |ds: &Dataset| {
        let rows: Vec<usize> = (0..ds.n_samples())
            .filter(|&i| ds.labels[i] == negative || ds.labels[i] == positive)
            .collect();
        ds.subset(&rows)
    };
    let mut test = pick(&data.test);
    let cap: Vec<usize> = (0..test.n_samples().min(run.cfg.explain.max_instances)).collect();
    test = test.subset(&cap);
    Ok(PairContext {
        ens,
        negative,
        positive,
        target,
        train: pick(&data.train),
        test,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairHeader {
    negative: String,
    positive: String,
    target: String,
    instances: usize,
}

fn header(p: &PairContext) -> PairHeader {
    let names = &p.train.class_names;
    PairHeader {
        negative: names[p.negative].clone(),
        positive: names[p.positive].clone(),
        target: names[if p.target == 1 { p.positive } else { p.negative }].clone(),
        instances: p.test.n_samples(),
    }
}

#[derive(Serialize)]
struct Explained<'a, T> {
    pair: PairHeader,
    feature_names: &'a [String],
    result: T,
}

fn shap_global(run: &Run, p: &PairContext) -> Result<(Attribution, crate::attribution::SummaryPlotData)> {
    let model = p.model()?;
    let e = &run.cfg.explain;
    let bg = background_sample(&p.train, e.background_size, seed::derive(run.cfg.seed, &[0x5A9, 0]));
    global_shap_ranking(&model, &p.test, &bg, p.target, e.shap_samples, seed::derive(run.cfg.seed, &[0x5A9, 1]))
}

fn names_in_order(names: &[String], order: &[usize]) -> Vec<String> {
    order.iter().map(|&j| names[j].clone()).collect()
}

fn cmd_explain(run: &mut Run, method: ExplainMethod) -> Result<()> {
    let p = load_pair(run)?;
    if p.test.is_empty() {
        return Err(Error::Empty("explained test rows"));
    }
    let model = p.model()?;
    let names = p.train.feature_names.clone();
    let stem = method.stem();
    let e = run.cfg.explain.clone();
    let json = format!("explain_{stem}.json");
    match method {
        ExplainMethod::Shap => {
            let (global, summary) = shap_global(run, &p)?;
            let top = global.top(20).to_vec();
            let bars = plot::bar_chart(
                "mean |SHAP value|",
                &names_in_order(&names, &top),
                &top.iter().map(|&j| global.values[j]).collect::<Vec<_>>(),
            );
            run.write_text("shap_bar.svg", &bars)?;
            run.write_text("shap_summary.svg", &plot::summary_plot("SHAP summary", &summary, 20))?;
            run.write_json(&json, &Explained {
                pair: header(&p),
                feature_names: &names,
                result: (global, summary),
            })
        }
        ExplainMethod::Lime => {
            let mut out = Vec::new();
            for &i in &e.lime_instances {
                let x = p.test.features.get(i).ok_or(Error::Dimension {
                    expected: p.test.n_samples(),
                    got: i,
                })?;
                let ex = lime_explain(&model, x, &p.train, p.target, &e.lime, seed::derive(run.cfg.seed, &[0x11E, i as u64]))?;
                let ex = LimeRecord {
                    instance: i,
                    predicted: model.predict_class(x),
                    explanation: ex,
                };
                let labels: Vec<String> = ex.explanation.top.iter().map(|&(j, _)| names[j].clone()).collect();
                let values: Vec<f64> = ex.explanation.top.iter().map(|&(_, v)| v).collect();
                run.write_text(&format!("lime_{i}.svg"), &plot::bar_chart(&format!("LIME, instance {i}"), &labels, &values))?;
                out.push(ex);
            }
            run.write_json(&json, &Explained {
                pair: header(&p),
                feature_names: &names,
                result: out,
            })
        }
        ExplainMethod::Pdp => {
            let features = if e.pdp_features.is_empty() {
                Attribution::global(AttributionMethod::Gini, model.gini_importance()?).top(3).to_vec()
            } else {
                e.pdp_features.clone()
            };
            let mut curves = Vec::new();
            for &j in &features {
                let c = partial_dependence(&model, &p.train, j, &e.pdp_grid, p.target)?;
                run.write_text(
                    &format!("pdp_{j}.svg"),
                    &plot::line_chart(&format!("Partial dependence: {}", c.feature_name), &c.feature_name, "probability", &c.points),
                )?;
                curves.push(c);
            }
            run.write_json(&json, &Explained {
                pair: header(&p),
                feature_names: &names,
                result: curves,
            })
        }
        ExplainMethod::Gini => {
            let a = Attribution::global(AttributionMethod::Gini, model.gini_importance()?);
            let top = a.top(20).to_vec();
            run.write_text(
                "gini_bar.svg",
                &plot::bar_chart("Gini importance", &names_in_order(&names, &top), &top.iter().map(|&j| a.values[j]).collect::<Vec<_>>()),
            )?;
            run.write_json(&json, &Explained {
                pair: header(&p),
                feature_names: &names,
                result: a,
            })
        }
        ExplainMethod::CfFrequency => {
            let cons = CfConstraints::all_mutable(&p.train, CfTarget::Flip)?;
            let r = cf_frequency_ranking(&model, &p.test, &cons, &e.cf_generator, seed::derive(run.cfg.seed, &[0xCF]))?;
            let shown: Vec<_> = r.entries.iter().take(20).collect();
            run.write_text(
                "cf_frequency.svg",
                &plot::bar_chart(
                    "Counterfactual change counts (sign: net direction)",
                    &shown.iter().map(|x| x.feature_name.clone()).collect::<Vec<_>>(),
                    &shown
                        .iter()
                        .map(|x| if x.direction < 0 { -(x.count as f64) } else { x.count as f64 })
                        .collect::<Vec<_>>(),
                ),
            )?;
            run.write_json(&json, &Explained {
                pair: header(&p),
                feature_names: &names,
                result: r,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LimeRecord {
    instance: usize,
    predicted: usize,
    explanation: crate::attribution::LimeExplanation,
}

fn cmd_unify(run: &mut Run) -> Result<()> {
    let bundle = run.path("model");
    if !bundle.join("manifest.json").exists() {
        return Err(Error::MissingModelBundle(bundle));
    }
    let p = load_pair(run)?;
    let model = p.model()?;
    let c = run.cfg.causality.clone();
    let ranking = match c.ranking {
        RankingSource::Shap => shap_global(run, &p)?.0,
        RankingSource::Gini => Attribution::global(AttributionMethod::Gini, model.gini_importance()?),
    };
    let ucfg = UnifiedConfig {
        top_k: c.top_k,
        n_cf_values: c.n_cf_values,
        generators: c.generators,
        target: p.target,
        context_mode: c.context_mode,
        max_contexts: c.max_contexts,
    };
    let report = unified_report(&model, &p.test, &p.train, &ranking.ranking, &ucfg, seed::derive(run.cfg.seed, &[0xCA5]))?;
    let mut labels = Vec::new();
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for g in &report.generators {
        labels = g.queries.iter().map(|q| q.kind.label(&report.feature_names)).collect();
        series.push((format!("{} necessity", g.generator.name()), g.queries.iter().map(|q| q.necessity).collect()));
        series.push((format!("{} sufficiency", g.generator.name()), g.queries.iter().map(|q| q.sufficiency).collect()));
    }
    run.write_text("causality.svg", &plot::grouped_bar_chart("Necessity and sufficiency", &labels, &series))?;
    #[derive(Serialize)]
    struct Unified<'a> {
        pair: PairHeader,
        ranking_source: RankingSource,
        ranking: &'a Attribution,
        report: &'a crate::causality::CausalityReport,
        rows: Vec<crate::causality::ReportRow>,
    }
    run.write_json("causality_report.json", &Unified {
        pair: header(&p),
        ranking_source: c.ranking,
        ranking: &ranking,
        rows: report.rows(),
        report: &report,
    })
}
