//! Tabular datasets: CSV ingestion, covariate residualization, z-scoring
//! against a reference class, stratified splitting and a synthetic generator.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Allowed genotype encodings: zero, one or two copies of the allele.
pub const GENOTYPE_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Genotype,
}

pub fn is_genotype_value(v: f64) -> bool {
    GENOTYPE_LEVELS.contains(&v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Row-major feature matrix, `n_samples` rows of `n_features` values.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Build a dataset and check its invariants (finite values, genotype
    /// encoding, label range). Empty classes are allowed here; use
    /// [`Dataset::check_classes_nonempty`] where every class must be present.
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Dataset {
            features,
            labels,
            feature_names,
            feature_kinds,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.feature_names.len();
        if self.feature_kinds.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: self.feature_kinds.len(),
            });
        }
        if self.labels.len() != self.features.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                got: self.labels.len(),
            });
        }
        for (i, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, column: j });
                }
                if self.feature_kinds[j] == FeatureKind::Genotype && !is_genotype_value(v) {
                    return Err(Error::InvalidGenotype(self.feature_names[j].clone()));
                }
            }
        }
        let k = self.class_names.len();
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= k) {
            return Err(Error::UnknownLabel(bad.to_string()));
        }
        Ok(())
    }

    pub fn check_classes_nonempty(&self) -> Result<()> {
        for (c, &n) in self.class_counts().iter().enumerate() {
            if n == 0 {
                return Err(Error::EmptyClass(self.class_names[c].clone()));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn rows_of_class(&self, class: usize) -> Vec<usize> {
        (0..self.n_samples())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    /// Rows selected by `indices`, in that order. Class list is preserved.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Per-feature population standard deviation; zero spreads map to 1.
    pub fn feature_scales(&self) -> Vec<f64> {
        (0..self.n_features())
            .map(|j| {
                let (_, sd) = mean_std(self.features.iter().map(|r| r[j]));
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Mean and population standard deviation.
pub(crate) fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    pub label_column: String,
    /// Force the kind of named columns instead of inferring from values.
    pub kind_overrides: BTreeMap<String, FeatureKind>,
    /// Fixed class order; labels outside it are rejected. Defaults to
    /// first-appearance order.
    pub class_order: Option<Vec<String>>,
}

impl LoadOptions {
    pub fn new(label_column: impl Into<String>) -> Self {
        LoadOptions {
            label_column: label_column.into(),
            ..Default::default()
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| Error::MissingColumn(opts.label_column.clone()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut class_names: Vec<String> = opts.class_order.clone().unwrap_or_default();
    let fixed_classes = opts.class_order.is_some();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if i == label_idx {
                let class = match class_names.iter().position(|c| c == cell) {
                    Some(c) => c,
                    None if fixed_classes => return Err(Error::UnknownLabel(cell.to_string())),
                    None => {
                        class_names.push(cell.to_string());
                        class_names.len() - 1
                    }
                };
                labels.push(class);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    row: row_idx,
                    column: headers[i].clone(),
                    value: cell.to_string(),
                })?;
                row.push(v);
            }
        }
        features.push(row);
    }

    let feature_kinds = feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            opts.kind_overrides.get(name).copied().unwrap_or_else(|| {
                if features.iter().all(|r: &Vec<f64>| is_genotype_value(r[j])) {
                    FeatureKind::Genotype
                } else {
                    FeatureKind::Continuous
                }
            })
        })
        .collect();

    let ds = Dataset::new(features, labels, feature_names, feature_kinds, class_names)?;
    ds.check_classes_nonempty()?;
    Ok(ds)
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file, label_column)
}

pub fn write_csv_to<W: std::io::Write>(ds: &Dataset, writer: W, label_column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    for (row, &y) in ds.features.iter().zip(&ds.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(ds.class_names[y].clone());
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Preprocessing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub covariate_columns: Vec<usize>,
    pub reference_class: usize,
}

/// Regress every continuous, non-covariate column on `[1, covariates]` using
/// reference-class rows, replace it by its residual on all rows, and drop
/// the covariate columns.
pub fn residualize(ds: &Dataset, spec: &CovariateSpec) -> Result<Dataset> {
    let d = ds.n_features();
    if let Some(&c) = spec.covariate_columns.iter().find(|&&c| c >= d) {
        return Err(Error::Config(format!("covariate column {c} out of range")));
    }
    if spec.reference_class >= ds.n_classes() {
        return Err(Error::Config(format!(
            "reference class {} out of range",
            spec.reference_class
        )));
    }
    let reference = ds.rows_of_class(spec.reference_class);
    if reference.is_empty() {
        return Err(Error::EmptyClass(
            ds.class_names[spec.reference_class].clone(),
        ));
    }

    let p = spec.covariate_columns.len() + 1;
    let design = DMatrix::from_fn(reference.len(), p, |r, c| {
        if c == 0 {
            1.0
        } else {
            ds.features[reference[r]][spec.covariate_columns[c - 1]]
        }
    });
    check_full_rank(&design, &spec.covariate_columns)?;
    let gram = design.transpose() * &design;
    let chol = gram.cholesky().ok_or(Error::RankDeficient {
        columns: spec.covariate_columns.clone(),
    })?;

    let keep: Vec<usize> = (0..d)
        .filter(|j| !spec.covariate_columns.contains(j))
        .collect();
    let mut out = ds.clone();
    for j in 0..d {
        if spec.covariate_columns.contains(&j) || ds.feature_kinds[j] != FeatureKind::Continuous {
            continue;
        }
        let y = DVector::from_iterator(reference.len(), reference.iter().map(|&i| ds.features[i][j]));
        let beta = chol.solve(&(design.transpose() * y));
        for (i, row) in out.features.iter_mut().enumerate() {
            let fitted = beta[0]
                + spec
                    .covariate_columns
                    .iter()
                    .enumerate()
                    .map(|(c, &col)| beta[c + 1] * ds.features[i][col])
                    .sum::<f64>();
            row[j] = ds.features[i][j] - fitted;
        }
    }
    out.features = out
        .features
        .into_iter()
        .map(|row| keep.iter().map(|&j| row[j]).collect())
        .collect();
    out.feature_names = keep.iter().map(|&j| ds.feature_names[j].clone()).collect();
    out.feature_kinds = keep.iter().map(|&j| ds.feature_kinds[j]).collect();
    Ok(out)
}

/// Detect rank deficiency of `[1, covariates]` and report the covariate
/// columns taking part in the smallest singular direction.
fn check_full_rank(design: &DMatrix<f64>, covariates: &[usize]) -> Result<()> {
    let p = design.ncols();
    if design.nrows() < p {
        return Err(Error::RankDeficient {
            columns: covariates.to_vec(),
        });
    }
    // Scale columns so the rank test is unit-free.
    let mut scaled = design.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let svd = scaled.svd(false, true);
    let sv = &svd.singular_values;
    let (min_idx, min_sv) = sv
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let max_sv = sv.iter().cloned().fold(0.0, f64::max);
    if max_sv == 0.0 || min_sv / max_sv < 1e-10 {
        let v_t = svd.v_t.as_ref().expect("requested v_t");
        let row = v_t.row(min_idx);
        let mut columns: Vec<usize> = (1..p)
            .filter(|&c| row[c].abs() > 1e-6)
            .map(|c| covariates[c - 1])
            .collect();
        if columns.is_empty() {
            columns = covariates.to_vec();
        }
        return Err(Error::RankDeficient { columns });
    }
    Ok(())
}

/// Reference-class statistics used for z-scoring, one entry per continuous
/// column (`None` for genotype columns).
pub fn reference_stats(ds: &Dataset, reference_class: usize) -> Result<Vec<Option<(f64, f64)>>> {
    let reference = ds.rows_of_class(reference_class);
    if reference.is_empty() {
        return Err(Error::EmptyClass(
            ds.class_names
                .get(reference_class)
                .cloned()
                .unwrap_or_else(|| reference_class.to_string()),
        ));
    }
    (0..ds.n_features())
        .map(|j| {
            if ds.feature_kinds[j] != FeatureKind::Continuous {
                return Ok(None);
            }
            let (mean, sd) = mean_std(reference.iter().map(|&i| ds.features[i][j]));
            if sd <= 0.0 {
                return Err(Error::ZeroVariance(ds.feature_names[j].clone()));
            }
            Ok(Some((mean, sd)))
        })
        .collect()
}

/// z-score continuous columns with the reference class's mean and
/// population standard deviation. Genotype columns are untouched.
pub fn standardize(ds: &Dataset, reference_class: usize) -> Result<Dataset> {
    if reference_class >= ds.n_classes() {
        return Err(Error::Config(format!(
            "reference class {reference_class} out of range"
        )));
    }
    let stats = reference_stats(ds, reference_class)?;
    let mut out = ds.clone();
    for row in &mut out.features {
        for (v, s) in row.iter_mut().zip(&stats) {
            if let Some((mean, sd)) = s {
                *v = (*v - mean) / sd;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Splitting

/// Stratified train/test row indices (each sorted ascending).
pub fn stratified_split_indices(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.n_classes() {
        let mut rows = ds.rows_of_class(class);
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: rows.len(),
                needed: 2,
            });
        }
        let mut rng = seed::derived_rng(seed, &[class as u64]);
        rows.shuffle(&mut rng);
        let n_test = ((rows.len() as f64 * test_fraction).round() as usize).clamp(1, rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = stratified_split_indices(ds, test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Stratified k-fold assignment over `labels`: returns the test indices of
/// each fold (sorted). Classes are dealt round-robin so fold sizes differ by
/// at most one.
pub fn stratified_kfold(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for class in 0..n_classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: rows.len(),
                needed: k,
            });
        }
        let mut rng = seed::derived_rng(seed, &[class as u64]);
        rows.shuffle(&mut rng);
        for r in rows {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// Synthetic data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub class_counts: Vec<usize>,
    pub d_continuous: usize,
    pub d_genotype: usize,
    /// Indices (continuous first, then genotype) of features carrying class
    /// signal.
    pub informative_features: Vec<usize>,
    /// Standard deviation of the noise around informative class means.
    pub noise_level: f64,
    /// Distance between adjacent class means on an informative feature.
    pub separation: f64,
    pub seed: u64,
    pub class_names: Option<Vec<String>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            class_counts: vec![449, 740, 274],
            d_continuous: 12,
            d_genotype: 4,
            informative_features: vec![0, 1, 2, 3, 12],
            noise_level: 1.0,
            separation: 2.5,
            seed: 0,
            class_names: None,
        }
    }
}

/// Generator parameters behind a synthetic dataset, kept for oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub informative_features: Vec<usize>,
    /// `class_means[k][j]` for continuous feature `j`.
    pub class_means: Vec<Vec<f64>>,
    /// Standard deviation of each continuous feature given the class.
    pub continuous_sd: Vec<f64>,
    /// `allele_freqs[k][g]` for genotype feature `g` (indexed from 0).
    pub allele_freqs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub dataset: Dataset,
    pub truth: SynthTruth,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_counts.len() < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if self.class_counts.iter().any(|&c| c == 0) {
            return Err(Error::Config("class counts must all be positive".into()));
        }
        let d = self.d_continuous + self.d_genotype;
        if d == 0 {
            return Err(Error::Config("need at least one feature".into()));
        }
        if let Some(&j) = self.informative_features.iter().find(|&&j| j >= d) {
            return Err(Error::Config(format!("informative feature {j} out of range")));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Config("noise level must be finite and >= 0".into()));
        }
        if let Some(names) = &self.class_names {
            if names.len() != self.class_counts.len() {
                return Err(Error::Config("class name count mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Class position on informative feature `t`: a cyclic shift per feature so
/// different features separate different class pairs.
fn class_offset(class: usize, t: usize, n_classes: usize) -> f64 {
    ((class + t) % n_classes) as f64 - (n_classes as f64 - 1.0) / 2.0
}

pub fn synthesize(cfg: &SynthConfig) -> Result<SynthDataset> {
    cfg.validate()?;
    let k = cfg.class_counts.len();
    let d = cfg.d_continuous + cfg.d_genotype;
    let mut informative = cfg.informative_features.clone();
    informative.sort_unstable();
    informative.dedup();

    let mut class_means = vec![vec![0.0; cfg.d_continuous]; k];
    let mut continuous_sd = vec![1.0; cfg.d_continuous];
    let mut allele_freqs = vec![vec![0.3; cfg.d_genotype]; k];
    for (t, &j) in informative.iter().enumerate() {
        if j < cfg.d_continuous {
            continuous_sd[j] = cfg.noise_level;
            for (c, means) in class_means.iter_mut().enumerate() {
                means[j] = cfg.separation * class_offset(c, t, k);
            }
        } else {
            let g = j - cfg.d_continuous;
            for (c, freqs) in allele_freqs.iter_mut().enumerate() {
                freqs[g] = 0.15 + 0.6 * ((c + t) % k) as f64 / (k - 1) as f64;
            }
        }
    }

    let mut rng = seed::rng(cfg.seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(cfg.class_counts.iter().sum());
    for (c, &count) in cfg.class_counts.iter().enumerate() {
        for _ in 0..count {
            let mut row = Vec::with_capacity(d);
            for j in 0..cfg.d_continuous {
                let z: f64 = StandardNormal.sample(&mut rng);
                row.push(class_means[c][j] + continuous_sd[j] * z);
            }
            for g in 0..cfg.d_genotype {
                let q = allele_freqs[c][g];
                let alleles = (rng.random::<f64>() < q) as u8 + (rng.random::<f64>() < q) as u8;
                row.push(GENOTYPE_LEVELS[alleles as usize]);
            }
            rows.push((row, c));
        }
    }
    rows.shuffle(&mut rng);

    let class_names = cfg.class_names.clone().unwrap_or_else(|| {
        if k == 3 {
            vec!["CN".into(), "MCI".into(), "AD".into()]
        } else {
            (0..k).map(|c| format!("class{c}")).collect()
        }
    });
    let feature_names = (0..cfg.d_continuous)
        .map(|j| format!("roi_{j}"))
        .chain((0..cfg.d_genotype).map(|g| format!("snp_{g}")))
        .collect();
    let feature_kinds = std::iter::repeat_n(FeatureKind::Continuous, cfg.d_continuous)
        .chain(std::iter::repeat_n(FeatureKind::Genotype, cfg.d_genotype))
        .collect();
    let (features, labels) = rows.into_iter().unzip();
    let dataset = Dataset::new(features, labels, feature_names, feature_kinds, class_names)?;
    Ok(SynthDataset {
        dataset,
        truth: SynthTruth {
            informative_features: informative,
            class_means,
            continuous_sd,
            allele_freqs,
        },
    })
}
