//! Synthetic shortcut-shift benchmark: two domains with a tunable
//! label-attribute correlation, a scorer family indexed by shortcut weight
//! λ, and the scorers' internal features as embeddings.
//!
//! Per domain: `y ~ Bernoulli(π)`, `P(a=1 | y) = b ± ρ/2`, projected feature
//! `x = (2y-1)μ + ε - δ(2a-1)` with `ε ~ N(0,1)` and `δ` nonzero only in the
//! target, shortcut noise `η ~ N(0, σ²)`. Scorer λ outputs
//! `logistic(μx + λ(2a-1) + η)`; its embedding is `[μx, λ(2a-1) + η]`.
//! Only the projection of `x` on the signal direction enters any output, so
//! the remaining `d-1` coordinates are never materialized.

use crate::datamodel::{
    load_embeddings, load_predictions, load_registry, write_embeddings, write_predictions, write_registry,
    EmbeddingRecord, FileFormat, GroupPair, ModelMeta, PredictionRecord, Split,
};
use crate::error::{Error, Result};
use crate::metrics::auroc;
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineInputs, PipelineReport};
use crate::report::fmt_f64;
use crate::stats::{pearson, spearman, stream_rng, CorrelationResult};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const ATTRIBUTE: &str = "group";
pub const TASK: &str = "Disease";
pub const SOURCE_DATASET: &str = "synth_src";
pub const TARGET_DATASET: &str = "synth_tar";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_per_domain: usize,
    pub feature_dim: usize,
    pub signal_strength: f64,
    pub prevalence: f64,
    /// Base rate `b` in `P(a=1 | y) = b ± ρ/2`.
    pub group_balance: f64,
    pub shortcut_corr_src: f64,
    pub shortcut_corr_tar: f64,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
    /// Target-only shift `δ` of the signal feature against the attribute.
    pub tar_group_shift: f64,
    /// Standard deviation of the noise on the shortcut channel.
    pub shortcut_noise: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_domain: 40_000,
            feature_dim: 16,
            signal_strength: 1.0,
            prevalence: 0.3,
            group_balance: 0.5,
            shortcut_corr_src: 0.5,
            shortcut_corr_tar: -0.5,
            lambda_grid: vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9],
            seed: 0,
            tar_group_shift: 2.0,
            shortcut_noise: 1.0,
            train_fraction: 0.5,
            val_fraction: 0.25,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_domain < 8 {
            return Err(invalid("n_per_domain must be at least 8"));
        }
        if self.feature_dim == 0 {
            return Err(invalid("feature_dim must be positive"));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(invalid("signal_strength must be finite and non-negative"));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(invalid("prevalence must lie in (0, 1)"));
        }
        if !(self.group_balance > 0.0 && self.group_balance < 1.0) {
            return Err(invalid("group_balance must lie in (0, 1)"));
        }
        for (name, rho) in [("shortcut_corr_src", self.shortcut_corr_src), ("shortcut_corr_tar", self.shortcut_corr_tar)] {
            if !(-1.0..=1.0).contains(&rho) {
                return Err(invalid(format!("{name} must lie in [-1, 1]")));
            }
            for p in [self.group_balance + rho / 2.0, self.group_balance - rho / 2.0] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("{name} = {rho} gives P(a=1|y) = {p} outside [0, 1]")));
                }
            }
        }
        if self.lambda_grid.len() < 3 {
            return Err(invalid("lambda_grid needs at least three values"));
        }
        if self.lambda_grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("lambda values must be finite and non-negative"));
        }
        let mut labels: Vec<String> = self.lambda_grid.iter().map(|l| model_id(*l)).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.lambda_grid.len() {
            return Err(invalid("lambda_grid values must be distinct at 4 decimals"));
        }
        if !(self.tar_group_shift.is_finite() && self.shortcut_noise.is_finite() && self.shortcut_noise >= 0.0) {
            return Err(invalid("tar_group_shift must be finite and shortcut_noise non-negative"));
        }
        let (tr, va) = (self.train_fraction, self.val_fraction);
        if !(tr > 0.0 && va > 0.0 && tr + va < 1.0) {
            return Err(invalid("train_fraction and val_fraction must be positive and sum below 1"));
        }
        Ok(())
    }

    /// Index into `lambda_grid` of the model tagged ERM (the lower median).
    pub fn erm_index(&self) -> usize {
        let mut order: Vec<usize> = (0..self.lambda_grid.len()).collect();
        order.sort_by(|&a, &b| self.lambda_grid[a].total_cmp(&self.lambda_grid[b]));
        order[(order.len() - 1) / 2]
    }
}

pub fn model_id(lambda: f64) -> String {
    format!("scorer_l{lambda:.4}")
}

pub fn pair() -> GroupPair {
    GroupPair {
        g1: "a1".into(),
        g2: "a0".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    fn stream(self) -> u64 {
        match self {
            Domain::Source => 0,
            Domain::Target => 1,
        }
    }

    pub fn dataset_id(self) -> &'static str {
        match self {
            Domain::Source => SOURCE_DATASET,
            Domain::Target => TARGET_DATASET,
        }
    }
}

/// Latent draws for one domain, shared by every scorer.
#[derive(Debug, Clone)]
struct Cohort {
    y: Vec<u8>,
    a: Vec<u8>,
    /// `μ·x`, the signal component of every scorer.
    signal: Vec<f64>,
    eta: Vec<f64>,
}

fn draw_cohort(cfg: &SynthConfig, domain: Domain) -> Cohort {
    let (rho, delta) = match domain {
        Domain::Source => (cfg.shortcut_corr_src, 0.0),
        Domain::Target => (cfg.shortcut_corr_tar, cfg.tar_group_shift),
    };
    let mu = cfg.signal_strength;
    let mut rng = stream_rng(cfg.seed, domain.stream());
    let n = cfg.n_per_domain;
    let mut c = Cohort {
        y: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        signal: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let y = u8::from(rng.random::<f64>() < cfg.prevalence);
        let p_a = if y == 1 { cfg.group_balance + rho / 2.0 } else { cfg.group_balance - rho / 2.0 };
        let a = u8::from(rng.random::<f64>() < p_a);
        let eps: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        let x = sign(y) * mu + eps - delta * sign(a);
        c.y.push(y);
        c.a.push(a);
        c.signal.push(mu * x);
        c.eta.push(cfg.shortcut_noise * eta);
    }
    c
}

fn sign(bit: u8) -> f64 {
    2.0 * f64::from(bit) - 1.0
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Rounds to the six decimals used on disk, so in-memory and reloaded
/// bundles are identical.
fn on_disk(v: f64) -> f64 {
    fmt_f64(v).parse().expect("formatted float parses")
}

fn split_of(i: usize, cfg: &SynthConfig) -> Split {
    let n = cfg.n_per_domain as f64;
    let i = i as f64;
    if i < cfg.train_fraction * n {
        Split::Train
    } else if i < (cfg.train_fraction + cfg.val_fraction) * n {
        Split::Val
    } else {
        Split::Test
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub predictions: Vec<PredictionRecord>,
    pub embeddings: Vec<EmbeddingRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub config: SynthConfig,
    pub source: DomainData,
    pub target: DomainData,
    pub registry: Vec<ModelMeta>,
}

fn scorer_records(cfg: &SynthConfig, cohort: &Cohort, domain: Domain, lambda: f64) -> DomainData {
    let mid = model_id(lambda);
    let n = cohort.y.len();
    let mut predictions = Vec::with_capacity(n);
    let mut embeddings = Vec::with_capacity(n);
    for i in 0..n {
        let shortcut = lambda * sign(cohort.a[i]) + cohort.eta[i];
        let sample_id = format!("{}_{i:06}", domain.dataset_id());
        predictions.push(PredictionRecord {
            sample_id: sample_id.clone(),
            model_id: mid.clone(),
            dataset_id: domain.dataset_id().into(),
            split: split_of(i, cfg),
            score: on_disk(logistic(cohort.signal[i] + shortcut)),
            label: cohort.y[i],
            attributes: BTreeMap::from([(ATTRIBUTE.to_string(), format!("a{}", cohort.a[i]))]),
        });
        embeddings.push(EmbeddingRecord {
            sample_id,
            model_id: mid.clone(),
            vector: vec![on_disk(cohort.signal[i]), on_disk(shortcut)],
        });
    }
    DomainData { predictions, embeddings }
}

fn domain_data(cfg: &SynthConfig, domain: Domain) -> Vec<DomainData> {
    let cohort = draw_cohort(cfg, domain);
    cfg.lambda_grid
        .par_iter()
        .map(|&l| scorer_records(cfg, &cohort, domain, l))
        .collect()
}

fn concat(parts: Vec<DomainData>) -> DomainData {
    let mut out = DomainData {
        predictions: vec![],
        embeddings: vec![],
    };
    for p in parts {
        out.predictions.extend(p.predictions);
        out.embeddings.extend(p.embeddings);
    }
    out
}

pub fn generate_benchmark(cfg: &SynthConfig) -> Result<SyntheticBundle> {
    cfg.validate()?;
    let source = domain_data(cfg, Domain::Source);
    let target = domain_data(cfg, Domain::Target);
    let erm = cfg.erm_index();
    let registry = cfg
        .lambda_grid
        .iter()
        .zip(&source)
        .enumerate()
        .map(|(k, (&lambda, data))| {
            let (scores, labels): (Vec<f64>, Vec<u8>) = data
                .predictions
                .iter()
                .filter(|r| r.split == Split::Val)
                .map(|r| (r.score, r.label))
                .unzip();
            Ok(ModelMeta {
                model_id: model_id(lambda),
                algorithm: if k == erm { "ERM" } else { "scorer" }.into(),
                task: TASK.into(),
                tuned_attribute: ATTRIBUTE.into(),
                seed: cfg.seed as i64,
                hparams: BTreeMap::from([("lambda".to_string(), fmt_f64(lambda))]),
                val_auroc: Some(on_disk(auroc(&scores, &labels)?)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticBundle {
        config: cfg.clone(),
        source: concat(source),
        target: concat(target),
        registry,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub source_predictions: PathBuf,
    pub target_predictions: PathBuf,
    pub source_embeddings: PathBuf,
    pub target_embeddings: PathBuf,
    pub registry: PathBuf,
    pub config: PathBuf,
}

impl BundlePaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            source_predictions: dir.join("predictions_src.csv"),
            target_predictions: dir.join("predictions_tar.csv"),
            source_embeddings: dir.join("embeddings_src.csv"),
            target_embeddings: dir.join("embeddings_tar.csv"),
            registry: dir.join("registry.csv"),
            config: dir.join("synth_config.json"),
        }
    }
}

pub fn write_bundle(bundle: &SyntheticBundle, dir: &Path) -> Result<BundlePaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = BundlePaths::in_dir(dir);
    write_predictions(&paths.source_predictions, &bundle.source.predictions, FileFormat::Csv)?;
    write_predictions(&paths.target_predictions, &bundle.target.predictions, FileFormat::Csv)?;
    write_embeddings(&paths.source_embeddings, &bundle.source.embeddings)?;
    write_embeddings(&paths.target_embeddings, &bundle.target.embeddings)?;
    write_registry(&paths.registry, &bundle.registry)?;
    // full precision so the config reloads exactly
    let config = serde_json::to_string_pretty(&bundle.config).expect("config serializes") + "\n";
    std::fs::write(&paths.config, config).map_err(|e| Error::io(&paths.config, e))?;
    Ok(paths)
}

pub fn load_bundle(dir: &Path) -> Result<SyntheticBundle> {
    let paths = BundlePaths::in_dir(dir);
    let text = std::fs::read_to_string(&paths.config).map_err(|e| Error::io(&paths.config, e))?;
    let config: SynthConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
        line: e.line(),
        message: e.to_string(),
    })?;
    Ok(SyntheticBundle {
        config,
        source: DomainData {
            predictions: load_predictions(&paths.source_predictions, FileFormat::Csv)?,
            embeddings: load_embeddings(&paths.source_embeddings, FileFormat::Csv)?,
        },
        target: DomainData {
            predictions: load_predictions(&paths.target_predictions, FileFormat::Csv)?,
            embeddings: load_embeddings(&paths.target_embeddings, FileFormat::Csv)?,
        },
        registry: load_registry(&paths.registry)?,
    })
}

/// Pipeline settings matching the benchmark's attribute, pair and task.
pub fn reference_config(cfg: &SynthConfig) -> PipelineConfig {
    let mut p = PipelineConfig::new("synth_flipped", ATTRIBUTE, pair());
    p.seed = cfg.seed;
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub lambdas: Vec<f64>,
    pub probe_auroc: Vec<f64>,
    pub id_gap: Vec<f64>,
    pub ood_gap: Vec<f64>,
    pub spearman_probe: CorrelationResult<f64>,
    pub spearman_gap: CorrelationResult<f64>,
    /// Probe AUROC against ID absolute gap over the λ grid.
    pub encoding_vs_gap: CorrelationResult<f64>,
    pub performance_r: f64,
    pub fairness_r: f64,
    pub min_probe_auroc_gap: f64,
    pub min_id_gap_gap: f64,
    pub min_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub pipeline: PipelineReport,
    pub summary: SynthSummary,
}

fn summarize(bundle: &SyntheticBundle, report: &PipelineReport) -> Result<SynthSummary> {
    let mut lambdas = Vec::new();
    let (mut probe, mut id_gap, mut ood_gap) = (vec![], vec![], vec![]);
    for &l in &bundle.config.lambda_grid {
        let id = model_id(l);
        let m = report.model(&id).ok_or_else(|| Error::MissingMetric {
            model_id: id.clone(),
            metric: "report".into(),
        })?;
        lambdas.push(l);
        probe.push(m.summary.require(crate::grid::keys::PROBE_AUROC)?);
        id_gap.push(m.id.summary.require(crate::grid::keys::GAP)?);
        ood_gap.push(m.ood.summary.require(crate::grid::keys::GAP)?);
    }
    let pick = |name: &str| {
        report.selected(name).map(|(_, g)| g).ok_or_else(|| Error::MissingMetric {
            model_id: "<selection>".into(),
            metric: name.into(),
        })
    };
    Ok(SynthSummary {
        spearman_probe: spearman(&lambdas, &probe)?,
        spearman_gap: spearman(&lambdas, &id_gap)?,
        encoding_vs_gap: pearson(&probe, &id_gap)?,
        performance_r: report.transfer.performance.r,
        fairness_r: report.transfer.fairness.r,
        min_probe_auroc_gap: pick("min_attribute_auroc")?,
        min_id_gap_gap: pick("min_fairness_gap")?,
        min_increase: report.selection.rows.iter().map(|r| r.increase).fold(f64::INFINITY, f64::min),
        lambdas,
        probe_auroc: probe,
        id_gap,
        ood_gap,
    })
}

/// Runs the full pipeline on an in-memory bundle.
pub fn run_bundle(bundle: &SyntheticBundle, cfg: &PipelineConfig) -> Result<ReferenceReport> {
    let inputs = PipelineInputs {
        source: &bundle.source.predictions,
        target: &bundle.target.predictions,
        embeddings: &bundle.source.embeddings,
        registry: &bundle.registry,
    };
    let pipeline = run_pipeline(inputs, cfg)?;
    let summary = summarize(bundle, &pipeline)?;
    Ok(ReferenceReport { pipeline, summary })
}

/// Loads a bundle written by [`write_bundle`] and runs the full pipeline.
pub fn run_reference_pipeline(dir: &Path) -> Result<ReferenceReport> {
    let bundle = load_bundle(dir)?;
    run_bundle(&bundle, &reference_config(&bundle.config))
}

/// Closed-form probability that scorer λ flags a sample of class `y` in
/// group `a` at `threshold`.
pub fn closed_form_positive_rate(cfg: &SynthConfig, domain: Domain, lambda: f64, a: u8, y: u8, threshold: f64) -> f64 {
    let mu = cfg.signal_strength;
    let delta = if domain == Domain::Target { cfg.tar_group_shift } else { 0.0 };
    let mean = sign(y) * mu * mu - mu * delta * sign(a) + lambda * sign(a);
    let sd = (mu * mu + cfg.shortcut_noise * cfg.shortcut_noise).sqrt();
    let cut = (threshold / (1.0 - threshold)).ln();
    if sd == 0.0 {
        return f64::from(u8::from(mean >= cut));
    }
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    1.0 - z.cdf((cut - mean) / sd)
}
