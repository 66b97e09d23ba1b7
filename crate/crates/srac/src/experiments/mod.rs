//! Scripted experiment protocols and reproducible reports.
//!
//! A run is described by a flat key-value config file, executes one of five
//! protocols, and writes two files named `<protocol>-<confighash>-<seed>`:
//! a per-observation records CSV and an aggregates JSON envelope. Every
//! aggregate is recomputable from the records; [`audit_report`] checks that.
//!
//! ## Config keys
//!
//! Common: `protocol` (required), `seed`, `corpus` (path; omit to use the
//! generator), `k`, `alpha`, `beta`, `train_iters`, `theta_sweeps`,
//! `theta_burn_in`, `particles`, `c`, `novelty_threshold`, `folds`,
//! `repeats`, `train_fraction`, `replacement_rates`, `overlap_rates`,
//! `sweep_instances`, `sweep_doc_len`, `control`, `risk_matrix`.
//!
//! Generator: `gen_categories`, `gen_vocab_size`, `gen_docs_per_category`,
//! `gen_doc_len`, `gen_overlap`, `gen_background`, `gen_concentration`,
//! `gen_category_names`.
//!
//! Decision simulation: `sim_trials`, `sim_reps`, `sim_doc_len`,
//! `sim_train_docs`, `sim_vocab_block`, `sim_own`, `sim_confuse`,
//! `sim_background`, `sim_concentration`, `sim_style_rate_case1`,
//! `sim_style_rate_case2`, `sim_novel_rate`, `sim_inject_fraction`,
//! `sim_sensitivity_case1`, `sim_sensitivity_case2`, `sim_sensitivity_reps`.

mod generator;
mod protocols;

pub use generator::{block_range, category_distributions, generate_corpus, GeneratorConfig};
pub use protocols::{
    evaluate_observations, run_decision_sim, run_exhaustive, run_nonexhaustive,
    run_overlap_sweep, run_semi_exhaustive, DecisionAggregates, DecisionRecord, EvalParams,
    ExhaustiveAggregates, ExhaustiveRecord, NonexhaustiveAggregates, NonexhaustiveRecord,
    OverlapAggregates, OverlapRecord, SemiExhaustiveAggregates, SemiExhaustiveRecord,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, LabeledCorpus};
use crate::lda::LdaError;
use crate::reflection::{NoveltyConfig, ReflectionError};
use crate::risk::RiskError;
use crate::seeds;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("infeasible protocol: {0}")]
    Infeasible(String),
    #[error("report: {0}")]
    BadReport(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Reflection(#[from] ReflectionError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// True when the failure is a protocol infeasibility (exit code 3).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ExperimentError::Infeasible(_))
            || matches!(self, ExperimentError::Corpus(CorpusError::InfeasibleSplit { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Exhaustive,
    Nonexhaustive,
    OverlapSweep,
    SemiExhaustive,
    DecisionSim,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Protocol::Exhaustive => "exhaustive",
            Protocol::Nonexhaustive => "nonexhaustive",
            Protocol::OverlapSweep => "overlap_sweep",
            Protocol::SemiExhaustive => "semi_exhaustive",
            Protocol::DecisionSim => "decision_sim",
        };
        f.write_str(s)
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Protocol::Exhaustive),
            "nonexhaustive" => Ok(Protocol::Nonexhaustive),
            "overlap_sweep" => Ok(Protocol::OverlapSweep),
            "semi_exhaustive" => Ok(Protocol::SemiExhaustive),
            "decision_sim" => Ok(Protocol::DecisionSim),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

/// Decision-simulation knobs. Defaults model the human-following task:
/// three behaviors with cyclic style confusion, a reserved novel word
/// block, small style noise in case 1, and larger style noise plus novel
/// injection in case 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trials: usize,
    pub reps: usize,
    pub doc_len: usize,
    pub train_docs: usize,
    pub vocab_block: usize,
    pub own_mass: f64,
    pub confuse_mass: f64,
    pub background_mass: f64,
    pub concentration: f64,
    pub style_rate_case1: f64,
    pub style_rate_case2: f64,
    pub novel_rate: f64,
    pub inject_fraction: f64,
    pub sensitivity_case1: Vec<f64>,
    pub sensitivity_case2: Vec<f64>,
    pub sensitivity_reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 40,
            reps: 10,
            doc_len: 48,
            train_docs: 20,
            vocab_block: 30,
            own_mass: 0.62,
            confuse_mass: 0.28,
            background_mass: 0.10,
            concentration: 5.0,
            style_rate_case1: 0.1,
            style_rate_case2: 0.3,
            novel_rate: 0.3,
            inject_fraction: 0.5,
            sensitivity_case1: vec![0.05, 0.2],
            sensitivity_case2: vec![0.15, 0.45],
            sensitivity_reps: 2,
        }
    }
}

/// Fully resolved experiment description. Hashing covers every resolved
/// field, so two configs with the same hash run identically.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub seed: u64,
    pub corpus_path: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub k: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub train_iters: usize,
    pub theta_sweeps: usize,
    pub theta_burn_in: usize,
    pub particles: usize,
    pub novelty: NoveltyConfig,
    pub folds: usize,
    pub repeats: usize,
    pub train_fraction: f64,
    pub replacement_rates: Vec<f64>,
    pub overlap_rates: Vec<f64>,
    pub sweep_instances: usize,
    pub sweep_doc_len: usize,
    pub control: bool,
    pub risk_matrix_path: Option<PathBuf>,
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol) -> Self {
        let mut generator = GeneratorConfig::default();
        if protocol == Protocol::OverlapSweep {
            // the sweep trains a known model on the first half of the
            // categories and a novel model on the second half
            generator.categories = 4;
        }
        ExperimentConfig {
            protocol,
            seed: 0,
            corpus_path: None,
            generator,
            k: None,
            alpha: 1.0,
            beta: 0.01,
            train_iters: 1000,
            theta_sweeps: 500,
            theta_burn_in: 200,
            particles: crate::reflection::DEFAULT_PARTICLES,
            novelty: NoveltyConfig::default(),
            folds: 4,
            repeats: 5,
            train_fraction: 0.75,
            replacement_rates: vec![0.25, 0.35, 0.45, 0.55, 0.65, 0.75],
            overlap_rates: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sweep_instances: 50,
            sweep_doc_len: 112,
            control: false,
            risk_matrix_path: None,
            sim: SimConfig::default(),
        }
    }

    /// Parses the flat key-value config format: `key = value` lines, `#`
    /// comments, unknown keys rejected.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut protocol: Option<Protocol> = None;
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            if stripped.trim().is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!("line {line}: expected 'key = value'"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key == "protocol" {
                protocol = Some(
                    value
                        .parse()
                        .map_err(|e| ExperimentError::Config(format!("line {line}: {e}")))?,
                );
            } else {
                pairs.push((line, key, value));
            }
        }
        let mut cfg = ExperimentConfig::new(
            protocol.ok_or_else(|| ExperimentError::Config("missing 'protocol' key".into()))?,
        );
        for (line, key, value) in pairs {
            cfg.apply(&key, &value)
                .map_err(|e| ExperimentError::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse().map_err(|e| format!("{key}: {e}"))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>, String> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e| format!("{key}: {e}")))
                .collect()
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "corpus" => self.corpus_path = Some(PathBuf::from(value)),
            "k" => self.k = Some(num(key, value)?),
            "alpha" => self.alpha = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "train_iters" => self.train_iters = num(key, value)?,
            "theta_sweeps" => self.theta_sweeps = num(key, value)?,
            "theta_burn_in" => self.theta_burn_in = num(key, value)?,
            "particles" => self.particles = num(key, value)?,
            "c" => self.novelty.c = num(key, value)?,
            "novelty_threshold" => self.novelty.novelty_threshold = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "repeats" => self.repeats = num(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "replacement_rates" => self.replacement_rates = list(key, value)?,
            "overlap_rates" => self.overlap_rates = list(key, value)?,
            "sweep_instances" => self.sweep_instances = num(key, value)?,
            "sweep_doc_len" => self.sweep_doc_len = num(key, value)?,
            "control" => self.control = num(key, value)?,
            "risk_matrix" => self.risk_matrix_path = Some(PathBuf::from(value)),
            "gen_categories" => self.generator.categories = num(key, value)?,
            "gen_vocab_size" => self.generator.vocab_size = num(key, value)?,
            "gen_docs_per_category" => self.generator.docs_per_category = num(key, value)?,
            "gen_doc_len" => self.generator.doc_len = num(key, value)?,
            "gen_overlap" => self.generator.overlap = num(key, value)?,
            "gen_background" => self.generator.background = num(key, value)?,
            "gen_concentration" => self.generator.concentration = num(key, value)?,
            "gen_category_names" => {
                self.generator.category_names =
                    Some(value.split(',').map(|s| s.trim().to_string()).collect())
            }
            "sim_trials" => self.sim.trials = num(key, value)?,
            "sim_reps" => self.sim.reps = num(key, value)?,
            "sim_doc_len" => self.sim.doc_len = num(key, value)?,
            "sim_train_docs" => self.sim.train_docs = num(key, value)?,
            "sim_vocab_block" => self.sim.vocab_block = num(key, value)?,
            "sim_own" => self.sim.own_mass = num(key, value)?,
            "sim_confuse" => self.sim.confuse_mass = num(key, value)?,
            "sim_background" => self.sim.background_mass = num(key, value)?,
            "sim_concentration" => self.sim.concentration = num(key, value)?,
            "sim_style_rate_case1" => self.sim.style_rate_case1 = num(key, value)?,
            "sim_style_rate_case2" => self.sim.style_rate_case2 = num(key, value)?,
            "sim_novel_rate" => self.sim.novel_rate = num(key, value)?,
            "sim_inject_fraction" => self.sim.inject_fraction = num(key, value)?,
            "sim_sensitivity_case1" => self.sim.sensitivity_case1 = list(key, value)?,
            "sim_sensitivity_case2" => self.sim.sensitivity_case2 = list(key, value)?,
            "sim_sensitivity_reps" => self.sim.sensitivity_reps = num(key, value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ExperimentError::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.folds == 0 || self.repeats == 0 || self.train_iters == 0 {
            return Err(ExperimentError::Config(
                "folds, repeats, train_iters must be positive".into(),
            ));
        }
        if self.theta_burn_in >= self.theta_sweeps {
            return Err(ExperimentError::Config("theta_burn_in must be below theta_sweeps".into()));
        }
        NoveltyConfig::new(self.novelty.c, self.novelty.novelty_threshold)
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    /// Canonical resolved key-value view; the config hash covers it all.
    pub fn resolved_pairs(&self) -> BTreeMap<String, String> {
        fn fl(v: &[f64]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("protocol", self.protocol.to_string());
        put("seed", self.seed.to_string());
        put(
            "corpus",
            self.corpus_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
        );
        put("k", self.k.map(|k| k.to_string()).unwrap_or_else(|| "auto".into()));
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        put("train_iters", self.train_iters.to_string());
        put("theta_sweeps", self.theta_sweeps.to_string());
        put("theta_burn_in", self.theta_burn_in.to_string());
        put("particles", self.particles.to_string());
        put("c", self.novelty.c.to_string());
        put("novelty_threshold", self.novelty.novelty_threshold.to_string());
        put("folds", self.folds.to_string());
        put("repeats", self.repeats.to_string());
        put("train_fraction", self.train_fraction.to_string());
        put("replacement_rates", fl(&self.replacement_rates));
        put("overlap_rates", fl(&self.overlap_rates));
        put("sweep_instances", self.sweep_instances.to_string());
        put("sweep_doc_len", self.sweep_doc_len.to_string());
        put("control", self.control.to_string());
        put(
            "risk_matrix",
            self.risk_matrix_path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "-".into()),
        );
        put("gen_categories", self.generator.categories.to_string());
        put("gen_vocab_size", self.generator.vocab_size.to_string());
        put("gen_docs_per_category", self.generator.docs_per_category.to_string());
        put("gen_doc_len", self.generator.doc_len.to_string());
        put("gen_overlap", self.generator.overlap.to_string());
        put("gen_background", self.generator.background.to_string());
        put("gen_concentration", self.generator.concentration.to_string());
        put(
            "gen_category_names",
            self.generator
                .category_names
                .as_ref()
                .map(|n| n.join(","))
                .unwrap_or_else(|| "-".into()),
        );
        put("sim_trials", self.sim.trials.to_string());
        put("sim_reps", self.sim.reps.to_string());
        put("sim_doc_len", self.sim.doc_len.to_string());
        put("sim_train_docs", self.sim.train_docs.to_string());
        put("sim_vocab_block", self.sim.vocab_block.to_string());
        put("sim_own", self.sim.own_mass.to_string());
        put("sim_confuse", self.sim.confuse_mass.to_string());
        put("sim_background", self.sim.background_mass.to_string());
        put("sim_concentration", self.sim.concentration.to_string());
        put("sim_style_rate_case1", self.sim.style_rate_case1.to_string());
        put("sim_style_rate_case2", self.sim.style_rate_case2.to_string());
        put("sim_novel_rate", self.sim.novel_rate.to_string());
        put("sim_inject_fraction", self.sim.inject_fraction.to_string());
        put("sim_sensitivity_case1", fl(&self.sim.sensitivity_case1));
        put("sim_sensitivity_case2", fl(&self.sim.sensitivity_case2));
        put("sim_sensitivity_reps", self.sim.sensitivity_reps.to_string());
        m
    }

    /// 16-hex-digit fingerprint of the resolved config.
    pub fn hash(&self) -> String {
        let text: String =
            self.resolved_pairs().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        format!("{:016x}", seeds::fnv1a64(text.as_bytes()))
    }

    /// Loads the corpus from `corpus_path` or generates one.
    pub fn load_corpus(&self) -> Result<LabeledCorpus, ExperimentError> {
        match &self.corpus_path {
            Some(path) => {
                let file = fs::File::open(path)?;
                Ok(LabeledCorpus::parse(BufReader::new(file))?)
            }
            None => {
                Ok(generate_corpus(&self.generator, seeds::derive_tagged(self.seed, "gen"))?)
            }
        }
    }
}

/// Aggregates JSON envelope written next to the records CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub protocol: Protocol,
    pub config_hash: String,
    pub seed: u64,
    pub records_file: String,
    pub config: BTreeMap<String, String>,
    pub aggregates: serde_json::Value,
}

/// Paths of a written report.
#[derive(Debug, Clone)]
pub struct WrittenReport {
    pub records_path: PathBuf,
    pub aggregates_path: PathBuf,
}

fn write_records_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ExperimentError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Runs the configured protocol and writes `<protocol>-<hash>-<seed>`
/// records and aggregates files into `out_dir`.
pub fn run_to_files(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<WrittenReport, ExperimentError> {
    fs::create_dir_all(out_dir)?;
    let stem = format!("{}-{}-{}", cfg.protocol, cfg.hash(), cfg.seed);
    let records_file = format!("{stem}.records.csv");
    let records_path = out_dir.join(&records_file);
    let aggregates_path = out_dir.join(format!("{stem}.aggregates.json"));

    let aggregates: serde_json::Value = match cfg.protocol {
        Protocol::Exhaustive => {
            let (records, agg) = run_exhaustive(cfg)?;
            let (header, rows) = protocols::exhaustive_rows(&records);
            write_records_csv(&records_path, &header, &rows)?;
            serde_json::to_value(agg).expect("serializable")
        }
        Protocol::Nonexhaustive => {
            let (records, agg) = run_nonexhaustive(cfg)?;
            let (header, rows) = protocols::nonexhaustive_rows(&records);
            write_records_csv(&records_path, &header, &rows)?;
            serde_json::to_value(agg).expect("serializable")
        }
        Protocol::OverlapSweep => {
            let (records, agg) = run_overlap_sweep(cfg)?;
            let (header, rows) = protocols::overlap_rows(&records);
            write_records_csv(&records_path, &header, &rows)?;
            serde_json::to_value(agg).expect("serializable")
        }
        Protocol::SemiExhaustive => {
            let (records, agg) = run_semi_exhaustive(cfg)?;
            let (header, rows) = protocols::semi_exhaustive_rows(&records);
            write_records_csv(&records_path, &header, &rows)?;
            serde_json::to_value(agg).expect("serializable")
        }
        Protocol::DecisionSim => {
            let (records, agg) = run_decision_sim(cfg)?;
            let (header, rows) = protocols::decision_rows(&records);
            write_records_csv(&records_path, &header, &rows)?;
            serde_json::to_value(agg).expect("serializable")
        }
    };

    let envelope = ReportEnvelope {
        protocol: cfg.protocol,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        records_file,
        config: cfg.resolved_pairs(),
        aggregates,
    };
    let mut text = serde_json::to_string_pretty(&envelope).expect("serializable");
    text.push('\n');
    fs::write(&aggregates_path, text)?;
    Ok(WrittenReport { records_path, aggregates_path })
}

/// Result of auditing a report: aggregates recomputed from the records CSV
/// compared against the stored ones.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub ok: bool,
    pub mismatches: Vec<String>,
}

/// Recomputes a report's aggregates from its records file and compares
/// against the stored aggregates.
pub fn audit_report(aggregates_path: &Path) -> Result<AuditOutcome, ExperimentError> {
    let text = fs::read_to_string(aggregates_path)?;
    let envelope: ReportEnvelope = serde_json::from_str(&text)
        .map_err(|e| ExperimentError::BadReport(format!("aggregates JSON: {e}")))?;
    let records_path = aggregates_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&envelope.records_file);
    let csv = fs::read_to_string(&records_path)?;

    let recomputed: serde_json::Value = match envelope.protocol {
        Protocol::Exhaustive => {
            let records = protocols::parse_exhaustive_rows(&csv)?;
            serde_json::to_value(protocols::exhaustive_aggregates(&records)).expect("serializable")
        }
        Protocol::Nonexhaustive => {
            let records = protocols::parse_nonexhaustive_rows(&csv)?;
            serde_json::to_value(protocols::nonexhaustive_aggregates(&records))
                .expect("serializable")
        }
        Protocol::OverlapSweep => {
            let records = protocols::parse_overlap_rows(&csv)?;
            serde_json::to_value(protocols::overlap_aggregates(&records)).expect("serializable")
        }
        Protocol::SemiExhaustive => {
            let records = protocols::parse_semi_exhaustive_rows(&csv)?;
            serde_json::to_value(protocols::semi_exhaustive_aggregates(&records))
                .expect("serializable")
        }
        Protocol::DecisionSim => {
            let records = protocols::parse_decision_rows(&csv)?;
            serde_json::to_value(protocols::decision_aggregates(&records)).expect("serializable")
        }
    };

    let mut mismatches = Vec::new();
    compare_values("aggregates", &envelope.aggregates, &recomputed, &mut mismatches);
    Ok(AuditOutcome { ok: mismatches.is_empty(), mismatches })
}

const AUDIT_TOLERANCE: f64 = 1e-9;

fn compare_values(
    path: &str,
    stored: &serde_json::Value,
    fresh: &serde_json::Value,
    out: &mut Vec<String>,
) {
    use serde_json::Value;
    match (stored, fresh) {
        (Value::Object(a), Value::Object(b)) => {
            let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let sub = format!("{path}.{key}");
                match (a.get(key), b.get(key)) {
                    (Some(x), Some(y)) => compare_values(&sub, x, y, out),
                    (Some(_), None) => out.push(format!("{sub}: missing after recompute")),
                    (None, Some(_)) => out.push(format!("{sub}: not in stored aggregates")),
                    (None, None) => unreachable!(),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                out.push(format!("{path}: length {} vs {}", a.len(), b.len()));
                return;
            }
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                compare_values(&format!("{path}[{i}]"), x, y, out);
            }
        }
        (Value::Number(a), Value::Number(b)) => {
            let (x, y) = (a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN));
            let same = (x - y).abs() <= AUDIT_TOLERANCE || (x.is_nan() && y.is_nan());
            if !same {
                out.push(format!("{path}: stored {x} recomputed {y}"));
            }
        }
        (a, b) => {
            if a != b {
                out.push(format!("{path}: stored {a} recomputed {b}"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_config_fills_protocol_defaults() {
        let cfg = ExperimentConfig::parse("protocol = overlap_sweep\nseed = 9\n").unwrap();
        assert_eq!(cfg.protocol, Protocol::OverlapSweep);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.folds, 4);
        assert_eq!(cfg.repeats, 5);
        assert_eq!(cfg.replacement_rates, vec![0.25, 0.35, 0.45, 0.55, 0.65, 0.75]);
        assert_eq!(cfg.overlap_rates, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(cfg.sweep_instances, 50);
        assert_eq!(cfg.sweep_doc_len, 112);
    }

    #[test]
    fn config_rejects_unknown_and_missing_protocol_keys() {
        assert!(matches!(
            ExperimentConfig::parse("protocol = exhaustive\nwibble = 3\n"),
            Err(ExperimentError::Config(msg)) if msg.contains("unknown key")
        ));
        assert!(matches!(
            ExperimentConfig::parse("seed = 1\n"),
            Err(ExperimentError::Config(msg)) if msg.contains("protocol")
        ));
        assert!(matches!(
            ExperimentConfig::parse("protocol = wat\n"),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg =
            ExperimentConfig::parse("# a comment\nprotocol = exhaustive\n\nseed = 3 # trailing\n")
                .unwrap();
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::parse("protocol = exhaustive\nseed = 1\n").unwrap();
        let b = ExperimentConfig::parse("protocol = exhaustive\nseed = 1\n").unwrap();
        let c = ExperimentConfig::parse("protocol = exhaustive\nseed = 2\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation_catches_bad_ranges() {
        assert!(ExperimentConfig::parse("protocol = exhaustive\ntrain_fraction = 1.5\n").is_err());
        assert!(ExperimentConfig::parse(
            "protocol = exhaustive\ntheta_sweeps = 10\ntheta_burn_in = 10\n"
        )
        .is_err());
        assert!(ExperimentConfig::parse("protocol = exhaustive\nc = 0.5\n").is_err());
    }
}
