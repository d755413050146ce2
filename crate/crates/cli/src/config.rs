//! The JSON config file.
//!
//! All sections are optional and default field by field:
//!
//! ```json
//! {
//!   "inputs": {"contexts": "train.jsonl", "queries": "q.tsv", "corpus": "c.tsv", "qrels": "q.qrels"},
//!   "train": {"loss": "wasserstein", "learning_rate": 0.001, "batch_size": 64},
//!   "eval": {"ks": [10], "gain": "exponential", "threshold": 1, "strict": false},
//!   "analyze": {"bins": 20, "width": 50},
//!   "generation": {"endpoint": "http://127.0.0.1:8000/v1/chat/completions", "model": "m"},
//!   "max_failure_rate": 0.05
//! }
//! ```
//!
//! `generate` also accepts a bare generation config (`{"endpoint", "model", ...}`) as the
//! whole file. The resolved config that `train` writes next to its outputs is a file of this
//! format and reproduces the run.

use std::path::{Path, PathBuf};

use gradrank_core::encoder::TrainConfig;
use gradrank_core::metrics::{Gain, DEFAULT_RELEVANCE_THRESHOLD};
use gradrank_datagen::GenerationConfig;
use serde::{Deserialize, Serialize};

use crate::args::MetricArg;
use crate::failure::{CmdResult, Failure};

pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.05;

/// Input files. Unset fields are skipped when serialised.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contexts: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qrels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_qrels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metrics: Vec<MetricArg>,
    pub ks: Vec<usize>,
    pub gain: Gain,
    pub threshold: u32,
    pub strict: bool,
    /// Entries per query written to the run file.
    pub depth: usize,
    /// Fraction of queries missing on either side (run or qrels) above which the report warns.
    pub mismatch_warning_ratio: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: vec![MetricArg::Ndcg, MetricArg::Mrr, MetricArg::Recall],
            ks: vec![10],
            gain: Gain::Exponential,
            threshold: DEFAULT_RELEVANCE_THRESHOLD,
            strict: false,
            depth: 1000,
            mismatch_warning_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub bins: usize,
    pub width: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self { bins: 20, width: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub inputs: Inputs,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub analyze: AnalyzeConfig,
    pub generation: GenerationConfig,
    pub max_failure_rate: f64,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            inputs: Inputs::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            analyze: AnalyzeConfig::default(),
            generation: GenerationConfig::default(),
            max_failure_rate: DEFAULT_MAX_FAILURE_RATE,
        }
    }
}

/// Parses a config file body, accepting a bare generation config as well.
pub fn parse(text: &str) -> Result<CliConfig, serde_json::Error> {
    match serde_json::from_str::<CliConfig>(text) {
        Ok(config) => Ok(config),
        Err(e) => match serde_json::from_str::<GenerationConfig>(text) {
            Ok(generation) => Ok(CliConfig {
                generation,
                ..CliConfig::default()
            }),
            Err(_) => Err(e),
        },
    }
}

/// Loads the config file, or defaults when none is given.
pub fn load(path: Option<&Path>) -> CmdResult<CliConfig> {
    let Some(path) = path else {
        return Ok(CliConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("config file {}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::usage(format!("config file {}: {e}", path.display())))
}

/// Replaces `slot` when an override is present.
pub fn apply<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Replaces an optional `slot` when an override is present.
pub fn apply_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

/// The path in `slot`, or a usage error naming the flag that sets it.
pub fn required<'a>(slot: &'a Option<PathBuf>, flag: &str) -> CmdResult<&'a Path> {
    slot.as_deref()
        .ok_or_else(|| Failure::usage(format!("{flag} is required (or set it under \"inputs\" in the config file)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(parse("{}").unwrap(), CliConfig::default());
    }

    #[test]
    fn bare_generation_config() {
        let c = parse(r#"{"endpoint": "http://x/v1/chat/completions", "model": "m", "seed": 4}"#).unwrap();
        assert_eq!(c.generation.model, "m");
        assert_eq!(c.generation.seed, 4);
        assert_eq!(c.train, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(r#"{"trian": {}}"#).is_err());
        assert!(parse(r#"{"train": {"lr": 1}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = CliConfig::default();
        c.inputs.contexts = Some("a.jsonl".into());
        c.train.batch_size = 7;
        c.eval.ks = vec![5, 10];
        let text = serde_json::to_string(&c).unwrap();
        assert!(!text.contains("qrels"));
        assert_eq!(parse(&text).unwrap(), c);
    }
}
