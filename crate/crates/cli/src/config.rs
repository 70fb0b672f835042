use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toric_core::evalharness::DEFAULT_WORKERS;
use toric_core::trainer::TrainingConfig;

use crate::UsageError;

pub const OUTPUT_ROOT_ENV: &str = "TORIC_RUNS_DIR";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Run description read from a JSON file; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: Option<String>,
    pub output_root: Option<PathBuf>,
    pub training: TrainingConfig,
    pub evaluation: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { run_id: None, output_root: None, training: TrainingConfig::default(), evaluation: EvalSettings::default() }
    }
}

/// Evaluation of the final network after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Samples per error rate; 0 skips the evaluation.
    pub n: u64,
    pub p: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { n: 1_000, p: vec![0.1], seed: 1, workers: DEFAULT_WORKERS }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        cfg.training.validate().map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| {
            let t = &self.training;
            format!("train-d{}-seed{}-{}", t.d, t.seed, &t.hash()[..8])
        })
    }
}

/// Explicit root, then the environment variable, then `runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

/// Tool name, version and resolved settings embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
}

impl<'a, C: Serialize> Provenance<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Self { tool: "toric", version: env!("CARGO_PKG_VERSION"), command, config }
    }
}
