//! Benchmark configuration: a plain key-value (TOML) document.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engines::Engine;
use crate::types::ScoringConfig;

use super::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub stream: PathBuf,
    pub topics: PathBuf,
    #[serde(default)]
    pub dict: Option<PathBuf>,
    /// Output prefix; the runner writes `<output>.records.jsonl`,
    /// `<output>.summary.json`, and `<output>.tsv`.
    pub output: PathBuf,
    #[serde(default = "default_engines")]
    pub engines: Vec<String>,
    pub scoring: ScoringSection,
    #[serde(default)]
    pub workload: WorkloadSection,
}

fn default_engines() -> Vec<String> {
    vec!["mtts".into(), "mttd".into(), "celf".into(), "sieve".into()]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoringSection {
    pub lambda: f64,
    pub eta: f64,
    /// Window length `T` in seconds.
    pub window: i64,
    /// Bucket length `L` in seconds.
    pub bucket: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WorkloadSection {
    /// Number of queries; each gets a uniform random timestamp in
    /// `[1, t_n]`.
    pub count: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub epsilon: f64,
    /// Keywords drawn uniformly from the vocabulary per query.
    pub keywords_min: usize,
    pub keywords_max: usize,
    pub seed: u64,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            count: 100,
            k_min: 10,
            k_max: 10,
            epsilon: 0.1,
            keywords_min: 1,
            keywords_max: 5,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let cfg: BenchConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.as_ref().display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !self.stream.exists() {
            return Err(HarnessError::Config(format!(
                "stream file {} does not exist",
                self.stream.display()
            )));
        }
        if !self.topics.exists() {
            return Err(HarnessError::Config(format!(
                "topic model {} does not exist",
                self.topics.display()
            )));
        }
        self.scoring_config()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.parse_engines()?;
        let w = &self.workload;
        if !(w.epsilon > 0.0 && w.epsilon < 1.0) {
            return Err(HarnessError::Config(format!(
                "workload epsilon = {} outside (0, 1)",
                w.epsilon
            )));
        }
        if w.k_min == 0 || w.k_min > w.k_max {
            return Err(HarnessError::Config(format!(
                "bad k range [{}, {}]",
                w.k_min, w.k_max
            )));
        }
        if w.keywords_min == 0 || w.keywords_min > w.keywords_max {
            return Err(HarnessError::Config(format!(
                "bad keyword-count range [{}, {}]",
                w.keywords_min, w.keywords_max
            )));
        }
        Ok(())
    }

    pub fn scoring_config(&self) -> Result<ScoringConfig, crate::types::CoreError> {
        ScoringConfig::new(
            self.scoring.lambda,
            self.scoring.eta,
            self.scoring.window,
            self.scoring.bucket,
        )
    }

    pub fn parse_engines(&self) -> Result<Vec<Engine>, HarnessError> {
        let mut engines = Vec::with_capacity(self.engines.len());
        for name in &self.engines {
            engines.push(Engine::from_str(name).map_err(HarnessError::Config)?);
        }
        if engines.is_empty() {
            return Err(HarnessError::Config("no engines configured".into()));
        }
        Ok(engines)
    }
}
