//! Experiment configuration document and flag merging.

use serde::{Deserialize, Serialize};
use smcem::error::{Error, Result};
use smcem::models::ModelConfig;

/// Algorithms selectable in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cpf,
    CpfAs,
    CpfBs,
    PfBs,
    Enks,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cpf => "cpf",
            Algorithm::CpfAs => "cpf_as",
            Algorithm::CpfBs => "cpf_bs",
            Algorithm::PfBs => "pf_bs",
            Algorithm::Enks => "enks",
        }
    }

    pub fn smoother(self) -> Option<smcem::smoothing::SmootherVariant> {
        use smcem::smoothing::SmootherVariant::*;
        match self {
            Algorithm::Cpf => Some(CpfTrack),
            Algorithm::CpfAs => Some(CpfAsTrack),
            Algorithm::CpfBs => Some(CpfBs),
            Algorithm::PfBs => Some(PfBs),
            Algorithm::Enks => None,
        }
    }
}

/// One experiment document: either a scenario name or an explicit job.
/// Command-line flags override the corresponding fields.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_f: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(Error::from)
    }

    /// Apply command-line overrides (flags win over config fields).
    pub fn with_overrides(
        mut self,
        scenario: Option<String>,
        seed: Option<u64>,
        out: Option<String>,
    ) -> Self {
        if scenario.is_some() {
            self.scenario = scenario;
        }
        if seed.is_some() {
            self.seed = seed;
        }
        if out.is_some() {
            self.out = out;
        }
        self
    }
}
