//! Flat JSON experiment configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum,
    MagnonScan,
    ExcitationScan,
    Nogo,
    Certify,
    NoiseSim,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Self::Spectrum,
        Self::MagnonScan,
        Self::ExcitationScan,
        Self::Nogo,
        Self::Certify,
        Self::NoiseSim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::MagnonScan => "magnon-scan",
            Self::ExcitationScan => "excitation-scan",
            Self::Nogo => "nogo",
            Self::Certify => "certify",
            Self::NoiseSim => "noise-sim",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .with_context(|| format!("unknown experiment `{s}`"))
    }
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn default_instances() -> usize {
    10
}
fn default_samples() -> usize {
    256
}
fn default_trials() -> usize {
    100_000
}
fn default_inputs() -> usize {
    4
}
fn default_cluster_tol() -> f64 {
    1e-7
}
fn default_channel() -> String {
    "exhaustive".into()
}
fn default_support_mode() -> String {
    "arbitrary".into()
}

/// Every field sits at the top level. Sites are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the subcommand when present.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub n_grid: Vec<usize>,
    /// Seed for every random draw; there is no clock-based default.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Bra magnetizations (`spectrum`, `magnon-scan`).
    #[serde(default)]
    pub r: Vec<usize>,
    /// Ket magnetizations (`spectrum`, `magnon-scan`).
    #[serde(default)]
    pub s: Vec<usize>,
    /// Momentum indices `k` with `p = 2πk/n` (`excitation-scan`).
    #[serde(default)]
    pub momenta: Vec<usize>,
    /// Locality of operators and noise.
    #[serde(default = "one")]
    pub d: usize,
    /// Boundary widths Δ (`nogo`).
    #[serde(default)]
    pub delta_grid: Vec<usize>,
    /// Detection thresholds δ (`certify`, `noise-sim`).
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Code magnetizations (`certify`, `noise-sim`).
    #[serde(default)]
    pub code: Vec<usize>,
    #[serde(default = "two")]
    pub phys_dim: usize,
    #[serde(default = "two")]
    pub bond_dim: usize,
    /// Random tensors in `nogo`.
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// `enumerated-paulis` or `sampled`; enumerated when omitted and feasible.
    #[serde(default)]
    pub source: Option<String>,
    /// Size of a sampled operator source.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `exhaustive` or `sampled` Pauli noise.
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default)]
    pub num_terms: usize,
    /// `connected` or `arbitrary`.
    #[serde(default = "default_support_mode")]
    pub support_mode: String,
    #[serde(default)]
    pub include_identity: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Haar-random code states per ring size.
    #[serde(default = "default_inputs")]
    pub inputs: usize,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("malformed config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    /// Effective seed; errors when neither the config nor the command line sets one.
    pub fn seed(&self) -> Result<u64> {
        self.seed.context("no seed: set `seed` in the config or pass --seed")
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }

    /// Checks shared and experiment-specific requirements.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        if let Some(e) = self.experiment {
            if e != experiment {
                bail!("config is for `{e}` but `{experiment}` was requested");
            }
        }
        if self.n_grid.is_empty() {
            bail!("n_grid must not be empty");
        }
        self.seed()?;
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                bail!("`{experiment}` needs a non-empty {what}")
            }
        };
        match experiment {
            Experiment::Spectrum | Experiment::MagnonScan => {
                need(!self.r.is_empty(), "r list")?;
                need(!self.s.is_empty(), "s list")?;
            }
            Experiment::ExcitationScan => need(!self.momenta.is_empty(), "momenta list")?,
            Experiment::Nogo => {
                need(!self.delta_grid.is_empty(), "delta_grid")?;
                need(self.instances > 0, "instance count")?;
            }
            Experiment::Certify => {
                need(!self.deltas.is_empty(), "deltas list")?;
                need(!self.code.is_empty(), "code list")?;
            }
            Experiment::NoiseSim => {
                need(!self.code.is_empty(), "code list")?;
                need(self.trials > 0, "trial count")?;
            }
        }
        if self.deltas.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            bail!("every δ must lie in (0, 1]");
        }
        if !matches!(self.channel.as_str(), "exhaustive" | "sampled") {
            bail!("channel must be `exhaustive` or `sampled`");
        }
        if !matches!(self.support_mode.as_str(), "connected" | "arbitrary") {
            bail!("support_mode must be `connected` or `arbitrary`");
        }
        if let Some(src) = &self.source {
            if !matches!(src.as_str(), "enumerated-paulis" | "sampled") {
                bail!("source must be `enumerated-paulis` or `sampled`");
            }
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
