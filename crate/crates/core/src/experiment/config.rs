use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DEFAULT_P_MAX, MAX_POWER};
use crate::error::{Error, Result};
use crate::field::{DEFAULT_OVERSAMPLE, MAX_DIM};
use crate::oracles::MIN_MC_REALIZATIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MeanGain,
    Saddle,
    ScanErgodicity,
    ScanChain,
    Supnorm,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::MeanGain,
        ExperimentKind::Saddle,
        ExperimentKind::ScanErgodicity,
        ExperimentKind::ScanChain,
        ExperimentKind::Supnorm,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MeanGain => "mean-gain",
            ExperimentKind::Saddle => "saddle",
            ExperimentKind::ScanErgodicity => "scan-ergodicity",
            ExperimentKind::ScanChain => "scan-chain",
            ExperimentKind::Supnorm => "supnorm",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// One experiment: a kind plus the parameter grid it sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dims: Vec<usize>,
    pub cutoffs: Vec<usize>,
    pub gains: Vec<f64>,
    pub realizations: u64,
    #[serde(default = "default_p_max")]
    pub p_max: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_p_max() -> usize {
    DEFAULT_P_MAX
}

fn default_alpha() -> f64 {
    0.75
}

fn default_oversample() -> usize {
    DEFAULT_OVERSAMPLE
}

pub const DEFAULT_SEED: u64 = 20_240_601;

const SCAN_CUTOFFS: [usize; 6] = [8, 16, 32, 64, 128, 256];

impl ExperimentConfig {
    /// The desk-scale default sweep for each experiment kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            dims: vec![1],
            cutoffs: vec![],
            gains: vec![],
            realizations: 1,
            p_max: DEFAULT_P_MAX,
            alpha: default_alpha(),
            oversample: DEFAULT_OVERSAMPLE,
            output: None,
            master_seed: DEFAULT_SEED,
        };
        match kind {
            ExperimentKind::MeanGain => Self {
                cutoffs: vec![0, 1, 2, 4, 8, 16, 32, 64, 100],
                gains: vec![0.5, 2.0],
                ..base
            },
            ExperimentKind::Saddle => Self {
                cutoffs: vec![0],
                gains: vec![1.1, 2.0, 5.0, 20.0, 50.0],
                ..base
            },
            ExperimentKind::ScanErgodicity | ExperimentKind::ScanChain => Self {
                cutoffs: SCAN_CUTOFFS.to_vec(),
                gains: vec![0.5, 2.0],
                realizations: 20,
                ..base
            },
            ExperimentKind::Supnorm => Self {
                cutoffs: vec![0, 4, 8, 16, 32, 64, 128, 256],
                gains: vec![1.0],
                realizations: 100,
                ..base
            },
            ExperimentKind::OracleCheck => Self {
                cutoffs: vec![0, 1, 2],
                gains: vec![0.3, 0.8],
                realizations: 100_000,
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dims.is_empty() || self.cutoffs.is_empty() || self.gains.is_empty() {
            return fail("dims, cutoffs and gains must each list at least one value".into());
        }
        if let Some(d) = self.dims.iter().find(|d| !(1..=MAX_DIM).contains(*d)) {
            return fail(format!("dimension {d} not supported; use 1, 2 or 3"));
        }
        if let Some(g) = self.gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return fail(format!("gain {g} must be positive and finite"));
        }
        if self.realizations == 0 {
            return fail("realizations must be at least 1".into());
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return fail(format!("alpha = {} must lie in (1/2, 1]", self.alpha));
        }
        if self.oversample == 0 {
            return fail("oversample must be at least 1".into());
        }
        if !(1..=MAX_POWER).contains(&self.p_max) {
            return fail(format!(
                "p_max = {} must lie in 1..={MAX_POWER}",
                self.p_max
            ));
        }
        match self.kind {
            ExperimentKind::Saddle => {
                if let Some(g) = self.gains.iter().find(|g| **g <= 1.0) {
                    return fail(format!("saddle needs every gain > 1, got {g}"));
                }
            }
            ExperimentKind::ScanChain if self.p_max < 2 => {
                return fail("scan-chain needs p_max >= 2".into());
            }
            ExperimentKind::OracleCheck => {
                if self.realizations < MIN_MC_REALIZATIONS {
                    return fail(format!(
                        "oracle-check needs at least {MIN_MC_REALIZATIONS} realizations"
                    ));
                }
                if self.dims != [1] {
                    return fail("oracle-check runs in d = 1 only".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}
