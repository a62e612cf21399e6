//! TOML run configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_domain::{BallSpec, BoundingBox, CorridorSpec};
use crate::reaction::SpeciesParams;
use crate::scalar_solver::SolverOptions;
use crate::system_solver::{ContinuationSchedule, ModelTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: (f64, f64),
    pub radius: f64,
    /// Defaults to the ball's position in the list.
    #[serde(default)]
    pub species_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub bbox: BoundingBox,
    pub h: f64,
    pub balls: Vec<BallConfig>,
    #[serde(default)]
    pub corridors: Vec<CorridorSpec>,
}

impl DomainConfig {
    pub fn ball_specs(&self) -> Vec<BallSpec> {
        self.balls
            .iter()
            .enumerate()
            .map(|(n, b)| BallSpec {
                center: b.center,
                radius: b.radius,
                species_index: b.species_index.unwrap_or(n),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelTag,
    #[serde(default)]
    pub truncation: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelTag::Barrier, truncation: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_delta() -> f64 {
    0.02
}

fn default_trials() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesConfig {
    #[serde(default)]
    pub uniqueness: Option<UniquenessConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "yes")]
    pub emit_fields: bool,
    #[serde(default)]
    pub emit_images: bool,
}

fn default_directory() -> String {
    "lvseg-out".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), emit_fields: true, emit_images: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub species: Vec<SpeciesParams>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ContinuationSchedule,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub probes: ProbesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.species.len() != self.domain.balls.len() {
            return Err(Error::InvalidParameter(format!(
                "species count ({}) must equal ball count ({})",
                self.species.len(),
                self.domain.balls.len()
            )));
        }
        for (i, sp) in self.species.iter().enumerate() {
            sp.validate().map_err(|e| Error::InvalidParameter(format!("species[{i}]: {e}")))?;
        }
        self.solver.validate()?;
        self.schedule.validate()?;
        if let Some(u) = &self.probes.uniqueness {
            if !(u.delta >= 0.0) {
                return Err(Error::InvalidParameter("probes.uniqueness.delta must be nonnegative".into()));
            }
            if u.trials == 0 {
                return Err(Error::InvalidParameter("probes.uniqueness.trials must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML document, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config parse error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
