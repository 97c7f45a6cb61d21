use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::background::BackgroundParams;
use crate::bounds::FlowConfig;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::Geometry;
use crate::ou::{OuParams, PathInit};
use crate::rng::derive_seed;
use crate::solver::{GridSpec, InitialCondition, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSection {
    pub viscosity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSection {
    pub mean_speed: f64,
    pub reversion_rate: f64,
    pub noise_amplitude: f64,
    #[serde(default)]
    pub init: PathInit,
}

/// Optional override of the standard `A = νU`, `B = U²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSection {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    pub trajectories: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Write a field snapshot every this many steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default)]
    pub energy_inequality: bool,
    #[serde(default)]
    pub ito: bool,
    #[serde(default)]
    pub trace_lemma: bool,
    /// `C` in the energy-inequality tolerance.
    #[serde(default = "default_tolerance_constant")]
    pub tolerance_constant: f64,
    /// Largest accepted `|mean M_T| / SE`.
    #[serde(default = "default_martingale_z")]
    pub martingale_max_z: f64,
}

fn default_tolerance_constant() -> f64 {
    1.0
}

fn default_martingale_z() -> f64 {
    4.0
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            energy_inequality: false,
            ito: false,
            trace_lemma: false,
            tolerance_constant: default_tolerance_constant(),
            martingale_max_z: default_martingale_z(),
        }
    }
}

/// A complete ensemble experiment. Serialized as TOML with one table per
/// section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub grid: GridSpec,
    pub fluid: FluidSection,
    pub ou: OuSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundSection>,
    pub initial: InitialCondition,
    pub run: RunSection,
    #[serde(default)]
    pub audit: AuditSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Format {
            what: "experiment config",
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format {
            what: "experiment config",
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn flow(&self) -> Result<FlowConfig> {
        let ou = OuParams::new(
            self.ou.mean_speed,
            self.ou.reversion_rate,
            self.ou.noise_amplitude,
        )?;
        let flow = FlowConfig::new(self.geometry, self.fluid.viscosity, ou)?;
        match self.background {
            None => Ok(flow),
            Some(bg) => flow.with_background(BackgroundParams::new(bg.a, bg.b, self.geometry)?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.flow()?;
        self.grid.validate()?;
        self.initial.validate()?;
        ensure_positive("t_end", self.run.t_end)?;
        if self.run.trajectories == 0 {
            return Err(Error::invalid("trajectories", "need at least one"));
        }
        if self.run.snapshot_every == Some(0) {
            return Err(Error::invalid("snapshot_every", "must be >= 1"));
        }
        if self.run.workers == Some(0) {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        ensure_positive("tolerance_constant", self.audit.tolerance_constant)?;
        ensure_positive("martingale_max_z", self.audit.martingale_max_z)?;
        // Seeds are stored as TOML integers, which are signed 64-bit.
        if self.run.master_seed > i64::MAX as u64 {
            return Err(Error::invalid(
                "master_seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, so a moved or resumed run keeps
    /// its identity.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(
            self.canonical().to_toml()?.as_bytes(),
        )))
    }

    /// The configuration without its output directory and worker count.
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        c.run.output_dir = None;
        c.run.workers = None;
        c
    }

    pub fn trajectory_seed(&self, index: usize) -> u64 {
        derive_seed(self.run.master_seed, index as u64)
    }

    /// The single-trajectory problem for member `index`.
    pub fn simulation(&self, index: usize) -> Result<Simulation> {
        Ok(Simulation {
            flow: self.flow()?,
            grid: self.grid,
            t_end: self.run.t_end,
            seed: self.trajectory_seed(index),
            initial: self.initial,
            wall_init: self.ou.init,
            audit: self.audit.energy_inequality,
            snapshot_every: self.run.snapshot_every,
        })
    }
}
