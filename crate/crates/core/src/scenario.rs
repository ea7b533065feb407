//! Scenario files.
//!
//! A scenario is a TOML document describing the sharing customer, the file
//! transfer window, the requesting customers and the learning parameters:
//!
//! ```toml
//! name = "scenario1"
//! seeds = [1, 2, 3]
//!
//! [spc]
//! mu = 1.0
//! gamma = 0.0
//! psi = 0.5
//! b_s = 20.0
//! delta = 0.1
//!
//! [qos]
//! file_size = 8.0
//! t1 = 1.37
//! t2 = 300.0
//!
//! [learning]
//! b = 0.1
//!
//! [[srcs]]
//! alpha = 1.0
//! beta = 0.0
//! kappa = 0.1
//! epsilon = 0.1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::{default_grid_step, AllocationOptions, GainModel, DEFAULT_ENUMERATION_CAP};
use crate::equilibrium::DEFAULT_PROFILE_CAP;
use crate::error::{Error, Result};
use crate::game::Game;
use crate::learning::LearningParams;
use crate::model::{qos_bounds, QosBounds, SpcProfile, SrcProfile};
use crate::par::Execution;

/// Hardware limit of a femto access point, used as the default bound on N.
pub const DEFAULT_MAX_SRCS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSpec {
    /// Mb.
    pub file_size: f64,
    /// Fastest acceptable transfer, s.
    pub t1: f64,
    /// Slowest acceptable transfer, s.
    pub t2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSpec {
    /// Defaults to a tenth of `bw_max - bw_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    pub enumeration_cap: u64,
    pub profile_cap: u64,
}

impl Default for AllocationSpec {
    fn default() -> Self {
        Self {
            grid_step: None,
            enumeration_cap: DEFAULT_ENUMERATION_CAP as u64,
            profile_cap: DEFAULT_PROFILE_CAP as u64,
        }
    }
}

fn default_max_srcs() -> usize {
    DEFAULT_MAX_SRCS
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_max_srcs")]
    pub max_srcs: usize,
    pub spc: SpcProfile,
    pub qos: QosSpec,
    #[serde(default)]
    pub allocation: AllocationSpec,
    #[serde(default)]
    pub gain_model: GainModel,
    #[serde(default)]
    pub learning: LearningParams,
    pub srcs: Vec<SrcProfile>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text, path)
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let spc = self.spc_profile()?;
        if spc.mu < 0.5 {
            return Err(Error::validation(
                "spc.mu",
                format!("{} < 0.5 leaves the all-deny allocation as the only optimum", spc.mu),
            ));
        }
        self.bounds()?;
        if self.srcs.is_empty() {
            return Err(Error::validation("srcs", "at least one requesting customer is required"));
        }
        if self.srcs.len() > self.max_srcs {
            return Err(Error::validation(
                "srcs",
                format!(
                    "{} customers exceed max_srcs = {}",
                    self.srcs.len(),
                    self.max_srcs
                ),
            ));
        }
        for (i, src) in self.srcs.iter().enumerate() {
            src.validate(&format!("srcs[{i}]"))?;
        }
        if let Some(step) = self.allocation.grid_step {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::validation(
                    "allocation.grid_step",
                    format!("{step} must be > 0"),
                ));
            }
        }
        self.gain_model.revenue.validate("gain_model.revenue")?;
        self.gain_model.cost.validate("gain_model.cost")?;
        self.learning.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "at least one seed is required"));
        }
        Ok(())
    }

    pub fn spc_profile(&self) -> Result<SpcProfile> {
        let s = self.spc;
        SpcProfile::new(s.mu, s.gamma, s.psi, s.b_s, s.delta)
    }

    pub fn bounds(&self) -> Result<QosBounds> {
        qos_bounds(self.qos.file_size, self.qos.t1, self.qos.t2)
    }

    pub fn grid_step(&self) -> Result<f64> {
        Ok(match self.allocation.grid_step {
            Some(step) => step,
            None => default_grid_step(&self.bounds()?),
        })
    }

    pub fn allocation_options(&self, execution: Execution) -> Result<AllocationOptions> {
        Ok(AllocationOptions::new(self.grid_step()?)
            .with_cap(self.allocation.enumeration_cap as u128)
            .with_execution(execution))
    }

    pub fn game(&self, execution: Execution) -> Result<Game> {
        Game::new(
            self.spc_profile()?,
            self.srcs.clone(),
            self.bounds()?,
            self.gain_model,
            self.allocation_options(execution)?,
        )
    }

    /// Copy of this scenario with `n` clones of its first customer.
    pub fn with_n(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.srcs = vec![self.srcs[0]; n];
        s.name = format!("{}-n{n}", self.name);
        s
    }
}
