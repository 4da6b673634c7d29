//! Flat JSON run configuration.

use bdf_vacuum::scf::{Scheme, SolverConfig};
use bdf_vacuum::{LatticeSpec, SourceProfile};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "grid.points_per_axis")]
    pub points_per_axis: usize,
    #[serde(rename = "grid.spacing")]
    pub spacing: f64,
    #[serde(rename = "source.profile", default = "default_profile")]
    pub profile: Profile,
    #[serde(rename = "source.z")]
    pub z: f64,
    #[serde(rename = "source.sigma")]
    pub sigma: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_exchange")]
    pub exchange: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_profile() -> Profile {
    Profile::Gaussian
}

fn default_scheme() -> Scheme {
    Scheme::Preconditioned
}

fn default_exchange() -> bool {
    true
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    200
}

fn default_gap_tol() -> f64 {
    1e-6
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let source = match self.profile {
            Profile::Gaussian => SourceProfile::Gaussian { charge: self.z, width: self.sigma },
        };
        let mut c = SolverConfig::new(self.alpha, LatticeSpec::new(self.points_per_axis, self.spacing, self.lambda), source);
        c.scheme = self.scheme;
        c.exchange = self.exchange;
        c.tol = self.tol;
        c.max_iter = self.max_iter;
        c.gap_tol = self.gap_tol;
        c
    }
}
