//! Experiment configuration: defaults, JSON file, command-line overrides.

use std::path::Path;

use quarklet_core::interval::{BoundaryCondition, IntervalSystem};
use quarklet_core::spline::SplineParams;
use quarklet_core::tensor::Mode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub m_tilde: usize,
    pub j0: Option<i32>,
    /// `(σ^l, σ^r)` for univariate runs.
    pub sigma: (u32, u32),
    pub sigma1: (u32, u32),
    pub sigma2: (u32, u32),
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    pub delta1: f64,
    pub delta2: f64,
    /// Finest level; defaults depend on the command.
    pub jmax: Option<i32>,
    pub pmax: u32,
    pub rank: usize,
    #[serde(rename = "fn")]
    pub function: Option<String>,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 3,
            m_tilde: 3,
            j0: None,
            sigma: (0, 0),
            sigma1: (0, 0),
            sigma2: (0, 0),
            s: vec![0.5],
            r: vec![2.0],
            delta1: 1.5,
            delta2: 1.5,
            jmax: None,
            pmax: 0,
            rank: 2,
            function: None,
            mode: Mode::Exploratory,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn spline_params(&self) -> Result<SplineParams, CliError> {
        Ok(match self.j0 {
            Some(j0) => SplineParams::with_j0(self.m, self.m_tilde, j0)?,
            None => SplineParams::new(self.m, self.m_tilde)?,
        })
    }

    pub fn system(&self, sigma: (u32, u32)) -> Result<IntervalSystem, CliError> {
        Ok(IntervalSystem::new(self.spline_params()?, BoundaryCondition::new(sigma.0, sigma.1))?)
    }

    /// `J = j0 + 1 ..= jmax` (just `j0` if `jmax = j0`), with `jmax` defaulting to `j0 + extra`.
    pub fn levels(&self, extra: i32) -> Result<Vec<i32>, CliError> {
        let j0 = self.spline_params()?.j0;
        let jmax = self.jmax.unwrap_or(j0 + extra);
        if jmax < j0 {
            return Err(CliError::Config(format!("jmax = {jmax} violates jmax ≥ j0 = {j0}")));
        }
        Ok(((j0 + 1).min(jmax)..=jmax).collect())
    }

    /// `0 < s < m - 1` for every grid value, and a nonempty `r` grid.
    pub fn validate_grids(&self) -> Result<(), CliError> {
        if self.s.is_empty() || self.r.is_empty() {
            return Err(CliError::Config("the s and r grids must be nonempty".into()));
        }
        for &s in &self.s {
            if !(s > 0.0 && s < self.m as f64 - 1.0) {
                return Err(CliError::Config(format!(
                    "s = {s} violates 0 < s < m - 1 = {}",
                    self.m as f64 - 1.0
                )));
            }
        }
        for &r in &self.r {
            if !(r > 1.0 && r.is_finite()) {
                return Err(CliError::Config(format!("r = {r} violates 1 < r < ∞")));
            }
        }
        if self.rank == 0 {
            return Err(CliError::Config("R = 0 violates R ≥ 1".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable config");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn json_roundtrip_with_fn_key() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"m": 2, "m_tilde": 4, "fn": "bubble", "mode": "strict"}"#).unwrap();
        assert_eq!(c.function.as_deref(), Some("bubble"));
        assert_eq!(c.mode, Mode::Strict);
        assert_eq!(c.s, vec![0.5]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn levels_default() {
        let c = ExperimentConfig::default();
        let j0 = c.spline_params().unwrap().j0;
        assert_eq!(c.levels(4).unwrap(), vec![j0 + 1, j0 + 2, j0 + 3, j0 + 4]);
    }
}
