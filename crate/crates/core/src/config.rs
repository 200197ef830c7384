//! Versioned JSON experiment configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::{BcomFamily, ControlFamily, MIN_GRID_POINTS, MIN_SEEDS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bcom,
    Control,
    Sweep,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bcom,
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    /// Instance family of a sweep; run modes imply it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Learners by registry name. Sweeps pair every arm on the same seeds.
    pub arms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bcom: Option<BcomFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Write a `# generated_at=` comment as the first line of every CSV.
    #[serde(default)]
    pub timestamp: bool,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending field path.
    pub fn from_json(text: &str, arms: &[&str]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { path, message: e.into_inner().to_string() }
        })?;
        config.validate(arms)?;
        Ok(config)
    }

    pub fn family(&self) -> Option<Family> {
        match self.mode {
            Mode::Bcom => Some(Family::Bcom),
            Mode::Control => Some(Family::Control),
            Mode::Sweep | Mode::Check => self.family,
        }
    }

    /// Checks every field against the schema; `arms` lists registered
    /// learner names.
    pub fn validate(&self, arms: &[&str]) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.horizons.is_empty() {
            return Err(Error::config("horizons", "must not be empty"));
        }
        if let Some(i) = self.horizons.iter().position(|&t| t == 0) {
            return Err(Error::config(format!("horizons[{i}]"), "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        if self.arms.is_empty() {
            return Err(Error::config("arms", "must not be empty"));
        }
        for (i, arm) in self.arms.iter().enumerate() {
            if !arms.contains(&arm.as_str()) {
                return Err(Error::config(
                    format!("arms[{i}]"),
                    format!("unknown learner `{arm}`; registered: {}", arms.join(", ")),
                ));
            }
        }
        if self.mode == Mode::Sweep {
            let mut grid = self.horizons.clone();
            grid.sort_unstable();
            grid.dedup();
            if grid.len() < MIN_GRID_POINTS {
                return Err(Error::config("horizons", format!("a sweep needs at least {MIN_GRID_POINTS} distinct horizons")));
            }
            if self.seeds.len() < MIN_SEEDS {
                return Err(Error::config("seeds", format!("a sweep needs at least {MIN_SEEDS} seeds")));
            }
        }
        match (self.mode, self.family()) {
            (Mode::Sweep, None) => return Err(Error::config("family", "a sweep must name its instance family")),
            (_, Some(Family::Bcom)) if self.bcom.is_none() => {
                return Err(Error::config("bcom", "section required for this mode"))
            }
            (_, Some(Family::Control)) if self.control.is_none() => {
                return Err(Error::config("control", "section required for this mode"))
            }
            _ => {}
        }
        if let Some(b) = &self.bcom {
            b.validate().map_err(|e| e.at("bcom"))?;
        }
        if let Some(c) = &self.control {
            c.validate().map_err(|e| e.at("control"))?;
        }
        Ok(())
    }

    /// Canonical form: keys sorted, defaults filled in, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config is always serializable");
        serde_json::to_string(&value).expect("value is always serializable")
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Replaces the seeds with `0..n`.
    pub fn with_seed_count(mut self, n: usize) -> Self {
        self.seeds = (0..n as u64).collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARMS: [&str; 3] = ["delay", "newton", "spherical"];

    fn control_text(gamma: f64) -> String {
        format!(
            r#"{{
  "schema_version": 1,
  "mode": "control",
  "horizons": [64],
  "seeds": [0],
  "arms": ["newton"],
  "control": {{
    "system": {{"dx": 2, "du": 1, "dy": 1, "kappa": 2.0, "gamma": {gamma}, "kappa_sys": 1.0}},
    "cost": {{"kind": {{"kind": "pseudo_huber"}}, "alpha_c": 0.5, "beta_c": 2.0}},
    "noise": {{"w": {{"kind": "sign_alternating"}}, "e": {{"kind": "constant"}}, "radius": 1.0}},
    "r_m": 2.0,
    "eta": {{"inv_sqrt": 3.0}}
  }}
}}"#
        )
    }

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn negative_gamma_names_its_field() {
        ExperimentConfig::from_json(&control_text(0.5), &ARMS).unwrap();
        let e = ExperimentConfig::from_json(&control_text(-0.5), &ARMS).unwrap_err();
        assert_eq!(path_of(e), "control.system.gamma");
    }

    #[test]
    fn type_errors_carry_paths() {
        let text = control_text(0.5).replace("\"r_m\": 2.0", "\"r_m\": \"big\"");
        assert_eq!(path_of(ExperimentConfig::from_json(&text, &ARMS).unwrap_err()), "control.r_m");
        let text = control_text(0.5).replace("\"r_m\"", "\"bogus\": 1, \"r_m\"");
        assert_eq!(path_of(ExperimentConfig::from_json(&text, &ARMS).unwrap_err()), "control.bogus");
        let text = control_text(0.5).replace("[\"newton\"]", "[\"nope\"]");
        assert_eq!(path_of(ExperimentConfig::from_json(&text, &ARMS).unwrap_err()), "arms[0]");
    }

    #[test]
    fn sweep_needs_grid_and_family() {
        let text = control_text(0.5).replace("\"mode\": \"control\"", "\"mode\": \"sweep\"");
        assert_eq!(path_of(ExperimentConfig::from_json(&text, &ARMS).unwrap_err()), "horizons");
    }

    #[test]
    fn hash_ignores_formatting_and_key_order() {
        let a = ExperimentConfig::from_json(&control_text(0.5), &ARMS).unwrap();
        let compact: serde_json::Value = serde_json::from_str(&control_text(0.5)).unwrap();
        let b = ExperimentConfig::from_json(&serde_json::to_string(&compact).unwrap(), &ARMS).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig::from_json(&control_text(0.25), &ARMS).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
