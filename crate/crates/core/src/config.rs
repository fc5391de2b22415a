//! TOML run configuration and command-line overrides.
//!
//! ```toml
//! [campaign]
//! antennas = 100
//! users = 12
//! setups = 5000
//! uses = 200
//! seed = 1
//! workers = 0
//! detectors = ["mrc", "zf", "mmse", "bmrc", "bzf", "bmmse", "admm-soft"]
//!
//! [cell]
//! side_m = 250.0
//!
//! [impairments]
//! kappa_r = 0.98
//! kappa_t = 0.98      # or one value per user
//! sigma2 = 2e-13
//!
//! [admm]
//! rho = 0.2
//! iterations = 100
//! variant = "soft"
//! ```
//!
//! Every section and key is optional; omitted values take the defaults
//! below. Unknown keys are rejected.

use crate::admm::{AdmmConfig, AdmmVariant};
use crate::scenario::{CellConfig, PowerControlConfig};
use crate::sim::{CampaignConfig, DetectorSpec, ScenarioConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub antennas: usize,
    pub users: usize,
    pub setups: u64,
    pub uses: u64,
    pub seed: u64,
    pub workers: usize,
    pub detectors: Vec<String>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            antennas: 100,
            users: 12,
            setups: 5000,
            uses: 200,
            seed: 1,
            workers: 0,
            detectors: ["mrc", "zf", "mmse", "bmrc", "bzf", "bmmse", "admm-soft"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaT {
    Uniform(f64),
    PerUser(Vec<f64>),
}

impl KappaT {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            KappaT::Uniform(v) => vec![*v],
            KappaT::PerUser(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpairmentSection {
    pub kappa_r: f64,
    pub kappa_t: KappaT,
    pub sigma2: f64,
}

impl Default for ImpairmentSection {
    fn default() -> Self {
        Self {
            kappa_r: 0.98,
            kappa_t: KappaT::Uniform(0.98),
            sigma2: 2e-13,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub campaign: CampaignSection,
    pub cell: CellConfig,
    pub power: PowerControlConfig,
    pub impairments: ImpairmentSection,
    pub admm: AdmmConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub setups: Option<u64>,
    pub uses: Option<u64>,
    pub detectors: Option<Vec<String>>,
    pub rho: Option<f64>,
    pub iterations: Option<usize>,
    pub variant: Option<AdmmVariant>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            field: e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<file>".into()),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, message } => Error::Config {
                field: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        let c = &mut self.campaign;
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = o.workers {
            c.workers = v;
        }
        if let Some(v) = o.setups {
            c.setups = v;
        }
        if let Some(v) = o.uses {
            c.uses = v;
        }
        if let Some(v) = &o.detectors {
            c.detectors = v.clone();
        }
        if let Some(v) = o.rho {
            self.admm.rho = v;
        }
        if let Some(v) = o.iterations {
            self.admm.iterations = v;
        }
        if let Some(v) = o.variant {
            self.admm.variant = v;
        }
    }

    /// Resolves into a validated [`CampaignConfig`]; failures name the
    /// offending config key.
    pub fn resolve(&self) -> Result<CampaignConfig> {
        let detectors = self
            .campaign
            .detectors
            .iter()
            .map(|t| DetectorSpec::parse(t, &self.admm))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| config_error("campaign.detectors", e))?;
        let cfg = CampaignConfig {
            antennas: self.campaign.antennas,
            users: self.campaign.users,
            setups: self.campaign.setups,
            uses: self.campaign.uses,
            detectors,
            master_seed: self.campaign.seed,
            workers: self.campaign.workers,
            scenario: ScenarioConfig {
                cell: self.cell.clone(),
                power: self.power.clone(),
                kappa_r: self.impairments.kappa_r,
                kappa_t: self.impairments.kappa_t.to_vec(),
                sigma2: self.impairments.sigma2,
            },
        };
        cfg.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::Config {
                field: qualify(&name),
                message: reason,
            },
            other => config_error("campaign", other),
        })?;
        Ok(cfg)
    }
}

fn config_error(field: &str, e: Error) -> Error {
    Error::Config {
        field: field.to_string(),
        message: e.to_string(),
    }
}

/// Maps validation parameter names onto config keys.
fn qualify(name: &str) -> String {
    match name {
        "users" | "antennas" | "setups" | "uses" | "detectors" | "workers" => format!("campaign.{name}"),
        "kappa_r" | "sigma2" => format!("impairments.{name}"),
        n if n.starts_with("kappa_t") => format!("impairments.{n}"),
        n if n.contains('.') => n.to_string(),
        n => n.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = FileConfig::from_toml("").unwrap();
        assert_eq!(cfg, FileConfig::default());
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.antennas, 100);
        assert_eq!(resolved.users, 12);
        assert_eq!(resolved.setups, 5000);
        assert_eq!(resolved.uses, 200);
        assert_eq!(resolved.scenario.sigma2, 2e-13);
        assert_eq!(resolved.scenario.cell.side_m, 250.0);
        assert_eq!(resolved.scenario.power.p_max_w, 0.1);
        assert_eq!(resolved.scenario.power.delta_db, 15.0);
        assert_eq!(resolved.detectors.len(), 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = FileConfig::from_toml("[campaign]\nantenas = 4\n").unwrap_err();
        assert!(err.to_string().contains("antenas"), "{err}");
        assert!(FileConfig::from_toml("[solver]\nrho = 1.0\n").is_err());
        assert!(FileConfig::from_toml("[admm]\nrho = 1.0\npenalty = 2\n").is_err());
    }

    #[test]
    fn per_user_kappa_and_overrides() {
        let text = r#"
            [campaign]
            antennas = 16
            users = 2
            detectors = ["bmmse", "admm"]
            [impairments]
            kappa_t = [0.9, 0.95]
            [admm]
            variant = "hard"
        "#;
        let mut cfg = FileConfig::from_toml(text).unwrap();
        cfg.apply(&Overrides {
            seed: Some(42),
            variant: Some(AdmmVariant::Soft),
            rho: Some(0.5),
            ..Overrides::default()
        });
        let r = cfg.resolve().unwrap();
        assert_eq!(r.master_seed, 42);
        assert_eq!(r.scenario.kappa_t, vec![0.9, 0.95]);
        assert_eq!(r.detectors[1].label(), "ADMM-SOFT");
        match &r.detectors[1] {
            DetectorSpec::Admm { config } => assert_eq!(config.rho, 0.5),
            _ => panic!("expected ADMM"),
        }
    }

    #[test]
    fn invalid_values_name_their_field() {
        let cfg = FileConfig::from_toml("[impairments]\nkappa_r = 1.5\n").unwrap();
        match cfg.resolve().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "impairments.kappa_r"),
            e => panic!("unexpected {e}"),
        }
        let cfg = FileConfig::from_toml("[campaign]\nsetups = 0\n").unwrap();
        match cfg.resolve().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "campaign.setups"),
            e => panic!("unexpected {e}"),
        }
        let cfg = FileConfig::from_toml("[campaign]\ndetectors = [\"sphere\"]\n").unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::Config { ref field, .. }) if field == "campaign.detectors"));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = FileConfig::default();
        cfg.impairments.kappa_t = KappaT::PerUser(vec![0.9; 12]);
        cfg.campaign.seed = 9;
        assert_eq!(FileConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
