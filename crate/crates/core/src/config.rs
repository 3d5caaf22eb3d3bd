//! Engine configuration: the shipped defaults are compiled in, and any file
//! found under a config root replaces its default counterpart.
//!
//! Layout of a config root (every file optional):
//!
//! ```text
//! maintenance.toml        generator parameters for the maintenance networks
//! control_network.toml    Conversation Control network
//! utilities.toml          utility table over (ActivityGoal, GroundingStatus)
//! control.toml            catalog, thresholds, adaptation, history, VOI
//! templates.toml          repair and action templates
//! noise.toml              simulated recognizer
//! domains/<name>.toml     task domains
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::control::{ControlModel, ControlSettings, Templates};
use crate::decision::UtilityTable;
use crate::intention::{self, GoalModel};
use crate::maintenance::{MaintenanceConfig, MaintenanceModel, Modality};
use crate::simkit::NoiseConfig;
use crate::Network;

pub const ROOT_ENV: &str = "GROUNDING_CONFIG_ROOT";

const MAINTENANCE: (&str, &str) = ("maintenance.toml", include_str!("../config/maintenance.toml"));
const CONTROL_NETWORK: (&str, &str) = ("control_network.toml", include_str!("../config/control_network.toml"));
const UTILITIES: (&str, &str) = ("utilities.toml", include_str!("../config/utilities.toml"));
const CONTROL: (&str, &str) = ("control.toml", include_str!("../config/control.toml"));
const TEMPLATES: (&str, &str) = ("templates.toml", include_str!("../config/templates.toml"));
const NOISE: (&str, &str) = ("noise.toml", include_str!("../config/noise.toml"));

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub maintenance: MaintenanceConfig,
    pub control_network: Network,
    pub utilities: UtilityTable,
    pub control: ControlSettings,
    pub templates: Templates,
    pub noise: NoiseConfig,
    /// Where non-default files came from; domains are looked up here first.
    #[serde(skip)]
    pub root: Option<PathBuf>,
}

/// Per-run parameter overrides, as carried by scenarios and sessions.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub noise_level: Option<f64>,
    pub reliability_decay: Option<f64>,
    pub utility_decay: Option<f64>,
    pub recovery: Option<f64>,
}

impl Overrides {
    /// Every overridable value as `config` has it.
    pub fn of(config: &EngineConfig) -> Self {
        let a = &config.control.adaptation;
        Self {
            noise_level: Some(config.noise.level),
            reliability_decay: Some(a.reliability_decay),
            utility_decay: Some(a.utility_decay),
            recovery: Some(a.recovery),
        }
    }
}

fn parse<T: serde::de::DeserializeOwned>(file: &str, text: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse { file: file.into(), message: e.to_string() })
}

fn read_or_default(root: Option<&Path>, (name, default): (&str, &str)) -> Result<String, ConfigError> {
    match root.map(|r| r.join(name)).filter(|p| p.is_file()) {
        Some(path) => std::fs::read_to_string(&path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source }),
        None => Ok(default.to_string()),
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::load(None).expect("shipped config parses")
    }
}

impl EngineConfig {
    fn load(root: Option<&Path>) -> Result<Self, ConfigError> {
        let get = |f: (&str, &str)| -> Result<(String, String), ConfigError> {
            Ok((f.0.to_string(), read_or_default(root, f)?))
        };
        let (f, t) = get(MAINTENANCE)?;
        let maintenance = parse(&f, &t)?;
        let (f, t) = get(CONTROL_NETWORK)?;
        let control_network = parse(&f, &t)?;
        let (f, t) = get(UTILITIES)?;
        let utilities = parse(&f, &t)?;
        let (f, t) = get(CONTROL)?;
        let control = parse(&f, &t)?;
        let (f, t) = get(TEMPLATES)?;
        let templates = parse(&f, &t)?;
        let (f, t) = get(NOISE)?;
        let noise = parse(&f, &t)?;
        Ok(Self {
            maintenance,
            control_network,
            utilities,
            control,
            templates,
            noise,
            root: root.map(Path::to_path_buf),
        })
    }

    /// Defaults overlaid with whatever files exist under `root`.
    pub fn from_dir(root: &Path) -> Result<Self, ConfigError> {
        if !root.is_dir() {
            return Err(ConfigError::Invalid(format!("{} is not a directory", root.display())));
        }
        Self::load(Some(root))
    }

    /// Honors `GROUNDING_CONFIG_ROOT`.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(ROOT_ENV) {
            Some(root) if !root.is_empty() => Self::from_dir(Path::new(&root)),
            _ => Ok(Self::default()),
        }
    }

    pub fn with_overrides(&self, o: &Overrides) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        if let Some(x) = o.noise_level {
            if !(0.0..=1.0).contains(&x) {
                return Err(ConfigError::Invalid(format!("noise level {x} outside [0,1]")));
            }
            c.noise.level = x;
        }
        let a = &mut c.control.adaptation;
        for (slot, value) in [
            (&mut a.reliability_decay, o.reliability_decay),
            (&mut a.utility_decay, o.utility_decay),
            (&mut a.recovery, o.recovery),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        c.control_model().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }

    pub fn control_model(&self) -> Result<ControlModel, crate::control::ControlError> {
        ControlModel::new(
            self.control_network.clone(),
            self.utilities.clone(),
            self.control.clone(),
            self.templates.clone(),
        )
    }

    pub fn maintenance_model(&self, modality: Modality) -> Result<MaintenanceModel, crate::maintenance::MaintenanceError> {
        MaintenanceModel::from_config(&self.maintenance, modality)
    }

    /// `root/domains/<name>.toml` if present, else a built-in domain or a path.
    pub fn domain(&self, name: &str) -> Result<GoalModel, intention::IntentionError> {
        if let Some(path) = self.root.as_ref().map(|r| r.join("domains").join(format!("{name}.toml"))) {
            if path.is_file() {
                return intention::load_domain(&path.display().to_string());
            }
        }
        intention::load_domain(name)
    }

    /// Build every model the engine would build.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.control_model().map_err(|e| invalid(e.to_string()))?;
        for m in Modality::ALL {
            self.maintenance_model(m).map_err(|e| invalid(format!("{m}: {e}")))?;
        }
        self.noise.check().map_err(invalid)?;
        if self.control.intention.low >= self.control.intention.high {
            return Err(invalid("intention thresholds must satisfy low < high".into()));
        }
        for d in intention::builtin_domains() {
            self.domain(d).map_err(|e| invalid(format!("{d}: {e}")))?;
        }
        Ok(())
    }

    /// Hex SHA-256 over the configuration and the domain it runs with.
    pub fn fingerprint(&self, domain: &GoalModel) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("config serializes"));
        h.update(serde_json::to_vec(domain).expect("domain serializes"));
        hex::encode(h.finalize())
    }
}
