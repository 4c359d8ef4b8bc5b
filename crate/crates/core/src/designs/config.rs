use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::paper::{builtin_paper_designs, PLNA_ID};
use super::{PlnaDesign, TraditionalDesign};
use crate::budget::derive_stage2_limits;
use crate::error::ConfigError;
use crate::explorer::ExplorerConfig;
use crate::statmodel::{ModeMarginals, RfParam};
use crate::{LnaSpecCorner, ReceiverTargets, StageTwoLimits};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_TARGET_GAIN_DB: f64 = 10.5;

fn default_target_gain() -> f64 {
    DEFAULT_TARGET_GAIN_DB
}

/// Everything a run needs: spec corner, receiver targets, designs, explorer grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub spec: LnaSpecCorner,
    #[serde(default)]
    pub targets: ReceiverTargets,
    /// Overrides the worst-case-corner derivation when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_two: Option<StageTwoLimits>,
    #[serde(default = "default_target_gain")]
    pub target_gain_db: f64,
    #[serde(default)]
    pub traditional: Vec<TraditionalDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plna: Option<PlnaDesign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explorer: Option<ExplorerConfig>,
}

/// A design looked up by id.
#[derive(Debug, Clone, Copy)]
pub enum DesignRef<'a> {
    Traditional(&'a TraditionalDesign),
    Plna(&'a PlnaDesign),
}

impl Config {
    /// Built-in dataset with the published spec and targets.
    pub fn paper() -> Self {
        let designs = builtin_paper_designs();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            spec: LnaSpecCorner::default(),
            targets: ReceiverTargets::default(),
            stage_two: None,
            target_gain_db: DEFAULT_TARGET_GAIN_DB,
            traditional: designs.traditional,
            plna: Some(designs.plna),
            explorer: Some(ExplorerConfig::default()),
        }
    }

    pub fn stage_two_limits(&self) -> Result<StageTwoLimits, ConfigError> {
        match self.stage_two {
            Some(l) => Ok(l),
            None => derive_stage2_limits(&self.spec, &self.targets).map_err(|e| {
                ConfigError::Invariant {
                    path: "targets".into(),
                    message: e.to_string(),
                }
            }),
        }
    }

    pub fn design(&self, id: &str) -> Option<DesignRef<'_>> {
        if let Some(p) = self.plna.as_ref().filter(|p| p.id == id) {
            return Some(DesignRef::Plna(p));
        }
        self.traditional
            .iter()
            .find(|d| d.id == id)
            .map(DesignRef::Traditional)
    }

    pub fn design_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.traditional.iter().map(|d| d.id.clone()).collect();
        ids.extend(self.plna.iter().map(|p| p.id.clone()));
        ids
    }

    /// Traditional design by id, or by nominal current written as "0.4".
    pub fn find_traditional(&self, key: &str) -> Option<&TraditionalDesign> {
        self.traditional.iter().find(|d| d.id == key).or_else(|| {
            let ma: f64 = key.trim_end_matches("mA").parse().ok()?;
            self.traditional
                .iter()
                .find(|d| (d.nominal_current_ma - ma).abs() < 1e-9)
        })
    }

    pub fn plna(&self) -> Result<&PlnaDesign, ConfigError> {
        self.plna.as_ref().ok_or_else(|| ConfigError::Invariant {
            path: "plna".into(),
            message: "no programmable LNA defined".into(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the compact JSON form; stable across re-serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        let inv = |path: &str, message: String| ConfigError::Invariant {
            path: path.to_string(),
            message,
        };
        self.spec
            .validate()
            .map_err(|e| inv("spec", e.to_string()))?;
        self.targets
            .validate()
            .map_err(|e| inv("targets", e.to_string()))?;
        self.stage_two_limits()?;
        if !self.target_gain_db.is_finite() {
            return Err(inv("target_gain_db", "must be finite".into()));
        }

        let mut seen = std::collections::BTreeSet::new();
        for (i, d) in self.traditional.iter().enumerate() {
            let path = format!("traditional[{i}]");
            d.validate().map_err(|e| inv(&path, e.to_string()))?;
            validate_marginals(&format!("{path}.variability"), &d.variability)?;
            d.correlation
                .validate()
                .map_err(|e| inv(&format!("{path}.correlation"), e.to_string()))?;
            if !seen.insert(d.id.clone()) {
                return Err(inv(
                    &format!("{path}.id"),
                    format!("duplicate design id '{}'", d.id),
                ));
            }
        }
        if let Some(p) = &self.plna {
            p.validate().map_err(|e| inv("plna", e.to_string()))?;
            for (j, m) in p.modes.iter().enumerate() {
                validate_marginals(&format!("plna.modes[{j}].variability"), &m.variability)?;
            }
            p.correlation
                .validate()
                .map_err(|e| inv("plna.correlation", e.to_string()))?;
            if !seen.insert(p.id.clone()) {
                return Err(inv("plna.id", format!("duplicate design id '{}'", p.id)));
            }
        }
        if let Some(x) = &self.explorer {
            x.validate().map_err(|e| inv("explorer", e))?;
        }
        Ok(())
    }
}

fn validate_marginals(path: &str, m: &ModeMarginals) -> Result<(), ConfigError> {
    for p in RfParam::ALL {
        let spec = m.get(p);
        let field = p.name().split('_').next().unwrap_or(p.name());
        if !spec.mean.is_finite() {
            return Err(ConfigError::Invariant {
                path: format!("{path}.{field}.mean"),
                message: "must be finite".into(),
            });
        }
        if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
            return Err(ConfigError::Invariant {
                path: format!("{path}.{field}.sigma"),
                message: format!("must be >= 0, got {}", spec.sigma),
            });
        }
    }
    Ok(())
}

/// Parse and fully validate a JSON config document.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl Default for Config {
    fn default() -> Self {
        Self::paper()
    }
}

pub fn is_builtin_name(name: &str) -> bool {
    name == "paper" || name == PLNA_ID || name.starts_with("paper-")
}
