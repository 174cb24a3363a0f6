//! The shared TOML configuration file. Every section is optional and falls
//! back to the defaults used throughout the crate; keys carry their unit as
//! a suffix (`_ev`, `_cm`, `_hz`, `_days`, ...).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationOptions;
use crate::event_io::{VetoPolicy, SDD_COUNT};
use crate::limit::{BoundConvention, ErrorMode, PublishedInputs, RoiDefinition};
use crate::model::{default_line_table, GeometryConfig, LineTable, PhysicsConstants, ResponseModel};
use crate::sim::{InjectionConfig, SimSetup, SourceModel};
use crate::Real;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CampaignConfig<T> {
    pub on_days: T,
    pub off_days: T,
    pub current_a: T,
}

impl<T: Real> Default for CampaignConfig<T> {
    fn default() -> Self {
        Self {
            on_days: T::lit(34.0),
            off_days: T::lit(28.0),
            current_a: T::lit(100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct EfficiencyConfig<T> {
    /// Monte Carlo sample count for the `efficiency` command.
    pub samples: u64,
    /// Efficiency used by simulation and limit stages.
    pub value: T,
}

impl<T: Real> Default for EfficiencyConfig<T> {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            value: T::lit(0.01),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct AnalysisConfig<T> {
    pub roi: RoiDefinition<T>,
    pub error_mode: ErrorMode,
    pub bound_convention: BoundConvention,
    pub n_sigma: T,
    pub veto_policy: VetoPolicy,
    pub detectors: Vec<u8>,
}

impl<T: Real> Default for AnalysisConfig<T> {
    fn default() -> Self {
        Self {
            roi: RoiDefinition::default(),
            error_mode: ErrorMode::default(),
            bound_convention: BoundConvention::default(),
            n_sigma: T::lit(3.0),
            veto_policy: VetoPolicy::default(),
            detectors: (0..SDD_COUNT).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ProjectionConfig<T> {
    pub target: T,
}

impl<T: Real> Default for ProjectionConfig<T> {
    fn default() -> Self {
        Self { target: T::lit(1e-31) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + DeserializeOwned"))]
pub struct Config<T> {
    #[serde(default)]
    pub constants: PhysicsConstants<T>,
    #[serde(default)]
    pub response: ResponseModel<T>,
    #[serde(default = "GeometryConfig::default_layout")]
    pub geometry: GeometryConfig<T>,
    /// Replaces the built-in line table when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<LineTable<T>>,
    /// Relative-intensity overrides by line label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub line_intensities: BTreeMap<String, T>,
    /// Replaces the tuned default source model when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceModel<T>>,
    #[serde(default = "InjectionConfig::off")]
    pub injection: InjectionConfig<T>,
    #[serde(default)]
    pub campaign: CampaignConfig<T>,
    #[serde(default)]
    pub efficiency: EfficiencyConfig<T>,
    /// Derived from the response model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationOptions<T>>,
    #[serde(default)]
    pub analysis: AnalysisConfig<T>,
    #[serde(default)]
    pub published: PublishedInputs<T>,
    #[serde(default)]
    pub projection: ProjectionConfig<T>,
}

impl<T: Real + DeserializeOwned + Serialize> Default for Config<T> {
    fn default() -> Self {
        Self::from_toml_str("").expect("empty config is valid")
    }
}

impl<T: Real + DeserializeOwned + Serialize> Config<T> {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every section; geometry problems such as overlapping detectors
    /// surface here, at load time.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.constants.validate().map_err(invalid)?;
        self.response.validate().map_err(invalid)?;
        self.geometry.validate().map_err(invalid)?;
        self.geometry.check_consistent(&self.constants).map_err(invalid)?;
        self.injection.validate().map_err(invalid)?;
        self.line_table()?;
        self.source_model()?.validate().map_err(invalid)?;
        if !(self.campaign.on_days > T::zero() && self.campaign.off_days > T::zero()) {
            return Err(invalid("campaign durations must be positive"));
        }
        if !(self.campaign.current_a >= T::zero()) {
            return Err(invalid("campaign current must be >= 0"));
        }
        if !(self.efficiency.value > T::zero() && self.efficiency.value <= T::one()) {
            return Err(invalid(format!("efficiency.value {} outside (0, 1]", self.efficiency.value)));
        }
        if let Some(bad) = self.analysis.detectors.iter().find(|&&d| d >= SDD_COUNT) {
            return Err(invalid(format!("analysis.detectors: no SDD {bad}")));
        }
        RoiDefinition::new(self.analysis.roi.low_ev, self.analysis.roi.high_ev).map_err(invalid)?;
        Ok(())
    }

    pub fn line_table(&self) -> Result<LineTable<T>, ConfigError> {
        let mut table = self.lines.clone().unwrap_or_else(default_line_table);
        for (label, &intensity) in &self.line_intensities {
            table.set_intensity(label, intensity).map_err(invalid)?;
        }
        Ok(table)
    }

    pub fn source_model(&self) -> Result<SourceModel<T>, ConfigError> {
        match &self.source {
            Some(source) => Ok(source.clone()),
            None => SourceModel::published_default(&self.line_table()?, &self.response).map_err(invalid),
        }
    }

    pub fn calibration_options(&self) -> CalibrationOptions<T> {
        self.calibration
            .clone()
            .unwrap_or_else(|| CalibrationOptions::for_response(&self.response))
    }

    pub fn sim_setup(&self) -> Result<SimSetup<T>, ConfigError> {
        Ok(SimSetup {
            source: self.source_model()?,
            injection: self.injection,
            response: self.response.clone(),
            efficiency: self.efficiency.value,
            consts: self.constants.clone(),
        })
    }
}
