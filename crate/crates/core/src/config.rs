//! Pipeline parameters. Loaded from TOML with one table per stage; missing
//! keys take their defaults and CLI flags override the file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::EventProperty;
use crate::detect::DetectionParams;
use crate::dissect::DissectParams;
use crate::error::{Error, Result};
use crate::influence::{AggregateMode, SquashMode};
use crate::io::Eye;
use crate::preprocess::PreprocessParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EyeChoice {
    /// Right eye of binocular recordings, the only track otherwise.
    #[default]
    Auto,
    Left,
    Right,
    Mono,
}

impl EyeChoice {
    pub fn eye(self) -> Option<Eye> {
        match self {
            EyeChoice::Auto => None,
            EyeChoice::Left => Some(Eye::Left),
            EyeChoice::Right => Some(Eye::Right),
            EyeChoice::Mono => Some(Eye::Mono),
        }
    }
}

impl std::str::FromStr for EyeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            "mono" => Ok(Self::Mono),
            _ => Err(Error::Config(format!("unknown eye '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfluenceParams {
    pub top_frac: f64,
    pub squash: SquashMode,
    pub aggregate: AggregateMode,
}

impl Default for InfluenceParams {
    fn default() -> Self {
        Self { top_frac: 0.02, squash: SquashMode::Signed, aggregate: AggregateMode::Both }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinModeChoice {
    #[default]
    Width,
    Quantile,
    Explicit,
}

impl std::str::FromStr for BinModeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "width" => Ok(Self::Width),
            "quantile" => Ok(Self::Quantile),
            "explicit" => Ok(Self::Explicit),
            _ => Err(Error::Config(format!("unknown bin mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningParams {
    pub bins: usize,
    pub mode: BinModeChoice,
    /// Used with `mode = "explicit"`.
    pub edges: Vec<f64>,
    pub properties: Vec<EventProperty>,
}

impl Default for BinningParams {
    fn default() -> Self {
        Self { bins: 20, mode: BinModeChoice::Width, edges: Vec::new(), properties: EventProperty::ALL.to_vec() }
    }
}

/// Every parameter that affects results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub eye: EyeChoice,
    pub sampling_rate_hz: f64,
    pub preprocess: PreprocessParams,
    pub detect: DetectionParams,
    pub dissect: DissectParams,
    pub influence: InfluenceParams,
    pub binning: BinningParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            eye: EyeChoice::Auto,
            sampling_rate_hz: 1000.0,
            preprocess: PreprocessParams::default(),
            detect: DetectionParams::default(),
            dissect: DissectParams::default(),
            influence: InfluenceParams::default(),
            binning: BinningParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz > 0.0) {
            return Err(Error::Config(format!("sampling rate must be positive, got {}", self.sampling_rate_hz)));
        }
        self.preprocess.validate()?;
        self.detect.validate()?;
        let d = &self.dissect;
        if !(d.peak_ratio > 0.0 && d.peak_ratio <= 1.0) || !(d.flank_ratio >= 0.0) {
            return Err(Error::Config("peak_ratio must be in (0, 1] and flank_ratio >= 0".into()));
        }
        if !(self.influence.top_frac > 0.0 && self.influence.top_frac <= 1.0) {
            return Err(Error::Config(format!("top_frac must be in (0, 1], got {}", self.influence.top_frac)));
        }
        if self.binning.bins == 0 {
            return Err(Error::Config("bins must be >= 1".into()));
        }
        if self.binning.mode == BinModeChoice::Explicit && self.binning.edges.len() < 2 {
            return Err(Error::Config("explicit binning needs at least 2 edges".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_partial_sections() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let partial = PipelineConfig::from_toml("[detect]\nsacc_lambda = 5.0\n").unwrap();
        assert_eq!(partial.detect.sacc_lambda, 5.0);
        assert_eq!(partial.detect.fix_max_velocity, 20.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[detect]\nlambda = 5.0\n").is_err());
        assert!(PipelineConfig::from_toml("[influence]\ntop_frac = 0.0\n").is_err());
    }
}
