//! The JSON configuration document. Every section and field is optional;
//! missing values take the built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ccl::Connectivity;
use crate::error::{Error, Result};
use crate::lander::LanderParams;
use crate::marker::MarkerParams;
use crate::shapes::{CameraModel, MarkerSpec, ToleranceProfile};
use crate::threshold::{DEFAULT_LOCAL_RADIUS, DEFAULT_WINDOW};

/// Binarization variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Binarize {
    /// Window thresholds blended bilinearly between window centres.
    #[default]
    Interp,
    /// Window thresholds without interpolation.
    Window,
    /// Per-pixel neighbourhood min/max.
    Local,
    /// One threshold for the whole frame.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub binarize: Binarize,
    /// 4 or 8.
    pub connectivity: u8,
    pub window: usize,
    pub local_radius: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            binarize: Binarize::Interp,
            connectivity: 8,
            window: DEFAULT_WINDOW,
            local_radius: DEFAULT_LOCAL_RADIUS,
        }
    }
}

impl PipelineConfig {
    pub fn connectivity(&self) -> Result<Connectivity> {
        Connectivity::from_number(self.connectivity)
            .ok_or_else(|| Error::Input(format!("connectivity must be 4 or 8, got {}", self.connectivity)))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub camera: CameraModel,
    pub marker_spec: MarkerSpec,
    pub thresholds: ToleranceProfile,
    pub marker: MarkerParams,
    pub lander: LanderParams,
    pub pipeline: PipelineConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.marker_spec.validate()?;
        self.pipeline.connectivity()?;
        if self.pipeline.window < 2 {
            return Err(Error::Input("pipeline.window must be at least 2".into()));
        }
        if self.pipeline.local_radius < 1 {
            return Err(Error::Input("pipeline.local_radius must be at least 1".into()));
        }
        self.lander.validate()
    }
}
