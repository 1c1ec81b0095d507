//! Versioned TOML run configuration shared by all CLI subcommands.
//! Every key is optional; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{DirectionSampling, DEFAULT_SEED};
use crate::filter::FilterSpec;
use crate::io::{check_schema_version, read_pattern, read_to_string};
use crate::manifold::ArrayConfig;
use crate::pattern::{FitOptions, GaussianMixturePattern};
use crate::pipeline::DetectOptions;
use crate::signal::PulseModel;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub grid_step_deg: Option<f64>,
    pub threshold_deg: Option<f64>,
    pub trials: Option<usize>,
    #[serde(default)]
    pub pattern: PatternSource,
    #[serde(default)]
    pub array: ArraySpec,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub fit: FitSection,
    pub filter: Option<FilterSpec>,
    pub detect: Option<DetectOptions>,
    #[serde(default)]
    pub estimate: EstimateSection,
}

/// Built-in preset or a pattern parameter file; relative paths resolve
/// against the directory of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSource {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub elements: Option<usize>,
    pub offsets_deg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub snr_db: Option<f64>,
    pub manifold_error: Option<f64>,
    pub snapshots: Option<usize>,
    pub sample_rate_hz: Option<f64>,
    pub directions: Option<DirectionSampling>,
    pub pulse: Option<PulseModel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Option<Vec<f64>>,
    pub manifold_error: Option<Vec<f64>>,
    pub elements: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub components: Option<usize>,
    pub max_iterations: Option<usize>,
    pub rel_tolerance: Option<f64>,
    pub initial_width_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// `channel_map[i]` is the element recorded on CSV column `ch{i+1}`.
    pub channel_map: Option<Vec<usize>>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self {
            schema_version: crate::io::SCHEMA_VERSION,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str, context: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse(context, e.to_string()))?;
        check_schema_version(cfg.schema_version, context)?;
        Ok(cfg)
    }

    /// Load and rebase relative file references onto the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&read_to_string(path)?, &path.display().to_string())?;
        if let (Some(file), Some(dir)) = (cfg.pattern.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn grid_step_deg(&self) -> f64 {
        self.grid_step_deg.unwrap_or(1.0)
    }

    pub fn threshold_deg(&self) -> f64 {
        self.threshold_deg.unwrap_or(2.0)
    }

    pub fn resolve_pattern(&self) -> Result<GaussianMixturePattern> {
        match (&self.pattern.preset, &self.pattern.file) {
            (Some(_), Some(_)) => Err(Error::invalid("pattern: give either `preset` or `file`, not both")),
            (None, Some(file)) => read_pattern(file),
            (Some(name), None) if name != "reference" => {
                Err(Error::invalid(format!("unknown pattern preset `{name}` (available: reference)")))
            }
            _ => Ok(GaussianMixturePattern::reference()),
        }
    }

    /// Explicit offsets win over an element count; the default is six uniform elements.
    pub fn resolve_array(&self) -> Result<ArrayConfig> {
        match (&self.array.offsets_deg, self.array.elements) {
            (Some(off), Some(n)) if off.len() != n => Err(Error::invalid(format!(
                "array: {} offsets given but elements = {n}",
                off.len()
            ))),
            (Some(off), _) => ArrayConfig::with_offsets(off.clone()),
            (None, Some(n)) => ArrayConfig::uniform(n),
            (None, None) => ArrayConfig::uniform(6),
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            max_iterations: self.fit.max_iterations.unwrap_or(d.max_iterations),
            rel_tolerance: self.fit.rel_tolerance.unwrap_or(d.rel_tolerance),
            initial_width_deg: self.fit.initial_width_deg.unwrap_or(d.initial_width_deg),
            ..d
        }
    }
}
