//! Run configuration file (TOML).
//!
//! ```toml
//! config_version = 1
//!
//! [generation]
//! volume_fraction = 0.2
//! cylinder_share = 0.5
//!
//! [calibration]
//! k_ss = 1.0
//!
//! [solver]
//! method = "auto"
//!
//! [campaign]
//! n_samples = 30
//!
//! [voxel]
//! connectivity = "full26"
//! ```
//!
//! Every section and key is optional except `config_version`; unknown keys
//! are rejected. Calibration constants files use the `[calibration]` keys
//! at top level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{GenerationSpec, Method};
use crate::graph::CalibrationConstants;
use crate::montecarlo::{CampaignConfig, Sweep, SweepVariable};
use crate::solver::{HomogenizationOptions, SolveMethod, SolverOptions};
use crate::voxel::Connectivity;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("missing required key `config_version`")]
    MissingVersion,
    #[error("unsupported config_version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub config_version: u32,
    pub generation: GenerationConfig,
    pub calibration: CalibrationConstants,
    pub solver: SolverConfig,
    pub campaign: CampaignSection,
    pub voxel: VoxelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            generation: GenerationConfig::default(),
            calibration: CalibrationConstants::default(),
            solver: SolverConfig::default(),
            campaign: CampaignSection::default(),
            voxel: VoxelConfig::default(),
        }
    }
}

/// Sample parameters. Radii follow from fraction, share and counts unless
/// given explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub volume_fraction: f64,
    pub cylinder_share: f64,
    pub n_spheres: usize,
    pub n_cylinders: usize,
    /// Length over radius.
    pub cylinder_aspect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cylinder_radius: Option<f64>,
    pub method: Method,
    pub puff_factor: f64,
    pub scale_axial: bool,
    pub seed: u64,
    pub max_attempts: usize,
    pub md_max_iterations: usize,
    pub md_tolerance: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        let spec = GenerationSpec::default();
        Self {
            volume_fraction: spec.target_volume_fraction,
            cylinder_share: crate::montecarlo::cylinder_share(&spec),
            n_spheres: spec.n_spheres,
            n_cylinders: spec.n_cylinders,
            cylinder_aspect: spec.cylinder_aspect,
            sphere_radius: None,
            cylinder_radius: None,
            method: spec.method,
            puff_factor: spec.puff_factor,
            scale_axial: spec.scale_axial,
            seed: spec.seed,
            max_attempts: spec.max_attempts,
            md_max_iterations: spec.md_max_iterations,
            md_tolerance: spec.md_tolerance,
        }
    }
}

impl GenerationConfig {
    pub fn to_spec(&self) -> Result<GenerationSpec, ConfigError> {
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(invalid(
                "generation.volume_fraction",
                format!("{} outside (0, 1)", self.volume_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.cylinder_share) {
            return Err(invalid(
                "generation.cylinder_share",
                format!("{} outside [0, 1]", self.cylinder_share),
            ));
        }
        let mut spec = GenerationSpec::from_fraction(
            self.volume_fraction,
            self.cylinder_share,
            self.n_spheres,
            self.n_cylinders,
            self.cylinder_aspect,
        );
        if let Some(r) = self.sphere_radius {
            spec.sphere_radius = r;
        }
        if let Some(r) = self.cylinder_radius {
            spec.cylinder_radius = r;
        }
        spec.method = self.method;
        spec.puff_factor = self.puff_factor;
        spec.scale_axial = self.scale_axial;
        spec.seed = self.seed;
        spec.max_attempts = self.max_attempts;
        spec.md_max_iterations = self.md_max_iterations;
        spec.md_tolerance = self.md_tolerance;
        let spec = spec.with_consistent_fraction();
        spec.validate()
            .map_err(|e| invalid("generation", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: SolveMethod,
    pub direct_edge_limit: usize,
    pub cg_tolerance: f64,
    /// 0 selects `10 n + 1000`.
    pub cg_max_iterations: usize,
    pub full_conductor_reference: f64,
    pub central_zone_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let h = HomogenizationOptions::default();
        Self {
            method: h.solver.method,
            direct_edge_limit: h.solver.direct_edge_limit,
            cg_tolerance: h.solver.cg_tolerance,
            cg_max_iterations: h.solver.cg_max_iterations,
            full_conductor_reference: h.solver.full_conductor_reference,
            central_zone_fraction: h.central_zone_fraction,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> Result<HomogenizationOptions, ConfigError> {
        let solver = SolverOptions {
            method: self.method,
            direct_edge_limit: self.direct_edge_limit,
            cg_tolerance: self.cg_tolerance,
            cg_max_iterations: self.cg_max_iterations,
            full_conductor_reference: self.full_conductor_reference,
        };
        solver
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))?;
        if !(self.central_zone_fraction > 0.0 && self.central_zone_fraction <= 1.0) {
            return Err(invalid(
                "solver.central_zone_fraction",
                format!("{} outside (0, 1]", self.central_zone_fraction),
            ));
        }
        Ok(HomogenizationOptions {
            solver,
            central_zone_fraction: self.central_zone_fraction,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub sweep_variable: SweepVariable,
    /// Empty runs the generation section as a single point.
    pub sweep_values: Vec<f64>,
    pub n_samples: usize,
    pub master_seed: u64,
    /// 0 uses every core.
    pub workers: usize,
    pub fraction_probes: usize,
    pub rve_multipliers: Vec<f64>,
}

impl Default for CampaignSection {
    fn default() -> Self {
        let c = CampaignConfig::default();
        let sweep = c
            .sweep
            .unwrap_or_else(|| Sweep::linspace(SweepVariable::CylinderShare, 0.0, 1.0, 8));
        Self {
            sweep_variable: sweep.variable,
            sweep_values: sweep.values,
            n_samples: c.n_samples_per_point,
            master_seed: c.master_seed,
            workers: c.workers,
            fraction_probes: c.fraction_probes,
            rve_multipliers: vec![1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoxelConfig {
    pub connectivity: Connectivity,
    /// Gray values at or above the threshold are solid.
    pub threshold: u16,
    /// Raw volume dimensions `[nx, ny, nz]`, x fastest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 3]>,
    pub spacing: f64,
    /// Voxels per cell edge when voxelizing a sample.
    pub resolution: usize,
    /// Overrides the grid's transverse wrap setting.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic_transverse: Option<bool>,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Full26,
            threshold: 128,
            dims: None,
            spacing: 1.0,
            resolution: 64,
            periodic_transverse: None,
        }
    }
}

impl RunConfig {
    /// Checks every section; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.config_version != CONFIG_VERSION {
            return Err(ConfigError::Version(self.config_version));
        }
        self.generation.to_spec()?;
        self.calibration
            .validate()
            .map_err(|m| invalid("calibration", m))?;
        self.solver.to_options()?;
        let c = &self.campaign;
        if c.n_samples == 0 {
            return Err(invalid("campaign.n_samples", "must be >= 1"));
        }
        if let Some(bad) = c.sweep_values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(
                "campaign.sweep_values",
                format!("non-finite value {bad}"),
            ));
        }
        if let Some(bad) = c
            .rve_multipliers
            .iter()
            .find(|m| !(m.is_finite() && **m >= 1.0))
        {
            return Err(invalid(
                "campaign.rve_multipliers",
                format!("{bad} must be >= 1"),
            ));
        }
        let v = &self.voxel;
        if !(v.spacing.is_finite() && v.spacing > 0.0) {
            return Err(invalid(
                "voxel.spacing",
                format!("{} must be positive", v.spacing),
            ));
        }
        if v.resolution < 8 {
            return Err(invalid(
                "voxel.resolution",
                format!("{} must be >= 8", v.resolution),
            ));
        }
        if let Some(d) = v.dims {
            if d.contains(&0) {
                return Err(invalid("voxel.dims", "every dimension must be >= 1"));
            }
        }
        self.campaign_config()?;
        Ok(())
    }

    pub fn campaign_config(&self) -> Result<CampaignConfig, ConfigError> {
        let c = &self.campaign;
        let sweep = if c.sweep_values.is_empty() {
            None
        } else {
            Some(Sweep {
                variable: c.sweep_variable,
                values: c.sweep_values.clone(),
            })
        };
        Ok(CampaignConfig {
            base: self.generation.to_spec()?,
            sweep,
            n_samples_per_point: c.n_samples,
            calibration: self.calibration.clone(),
            homogenization: self.solver.to_options()?,
            master_seed: c.master_seed,
            workers: c.workers,
            fraction_probes: c.fraction_probes,
        })
    }

    /// Same run with derived radii written out, so that re-reading the
    /// echoed config rebuilds the identical spec.
    pub fn resolved(&self) -> Result<Self, ConfigError> {
        let spec = self.generation.to_spec()?;
        let mut out = self.clone();
        out.generation.sphere_radius = Some(spec.sphere_radius);
        out.generation.cylinder_radius = Some(spec.cylinder_radius);
        Ok(out)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Syntax(e.to_string()))
    }
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    if !table.contains_key("config_version") {
        return Err(ConfigError::MissingVersion);
    }
    let cfg: RunConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a calibration constants file.
pub fn parse_constants(text: &str) -> Result<CalibrationConstants, ConfigError> {
    CalibrationConstants::from_toml(text).map_err(|m| invalid("calibration", m))
}

pub fn write_constants(c: &CalibrationConstants) -> String {
    c.to_toml()
}
