//! Experiment configuration: a single JSON document with a schema version.

use serde::{Deserialize, Serialize};

use crate::aperture::{GratingEncodingSpec, RoiMargin, SlitGeometry};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::noise::NoiseModel;
use crate::pdi::{PdiFilterSpec, ZeroRegion};
use crate::turbulence::ScreenGenSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// How the object field at the aperture plane is produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreparationMode {
    /// Use the background-augmented mask directly as the object field.
    Ideal,
    /// Encode the mask as a blazed phase grating and keep the first order.
    Grating {
        encoding: GratingEncodingSpec,
        filter_width_px: usize,
    },
}

impl PreparationMode {
    pub fn default_grating() -> Self {
        PreparationMode::Grating {
            encoding: GratingEncodingSpec::default(),
            filter_width_px: 21,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurbulenceMode {
    Off,
    /// Frozen Kolmogorov screen per trial; the per-trial seed overrides
    /// `rng_seed` inside the spec during ensemble runs.
    Kolmogorov(ScreenGenSpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    Off,
    Poisson(NoiseModel),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatePreset {
    Haar,
    UniformAmplitude,
}

/// Where the reference level C0 is read.
pub type C0RegionConfig = ZeroRegion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub grid: GridSpec,
    pub geometry: SlitGeometry,
    pub dimension_d: usize,
    pub filter: PdiFilterSpec,
    pub preparation: PreparationMode,
    pub turbulence: TurbulenceMode,
    pub correction: bool,
    pub noise: NoiseMode,
    pub ensemble_size: usize,
    pub state_preset: StatePreset,
    pub base_seed: u64,
    #[serde(default)]
    pub roi_margin: RoiMargin,
    #[serde(default)]
    pub c0_region: C0RegionConfig,
    /// Worker threads for ensemble runs; 0 uses the process default.
    /// Results are identical for any worker count.
    #[serde(default)]
    pub workers: usize,
}

impl ExperimentConfig {
    /// The reference operating point: d = 6 slits of 4 px at 6 px
    /// separation, N = 4 steps, 512x512 grid at 43 um pitch.
    pub fn experiment_default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            grid: GridSpec { width_px: 512, height_px: 512, pitch_um: 43.0 },
            geometry: SlitGeometry::default_for_dimension(6),
            dimension_d: 6,
            filter: PdiFilterSpec::default(),
            preparation: PreparationMode::Ideal,
            turbulence: TurbulenceMode::Off,
            correction: false,
            noise: NoiseMode::Off,
            ensemble_size: 100,
            state_preset: StatePreset::Haar,
            base_seed: 1,
            roi_margin: RoiMargin::default(),
            c0_region: ZeroRegion::default(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        // re-run the grid constructor checks on deserialized values
        GridSpec::new(self.grid.width_px, self.grid.height_px, self.grid.pitch_um)?;
        self.geometry.validate()?;
        if self.dimension_d != self.geometry.d {
            return Err(Error::InvalidConfig(format!(
                "dimension_d = {} does not match geometry.d = {}",
                self.dimension_d, self.geometry.d
            )));
        }
        self.filter.validate()?;
        match &self.preparation {
            PreparationMode::Ideal => {}
            PreparationMode::Grating { encoding, filter_width_px } => {
                encoding.validate()?;
                if *filter_width_px == 0 {
                    return Err(Error::InvalidConfig("grating filter width must be >= 1".into()));
                }
            }
        }
        if let TurbulenceMode::Kolmogorov(spec) = &self.turbulence {
            spec.validate(&self.grid)?;
        }
        if let NoiseMode::Poisson(model) = &self.noise {
            model.validate()?;
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidConfig("ensemble size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()?)?;
        Ok(())
    }
}
