//! Classical Poisson surrogate for single-photon-level detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealGrid;

/// Expected photon statistics of one detected frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Expected total detected photons per frame.
    #[serde(default = "default_photon_budget")]
    pub photon_budget: f64,
    /// Expected dark counts per pixel per frame.
    #[serde(default)]
    pub dark_level: f64,
}

fn default_photon_budget() -> f64 {
    1e6
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { photon_budget: default_photon_budget(), dark_level: 0.0 }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.photon_budget.is_finite() && self.photon_budget > 0.0) {
            return Err(Error::InvalidNoise(format!(
                "photon budget must be positive, got {}",
                self.photon_budget
            )));
        }
        if !(self.dark_level.is_finite() && self.dark_level >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "dark level must be >= 0, got {}",
                self.dark_level
            )));
        }
        Ok(())
    }
}

/// Per-pixel independent Poisson draw with mean
/// `intensity * (budget / frame_total) + dark_level`; deterministic per seed.
pub fn apply_shot_noise(intensity: &RealGrid, model: &NoiseModel, rng_seed: u64) -> Result<RealGrid> {
    model.validate()?;
    if let Some(v) = intensity.samples().iter().find(|v| **v < 0.0) {
        return Err(Error::InvalidNoise(format!("negative intensity {v}")));
    }
    let frame_total: f64 = intensity.samples().iter().sum();
    if frame_total <= 0.0 {
        return Err(Error::InvalidNoise(
            "zero frame total with a nonzero photon budget".into(),
        ));
    }
    let scale = model.photon_budget / frame_total;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let samples = intensity
        .samples()
        .iter()
        .map(|&v| {
            let lambda = v * scale + model.dark_level;
            // the sampler misbehaves for subnormal means, and a mean below
            // 1e-9 counts never yields a photon at any realistic ensemble
            // size anyway
            if lambda <= 1e-9 {
                0.0
            } else {
                Poisson::new(lambda).expect("positive finite mean").sample(&mut rng)
            }
        })
        .collect();
    RealGrid::new(intensity.spec(), samples)
}
