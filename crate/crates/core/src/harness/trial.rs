//! Single-trial pipeline and seeded ensemble runner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aperture::{
    encode_blazed_grating, roi_rectangles, simulate_preparation, synthesize_background_mask,
    RoiSet,
};
use crate::correction::{correct_phase, estimate_background_aberration, interpolate_into_rois};
use crate::error::{Error, Result};
use crate::field::ComplexFieldGrid;
use crate::harness::config::{
    ExperimentConfig, NoiseMode, PreparationMode, StatePreset, TurbulenceMode,
};
use crate::pdi::{extract_state, record_interferograms, reconstruct_full};
use crate::qudit::{self, fidelity, QuditState};
use crate::seeds;
use crate::turbulence::{apply_screen, generate_screen};

/// Everything recorded about one reconstructed state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub trial_seed: u64,
    pub true_state: QuditState,
    pub screen_seed: Option<u64>,
    pub estimated_uncorrected: QuditState,
    pub estimated_corrected: Option<QuditState>,
    pub fidelity_uncorrected: f64,
    pub fidelity_corrected: Option<f64>,
}

/// A trial that errored out; kept out of the statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: usize,
    pub message: String,
}

/// Builds the object field for a state under the configured preparation.
pub fn build_object_field(cfg: &ExperimentConfig, state: &QuditState) -> Result<ComplexFieldGrid> {
    let mask = synthesize_background_mask(&cfg.geometry, state, &cfg.grid)?;
    match &cfg.preparation {
        PreparationMode::Ideal => Ok(mask),
        PreparationMode::Grating { encoding, filter_width_px } => {
            let pattern = encode_blazed_grating(&mask, encoding)?;
            simulate_preparation(&pattern, encoding, *filter_width_px)
        }
    }
}

/// Runs one complete acquisition and reconstruction for a known state.
///
/// Substreams of `trial_seed` drive the screen and the shot noise, so
/// enabling or disabling the correction never changes the uncorrected half.
pub fn run_trial(
    cfg: &ExperimentConfig,
    state: &QuditState,
    trial_index: usize,
    trial_seed: u64,
) -> Result<TrialRecord> {
    let rois: RoiSet = roi_rectangles(&cfg.geometry, &cfg.grid, &cfg.roi_margin)?;
    let mut field = build_object_field(cfg, state)?;

    let mut screen_seed = None;
    if let TurbulenceMode::Kolmogorov(spec) = &cfg.turbulence {
        let seed = seeds::substream(trial_seed, seeds::label::SCREEN);
        let mut spec = *spec;
        spec.rng_seed = seed;
        let screen = generate_screen(&spec, &cfg.grid)?;
        field = apply_screen(&field, &screen)?;
        screen_seed = Some(seed);
    }

    let noise_seed = seeds::substream(trial_seed, seeds::label::NOISE);
    let noise = match &cfg.noise {
        NoiseMode::Off => None,
        NoiseMode::Poisson(model) => Some((model, noise_seed)),
    };

    let set = record_interferograms(&field, &cfg.filter, noise)?;
    let rec = reconstruct_full(&set, &cfg.geometry, &rois, &cfg.c0_region)?;
    let fidelity_uncorrected = fidelity(state, &rec.estimated_state)?;

    let mut estimated_corrected = None;
    let mut fidelity_corrected = None;
    if cfg.correction {
        let ab = estimate_background_aberration(&rec.phase_map, &rec.phase_valid, &cfg.geometry)?;
        let full = interpolate_into_rois(&ab, &cfg.geometry)?;
        let corrected_map = correct_phase(&rec.phase_map, &full)?;
        let (state_c, _) =
            extract_state(&corrected_map, &rec.phase_valid, &rec.amplitude_map, &rois)?;
        fidelity_corrected = Some(fidelity(state, &state_c)?);
        estimated_corrected = Some(state_c);
    }

    Ok(TrialRecord {
        trial_index,
        trial_seed,
        true_state: state.clone(),
        screen_seed,
        estimated_uncorrected: rec.estimated_state,
        estimated_corrected,
        fidelity_uncorrected,
        fidelity_corrected,
    })
}

/// Rebuilds the exact interferogram set a recorded trial measured, including
/// its screen and noise substreams.
pub fn reproduce_interferograms(
    cfg: &ExperimentConfig,
    record: &TrialRecord,
) -> Result<crate::pdi::InterferogramSet> {
    let mut field = build_object_field(cfg, &record.true_state)?;
    if let TurbulenceMode::Kolmogorov(spec) = &cfg.turbulence {
        let mut spec = *spec;
        spec.rng_seed = record
            .screen_seed
            .unwrap_or_else(|| seeds::substream(record.trial_seed, seeds::label::SCREEN));
        let screen = generate_screen(&spec, &cfg.grid)?;
        field = apply_screen(&field, &screen)?;
    }
    let noise_seed = seeds::substream(record.trial_seed, seeds::label::NOISE);
    let noise = match &cfg.noise {
        NoiseMode::Off => None,
        NoiseMode::Poisson(model) => Some((model, noise_seed)),
    };
    record_interferograms(&field, &cfg.filter, noise)
}

/// Fidelity histogram over [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = ((v * bins as f64).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self { edges, counts }
    }
}

/// Count, mean, population standard deviation, and histogram of fidelities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub count: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub histogram: Histogram,
}

/// Two-pass mean and population standard deviation (size-1 ensembles get 0).
pub fn compute_stats(fidelities: &[f64], bins: usize) -> EnsembleStats {
    let n = fidelities.len();
    let mean = if n == 0 { 0.0 } else { fidelities.iter().sum::<f64>() / n as f64 };
    let var = if n == 0 {
        0.0
    } else {
        fidelities.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n as f64
    };
    EnsembleStats {
        count: n,
        mean_fidelity: mean,
        std_fidelity: var.sqrt(),
        histogram: Histogram::new(fidelities, bins),
    }
}

/// Records plus aggregated statistics for one ensemble run.
#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub stats_uncorrected: EnsembleStats,
    pub stats_corrected: Option<EnsembleStats>,
}

const HISTOGRAM_BINS: usize = 20;

fn make_state(cfg: &ExperimentConfig, state_seed: u64) -> Result<QuditState> {
    match cfg.state_preset {
        StatePreset::Haar => qudit::haar_random(cfg.dimension_d, state_seed),
        StatePreset::UniformAmplitude => {
            qudit::uniform_amplitude_random_phases(cfg.dimension_d, state_seed)
        }
    }
}

/// Runs `ensemble_size` independent trials with per-trial derived seeds.
/// The outcome is identical for any worker count or execution order.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<EnsembleOutcome> {
    cfg.validate()?;
    let run = || -> Vec<std::result::Result<TrialRecord, TrialFailure>> {
        (0..cfg.ensemble_size)
            .into_par_iter()
            .map(|i| {
                let trial_seed = seeds::trial_seed(cfg.base_seed, i as u64);
                let state_seed = seeds::substream(trial_seed, seeds::label::STATE);
                let state = make_state(cfg, state_seed).map_err(|e| TrialFailure {
                    trial_index: i,
                    message: e.to_string(),
                })?;
                run_trial(cfg, &state, i, trial_seed).map_err(|e| TrialFailure {
                    trial_index: i,
                    message: Error::Trial { trial: i, source: Box::new(e) }.to_string(),
                })
            })
            .collect()
    };
    let results = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    };

    let mut records = Vec::with_capacity(cfg.ensemble_size);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    let fidelities: Vec<f64> = records.iter().map(|r| r.fidelity_uncorrected).collect();
    let stats_uncorrected = compute_stats(&fidelities, HISTOGRAM_BINS);
    let stats_corrected = if cfg.correction {
        let fc: Vec<f64> = records.iter().filter_map(|r| r.fidelity_corrected).collect();
        Some(compute_stats(&fc, HISTOGRAM_BINS))
    } else {
        None
    };
    Ok(EnsembleOutcome { records, failures, stats_uncorrected, stats_corrected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::SlitGeometry;
    use crate::field::GridSpec;

    /// Small geometry that keeps unit-test ensembles fast.
    pub(crate) fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::experiment_default();
        cfg.grid = GridSpec { width_px: 192, height_px: 192, pitch_um: 43.0 };
        cfg.geometry = SlitGeometry {
            d: 4,
            slit_width_a_px: 4,
            slit_separation_s_px: 6,
            slit_length_l_px: 120,
            pupil_radius_r_px: 72.0,
            center_offset_px: (0, 0),
        };
        cfg.dimension_d = 4;
        cfg.ensemble_size = 4;
        cfg
    }

    #[test]
    fn noiseless_trial_reaches_high_fidelity() {
        let cfg = small_config();
        let state = qudit::haar_random(4, 5).unwrap();
        let rec = run_trial(&cfg, &state, 0, 123).unwrap();
        assert!(rec.fidelity_uncorrected >= 0.999, "{}", rec.fidelity_uncorrected);
        assert!(rec.fidelity_corrected.is_none());
    }

    #[test]
    fn ensemble_is_deterministic_across_worker_counts() {
        let mut cfg = small_config();
        cfg.ensemble_size = 6;
        let mut a = cfg.clone();
        a.workers = 1;
        let mut b = cfg.clone();
        b.workers = 3;
        let ra = run_ensemble(&a).unwrap();
        let rb = run_ensemble(&b).unwrap();
        assert_eq!(ra.records.len(), rb.records.len());
        for (x, y) in ra.records.iter().zip(&rb.records) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn correction_flag_does_not_alter_uncorrected_results() {
        let mut on = small_config();
        on.correction = true;
        let mut off = small_config();
        off.correction = false;
        let ron = run_ensemble(&on).unwrap();
        let roff = run_ensemble(&off).unwrap();
        for (x, y) in ron.records.iter().zip(&roff.records) {
            assert_eq!(x.fidelity_uncorrected.to_bits(), y.fidelity_uncorrected.to_bits());
            assert_eq!(x.estimated_uncorrected, y.estimated_uncorrected);
        }
    }

    #[test]
    fn stats_match_direct_two_pass() {
        let vals = [0.9, 0.95, 0.99, 1.0, 0.85];
        let st = compute_stats(&vals, 20);
        let mean = vals.iter().sum::<f64>() / 5.0;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((st.mean_fidelity - mean).abs() < 1e-12);
        assert!((st.std_fidelity - var.sqrt()).abs() < 1e-12);
        assert_eq!(st.count, 5);
        assert_eq!(st.histogram.counts.iter().sum::<u64>(), 5);
    }

    #[test]
    fn singleton_ensemble_stats() {
        let st = compute_stats(&[0.97], 20);
        assert_eq!(st.count, 1);
        assert_eq!(st.mean_fidelity, 0.97);
        assert_eq!(st.std_fidelity, 0.0);
    }
}
