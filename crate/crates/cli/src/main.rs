//! Command-line interface: ensemble simulation, single-shot reconstruction
//! from recorded frames, turbulence-screen generation, and the built-in
//! invariant suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pditomo_core::harness::io::{
    load_interferogram_set, load_real_grid, save_interferogram_set, save_real_grid,
    save_state_json, write_records_csv, write_stats_json, GridEncoding, GridKind,
};
use pditomo_core::harness::{
    run_ensemble, ExperimentConfig, NoiseMode, PreparationMode, TurbulenceMode,
};
use pditomo_core::pdi::{reconstruct_full, AcquisitionMeta, InterferogramSet};
use pditomo_core::turbulence::{
    generate_screen, separation_ladder, structure_function, PhaseScreen, ScreenGenSpec,
};
use pditomo_core::{aperture, selftest};

#[derive(Parser)]
#[command(
    name = "pditomo",
    about = "Point-diffraction interferometry tomography of spatial qudits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Number of trials (overrides the config)
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// Base RNG seed (overrides the config)
    #[arg(long)]
    base_seed: Option<u64>,
    /// Enable or disable aberration correction
    #[arg(long)]
    correction: Option<bool>,
    /// Disable turbulence regardless of the config
    #[arg(long)]
    no_turbulence: bool,
    /// Fried parameter in meters (implies turbulence on)
    #[arg(long)]
    r0_m: Option<f64>,
    /// Disable shot noise regardless of the config
    #[arg(long)]
    no_noise: bool,
    /// Poisson photon budget per frame (implies noise on)
    #[arg(long)]
    photon_budget: Option<f64>,
    /// Preparation mode: "ideal" or "grating"
    #[arg(long)]
    preparation: Option<String>,
    /// Worker threads (0 = default); results do not depend on this
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), String> {
        if let Some(n) = self.ensemble_size {
            cfg.ensemble_size = n;
        }
        if let Some(s) = self.base_seed {
            cfg.base_seed = s;
        }
        if let Some(c) = self.correction {
            cfg.correction = c;
        }
        if self.no_turbulence {
            cfg.turbulence = TurbulenceMode::Off;
        }
        if let Some(r0) = self.r0_m {
            cfg.turbulence = match cfg.turbulence {
                TurbulenceMode::Kolmogorov(mut spec) => {
                    spec.r0_m = r0;
                    TurbulenceMode::Kolmogorov(spec)
                }
                TurbulenceMode::Off => TurbulenceMode::Kolmogorov(ScreenGenSpec {
                    method: Default::default(),
                    r0_m: r0,
                    rng_seed: 0,
                }),
            };
        }
        if self.no_noise {
            cfg.noise = NoiseMode::Off;
        }
        if let Some(b) = self.photon_budget {
            cfg.noise = match cfg.noise {
                NoiseMode::Poisson(mut m) => {
                    m.photon_budget = b;
                    NoiseMode::Poisson(m)
                }
                NoiseMode::Off => NoiseMode::Poisson(pditomo_core::noise::NoiseModel {
                    photon_budget: b,
                    dark_level: 0.0,
                }),
            };
        }
        match self.preparation.as_deref() {
            None => {}
            Some("ideal") => cfg.preparation = PreparationMode::Ideal,
            Some("grating") => {
                if !matches!(cfg.preparation, PreparationMode::Grating { .. }) {
                    cfg.preparation = PreparationMode::default_grating();
                }
            }
            Some(other) => return Err(format!("unknown preparation mode `{other}`")),
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble from a config file and write records + stats
    Simulate {
        /// Experiment config JSON; omit to use the built-in default
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for records.csv, stats.json, config.json
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also save each trial's recorded interferograms ("f64" or "u16")
        #[arg(long)]
        save_frames: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Reconstruct a state from N recorded interferogram files
    Reconstruct {
        /// Experiment config JSON describing the geometry
        #[arg(long)]
        config: Option<PathBuf>,
        /// Interferogram grid files, in phase-step order (alternative: --set-dir)
        #[arg(long, num_args = 1..)]
        frames: Vec<PathBuf>,
        /// Directory written by `simulate --save-frames` or the I/O API
        #[arg(long)]
        set_dir: Option<PathBuf>,
        /// Where to write the reconstructed state JSON
        #[arg(long, default_value = "state.json")]
        state_out: PathBuf,
        /// Where to write the phase map (binary grid, f64)
        #[arg(long)]
        phase_out: Option<PathBuf>,
    },
    /// Generate turbulence screens and validate their structure function
    Screens {
        /// Experiment config JSON (grid + turbulence spec); omit for defaults
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of screens
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Fried parameter in meters
        #[arg(long)]
        r0_m: Option<f64>,
        /// Base seed for the screen ensemble
        #[arg(long, default_value_t = 0)]
        base_seed: u64,
        /// Directory to save the screens as phase grids (optional)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Where to write the structure-function CSV
        #[arg(long, default_value = "structure_function.csv")]
        sf_csv: PathBuf,
    },
    /// Run the built-in invariant suite
    Selftest,
}

fn default_screen_spec() -> ScreenGenSpec {
    ScreenGenSpec { method: Default::default(), r0_m: 1.9e-3, rng_seed: 0 }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out_dir, save_frames, overrides } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path).map_err(|e| e.to_string())?,
                None => ExperimentConfig::experiment_default(),
            };
            overrides.apply(&mut cfg)?;
            cfg.validate().map_err(|e| e.to_string())?;
            let frames_encoding = match save_frames.as_deref() {
                None => None,
                Some("f64") => Some(GridEncoding::F64),
                Some("u16") => Some(GridEncoding::U16),
                Some(other) => return Err(format!("unknown frame encoding `{other}`")),
            };
            std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            let outcome = run_ensemble(&cfg).map_err(|e| e.to_string())?;

            if let Some(encoding) = frames_encoding {
                for rec in &outcome.records {
                    let set = pditomo_core::harness::trial::reproduce_interferograms(&cfg, rec)
                        .map_err(|e| e.to_string())?;
                    let dir = out_dir.join(format!("trial_{:04}", rec.trial_index));
                    save_interferogram_set(&dir, &set, encoding).map_err(|e| e.to_string())?;
                }
            }

            write_records_csv(&out_dir.join("records.csv"), &outcome.records)
                .map_err(|e| e.to_string())?;
            write_stats_json(
                &out_dir.join("stats.json"),
                &outcome.stats_uncorrected,
                outcome.stats_corrected.as_ref(),
            )
            .map_err(|e| e.to_string())?;
            cfg.save(&out_dir.join("config.json")).map_err(|e| e.to_string())?;

            for f in &outcome.failures {
                eprintln!("warning: trial {} failed: {}", f.trial_index, f.message);
            }
            let st = &outcome.stats_uncorrected;
            println!(
                "{} trials, mean fidelity {:.5} +- {:.5}",
                st.count, st.mean_fidelity, st.std_fidelity
            );
            if let Some(c) = &outcome.stats_corrected {
                println!(
                    "corrected: mean fidelity {:.5} +- {:.5}",
                    c.mean_fidelity, c.std_fidelity
                );
            }
            println!("records: {}", out_dir.join("records.csv").display());
            Ok(())
        }
        Command::Reconstruct { config, frames, set_dir, state_out, phase_out } => {
            let cfg = match config {
                Some(path) => ExperimentConfig::load(&path).map_err(|e| e.to_string())?,
                None => ExperimentConfig::experiment_default(),
            };
            let set = match (set_dir, frames.is_empty()) {
                (Some(dir), _) => load_interferogram_set(&dir).map_err(|e| e.to_string())?,
                (None, false) => {
                    let mut grids = Vec::new();
                    for f in &frames {
                        grids.push(load_real_grid(f).map_err(|e| e.to_string())?);
                    }
                    let grid = grids[0].spec();
                    let mut filter = cfg.filter;
                    filter.num_steps_n = grids.len();
                    filter.validate().map_err(|e| e.to_string())?;
                    InterferogramSet::new(
                        grids,
                        AcquisitionMeta { filter, grid, noise: None, rng_seed: None },
                    )
                    .map_err(|e| e.to_string())?
                }
                (None, true) => return Err("provide --frames or --set-dir".into()),
            };
            let rois = aperture::roi_rectangles(&cfg.geometry, &set.meta().grid, &cfg.roi_margin)
                .map_err(|e| e.to_string())?;
            let rec = reconstruct_full(&set, &cfg.geometry, &rois, &cfg.c0_region)
                .map_err(|e| e.to_string())?;
            save_state_json(&state_out, &rec.estimated_state).map_err(|e| e.to_string())?;
            if let Some(path) = phase_out {
                save_real_grid(&path, &rec.phase_map, GridKind::Phase, GridEncoding::F64)
                    .map_err(|e| e.to_string())?;
            }
            println!("state: {}", state_out.display());
            for d in &rec.slit_diagnostics {
                println!(
                    "slit {}: |c| ~ {:.4}, circular phase std {:.4} rad over {} px",
                    d.slit, d.amplitude_mean, d.phase_circular_std, d.valid_pixels
                );
            }
            Ok(())
        }
        Command::Screens { config, count, r0_m, base_seed, out_dir, sf_csv } => {
            let (grid, mut spec) = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::load(&path).map_err(|e| e.to_string())?;
                    let spec = match cfg.turbulence {
                        TurbulenceMode::Kolmogorov(s) => s,
                        TurbulenceMode::Off => default_screen_spec(),
                    };
                    (cfg.grid, spec)
                }
                None => (ExperimentConfig::experiment_default().grid, default_screen_spec()),
            };
            if let Some(r0) = r0_m {
                spec.r0_m = r0;
            }
            if count == 0 {
                return Err("need at least one screen".into());
            }
            let mut screens: Vec<PhaseScreen> = Vec::with_capacity(count);
            for i in 0..count {
                let mut s = spec;
                s.rng_seed = pditomo_core::seeds::trial_seed(base_seed, i as u64);
                screens.push(generate_screen(&s, &grid).map_err(|e| e.to_string())?);
            }
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
                for (i, s) in screens.iter().enumerate() {
                    save_real_grid(
                        &dir.join(format!("screen_{i:04}.grid")),
                        &s.phase,
                        GridKind::Phase,
                        GridEncoding::F64,
                    )
                    .map_err(|e| e.to_string())?;
                }
            }
            let pitch_m = grid.pitch_um * 1e-6;
            let r0_px = spec.r0_m / pitch_m;
            let max_sep = ((2.2 * r0_px) as usize).min(grid.width_px.min(grid.height_px) / 2);
            let seps = separation_ladder(1, max_sep, 20);
            let est = structure_function(&screens, &seps).map_err(|e| e.to_string())?;
            let mut w = csv::Writer::from_path(&sf_csv).map_err(|e| e.to_string())?;
            w.write_record(["separation_m", "d_rad2", "kolmogorov_rad2", "samples"])
                .map_err(|e| e.to_string())?;
            for ((s, d), n) in est.separations_m.iter().zip(&est.d_values).zip(&est.sample_counts) {
                w.write_record([
                    format!("{s}"),
                    format!("{d}"),
                    format!(
                        "{}",
                        pditomo_core::turbulence::kolmogorov_structure_value(*s, spec.r0_m)
                    ),
                    format!("{n}"),
                ])
                .map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())?;
            let d_r0 = est.value_at(spec.r0_m);
            let slope = est.loglog_slope(0.2 * spec.r0_m, 2.0 * spec.r0_m);
            println!(
                "{count} screens at r0 = {} m on {}x{}",
                spec.r0_m, grid.width_px, grid.height_px
            );
            match (d_r0, slope) {
                (Some(d), Some(sl)) => {
                    println!(
                        "D(r0) = {d:.3} rad^2 (Kolmogorov: 6.88), log-log slope {sl:.4} (5/3 = 1.6667)"
                    );
                }
                _ => println!("separation range too narrow to evaluate D(r0)"),
            }
            println!("structure function: {}", sf_csv.display());
            Ok(())
        }
        Command::Selftest => {
            let all = selftest::run_all(|c| {
                println!(
                    "[{}] {} - {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            });
            if all {
                println!("all selftest suites passed");
                Ok(())
            } else {
                Err("selftest failures".into())
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("{}", serde_json::json!({ "error": msg }));
            ExitCode::FAILURE
        }
    }
}
