//! Acceptance suite: one test per exit criterion, each printing a pass line
//! with the measured numbers. Run with `cargo test --test acceptance --
//! --nocapture` to see them.

use num_complex::Complex64;
use pditomo_core::aperture::*;
use pditomo_core::field::*;
use pditomo_core::harness::io::*;
use pditomo_core::harness::*;
use pditomo_core::noise::NoiseModel;
use pditomo_core::pdi::*;
use pditomo_core::qudit;
use pditomo_core::selftest;
use pditomo_core::turbulence::*;
use std::time::Instant;

fn reference_grid() -> GridSpec {
    GridSpec::new(512, 512, 43.0).unwrap()
}

fn reference_geometry() -> SlitGeometry {
    SlitGeometry::default_for_dimension(6)
}

#[test]
fn criterion_1_psi_exactness() {
    let spec = reference_grid();
    let geom = reference_geometry();
    let (cx, cy) = spec.center();
    let radius = geom.pupil_radius_r_px;
    let mut worst_overall = 0.0_f64;
    let mut worst_elapsed = std::time::Duration::ZERO;
    for (amp_seed, tilt) in [(0.0, 0.8), (0.4, -0.5), (0.9, 0.0)] {
        let phi = |x: usize, y: usize| -> f64 {
            let dx = (x as f64 - cx as f64) / radius;
            let dy = (y as f64 - cy as f64) / radius;
            1.1 * (2.3 * dx + amp_seed).sin() + 0.8 * (1.9 * dy).cos() + tilt * dx * dy
        };
        let field = ComplexFieldGrid::from_fn(spec, |x, y| {
            let dx = x as f64 - cx as f64;
            let dy = y as f64 - cy as f64;
            let r2 = dx * dx + dy * dy;
            if r2 < radius * radius {
                let u = 0.3 + 0.7 * (-r2 / (radius * radius)).exp();
                Complex64::from_polar(u, phi(x, y))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();

        let t0 = Instant::now();
        let set = record_interferograms(&field, &PdiFilterSpec::default(), None).unwrap();
        let (c, s) = accumulate_cs(&set).unwrap();
        let zero_px = zero_region_pixels(&ZeroRegion::default(), &geom, &spec).unwrap();
        let est = estimate_reference(&c, &zero_px, 4).unwrap();
        let (phase, valid) = reconstruct_phase(&c, &s, est.c0).unwrap();
        let elapsed = t0.elapsed();
        worst_elapsed = worst_elapsed.max(elapsed);

        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..spec.height_px {
            for x in 0..spec.width_px {
                let i = spec.index(x, y);
                if valid[i] && field.at(x, y).norm() > 0.0 {
                    acc += Complex64::from_polar(1.0, phase.samples()[i] - phi(x, y));
                }
            }
        }
        let offset = acc.arg();
        let mut worst = 0.0_f64;
        for y in 0..spec.height_px {
            for x in 0..spec.width_px {
                let i = spec.index(x, y);
                if valid[i] && field.at(x, y).norm() > 0.0 {
                    worst = worst.max(wrap_phase(phase.samples()[i] - phi(x, y) - offset).abs());
                }
            }
        }
        worst_overall = worst_overall.max(worst);
        assert!(worst < 1e-6, "max phase error {worst} rad");
        assert!(elapsed.as_secs_f64() < 5.0, "reconstruction took {elapsed:?}");
    }
    println!(
        "[PASS] criterion 1: PSI exactness, max phase error {worst_overall:.2e} rad (< 1e-6), worst field time {worst_elapsed:?} (< 5 s)"
    );
}

#[test]
fn criterion_2_noiseless_tomography() {
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.ensemble_size = 100;
    cfg.base_seed = 2024;
    let t0 = Instant::now();
    let out = run_ensemble(&cfg).unwrap();
    let elapsed = t0.elapsed();
    assert!(out.failures.is_empty());
    let min = out
        .records
        .iter()
        .map(|r| r.fidelity_uncorrected)
        .fold(1.0, f64::min);
    let mean = out.stats_uncorrected.mean_fidelity;
    assert!(min >= 0.99, "min fidelity {min}");
    assert!(mean >= 0.999, "mean fidelity {mean}");
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 2: noiseless tomography, min {min:.6} (>= 0.99), mean {mean:.6} (>= 0.999), {elapsed:?} (< 5 min)"
    );
}

#[test]
fn criterion_3_grating_tomography() {
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.ensemble_size = 100;
    cfg.base_seed = 2025;
    cfg.preparation = PreparationMode::Grating {
        encoding: GratingEncodingSpec {
            period_p_px: 12,
            orientation: Orientation::Horizontal,
            sinc_correction: true,
        },
        filter_width_px: 21,
    };
    let out = run_ensemble(&cfg).unwrap();
    assert!(out.failures.is_empty());
    let mean = out.stats_uncorrected.mean_fidelity;
    assert!(mean >= 0.99, "mean fidelity {mean}");
    println!("[PASS] criterion 3: grating tomography, mean fidelity {mean:.5} (>= 0.99)");
}

#[test]
fn criterion_4_structure_function() {
    let spec = reference_grid();
    let r0_m = 1.9e-3;
    let t0 = Instant::now();
    let screens: Vec<PhaseScreen> = (0..200)
        .map(|i| {
            generate_screen(
                &ScreenGenSpec { method: ScreenMethod::default(), r0_m, rng_seed: 90_000 + i },
                &spec,
            )
            .unwrap()
        })
        .collect();
    let r0_px = r0_m / (spec.pitch_um * 1e-6);
    let seps = separation_ladder(1, (2.2 * r0_px) as usize, 20);
    let est = structure_function(&screens, &seps).unwrap();
    let elapsed = t0.elapsed();
    let d_r0 = est.value_at(r0_m).unwrap();
    let slope = est.loglog_slope(0.2 * r0_m, 2.0 * r0_m).unwrap();
    assert!((d_r0 - 6.88).abs() <= 0.15 * 6.88, "D(r0) = {d_r0}");
    assert!((slope - 5.0 / 3.0).abs() <= 0.1 * (5.0 / 3.0), "slope = {slope}");
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 4: structure function, D(r0) = {d_r0:.3} rad^2 (6.88 +- 15%), slope {slope:.4} (5/3 +- 10%), {elapsed:?} (< 2 min)"
    );
}

#[test]
fn criterion_5_turbulence_experiment() {
    let t0 = Instant::now();
    let mut noiseless = ExperimentConfig::experiment_default();
    noiseless.ensemble_size = 100;
    noiseless.base_seed = 2026;
    let baseline = run_ensemble(&noiseless).unwrap();
    let base_mean = baseline.stats_uncorrected.mean_fidelity;

    let mut cfg = noiseless.clone();
    cfg.correction = true;
    cfg.turbulence = TurbulenceMode::Kolmogorov(ScreenGenSpec {
        method: ScreenMethod::default(),
        r0_m: 1.9e-3, // 44.19 px at 43 um pitch
        rng_seed: 0,
    });
    let out = run_ensemble(&cfg).unwrap();
    let elapsed = t0.elapsed();
    assert!(out.failures.is_empty());
    let unc = &out.stats_uncorrected;
    let cor = out.stats_corrected.as_ref().unwrap();
    assert!(unc.mean_fidelity <= 0.9, "uncorrected mean {}", unc.mean_fidelity);
    assert!(unc.std_fidelity >= 0.05, "uncorrected std {}", unc.std_fidelity);
    assert!(
        cor.mean_fidelity >= base_mean - 0.03,
        "corrected mean {} vs baseline {base_mean}",
        cor.mean_fidelity
    );
    assert!(
        cor.mean_fidelity >= unc.mean_fidelity + 0.1,
        "corrected {} vs uncorrected {}",
        cor.mean_fidelity,
        unc.mean_fidelity
    );
    assert!(elapsed.as_secs_f64() < 900.0, "took {elapsed:?}");
    println!(
        "[PASS] criterion 5: turbulence run, uncorrected {:.4} +- {:.4} (<= 0.9, std >= 0.05); corrected {:.4} (>= baseline {:.4} - 0.03 and >= uncorrected + 0.1), {elapsed:?} (< 15 min)",
        unc.mean_fidelity, unc.std_fidelity, cor.mean_fidelity, base_mean
    );
}

#[test]
fn criterion_6_oracle_equivalence() {
    // C/S accumulation against the brute-force double sum on random frames
    let spec = GridSpec::new(8, 8, 43.0).unwrap();
    let mut seed = 0xfeedu64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        ((seed >> 11) as f64 / (1u64 << 53) as f64).abs()
    };
    let mut worst_cs = 0.0_f64;
    for n in [3usize, 4, 8] {
        let frames: Vec<RealGrid> =
            (0..n).map(|_| RealGrid::from_fn(spec, |_, _| next() * 100.0).unwrap()).collect();
        let meta = AcquisitionMeta {
            filter: PdiFilterSpec { num_steps_n: n, kind: FilterKind::IdealDc },
            grid: spec,
            noise: None,
            rng_seed: None,
        };
        let set = InterferogramSet::new(frames.clone(), meta).unwrap();
        let (c, s) = accumulate_cs(&set).unwrap();
        for idx in 0..spec.len() {
            let mut want_c = 0.0;
            let mut want_s = 0.0;
            for (i, frame) in frames.iter().enumerate() {
                let a = std::f64::consts::TAU * i as f64 / n as f64;
                want_c += frame.samples()[idx] * a.cos();
                want_s += frame.samples()[idx] * a.sin();
            }
            worst_cs = worst_cs.max((c.samples()[idx] - want_c).abs());
            worst_cs = worst_cs.max((s.samples()[idx] - want_s).abs());
        }
    }
    assert!(worst_cs < 1e-12, "C/S vs double sum gap {worst_cs}");

    // FFT against the direct DFT on grids up to 32x32
    let mut worst_dft = 0.0_f64;
    for (w, h) in [(16usize, 16usize), (32, 32)] {
        let spec = GridSpec::new(w, h, 43.0).unwrap();
        let f = ComplexFieldGrid::from_fn(spec, |x, y| {
            Complex64::new((x as f64 * 0.7).sin(), (y as f64 * 0.3).cos())
        })
        .unwrap();
        let fwd = forward_fourier(&f).unwrap();
        let (cx, cy) = spec.center();
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -std::f64::consts::TAU
                            * ((u as f64 - cx as f64) * x as f64 / w as f64
                                + (v as f64 - cy as f64) * y as f64 / h as f64);
                        acc += f.at(x, y) * Complex64::from_polar(1.0, phase);
                    }
                }
                acc /= (spec.len() as f64).sqrt();
                worst_dft = worst_dft.max((fwd.at(u, v) - acc).norm());
            }
        }
        let back = inverse_fourier(&fwd).unwrap();
        let max_ref = f.samples().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in f.samples().iter().zip(back.samples()) {
            worst_dft = worst_dft.max((a - b).norm() / max_ref);
        }
    }
    assert!(worst_dft < 1e-10, "DFT oracle gap {worst_dft}");
    println!(
        "[PASS] criterion 6: oracle equivalence, C/S gap {worst_cs:.2e} (< 1e-12), DFT gap {worst_dft:.2e} (< 1e-10)"
    );
}

#[test]
fn criterion_7_determinism_and_round_trips() {
    // bit-identical ensembles under 1 and 8 workers, with every subsystem on
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.grid = GridSpec::new(256, 256, 43.0).unwrap();
    cfg.ensemble_size = 10;
    cfg.base_seed = 777;
    cfg.correction = true;
    cfg.turbulence = TurbulenceMode::Kolmogorov(ScreenGenSpec {
        method: ScreenMethod::default(),
        r0_m: 1.9e-3,
        rng_seed: 0,
    });
    cfg.noise = NoiseMode::Poisson(NoiseModel { photon_budget: 1e6, dark_level: 0.1 });
    let mut one = cfg.clone();
    one.workers = 1;
    let mut eight = cfg.clone();
    eight.workers = 8;
    let a = run_ensemble(&one).unwrap();
    let b = run_ensemble(&eight).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x, y);
        assert_eq!(x.fidelity_uncorrected.to_bits(), y.fidelity_uncorrected.to_bits());
    }

    // float-mode file round trips are bit-exact
    let dir = tempfile::tempdir().unwrap();
    let state = qudit::haar_random(6, 55).unwrap();
    let field = synthesize_background_mask(&reference_geometry(), &state, &cfg.grid).unwrap();
    let set = record_interferograms(&field, &cfg.filter, None).unwrap();

    let set_dir = dir.path().join("frames");
    save_interferogram_set(&set_dir, &set, GridEncoding::F64).unwrap();
    let set_back = load_interferogram_set(&set_dir).unwrap();
    assert_eq!(set_back, set);

    let state_path = dir.path().join("state.json");
    save_state_json(&state_path, &state).unwrap();
    let state_back = load_state_json(&state_path).unwrap();
    for (x, y) in state.coefficients().iter().zip(state_back.coefficients()) {
        assert_eq!(x.re.to_bits(), y.re.to_bits());
        assert_eq!(x.im.to_bits(), y.im.to_bits());
    }

    let rec_path = dir.path().join("records.csv");
    write_records_csv(&rec_path, &a.records).unwrap();
    let rows = read_records_csv(&rec_path).unwrap();
    for (row, rec) in rows.iter().zip(&a.records) {
        assert_eq!(row.fidelity_uncorrected.to_bits(), rec.fidelity_uncorrected.to_bits());
        assert_eq!(
            row.fidelity_corrected.unwrap().to_bits(),
            rec.fidelity_corrected.unwrap().to_bits()
        );
        assert_eq!(row.seed, rec.trial_seed);
    }

    let cfg_path = dir.path().join("config.json");
    cfg.save(&cfg_path).unwrap();
    assert_eq!(ExperimentConfig::load(&cfg_path).unwrap(), cfg);

    println!(
        "[PASS] criterion 7: 1 vs 8 workers bit-identical over {} trials; grid/state/records/config files round-trip bit-exactly",
        a.records.len()
    );
}

#[test]
fn criterion_8_property_suites_via_selftest() {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let all = selftest::run_all(|c| {
        lines.push(format!(
            "  [{}] {} - {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    });
    let elapsed = t0.elapsed();
    for l in &lines {
        println!("{l}");
    }
    assert!(all, "selftest reported failures");
    assert!(elapsed.as_secs_f64() < 600.0, "selftest took {elapsed:?}");
    println!(
        "[PASS] criterion 8: all {} selftest invariant suites pass in {elapsed:?} (< 10 min)",
        lines.len()
    );
}
