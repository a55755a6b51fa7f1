//! Built-in invariant suite, runnable from the CLI.
//!
//! Each check exercises one module's documented invariants at sizes small
//! enough for the whole suite to finish in a few minutes, and reports a
//! one-line pass/fail with the measured numbers.

use num_complex::Complex64;

use crate::aperture::{
    encode_blazed_grating, layout, roi_rectangles, simulate_preparation,
    synthesize_background_mask, synthesize_slit_mask, GratingEncodingSpec, RoiMargin, SlitGeometry,
};
use crate::correction::{correct_phase, estimate_background_aberration, interpolate_into_rois};
use crate::field::{
    apply_mask, forward_fourier, inverse_fourier, total_power, wrap_phase, ComplexFieldGrid,
    GridSpec, RealGrid,
};
use crate::harness::{
    compute_stats, run_ensemble, ExperimentConfig, NoiseMode, TurbulenceMode,
};
use crate::noise::NoiseModel;
use crate::pdi::{
    accumulate_cs, circular_mean_over, estimate_reference, extract_state, record_interferograms,
    reconstruct_full, reconstruct_phase, zero_region_pixels, PdiFilterSpec, ZeroRegion,
};
use crate::qudit::{self, fidelity};
use crate::turbulence::{
    apply_screen, generate_screen, separation_ladder, structure_function, PhaseScreen,
    ScreenGenSpec, ScreenMethod,
};

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let (passed, detail) = f();
    CheckResult { name, passed, detail }
}

fn test_grid() -> GridSpec {
    GridSpec::new(256, 256, 43.0).unwrap()
}

fn test_geometry() -> SlitGeometry {
    SlitGeometry::default_for_dimension(6)
}

fn pseudo_field(spec: GridSpec, mut seed: u64) -> ComplexFieldGrid {
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    ComplexFieldGrid::from_fn(spec, |_, _| Complex64::new(next(), next())).unwrap()
}

fn field_unitarity() -> (bool, String) {
    let spec = GridSpec::new(64, 64, 43.0).unwrap();
    let mut worst_power = 0.0_f64;
    let mut worst_rt = 0.0_f64;
    for seed in 1..=5u64 {
        let f = pseudo_field(spec, seed * 7919);
        let p0 = total_power(&f);
        let fwd = forward_fourier(&f).unwrap();
        worst_power = worst_power.max((total_power(&fwd) - p0).abs() / p0);
        let back = inverse_fourier(&fwd).unwrap();
        let max_ref = f.samples().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let rt = f
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / max_ref;
        worst_rt = worst_rt.max(rt);
    }
    // linearity on 32x32
    let spec32 = GridSpec::new(32, 32, 43.0).unwrap();
    let f = pseudo_field(spec32, 101);
    let g = pseudo_field(spec32, 202);
    let a = Complex64::new(0.7, -1.3);
    let b = Complex64::new(-0.4, 0.9);
    let combo = ComplexFieldGrid::new(
        spec32,
        f.samples().iter().zip(g.samples()).map(|(x, y)| a * x + b * y).collect(),
    )
    .unwrap();
    let lhs = forward_fourier(&combo).unwrap();
    let ff = forward_fourier(&f).unwrap();
    let fg = forward_fourier(&g).unwrap();
    let lin = lhs
        .samples()
        .iter()
        .zip(ff.samples().iter().zip(fg.samples()))
        .map(|(l, (x, y))| (l - (a * x + b * y)).norm())
        .fold(0.0, f64::max);
    let pass = worst_power <= 1e-10 && worst_rt <= 1e-12 && lin <= 1e-10;
    (pass, format!("power err {worst_power:.2e}, round trip {worst_rt:.2e}, linearity {lin:.2e}"))
}

// spatial origin at sample 0, frequency origin at the center bin
fn direct_dft(field: &ComplexFieldGrid) -> ComplexFieldGrid {
    let spec = field.spec();
    let (w, h) = (spec.width_px, spec.height_px);
    let (cx, cy) = spec.center();
    let scale = 1.0 / (spec.len() as f64).sqrt();
    ComplexFieldGrid::from_fn(spec, |u, v| {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let phase = -std::f64::consts::TAU
                    * ((u as f64 - cx as f64) * x as f64 / w as f64
                        + (v as f64 - cy as f64) * y as f64 / h as f64);
                acc += field.at(x, y) * Complex64::from_polar(1.0, phase);
            }
        }
        acc * scale
    })
    .unwrap()
}

// centered-frequency input, corner-origin spatial output
fn direct_inverse_dft(spectrum: &ComplexFieldGrid) -> ComplexFieldGrid {
    let spec = spectrum.spec();
    let (w, h) = (spec.width_px, spec.height_px);
    let (cx, cy) = spec.center();
    let scale = 1.0 / (spec.len() as f64).sqrt();
    ComplexFieldGrid::from_fn(spec, |x, y| {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in 0..h {
            for u in 0..w {
                let phase = std::f64::consts::TAU
                    * ((u as f64 - cx as f64) * x as f64 / w as f64
                        + (v as f64 - cy as f64) * y as f64 / h as f64);
                acc += spectrum.at(u, v) * Complex64::from_polar(1.0, phase);
            }
        }
        acc * scale
    })
    .unwrap()
}

fn field_dft_oracle() -> (bool, String) {
    let spec = GridSpec::new(16, 16, 43.0).unwrap();
    let f = pseudo_field(spec, 31337);
    let fwd = forward_fourier(&f).unwrap();
    let oracle_fwd = direct_dft(&f);
    let err_fwd = fwd
        .samples()
        .iter()
        .zip(oracle_fwd.samples())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let back = inverse_fourier(&fwd).unwrap();
    let oracle_back = direct_inverse_dft(&oracle_fwd);
    let err_inv = back
        .samples()
        .iter()
        .zip(oracle_back.samples())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let pass = err_fwd <= 1e-10 && err_inv <= 1e-10;
    (pass, format!("forward vs oracle {err_fwd:.2e}, inverse vs oracle {err_inv:.2e}"))
}

fn qudit_gauge_and_symmetry() -> (bool, String) {
    let mut worst_sym = 0.0_f64;
    let mut worst_gauge = 0.0_f64;
    for seed in 0..100u64 {
        let a = qudit::haar_random(6, 2 * seed).unwrap();
        let b = qudit::haar_random(6, 2 * seed + 1).unwrap();
        let f = fidelity(&a, &b).unwrap();
        worst_sym = worst_sym.max((f - fidelity(&b, &a).unwrap()).abs());
        let theta = seed as f64 * 0.37;
        worst_gauge = worst_gauge.max((fidelity(&a.with_global_phase(theta), &b).unwrap() - f).abs());
    }
    let pass = worst_sym <= 1e-15 && worst_gauge <= 1e-15;
    (pass, format!("symmetry err {worst_sym:.2e}, gauge err {worst_gauge:.2e}"))
}

fn qudit_haar_moments() -> (bool, String) {
    let d = 6usize;
    let n = 100_000usize;
    let mut sum_pop = 0.0;
    let mut sum_f2 = 0.0;
    for i in 0..n {
        let a = qudit::haar_random(d, 10_000_000 + 2 * i as u64).unwrap();
        sum_pop += a.coefficients()[0].norm_sqr();
        let b = qudit::haar_random(d, 10_000_001 + 2 * i as u64).unwrap();
        let f = fidelity(&a, &b).unwrap();
        sum_f2 += f * f;
    }
    let mean_pop = sum_pop / n as f64;
    let mean_f2 = sum_f2 / n as f64;
    // both statistics are Beta(1, d-1) with variance (d-1)/(d^2 (d+1))
    let var = (d as f64 - 1.0) / ((d * d) as f64 * (d as f64 + 1.0));
    let se = (var / n as f64).sqrt();
    let expected = 1.0 / d as f64;
    let pass = (mean_pop - expected).abs() < 3.0 * se && (mean_f2 - expected).abs() < 3.0 * se;
    (
        pass,
        format!(
            "E|c0|^2 = {mean_pop:.5} and E F^2 = {mean_f2:.5}, expected {expected:.5} +- {:.5}",
            3.0 * se
        ),
    )
}

fn aperture_postselection_and_pupil() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let state = qudit::haar_random(6, 4242).unwrap();
    let a = synthesize_slit_mask(&geom, &state, &spec).unwrap();
    let b = synthesize_background_mask(&geom, &state, &spec).unwrap();
    let lay = layout(&geom, &spec).unwrap();
    let indicator = ComplexFieldGrid::from_fn(spec, |x, y| {
        if lay.slit_of(x, y).is_some() {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .unwrap();
    let postselected = apply_mask(&b, &indicator).unwrap();
    let identity = postselected == a;

    let mut outside_energy = 0.0;
    for y in 0..spec.height_px {
        for x in 0..spec.width_px {
            if !lay.in_pupil(x, y, geom.pupil_radius_r_px + 1.0) {
                outside_energy += b.at(x, y).norm_sqr();
            }
        }
    }

    let rois = roi_rectangles(&geom, &spec, &RoiMargin::default()).unwrap();
    let phase_grid = RealGrid::new(
        spec,
        b.samples().iter().map(|c| if c.norm() > 0.0 { c.arg() } else { 0.0 }).collect(),
    )
    .unwrap();
    let valid = vec![true; spec.len()];
    let mut worst_phase = 0.0_f64;
    for (k, roi) in rois.rois.iter().enumerate() {
        let mean = circular_mean_over(&phase_grid, &valid, roi).unwrap();
        worst_phase = worst_phase.max(wrap_phase(mean - state.coefficients()[k].arg()).abs());
    }
    let pass = identity && outside_energy == 0.0 && worst_phase <= 1e-12;
    (
        pass,
        format!(
            "postselection identity {identity}, energy outside R+1 px {outside_energy:.1e}, ROI phase err {worst_phase:.1e}"
        ),
    )
}

fn aperture_grating_roundtrip() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let enc = GratingEncodingSpec { sinc_correction: true, ..Default::default() };
    let rois = roi_rectangles(&geom, &spec, &RoiMargin::default()).unwrap();
    let mut fids = Vec::new();
    for seed in 0..10u64 {
        let state = qudit::haar_random(6, 500 + seed).unwrap();
        let mask = synthesize_background_mask(&geom, &state, &spec).unwrap();
        let pattern = encode_blazed_grating(&mask, &enc).unwrap();
        let prepared = simulate_preparation(&pattern, &enc, 21).unwrap();
        let set = record_interferograms(&prepared, &PdiFilterSpec::default(), None).unwrap();
        let rec = reconstruct_full(&set, &geom, &rois, &ZeroRegion::default()).unwrap();
        fids.push(fidelity(&state, &rec.estimated_state).unwrap());
    }
    let mean = fids.iter().sum::<f64>() / fids.len() as f64;
    let min = fids.iter().cloned().fold(1.0, f64::min);
    (mean >= 0.99, format!("grating round-trip mean fidelity {mean:.4} (min {min:.4}) over 10 states"))
}

fn pdi_exact_identities() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let state = qudit::haar_random(6, 777).unwrap();
    let field = synthesize_background_mask(&geom, &state, &spec).unwrap();
    let n = 4usize;
    let set = record_interferograms(&field, &PdiFilterSpec::default(), None).unwrap();
    let (c, s) = accumulate_cs(&set).unwrap();
    let k: Complex64 = field.samples().iter().sum::<Complex64>() / spec.len() as f64;
    let (k_mod, mu) = (k.norm(), k.arg());
    let c0 = -(n as f64) * k_mod * k_mod;
    let mut worst = 0.0_f64;
    let scale = n as f64 * k_mod;
    for (i, u) in field.samples().iter().enumerate() {
        let amp = u.norm();
        let want_c = scale * amp * (u.arg() - mu).cos();
        let want_s = scale * amp * (u.arg() - mu).sin();
        let ref_scale = (scale * amp).max(k_mod * k_mod);
        worst = worst.max((c.samples()[i] - c0 - want_c).abs() / ref_scale.max(1e-300));
        worst = worst.max((s.samples()[i] - want_s).abs() / ref_scale.max(1e-300));
    }
    (worst <= 1e-9, format!("worst relative deviation from the C/S closed forms: {worst:.2e}"))
}

fn pdi_gauge_covariance() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let rois = roi_rectangles(&geom, &spec, &RoiMargin::default()).unwrap();
    let state = qudit::haar_random(6, 888).unwrap();
    let rotated = state.with_global_phase(1.9123);
    let mut estimates = Vec::new();
    for s in [&state, &rotated] {
        let field = synthesize_background_mask(&geom, s, &spec).unwrap();
        let set = record_interferograms(&field, &PdiFilterSpec::default(), None).unwrap();
        let rec = reconstruct_full(&set, &geom, &rois, &ZeroRegion::default()).unwrap();
        estimates.push(rec.estimated_state);
    }
    let f = fidelity(&estimates[0], &estimates[1]).unwrap();
    (f >= 1.0 - 1e-9, format!("canonical estimates of gauge copies agree to fidelity {f:.12}"))
}

fn pdi_n_robustness() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let state = qudit::haar_random(6, 999).unwrap();
    let field = synthesize_background_mask(&geom, &state, &spec).unwrap();
    let mut maps = Vec::new();
    let mut positive = true;
    let mut in_branch = true;
    for n in [4usize, 8] {
        let fspec = PdiFilterSpec { num_steps_n: n, ..Default::default() };
        let set = record_interferograms(&field, &fspec, None).unwrap();
        positive &= set.frames().iter().all(|f| f.samples().iter().all(|v| *v >= 0.0));
        let (c, s) = accumulate_cs(&set).unwrap();
        let zero_px = zero_region_pixels(&ZeroRegion::default(), &geom, &spec).unwrap();
        let est = estimate_reference(&c, &zero_px, n).unwrap();
        let (phase, valid) = reconstruct_phase(&c, &s, est.c0).unwrap();
        in_branch &= phase
            .samples()
            .iter()
            .all(|p| *p > -std::f64::consts::PI && *p <= std::f64::consts::PI);
        maps.push((phase, valid));
    }
    let mut worst = 0.0_f64;
    for i in 0..spec.len() {
        if maps[0].1[i] && maps[1].1[i] {
            worst = worst.max(wrap_phase(maps[0].0.samples()[i] - maps[1].0.samples()[i]).abs());
        }
    }
    let pass = worst < 1e-6 && positive && in_branch;
    (pass, format!("N=4 vs N=8 phase gap {worst:.2e} rad, frames nonnegative {positive}"))
}

fn turbulence_structure_function() -> (bool, String) {
    let spec = test_grid();
    let r0_m = 1.9e-3;
    let screens: Vec<PhaseScreen> = (0..100)
        .map(|i| {
            generate_screen(
                &ScreenGenSpec {
                    method: ScreenMethod::default(),
                    r0_m,
                    rng_seed: 40_000 + i,
                },
                &spec,
            )
            .unwrap()
        })
        .collect();
    let r0_px = r0_m / (spec.pitch_um * 1e-6);
    let seps = separation_ladder(1, (2.2 * r0_px) as usize, 18);
    let est = structure_function(&screens, &seps).unwrap();
    let d_r0 = est.value_at(r0_m).unwrap_or(0.0);
    let slope = est.loglog_slope(0.2 * r0_m, 2.0 * r0_m).unwrap_or(0.0);
    let d_ok = (d_r0 - 6.88).abs() <= 0.15 * 6.88;
    let slope_ok = (slope - 5.0 / 3.0).abs() <= 0.1 * (5.0 / 3.0);
    // monotone over [1 px, r0]
    let mut mono = true;
    let mut last = -1.0;
    for (s, d) in est.separations_m.iter().zip(&est.d_values) {
        if *s <= r0_m {
            mono &= *d >= last;
            last = *d;
        }
    }
    // ensemble-mean phase consistent with zero
    let mut mean_abs = 0.0_f64;
    for s in &screens {
        mean_abs = mean_abs.max(
            (s.phase.samples().iter().sum::<f64>() / s.phase.samples().len() as f64).abs(),
        );
    }
    let pass = d_ok && slope_ok && mono && mean_abs < 1e-9;
    (
        pass,
        format!(
            "D(r0) = {d_r0:.2} rad^2 (target 6.88 +-15%), log-log slope {slope:.3} (target 1.667 +-10%), monotone {mono}"
        ),
    )
}

fn turbulence_cross_method() -> (bool, String) {
    let spec = test_grid();
    let r0_m = 1.9e-3;
    let gen = |method: ScreenMethod, base: u64| -> Vec<PhaseScreen> {
        (0..60)
            .map(|i| {
                generate_screen(&ScreenGenSpec { method, r0_m, rng_seed: base + i }, &spec).unwrap()
            })
            .collect()
    };
    let fft_screens = gen(ScreenMethod::default(), 50_000);
    let dm_screens = gen(ScreenMethod::DecayingModes { a0_rad: None, num_modes: 48 }, 60_000);
    let r0_px = r0_m / (spec.pitch_um * 1e-6);
    let seps = separation_ladder((0.2 * r0_px) as usize, (2.0 * r0_px) as usize, 10);
    let e1 = structure_function(&fft_screens, &seps).unwrap();
    let e2 = structure_function(&dm_screens, &seps).unwrap();
    let mut worst = 0.0_f64;
    for (a, b) in e1.d_values.iter().zip(&e2.d_values) {
        worst = worst.max((a - b).abs() / a.max(*b));
    }
    (worst <= 0.25, format!("worst relative gap between generators {worst:.2} over [0.2 r0, 2 r0]"))
}

fn turbulence_pure_phase() -> (bool, String) {
    let spec = test_grid();
    let field = pseudo_field(spec, 5150);
    let screen = generate_screen(
        &ScreenGenSpec { method: ScreenMethod::default(), r0_m: 1.9e-3, rng_seed: 1 },
        &spec,
    )
    .unwrap();
    let out = apply_screen(&field, &screen).unwrap();
    let gap = (total_power(&field) - total_power(&out)).abs() / total_power(&field);
    (gap <= 1e-12, format!("relative power change through the screen {gap:.2e}"))
}

fn correction_tilt_and_idempotence() -> (bool, String) {
    let spec = test_grid();
    let geom = test_geometry();
    let rois = roi_rectangles(&geom, &spec, &RoiMargin::default()).unwrap();
    let state = qudit::haar_random(6, 321).unwrap();

    // tilt screen: affine in both coordinates
    let tilt = PhaseScreen {
        phase: RealGrid::from_fn(spec, |x, y| 0.004 * y as f64 + 0.002 * x as f64).unwrap(),
        r0_m: 1.0,
    };
    let field = synthesize_background_mask(&geom, &state, &spec).unwrap();
    let degraded = apply_screen(&field, &tilt).unwrap();
    let set = record_interferograms(&degraded, &PdiFilterSpec::default(), None).unwrap();
    let rec = reconstruct_full(&set, &geom, &rois, &ZeroRegion::default()).unwrap();
    let ab = estimate_background_aberration(&rec.phase_map, &rec.phase_valid, &geom).unwrap();
    let full = interpolate_into_rois(&ab, &geom).unwrap();
    let corrected = correct_phase(&rec.phase_map, &full).unwrap();
    let (state_c, _) = extract_state(&corrected, &rec.phase_valid, &rec.amplitude_map, &rois).unwrap();
    let f_tilt = fidelity(&state, &state_c).unwrap();

    // idempotence: correcting an aberration-free reconstruction
    let set0 = record_interferograms(&field, &PdiFilterSpec::default(), None).unwrap();
    let rec0 = reconstruct_full(&set0, &geom, &rois, &ZeroRegion::default()).unwrap();
    let ab0 = estimate_background_aberration(&rec0.phase_map, &rec0.phase_valid, &geom).unwrap();
    let full0 = interpolate_into_rois(&ab0, &geom).unwrap();
    let corrected0 = correct_phase(&rec0.phase_map, &full0).unwrap();
    let mut worst_shift = 0.0_f64;
    for roi in &rois.rois {
        let before = circular_mean_over(&rec0.phase_map, &rec0.phase_valid, roi).unwrap();
        let after = circular_mean_over(&corrected0, &rec0.phase_valid, roi).unwrap();
        worst_shift = worst_shift.max(wrap_phase(after - before).abs());
    }
    let pass = f_tilt >= 1.0 - 1e-6 && worst_shift < 1e-6;
    (
        pass,
        format!("tilt-corrected fidelity {f_tilt:.9}, idempotent per-slit shift {worst_shift:.2e} rad"),
    )
}

fn correction_monotone_benefit() -> (bool, String) {
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.grid = test_grid();
    cfg.correction = true;
    cfg.ensemble_size = 100;
    cfg.base_seed = 20_250;
    cfg.turbulence = TurbulenceMode::Kolmogorov(ScreenGenSpec {
        method: ScreenMethod::default(),
        r0_m: 1.9e-3,
        rng_seed: 0,
    });
    let out = run_ensemble(&cfg).unwrap();
    let mu = out.stats_uncorrected.mean_fidelity;
    let mc = out.stats_corrected.as_ref().unwrap().mean_fidelity;
    (
        mc > mu && out.failures.is_empty(),
        format!("mean fidelity corrected {mc:.4} vs uncorrected {mu:.4} over 100 screens"),
    )
}

fn harness_determinism() -> (bool, String) {
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.grid = GridSpec::new(192, 192, 43.0).unwrap();
    cfg.geometry = SlitGeometry {
        d: 4,
        slit_width_a_px: 4,
        slit_separation_s_px: 6,
        slit_length_l_px: 120,
        pupil_radius_r_px: 72.0,
        center_offset_px: (0, 0),
    };
    cfg.dimension_d = 4;
    cfg.ensemble_size = 8;
    cfg.correction = true;
    cfg.turbulence = TurbulenceMode::Kolmogorov(ScreenGenSpec {
        method: ScreenMethod::default(),
        r0_m: 1.9e-3,
        rng_seed: 0,
    });
    let mut one = cfg.clone();
    one.workers = 1;
    let mut eight = cfg.clone();
    eight.workers = 8;
    let a = run_ensemble(&one).unwrap();
    let b = run_ensemble(&eight).unwrap();
    let identical = a.records == b.records;

    let mut no_corr = cfg.clone();
    no_corr.correction = false;
    let c = run_ensemble(&no_corr).unwrap();
    let uncorrected_stable = a
        .records
        .iter()
        .zip(&c.records)
        .all(|(x, y)| x.fidelity_uncorrected.to_bits() == y.fidelity_uncorrected.to_bits());
    (
        identical && uncorrected_stable,
        format!("1 vs 8 workers identical {identical}, correction flag leaves uncorrected intact {uncorrected_stable}"),
    )
}

fn harness_stats_and_noise() -> (bool, String) {
    // stats against a direct two-pass computation
    let vals: Vec<f64> = (0..17).map(|i| 0.8 + 0.01 * i as f64).collect();
    let st = compute_stats(&vals, 20);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    let stats_ok = (st.mean_fidelity - mean).abs() < 1e-12
        && (st.std_fidelity - var.sqrt()).abs() < 1e-12
        && st.histogram.counts.iter().sum::<u64>() as usize == st.count;

    // noise monotonicity over matched seeds
    let mut cfg = ExperimentConfig::experiment_default();
    cfg.grid = GridSpec::new(192, 192, 43.0).unwrap();
    cfg.geometry = SlitGeometry {
        d: 4,
        slit_width_a_px: 4,
        slit_separation_s_px: 6,
        slit_length_l_px: 120,
        pupil_radius_r_px: 72.0,
        center_offset_px: (0, 0),
    };
    cfg.dimension_d = 4;
    cfg.ensemble_size = 50;
    cfg.base_seed = 7;
    let mut lo = cfg.clone();
    lo.noise = NoiseMode::Poisson(NoiseModel { photon_budget: 1e4, dark_level: 0.0 });
    let mut hi = cfg.clone();
    hi.noise = NoiseMode::Poisson(NoiseModel { photon_budget: 1e8, dark_level: 0.0 });
    let rlo = run_ensemble(&lo).unwrap();
    let rhi = run_ensemble(&hi).unwrap();
    let noise_ok =
        rlo.stats_uncorrected.mean_fidelity <= rhi.stats_uncorrected.mean_fidelity;
    (
        stats_ok && noise_ok,
        format!(
            "stats two-pass {stats_ok}; mean fidelity {:.4} at 1e4 photons <= {:.4} at 1e8",
            rlo.stats_uncorrected.mean_fidelity, rhi.stats_uncorrected.mean_fidelity
        ),
    )
}

/// Runs every check, invoking `report` as each one finishes; returns true
/// when all passed.
pub fn run_all(mut report: impl FnMut(&CheckResult)) -> bool {
    type Check = (&'static str, fn() -> (bool, String));
    let checks: [Check; 16] = [
        ("field.unitarity-roundtrip-linearity", field_unitarity),
        ("field.dft-oracle", field_dft_oracle),
        ("qudit.gauge-and-symmetry", qudit_gauge_and_symmetry),
        ("qudit.haar-moments", qudit_haar_moments),
        ("aperture.postselection-and-pupil", aperture_postselection_and_pupil),
        ("aperture.grating-roundtrip", aperture_grating_roundtrip),
        ("pdi.exact-identities", pdi_exact_identities),
        ("pdi.gauge-covariance", pdi_gauge_covariance),
        ("pdi.n-robustness", pdi_n_robustness),
        ("turbulence.structure-function", turbulence_structure_function),
        ("turbulence.cross-method", turbulence_cross_method),
        ("turbulence.pure-phase", turbulence_pure_phase),
        ("correction.tilt-and-idempotence", correction_tilt_and_idempotence),
        ("correction.monotone-benefit", correction_monotone_benefit),
        ("harness.determinism", harness_determinism),
        ("harness.stats-and-noise", harness_stats_and_noise),
    ];
    let mut all = true;
    for (name, f) in checks {
        let c = check(name, f);
        all &= c.passed;
        report(&c);
    }
    all
}
