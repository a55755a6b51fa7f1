//! Point-diffraction filtering, N-step interferogram formation, and the full
//! phase-shifting reconstruction: C/S accumulation, reference estimation,
//! phase and amplitude maps, and per-slit qudit readout.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::aperture::{PixelRect, RoiSet, SlitGeometry, SlitLayout};
use crate::error::{Error, Result};
use crate::field::{
    forward_fourier, intensity, inverse_fourier, wrap_phase, ComplexFieldGrid, GridSpec, RealGrid,
};
use crate::noise::{apply_shot_noise, NoiseModel};
use crate::qudit::{normalize, QuditState};
use crate::seeds;

/// Which Fourier-plane bins receive the phase step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// Exactly the central bin: the discrete realization of the Dirac delta.
    IdealDc,
    /// All bins within a half-width square of the center, modeling the
    /// finite central pixel of the Fourier-plane modulator.
    FinitePixel { half_width_px: usize },
}

/// Phase-shifting filter: N steps with phases alpha_n = 2*pi*n/N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdiFilterSpec {
    pub num_steps_n: usize,
    pub kind: FilterKind,
}

impl PdiFilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_steps_n < 3 {
            return Err(Error::InvalidFilterSpec(format!(
                "need at least 3 phase steps, got {}",
                self.num_steps_n
            )));
        }
        Ok(())
    }

    pub fn alpha(&self, n: usize) -> f64 {
        std::f64::consts::TAU * n as f64 / self.num_steps_n as f64
    }
}

impl Default for PdiFilterSpec {
    fn default() -> Self {
        Self { num_steps_n: 4, kind: FilterKind::IdealDc }
    }
}

/// Multiplies the central bin (or central square) of a centered spectrum by
/// e^{i alpha}, leaving every other bin unchanged.
pub fn apply_pdi_filter(
    fourier_field: &ComplexFieldGrid,
    alpha: f64,
    spec: &PdiFilterSpec,
) -> Result<ComplexFieldGrid> {
    spec.validate()?;
    let g = fourier_field.spec();
    let (cx, cy) = g.center();
    let rot = Complex64::from_polar(1.0, alpha);
    let mut out = fourier_field.clone();
    match spec.kind {
        FilterKind::IdealDc => {
            out.samples_mut()[g.index(cx, cy)] *= rot;
        }
        FilterKind::FinitePixel { half_width_px } => {
            let h = half_width_px as i64;
            let samples = out.samples_mut();
            for y in (cy as i64 - h).max(0)..=(cy as i64 + h).min(g.height_px as i64 - 1) {
                for x in (cx as i64 - h).max(0)..=(cx as i64 + h).min(g.width_px as i64 - 1) {
                    samples[y as usize * g.width_px + x as usize] *= rot;
                }
            }
        }
    }
    Ok(out)
}

/// Acquisition metadata carried with a set of interferograms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMeta {
    pub filter: PdiFilterSpec,
    pub grid: GridSpec,
    pub noise: Option<NoiseModel>,
    pub rng_seed: Option<u64>,
}

/// N recorded intensity frames plus how they were acquired.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferogramSet {
    frames: Vec<RealGrid>,
    meta: AcquisitionMeta,
}

impl InterferogramSet {
    pub fn new(frames: Vec<RealGrid>, meta: AcquisitionMeta) -> Result<Self> {
        if frames.len() != meta.filter.num_steps_n {
            return Err(Error::FrameCount { expected: meta.filter.num_steps_n, got: frames.len() });
        }
        for f in &frames {
            if f.width() != meta.grid.width_px || f.height() != meta.grid.height_px {
                return Err(Error::GeometryMismatch {
                    expected_w: meta.grid.width_px,
                    expected_h: meta.grid.height_px,
                    got_w: f.width(),
                    got_h: f.height(),
                });
            }
        }
        Ok(Self { frames, meta })
    }

    pub fn frames(&self) -> &[RealGrid] {
        &self.frames
    }

    pub fn meta(&self) -> &AcquisitionMeta {
        &self.meta
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Records the N interferograms of one acquisition: for each step the object
/// spectrum is phase-filtered, imaged back, and squared; optional shot noise
/// is drawn from an independent substream per frame.
pub fn record_interferograms(
    object_field: &ComplexFieldGrid,
    spec: &PdiFilterSpec,
    noise: Option<(&NoiseModel, u64)>,
) -> Result<InterferogramSet> {
    spec.validate()?;
    let spectrum = forward_fourier(object_field)?;
    let mut frames = Vec::with_capacity(spec.num_steps_n);
    for n in 0..spec.num_steps_n {
        let filtered = apply_pdi_filter(&spectrum, spec.alpha(n), spec)?;
        let image = inverse_fourier(&filtered)?;
        let mut frame = intensity(&image);
        if let Some((model, seed)) = noise {
            frame = apply_shot_noise(&frame, model, seeds::substream(seed, n as u64))?;
        }
        frames.push(frame);
    }
    InterferogramSet::new(
        frames,
        AcquisitionMeta {
            filter: *spec,
            grid: object_field.spec(),
            noise: noise.map(|(m, _)| *m),
            rng_seed: noise.map(|(_, s)| s),
        },
    )
}

/// Cosine- and sine-weighted sums of the frame intensities.
pub fn accumulate_cs(set: &InterferogramSet) -> Result<(RealGrid, RealGrid)> {
    let n = set.num_frames();
    if n < 3 {
        return Err(Error::FrameCount { expected: 3, got: n });
    }
    let g = set.meta().grid;
    let mut c = vec![0.0; g.len()];
    let mut s = vec![0.0; g.len()];
    for (i, frame) in set.frames().iter().enumerate() {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        let (sin_a, cos_a) = a.sin_cos();
        for (j, v) in frame.samples().iter().enumerate() {
            c[j] += v * cos_a;
            s[j] += v * sin_a;
        }
    }
    Ok((RealGrid::new(g, c)?, RealGrid::new(g, s)?))
}

/// Region where the object field vanishes, used to read the reference level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroRegion {
    /// All pixels farther than `pupil radius + margin` from the pupil center.
    OutsidePupil { margin_px: f64 },
    /// An explicit rectangle, e.g. a marked corner patch.
    Rect(PixelRect),
}

impl Default for ZeroRegion {
    fn default() -> Self {
        ZeroRegion::OutsidePupil { margin_px: 8.0 }
    }
}

/// Resolves a zero region to concrete sample indices for a given layout.
pub fn zero_region_pixels(
    region: &ZeroRegion,
    geom: &SlitGeometry,
    spec: &GridSpec,
) -> Result<Vec<usize>> {
    let lay = crate::aperture::layout(geom, spec)?;
    let mut px = Vec::new();
    match region {
        ZeroRegion::OutsidePupil { margin_px } => {
            let r = geom.pupil_radius_r_px + margin_px;
            for y in 0..spec.height_px {
                for x in 0..spec.width_px {
                    if !lay.in_pupil(x, y, r) {
                        px.push(spec.index(x, y));
                    }
                }
            }
        }
        ZeroRegion::Rect(rect) => {
            if rect.x1() > spec.width_px || rect.y1() > spec.height_px {
                return Err(Error::InvalidGrid(format!(
                    "zero region rectangle {rect:?} exceeds the grid"
                )));
            }
            for (x, y) in rect.pixels() {
                px.push(spec.index(x, y));
            }
        }
    }
    if px.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(px)
}

/// Reference level read from C over a region where the object field is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    /// Mean of C over the zero region; -N|K|^2 in the noiseless model.
    pub c0: f64,
    /// sqrt(max(-C0, 0) / N).
    pub k_modulus: f64,
    /// Set when the mean came out significantly positive, which the
    /// interference model cannot produce.
    pub model_violation: bool,
}

/// Estimates C0 and |K| from the mean of C over the zero region.
pub fn estimate_reference(
    c: &RealGrid,
    zero_region: &[usize],
    num_steps_n: usize,
) -> Result<ReferenceEstimate> {
    if zero_region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let samples = c.samples();
    let mut sum = 0.0;
    for &i in zero_region {
        if i >= samples.len() {
            return Err(Error::InvalidGrid(format!("zero-region index {i} out of range")));
        }
        sum += samples[i];
    }
    let c0 = sum / zero_region.len() as f64;
    let scale = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let model_violation = c0 > 1e-9 * scale.max(f64::MIN_POSITIVE);
    let k_modulus = ((-c0).max(0.0) / num_steps_n as f64).sqrt();
    Ok(ReferenceEstimate { c0, k_modulus, model_violation })
}

/// Phase map plus validity: pixels with no measurable modulation (both |S|
/// and |C - C0| below tolerance) are marked invalid rather than guessed.
pub fn reconstruct_phase(c: &RealGrid, s: &RealGrid, c0: f64) -> Result<(RealGrid, Vec<bool>)> {
    if !c.same_geometry(s) {
        return Err(Error::GeometryMismatch {
            expected_w: c.width(),
            expected_h: c.height(),
            got_w: s.width(),
            got_h: s.height(),
        });
    }
    let n = c.samples().len();
    let mut scale = 0.0_f64;
    for i in 0..n {
        let num = s.samples()[i];
        let den = c.samples()[i] - c0;
        scale = scale.max(num.hypot(den));
    }
    let tol = 1e-9 * scale;
    let mut phase = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let num = s.samples()[i];
        let den = c.samples()[i] - c0;
        if num.abs() <= tol && den.abs() <= tol {
            phase.push(0.0);
            valid.push(false);
        } else {
            phase.push(wrap_phase(num.atan2(den)));
            valid.push(true);
        }
    }
    Ok((RealGrid::new(c.spec(), phase)?, valid))
}

/// The alpha = 0 interferogram is exactly the object intensity, so the
/// amplitude map is its square root.
pub fn reconstruct_amplitude(set: &InterferogramSet) -> Result<RealGrid> {
    let frame0 = set
        .frames()
        .first()
        .ok_or(Error::FrameCount { expected: 1, got: 0 })?;
    let samples = frame0.samples().iter().map(|v| v.max(0.0).sqrt()).collect();
    RealGrid::new(frame0.spec(), samples)
}

/// Per-slit readout quality numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitDiagnostics {
    pub slit: usize,
    pub amplitude_mean: f64,
    /// Circular standard deviation of the phase over valid ROI pixels.
    pub phase_circular_std: f64,
    pub valid_pixels: usize,
}

/// Averages amplitude and (circularly) phase over each ROI, forms the
/// coefficients, normalizes, and fixes the canonical gauge.
pub fn extract_state(
    phase_map: &RealGrid,
    phase_valid: &[bool],
    amplitude_map: &RealGrid,
    rois: &RoiSet,
) -> Result<(QuditState, Vec<SlitDiagnostics>)> {
    if phase_valid.len() != phase_map.samples().len() {
        return Err(Error::InvalidGrid("validity mask length mismatch".into()));
    }
    if !phase_map.same_geometry(amplitude_map) {
        return Err(Error::GeometryMismatch {
            expected_w: phase_map.width(),
            expected_h: phase_map.height(),
            got_w: amplitude_map.width(),
            got_h: amplitude_map.height(),
        });
    }
    let spec = phase_map.spec();
    let mut amp_means = Vec::with_capacity(rois.rois.len());
    for roi in &rois.rois {
        let mut sum = 0.0;
        for (x, y) in roi.pixels() {
            sum += amplitude_map.at(x, y);
        }
        amp_means.push(sum / roi.area() as f64);
    }
    let amp_max = amp_means.iter().cloned().fold(0.0, f64::max);
    let negligible = 1e-9 * amp_max;

    let mut coeffs = Vec::with_capacity(rois.rois.len());
    let mut diags = Vec::with_capacity(rois.rois.len());
    for (k, roi) in rois.rois.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut n_valid = 0usize;
        for (x, y) in roi.pixels() {
            let i = spec.index(x, y);
            if phase_valid[i] {
                acc += Complex64::from_polar(1.0, phase_map.samples()[i]);
                n_valid += 1;
            }
        }
        let (phase, circ_std) = if n_valid > 0 {
            let mean_len = acc.norm() / n_valid as f64;
            let std = if mean_len > 0.0 { (-2.0 * mean_len.ln()).max(0.0).sqrt() } else { f64::MAX };
            (acc.arg(), std)
        } else if amp_means[k] <= negligible {
            // a dark slit carries no phase information; its coefficient is zero
            (0.0, 0.0)
        } else {
            return Err(Error::AllRoiInvalid { slit: k });
        };
        coeffs.push(Complex64::from_polar(amp_means[k], phase));
        diags.push(SlitDiagnostics {
            slit: k,
            amplitude_mean: amp_means[k],
            phase_circular_std: circ_std,
            valid_pixels: n_valid,
        });
    }
    let state = normalize(&coeffs)?.canonical_gauge();
    Ok((state, diags))
}

/// Full reconstruction from recorded frames.
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub phase_map: RealGrid,
    pub phase_valid: Vec<bool>,
    pub amplitude_map: RealGrid,
    pub estimated_state: QuditState,
    pub slit_diagnostics: Vec<SlitDiagnostics>,
    pub reference: ReferenceEstimate,
}

/// Runs the complete PSI pipeline: C/S accumulation, reference estimation
/// from the zero region, phase and amplitude maps, and ROI readout.
pub fn reconstruct_full(
    set: &InterferogramSet,
    geom: &SlitGeometry,
    rois: &RoiSet,
    zero_region: &ZeroRegion,
) -> Result<ReconstructionResult> {
    let spec = set.meta().grid;
    let (c, s) = accumulate_cs(set)?;
    let zero_px = zero_region_pixels(zero_region, geom, &spec)?;
    let reference = estimate_reference(&c, &zero_px, set.num_frames())?;
    let (phase_map, phase_valid) = reconstruct_phase(&c, &s, reference.c0)?;
    let amplitude_map = reconstruct_amplitude(set)?;
    let (estimated_state, slit_diagnostics) =
        extract_state(&phase_map, &phase_valid, &amplitude_map, rois)?;
    Ok(ReconstructionResult {
        phase_map,
        phase_valid,
        amplitude_map,
        estimated_state,
        slit_diagnostics,
        reference,
    })
}

/// Circular mean of the valid phases inside a rectangle; used by tests and
/// diagnostics.
pub fn circular_mean_over(
    phase_map: &RealGrid,
    valid: &[bool],
    rect: &PixelRect,
) -> Option<f64> {
    let spec = phase_map.spec();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for (x, y) in rect.pixels() {
        let i = spec.index(x, y);
        if valid[i] {
            acc += Complex64::from_polar(1.0, phase_map.samples()[i]);
            n += 1;
        }
    }
    (n > 0).then(|| acc.arg())
}

/// Background pixels of a layout: inside the pupil, outside every slit.
pub fn background_pixels(lay: &SlitLayout, radius: f64, spec: &GridSpec) -> Vec<usize> {
    let mut px = Vec::new();
    for y in 0..spec.height_px {
        for x in 0..spec.width_px {
            if lay.in_pupil(x, y, radius) && lay.slit_of(x, y).is_none() {
                px.push(spec.index(x, y));
            }
        }
    }
    px
}
