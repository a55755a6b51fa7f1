//! Aberration estimation from the background region and interpolation across
//! the slit footprints, then subtraction from the measured phase map.
//!
//! The receiver knows the background phase is constant, so any structure
//! seen there is channel-induced. Inside the slits the aberration cannot be
//! told apart from the encoded phase, so it is never read there: each slit
//! pixel gets a value interpolated transversely between the slit borders.

use num_complex::Complex64;

use crate::aperture::{layout, SlitGeometry};
use crate::error::{Error, Result};
use crate::field::{wrap_phase, RealGrid};

const MIN_BACKGROUND_PX: usize = 100;
/// Rows averaged on each side of a slit before interpolating across it.
const BORDER_BAND_PX: usize = 2;

/// Phase-aberration map over the pupil. `validity` is true only where the
/// aberration was directly measured (background); interpolated slit interiors
/// and everything outside the pupil stay false. The phase is zero wherever
/// neither measured nor interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct AberrationMap {
    pub phase: RealGrid,
    pub validity: Vec<bool>,
    /// Columns whose two border estimates differ by more than pi/2; large
    /// counts mean the screen varies too fast across a slit for transverse
    /// interpolation to be trustworthy.
    pub steep_columns: usize,
}

/// Reads the aberration off the background: measured phase minus the
/// circular mean over the background region, defined on pupil-minus-slits.
pub fn estimate_background_aberration(
    phase_map: &RealGrid,
    measured_valid: &[bool],
    geom: &SlitGeometry,
) -> Result<AberrationMap> {
    if measured_valid.len() != phase_map.samples().len() {
        return Err(Error::InvalidGrid("validity mask length mismatch".into()));
    }
    let spec = phase_map.spec();
    let lay = layout(geom, &spec)?;
    let mut background = Vec::new();
    for y in 0..spec.height_px {
        for x in 0..spec.width_px {
            let i = spec.index(x, y);
            if measured_valid[i]
                && lay.in_pupil(x, y, geom.pupil_radius_r_px)
                && lay.slit_of(x, y).is_none()
            {
                background.push(i);
            }
        }
    }
    if background.len() < MIN_BACKGROUND_PX {
        return Err(Error::BackgroundTooSmall {
            pixels: background.len(),
            min: MIN_BACKGROUND_PX,
        });
    }
    let mean_vec: Complex64 = background
        .iter()
        .map(|&i| Complex64::from_polar(1.0, phase_map.samples()[i]))
        .sum();
    let mean_phase = mean_vec.arg();

    let mut phase = vec![0.0; spec.len()];
    let mut validity = vec![false; spec.len()];
    for &i in &background {
        phase[i] = wrap_phase(phase_map.samples()[i] - mean_phase);
        validity[i] = true;
    }
    Ok(AberrationMap { phase: RealGrid::new(spec, phase)?, validity, steep_columns: 0 })
}

fn circular_mean_with_position(values: &[(f64, f64)]) -> (f64, f64) {
    let acc: Complex64 = values.iter().map(|(p, _)| Complex64::from_polar(1.0, *p)).sum();
    let pos = values.iter().map(|(_, y)| y).sum::<f64>() / values.len() as f64;
    (acc.arg(), pos)
}

/// Fills each slit footprint by linear interpolation along the transverse
/// (y) direction between border values averaged over a 2 px band on either
/// side. Border values are unwrapped relative to each other assuming the
/// jump across a slit stays below pi.
pub fn interpolate_into_rois(map: &AberrationMap, geom: &SlitGeometry) -> Result<AberrationMap> {
    let spec = map.phase.spec();
    let lay = layout(geom, &spec)?;
    let mut out = map.clone();
    let mut steep = map.steep_columns;
    for (k, slit) in lay.slits.iter().enumerate() {
        for x in slit.x0..slit.x1() {
            let mut below = Vec::new();
            for step in 1..=BORDER_BAND_PX {
                if slit.y0 >= step {
                    let y = slit.y0 - step;
                    let i = spec.index(x, y);
                    if map.validity[i] {
                        below.push((map.phase.samples()[i], y as f64));
                    }
                }
            }
            let mut above = Vec::new();
            for step in 0..BORDER_BAND_PX {
                let y = slit.y1() + step;
                if y < spec.height_px {
                    let i = spec.index(x, y);
                    if map.validity[i] {
                        above.push((map.phase.samples()[i], y as f64));
                    }
                }
            }
            if below.is_empty() || above.is_empty() {
                return Err(Error::MissingBorder { slit: k });
            }
            let (phi_lo, y_lo) = circular_mean_with_position(&below);
            let (phi_hi_raw, y_hi) = circular_mean_with_position(&above);
            let delta = wrap_phase(phi_hi_raw - phi_lo);
            if delta.abs() > std::f64::consts::FRAC_PI_2 {
                steep += 1;
            }
            for y in slit.y0..slit.y1() {
                let t = (y as f64 - y_lo) / (y_hi - y_lo);
                out.phase.samples_mut()[spec.index(x, y)] = phi_lo + delta * t;
            }
        }
    }
    out.steep_columns = steep;
    Ok(out)
}

/// Wrapped difference (phase - aberration), mapped back to (-pi, pi].
/// Outside the pupil the aberration map is zero, so pixels there pass
/// through unchanged.
pub fn correct_phase(phase_map: &RealGrid, full_map: &AberrationMap) -> Result<RealGrid> {
    if !phase_map.same_geometry(&full_map.phase) {
        return Err(Error::GeometryMismatch {
            expected_w: phase_map.width(),
            expected_h: phase_map.height(),
            got_w: full_map.phase.width(),
            got_h: full_map.phase.height(),
        });
    }
    let samples = phase_map
        .samples()
        .iter()
        .zip(full_map.phase.samples())
        .map(|(p, a)| wrap_phase(p - a))
        .collect();
    RealGrid::new(phase_map.spec(), samples)
}
