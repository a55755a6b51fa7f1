//! Slit-array apertures, the background-augmented pupil, per-slit readout
//! rectangles, and the phase-only blazed-grating encoding with first-order
//! filtering.
//!
//! Layout conventions: slits are long along x and stacked along y; slit index
//! k increases along +y, so slit 0 sits at the bottom of the array. The array
//! center is placed at grid center plus `center_offset_px`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{forward_fourier, inverse_fourier, ComplexFieldGrid, GridSpec, RealGrid};
use crate::qudit::QuditState;

/// Axis-aligned pixel rectangle, half-open: `x0 <= x < x0 + width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl PixelRect {
    pub fn x1(&self) -> usize {
        self.x0 + self.width
    }

    pub fn y1(&self) -> usize {
        self.y0 + self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y1()).flat_map(move |y| (self.x0..self.x1()).map(move |x| (x, y)))
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Slit-array and background-pupil geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitGeometry {
    pub d: usize,
    pub slit_width_a_px: usize,
    pub slit_separation_s_px: usize,
    pub slit_length_l_px: usize,
    pub pupil_radius_r_px: f64,
    #[serde(default)]
    pub center_offset_px: (i64, i64),
}

impl SlitGeometry {
    /// Reference operating point: d slits of width 4 px at 6 px separation,
    /// length 180 px, pupil radius 96 px, centered.
    pub fn default_for_dimension(d: usize) -> Self {
        Self {
            d,
            slit_width_a_px: 4,
            slit_separation_s_px: 6,
            slit_length_l_px: 5 * d * 6,
            pupil_radius_r_px: 96.0,
            center_offset_px: (0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidGeometry(format!("d must be >= 2, got {}", self.d)));
        }
        if self.slit_width_a_px < 1 {
            return Err(Error::InvalidGeometry("slit width must be >= 1 px".into()));
        }
        if self.slit_separation_s_px <= self.slit_width_a_px {
            return Err(Error::InvalidGeometry(format!(
                "separation {} must exceed slit width {}",
                self.slit_separation_s_px, self.slit_width_a_px
            )));
        }
        if self.slit_length_l_px < 5 * self.d * self.slit_separation_s_px {
            return Err(Error::InvalidGeometry(format!(
                "slit length {} must be >= 5*d*s = {}",
                self.slit_length_l_px,
                5 * self.d * self.slit_separation_s_px
            )));
        }
        if !(self.pupil_radius_r_px.is_finite() && self.pupil_radius_r_px > 0.0) {
            return Err(Error::InvalidGeometry("pupil radius must be positive".into()));
        }
        let half_l = self.slit_length_l_px as f64 / 2.0;
        let half_span = self.span_y_px() as f64 / 2.0;
        if half_l.hypot(half_span) >= self.pupil_radius_r_px {
            return Err(Error::InvalidGeometry(format!(
                "slit array corner at radius {:.1} px does not fit inside pupil radius {:.1} px",
                half_l.hypot(half_span),
                self.pupil_radius_r_px
            )));
        }
        Ok(())
    }

    /// Total transverse span of the slit array in pixels.
    pub fn span_y_px(&self) -> usize {
        (self.d - 1) * self.slit_separation_s_px + self.slit_width_a_px
    }
}

/// Absolute pixel placement of the slit array on a grid.
#[derive(Clone, Debug)]
pub struct SlitLayout {
    pub slits: Vec<PixelRect>,
    pub pupil_center: (usize, usize),
}

impl SlitLayout {
    pub fn slit_of(&self, x: usize, y: usize) -> Option<usize> {
        self.slits.iter().position(|r| r.contains(x, y))
    }

    pub fn in_pupil(&self, x: usize, y: usize, radius: f64) -> bool {
        let dx = x as f64 - self.pupil_center.0 as f64;
        let dy = y as f64 - self.pupil_center.1 as f64;
        dx * dx + dy * dy < radius * radius
    }
}

/// Computes slit rectangles and the pupil center, rejecting layouts that
/// do not fit on the grid.
pub fn layout(geom: &SlitGeometry, spec: &GridSpec) -> Result<SlitLayout> {
    geom.validate()?;
    let cx = spec.width_px as i64 / 2 + geom.center_offset_px.0;
    let cy = spec.height_px as i64 / 2 + geom.center_offset_px.1;
    let span_y = geom.span_y_px() as i64;
    let row0 = cy - span_y / 2;
    let col0 = cx - geom.slit_length_l_px as i64 / 2;
    let mut slits = Vec::with_capacity(geom.d);
    for k in 0..geom.d {
        let y0 = row0 + (k * geom.slit_separation_s_px) as i64;
        let y1 = y0 + geom.slit_width_a_px as i64;
        let x1 = col0 + geom.slit_length_l_px as i64;
        if y0 < 0 || col0 < 0 || y1 > spec.height_px as i64 || x1 > spec.width_px as i64 {
            return Err(Error::GeometryOverflow(format!(
                "slit {k} spans x [{col0}, {x1}), y [{y0}, {y1}) outside {}x{} grid",
                spec.width_px, spec.height_px
            )));
        }
        slits.push(PixelRect {
            x0: col0 as usize,
            y0: y0 as usize,
            width: geom.slit_length_l_px,
            height: geom.slit_width_a_px,
        });
    }
    if cx < 0 || cy < 0 || cx >= spec.width_px as i64 || cy >= spec.height_px as i64 {
        return Err(Error::GeometryOverflow("pupil center off-grid".into()));
    }
    Ok(SlitLayout { slits, pupil_center: (cx as usize, cy as usize) })
}

/// Slit aperture: value c_k inside slit k, zero elsewhere.
pub fn synthesize_slit_mask(
    geom: &SlitGeometry,
    state: &QuditState,
    spec: &GridSpec,
) -> Result<ComplexFieldGrid> {
    if state.dimension() != geom.d {
        return Err(Error::DimensionMismatch { a: state.dimension(), b: geom.d });
    }
    let lay = layout(geom, spec)?;
    let coeffs = state.coefficients();
    ComplexFieldGrid::from_fn(*spec, |x, y| match lay.slit_of(x, y) {
        Some(k) => coeffs[k],
        None => Complex64::new(0.0, 0.0),
    })
}

/// Background-augmented aperture: c_k inside slit k, 1 inside the pupil disk
/// but outside all slits, 0 outside the pupil.
pub fn synthesize_background_mask(
    geom: &SlitGeometry,
    state: &QuditState,
    spec: &GridSpec,
) -> Result<ComplexFieldGrid> {
    if state.dimension() != geom.d {
        return Err(Error::DimensionMismatch { a: state.dimension(), b: geom.d });
    }
    let lay = layout(geom, spec)?;
    let r = geom.pupil_radius_r_px;
    let (cx, cy) = lay.pupil_center;
    let r_ceil = r.ceil() as i64;
    if cx as i64 - r_ceil < 0
        || cy as i64 - r_ceil < 0
        || cx as i64 + r_ceil >= spec.width_px as i64
        || cy as i64 + r_ceil >= spec.height_px as i64
    {
        return Err(Error::GeometryOverflow(format!(
            "pupil of radius {r} px at ({cx}, {cy}) exceeds the {}x{} grid",
            spec.width_px, spec.height_px
        )));
    }
    let coeffs = state.coefficients();
    ComplexFieldGrid::from_fn(*spec, |x, y| {
        if let Some(k) = lay.slit_of(x, y) {
            coeffs[k]
        } else if lay.in_pupil(x, y, r) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Margins applied when insetting readout rectangles into slit footprints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiMargin {
    pub transverse_px: usize,
    pub longitudinal_frac: f64,
}

impl Default for RoiMargin {
    fn default() -> Self {
        Self { transverse_px: 1, longitudinal_frac: 0.1 }
    }
}

/// One readout rectangle per slit, strictly inside the slit footprint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoiSet {
    pub rois: Vec<PixelRect>,
}

/// Insets each slit footprint by the margin: the transverse margin excludes
/// the diffraction-darkened slit borders, the longitudinal margin the ends.
pub fn roi_rectangles(geom: &SlitGeometry, spec: &GridSpec, margin: &RoiMargin) -> Result<RoiSet> {
    if !(margin.longitudinal_frac >= 0.0 && margin.longitudinal_frac < 0.5) {
        return Err(Error::RoiMargin(format!(
            "longitudinal fraction must be in [0, 0.5), got {}",
            margin.longitudinal_frac
        )));
    }
    let lay = layout(geom, spec)?;
    let lon = (margin.longitudinal_frac * geom.slit_length_l_px as f64).round() as usize;
    let mut rois = Vec::with_capacity(geom.d);
    for (k, slit) in lay.slits.iter().enumerate() {
        if slit.width <= 2 * lon || slit.height <= 2 * margin.transverse_px {
            return Err(Error::RoiMargin(format!(
                "margin leaves no pixels in slit {k} ({}x{} minus {lon}/{} px)",
                slit.width, slit.height, margin.transverse_px
            )));
        }
        rois.push(PixelRect {
            x0: slit.x0 + lon,
            y0: slit.y0 + margin.transverse_px,
            width: slit.width - 2 * lon,
            height: slit.height - 2 * margin.transverse_px,
        });
    }
    Ok(RoiSet { rois })
}

/// Direction of the grating vector (carrier and displacement axis).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Phase-only blazed-grating encoding of a complex mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GratingEncodingSpec {
    pub period_p_px: usize,
    pub orientation: Orientation,
    /// When set, the blaze depth is chosen so the first-order efficiency
    /// equals the requested modulus exactly (inverts the sinc response);
    /// otherwise the depth fraction is the modulus itself.
    #[serde(default)]
    pub sinc_correction: bool,
}

impl GratingEncodingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period_p_px < 2 {
            return Err(Error::InvalidGeometry(format!(
                "grating period must be >= 2 px, got {}",
                self.period_p_px
            )));
        }
        Ok(())
    }
}

impl Default for GratingEncodingSpec {
    fn default() -> Self {
        Self { period_p_px: 12, orientation: Orientation::Horizontal, sinc_correction: false }
    }
}

// First order of a sawtooth of depth 2*pi*M carries amplitude sinc(pi*(1-M))
// and phase pi*(M-1); displacing the sawtooth by k pixels adds 2*pi*k/p.
fn first_order_response(depth_fraction: f64) -> (f64, f64) {
    let z = std::f64::consts::PI * (depth_fraction - 1.0);
    let amp = if z.abs() < 1e-12 { 1.0 } else { z.sin() / z };
    (amp, z)
}

/// Inverts sinc(pi*(1-M)) = a for the depth fraction M in [0, 1].
fn sinc_inverse_depth(a: f64) -> f64 {
    if a >= 1.0 {
        return 1.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0_f64; // z where sinc = 1
    let mut hi = std::f64::consts::PI; // z where sinc = 0
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let s = if mid < 1e-12 { 1.0 } else { mid.sin() / mid };
        if s > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    1.0 - 0.5 * (lo + hi) / std::f64::consts::PI
}

/// Encodes a complex mask (|mask| <= 1) as a displaced sawtooth phase pattern.
///
/// The local blaze depth is a monotonic map of the local modulus (2*pi at
/// modulus 1, 0 at modulus 0) and the sawtooth is displaced by an integer
/// number of pixels; a displacement of k realizes a first-order phase of
/// 2*pi*k/p, so encoded phases are quantized to the p displacement steps.
/// The displacement count absorbs the depth-induced phase of the first
/// order, so the realized phase tracks the requested one to within pi/p.
pub fn encode_blazed_grating(
    mask: &ComplexFieldGrid,
    enc: &GratingEncodingSpec,
) -> Result<RealGrid> {
    enc.validate()?;
    let spec = mask.spec();
    let p = enc.period_p_px;
    let mut pattern = Vec::with_capacity(spec.len());
    for y in 0..spec.height_px {
        for x in 0..spec.width_px {
            let m = mask.at(x, y);
            let a = m.norm();
            if a > 1.0 + 1e-12 {
                return Err(Error::MaskModulus { x, y, modulus: a });
            }
            if a <= 0.0 {
                pattern.push(0.0);
                continue;
            }
            let depth_fraction = if enc.sinc_correction { sinc_inverse_depth(a) } else { a.min(1.0) };
            let (_, depth_phase) = first_order_response(depth_fraction);
            let target = m.arg() - depth_phase;
            let steps = (target * p as f64 / std::f64::consts::TAU).round() as i64;
            let k = steps.rem_euclid(p as i64) as usize;
            let t = match enc.orientation {
                Orientation::Horizontal => x,
                Orientation::Vertical => y,
            };
            let cell = (t + k) % p;
            pattern.push(std::f64::consts::TAU * depth_fraction * cell as f64 / p as f64);
        }
    }
    RealGrid::new(spec, pattern)
}

/// Propagates a phase-only pattern through the first-order spatial filter:
/// Fourier transform of e^{i pattern}, a slit window (full width
/// `filter_width_px`, transverse to the carrier) centered on the first
/// diffraction order, inverse transform, and demodulation by the carrier.
/// The output approximates the encoded mask; its quality is measured, not
/// assumed.
pub fn simulate_preparation(
    pattern: &RealGrid,
    enc: &GratingEncodingSpec,
    filter_width_px: usize,
) -> Result<ComplexFieldGrid> {
    enc.validate()?;
    if filter_width_px == 0 {
        return Err(Error::FilterWindow("filter width must be >= 1 px".into()));
    }
    let spec = pattern.spec();
    let field = ComplexFieldGrid::new(
        spec,
        pattern.samples().iter().map(|&p| Complex64::from_polar(1.0, p)).collect(),
    )?;
    let mut spectrum = forward_fourier(&field)?;

    let (axis_len, center) = match enc.orientation {
        Orientation::Horizontal => (spec.width_px, spec.center().0),
        Orientation::Vertical => (spec.height_px, spec.center().1),
    };
    let carrier_bins = axis_len as f64 / enc.period_p_px as f64;
    let order_bin = center as i64 + carrier_bins.round() as i64;
    let half = (filter_width_px / 2) as i64;
    if order_bin - half < 0 || order_bin + half >= axis_len as i64 {
        return Err(Error::FilterWindow(format!(
            "window [{}, {}] outside axis of {} bins",
            order_bin - half,
            order_bin + half,
            axis_len
        )));
    }

    {
        let samples = spectrum.samples_mut();
        for y in 0..spec.height_px {
            for x in 0..spec.width_px {
                let t = match enc.orientation {
                    Orientation::Horizontal => x,
                    Orientation::Vertical => y,
                } as i64;
                if (t - order_bin).abs() > half {
                    samples[y * spec.width_px + x] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    let image = inverse_fourier(&spectrum)?;
    // Demodulate with the exact analytic carrier; the order center need not
    // fall on an integer bin.
    let mut out = Vec::with_capacity(spec.len());
    for y in 0..spec.height_px {
        for x in 0..spec.width_px {
            let t = match enc.orientation {
                Orientation::Horizontal => x,
                Orientation::Vertical => y,
            };
            let phase = -std::f64::consts::TAU * t as f64 / enc.period_p_px as f64;
            out.push(image.at(x, y) * Complex64::from_polar(1.0, phase));
        }
    }
    ComplexFieldGrid::new(spec, out)
}
