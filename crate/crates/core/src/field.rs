//! 2D complex field grids and the Fourier-plane operations of the 4f processor.
//!
//! Conventions:
//! - samples are stored row-major, index `y * width + x`;
//! - spectra are centered: frequency (0, 0) lives at bin `(width/2, height/2)`;
//! - the transform is unitary, so total power is preserved exactly.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid geometry: pixel counts and the physical size of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub pitch_um: f64,
}

impl GridSpec {
    /// Dimensions must be even (unambiguous center bin) and at least 2.
    pub fn new(width_px: usize, height_px: usize, pitch_um: f64) -> Result<Self> {
        if width_px < 2 || height_px < 2 {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be >= 2, got {width_px}x{height_px}"
            )));
        }
        if !width_px.is_multiple_of(2) || !height_px.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "dimensions must be even, got {width_px}x{height_px}"
            )));
        }
        if !(pitch_um.is_finite() && pitch_um > 0.0) {
            return Err(Error::InvalidGrid(format!("pitch must be positive, got {pitch_um}")));
        }
        Ok(Self { width_px, height_px, pitch_um })
    }

    pub fn len(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Center pixel (and center frequency bin): `(width/2, height/2)`.
    pub fn center(&self) -> (usize, usize) {
        (self.width_px / 2, self.height_px / 2)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width_px && y < self.height_px);
        y * self.width_px + x
    }
}

/// Sampled 2D complex optical amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFieldGrid {
    spec: GridSpec,
    samples: Vec<Complex64>,
}

impl ComplexFieldGrid {
    /// Builds a grid, rejecting length mismatches and non-finite values.
    pub fn new(spec: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "sample count {} does not match {}x{}",
                samples.len(),
                spec.width_px,
                spec.height_px
            )));
        }
        if let Some(i) = samples.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("complex sample at index {i}"),
            });
        }
        Ok(Self { spec, samples })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, samples: vec![Complex64::new(0.0, 0.0); spec.len()] }
    }

    /// Fills the grid from a function of pixel coordinates `(x, y)`.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut samples = Vec::with_capacity(spec.len());
        for y in 0..spec.height_px {
            for x in 0..spec.width_px {
                samples.push(f(x, y));
            }
        }
        Self::new(spec, samples)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width_px
    }

    pub fn height(&self) -> usize {
        self.spec.height_px
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// Mutable sample access; callers must keep values finite.
    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn at(&self, x: usize, y: usize) -> Complex64 {
        self.samples[self.spec.index(x, y)]
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.spec.width_px == other.spec.width_px && self.spec.height_px == other.spec.height_px
    }
}

/// Sampled 2D real values (intensity in counts, or phase in radians, per context).
#[derive(Clone, Debug, PartialEq)]
pub struct RealGrid {
    spec: GridSpec,
    samples: Vec<f64>,
}

impl RealGrid {
    pub fn new(spec: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "sample count {} does not match {}x{}",
                samples.len(),
                spec.width_px,
                spec.height_px
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("real sample at index {i}") });
        }
        Ok(Self { spec, samples })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, samples: vec![0.0; spec.len()] }
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(spec.len());
        for y in 0..spec.height_px {
            for x in 0..spec.width_px {
                samples.push(f(x, y));
            }
        }
        Self::new(spec, samples)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width_px
    }

    pub fn height(&self) -> usize {
        self.spec.height_px
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.samples[self.spec.index(x, y)]
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.spec.width_px == other.spec.width_px && self.spec.height_px == other.spec.height_px
    }
}

/// Maps a phase to the principal branch (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut w = phi % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// Swaps quadrants so the zero-frequency bin moves between corner and center.
/// Dimensions are even by construction, so shift and unshift coincide.
fn shift_quadrants(width: usize, height: usize, data: &mut [Complex64]) {
    let hw = width / 2;
    let hh = height / 2;
    for y in 0..hh {
        for x in 0..hw {
            let a = y * width + x;
            let b = (y + hh) * width + (x + hw);
            data.swap(a, b);
            let c = y * width + (x + hw);
            let d = (y + hh) * width + x;
            data.swap(c, d);
        }
    }
}

fn transpose(width: usize, height: usize, data: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = data[y * width + x];
        }
    }
    out
}

fn fft_2d(width: usize, height: usize, data: &mut Vec<Complex64>, direction: rustfft::FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut t = transpose(width, height, data);
    let col_fft = planner.plan_fft(height, direction);
    for col in t.chunks_exact_mut(height) {
        col_fft.process(col);
    }
    *data = transpose(height, width, &t);
}

/// Centered, unitary discrete Fourier transform (zero frequency at the grid center).
pub fn forward_fourier(field: &ComplexFieldGrid) -> Result<ComplexFieldGrid> {
    let spec = field.spec();
    let mut data = field.samples().to_vec();
    fft_2d(spec.width_px, spec.height_px, &mut data, rustfft::FftDirection::Forward);
    let scale = 1.0 / (spec.len() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
    shift_quadrants(spec.width_px, spec.height_px, &mut data);
    ComplexFieldGrid::new(spec, data)
}

/// Exact inverse of [`forward_fourier`].
pub fn inverse_fourier(field: &ComplexFieldGrid) -> Result<ComplexFieldGrid> {
    let spec = field.spec();
    let mut data = field.samples().to_vec();
    shift_quadrants(spec.width_px, spec.height_px, &mut data);
    fft_2d(spec.width_px, spec.height_px, &mut data, rustfft::FftDirection::Inverse);
    let scale = 1.0 / (spec.len() as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
    ComplexFieldGrid::new(spec, data)
}

/// Pointwise transmission: elementwise product of field and mask.
pub fn apply_mask(field: &ComplexFieldGrid, mask: &ComplexFieldGrid) -> Result<ComplexFieldGrid> {
    if !field.same_geometry(mask) {
        return Err(Error::GeometryMismatch {
            expected_w: field.width(),
            expected_h: field.height(),
            got_w: mask.width(),
            got_h: mask.height(),
        });
    }
    let samples = field
        .samples()
        .iter()
        .zip(mask.samples())
        .map(|(f, m)| f * m)
        .collect();
    ComplexFieldGrid::new(field.spec(), samples)
}

/// Elementwise squared modulus.
pub fn intensity(field: &ComplexFieldGrid) -> RealGrid {
    let samples = field.samples().iter().map(|c| c.norm_sqr()).collect();
    RealGrid::new(field.spec(), samples).expect("squared modulus of finite field is finite")
}

/// Sum of squared moduli over the grid.
pub fn total_power(field: &ComplexFieldGrid) -> f64 {
    field.samples().iter().map(|c| c.norm_sqr()).sum()
}
