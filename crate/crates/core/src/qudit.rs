//! Pure qudit states, Haar-random sampling, and fidelity evaluation.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-9;

/// Normalized pure state of dimension `d >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuditState {
    coefficients: Vec<Complex64>,
}

impl QuditState {
    /// Accepts a coefficient vector that is already normalized to 1e-9.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidState(format!(
                "dimension must be >= 2, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite coefficient".into()));
        }
        let norm_sq: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "coefficients not normalized: sum of squared moduli = {norm_sq}"
            )));
        }
        Ok(Self { coefficients })
    }

    /// Basis state |k> of dimension d.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidState(format!("basis index {k} out of range for d={d}")));
        }
        let mut c = vec![Complex64::new(0.0, 0.0); d];
        c[k] = Complex64::new(1.0, 0.0);
        Self::new(c)
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Canonical gauge: the global phase is rotated so c_0 is real and
    /// non-negative. A zero c_0 is left untouched (any gauge is canonical then).
    pub fn canonical_gauge(&self) -> Self {
        let c0 = self.coefficients[0];
        if c0.norm() == 0.0 {
            return self.clone();
        }
        let rot = Complex64::from_polar(1.0, -c0.arg());
        let coefficients = self.coefficients.iter().map(|c| c * rot).collect();
        Self { coefficients }
    }

    /// Multiplies every coefficient by a global phase e^{i theta}.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let rot = Complex64::from_polar(1.0, theta);
        Self { coefficients: self.coefficients.iter().map(|c| c * rot).collect() }
    }
}

/// Normalizes an arbitrary coefficient vector into a state.
pub fn normalize(coefficients: &[Complex64]) -> Result<QuditState> {
    if coefficients.len() < 2 {
        return Err(Error::InvalidState(format!(
            "dimension must be >= 2, got {}",
            coefficients.len()
        )));
    }
    if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidState("non-finite coefficient".into()));
    }
    let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidState("cannot normalize the zero vector".into()));
    }
    let coefficients = coefficients.iter().map(|c| c / norm).collect();
    Ok(QuditState { coefficients })
}

/// Haar-random pure state: d independent standard complex Gaussians, normalized.
/// The generator is ChaCha8 seeded with `rng_seed`, so output is reproducible.
pub fn haar_random(d: usize, rng_seed: u64) -> Result<QuditState> {
    if d < 2 {
        return Err(Error::InvalidState(format!("dimension must be >= 2, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let raw: Vec<Complex64> = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    normalize(&raw)
}

/// Uniform-amplitude state (|c_k| = 1/sqrt(d)) with independent uniform phases.
pub fn uniform_amplitude_random_phases(d: usize, rng_seed: u64) -> Result<QuditState> {
    if d < 2 {
        return Err(Error::InvalidState(format!("dimension must be >= 2, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let phase = Uniform::new(-std::f64::consts::PI, std::f64::consts::PI);
    let amp = 1.0 / (d as f64).sqrt();
    let coefficients = (0..d)
        .map(|_| Complex64::from_polar(amp, phase.sample(&mut rng)))
        .collect();
    QuditState::new(coefficients)
}

/// Fidelity |<a|b>| between pure states; invariant under global phases.
pub fn fidelity(a: &QuditState, b: &QuditState) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch { a: a.dimension(), b: b.dimension() });
    }
    let inner: Complex64 = a
        .coefficients()
        .iter()
        .zip(b.coefficients())
        .map(|(ca, cb)| ca.conj() * cb)
        .sum();
    Ok(inner.norm().min(1.0))
}
