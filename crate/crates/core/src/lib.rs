//! Simulator and reconstruction toolkit for point-diffraction-interferometer
//! phase-shifting tomography of pure spatial qudits.
//!
//! The pipeline: a qudit is encoded as the complex transmission of a slit
//! array surrounded by a uniform background pupil; the field is imaged
//! through a 4f processor whose Fourier-plane filter steps the phase of the
//! central bin; N interferograms are combined into a phase and amplitude map;
//! per-slit averages yield the reconstructed state. Kolmogorov phase screens
//! model a turbulent channel, and background-based interpolation removes the
//! induced aberrations.

pub mod aperture;
pub mod correction;
pub mod error;
pub mod field;
pub mod harness;
pub mod noise;
pub mod pdi;
pub mod qudit;
pub mod seeds;
pub mod selftest;
pub mod turbulence;

pub use error::{Error, Result};
