//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample value ({context})")]
    NonFinite { context: String },

    #[error("grid geometry mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    GeometryMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid qudit state: {0}")]
    InvalidState(String),

    #[error("state dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },

    #[error("invalid slit geometry: {0}")]
    InvalidGeometry(String),

    #[error("slit array does not fit: {0}")]
    GeometryOverflow(String),

    #[error("ROI margin leaves no pixels: {0}")]
    RoiMargin(String),

    #[error("mask modulus exceeds 1 at pixel ({x}, {y}): {modulus}")]
    MaskModulus { x: usize, y: usize, modulus: f64 },

    #[error("invalid filter window: {0}")]
    FilterWindow(String),

    #[error("invalid PDI filter spec: {0}")]
    InvalidFilterSpec(String),

    #[error("frame count mismatch: spec says {expected}, set holds {got}")]
    FrameCount { expected: usize, got: usize },

    #[error("empty pixel region for reference estimation")]
    EmptyRegion,

    #[error("invalid screen spec: {0}")]
    InvalidScreenSpec(String),

    #[error("separation {separation_px} px exceeds half the grid ({max_px} px)")]
    SeparationTooLarge { separation_px: usize, max_px: usize },

    #[error("background region too small: {pixels} px (need at least {min} px)")]
    BackgroundTooSmall { pixels: usize, min: usize },

    #[error("slit {slit} has no valid border pixels on one side")]
    MissingBorder { slit: usize },

    #[error("slit {slit}: all ROI pixels invalid but amplitude is not negligible")]
    AllRoiInvalid { slit: usize },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("file format error: {0}")]
    FileFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
