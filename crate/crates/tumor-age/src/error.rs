//! Error type shared by the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity that must be positive and finite was not.
    #[error("{name} must be positive and finite, got {value}")]
    InvalidValue { name: &'static str, value: f64 },

    /// A probability argument outside its required range.
    #[error("probability must lie in {range}, got {value}")]
    InvalidProbability { range: &'static str, value: f64 },

    /// NaN or infinity where a finite number is required.
    #[error("{name} must be finite, got {value}")]
    NotFinite { name: &'static str, value: f64 },

    /// Not enough data to estimate the requested quantity.
    #[error("insufficient data: {reason}")]
    InsufficientData { reason: String },

    /// Empty input where at least one element is required.
    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    /// A configuration that violates its invariants.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// A growth step left the representable volume range.
    #[error("volume left the representable range (step exponent {exponent} doublings)")]
    VolumeOverflow { exponent: f64 },

    /// A query outside the supported diameter range; no extrapolation.
    #[error("diameter {diameter} cm is outside the table range [{min}, {max}] cm")]
    OutOfRange { diameter: f64, min: f64, max: f64 },
}
