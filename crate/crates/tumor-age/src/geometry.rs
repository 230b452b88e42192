//! Spherical volume/diameter conversions.
//!
//! Tumors are modeled as spheres; volumes are in mL (= cm³) and diameters
//! in cm. Conversions use the exact sphere formula `V = (π/6)·d³`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tumor diameter in cm. Always positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Diameter(f64);

/// Tumor volume in mL. Always positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Volume(f64);

impl Diameter {
    pub fn new(cm: f64) -> Result<Self> {
        if cm > 0.0 && cm.is_finite() {
            Ok(Diameter(cm))
        } else {
            Err(Error::InvalidValue { name: "diameter", value: cm })
        }
    }

    pub fn cm(&self) -> f64 {
        self.0
    }
}

impl Volume {
    pub fn new(ml: f64) -> Result<Self> {
        if ml > 0.0 && ml.is_finite() {
            Ok(Volume(ml))
        } else {
            Err(Error::InvalidValue { name: "volume", value: ml })
        }
    }

    pub fn ml(&self) -> f64 {
        self.0
    }
}

/// Volume of a sphere with diameter `d`: `(π/6)·d³`.
pub fn diameter_to_volume(d: Diameter) -> Volume {
    Volume(PI / 6.0 * d.0.powi(3))
}

/// Diameter of a sphere with volume `v`: `(6v/π)^(1/3)`. Exact inverse of
/// [`diameter_to_volume`] up to rounding.
pub fn volume_to_diameter(v: Volume) -> Diameter {
    Diameter((6.0 * v.0 / PI).cbrt())
}
