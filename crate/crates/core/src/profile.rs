//! Radial initial-data profiles.

use serde::{Deserialize, Serialize};

/// A radial profile `h(|x|)` with compact support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    Zero,
    /// `amplitude·(1 − (r/radius)²)⁴` inside the ball, zero outside (C³ at the edge).
    QuarticBump { amplitude: f64, radius: f64 },
}

impl RadialProfile {
    pub fn bump(amplitude: f64, radius: f64) -> Self {
        if amplitude == 0.0 {
            RadialProfile::Zero
        } else {
            RadialProfile::QuarticBump { amplitude, radius }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::Zero => 0.0,
            RadialProfile::QuarticBump { amplitude, radius } => {
                let s = r.abs() / radius;
                if s >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - s * s).powi(4)
                }
            }
        }
    }

    /// Support radius (zero for the zero profile).
    pub fn support(&self) -> f64 {
        match *self {
            RadialProfile::Zero => 0.0,
            RadialProfile::QuarticBump { radius, .. } => radius,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, RadialProfile::Zero)
    }

    /// Same shape, amplitude multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            RadialProfile::Zero => RadialProfile::Zero,
            RadialProfile::QuarticBump { amplitude, radius } => {
                RadialProfile::bump(amplitude * c, radius)
            }
        }
    }
}

/// The pair `(f, g)` of position and velocity profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataProfile {
    pub f: RadialProfile,
    pub g: RadialProfile,
}

impl DataProfile {
    /// Quartic bumps of amplitudes `a_f`, `a_g` supported in `B_radius`.
    pub fn bumps(a_f: f64, a_g: f64, radius: f64) -> Self {
        Self {
            f: RadialProfile::bump(a_f, radius),
            g: RadialProfile::bump(a_g, radius),
        }
    }

    pub fn support(&self) -> f64 {
        self.f.support().max(self.g.support())
    }
}
