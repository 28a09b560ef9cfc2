//! Dipole radiation-pattern integrals.
//!
//! The in-plane dipole radiates with weight `sin²θ`; the extra `sinθ` from
//! the spherical Jacobian makes every band integral a `sin³θ` integral,
//! which has the closed-form antiderivative `-cosθ + cos³θ/3`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadiometryError {
    #[error("invalid angular band [{lo}, {hi}]: need 0 <= lo <= hi <= pi")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("lattice angle {0} rad outside (0, pi/2)")]
    LatticeAngle(f64),
}

/// Polar-angle interval in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularBand {
    lo: f64,
    hi: f64,
}

impl AngularBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self, RadiometryError> {
        if !(0.0 <= lo && lo <= hi && hi <= PI) {
            return Err(RadiometryError::InvalidBand { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Band of half-width `half_width` centred on the waveguide axis (θ = π/2).
    pub fn symmetric(half_width: f64) -> Result<Self, RadiometryError> {
        Self::new(FRAC_PI_2 - half_width, FRAC_PI_2 + half_width)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

fn sin3_antiderivative(theta: f64) -> f64 {
    let c = theta.cos();
    -c + c * c * c / 3.0
}

/// `∫_lo^hi sin³θ dθ` in closed form.
pub fn sin3_integral(lo: f64, hi: f64) -> f64 {
    sin3_antiderivative(hi) - sin3_antiderivative(lo)
}

/// `∫₀^π sin³θ dθ`.
pub const SIN3_FULL: f64 = 4.0 / 3.0;

/// Fraction of the dipole power emitted into `band`.
pub fn dipole_band_fraction(band: AngularBand) -> f64 {
    (sin3_integral(band.lo, band.hi) / SIN3_FULL).clamp(0.0, 1.0)
}

/// Closed form of the band fraction for a band symmetric about π/2.
pub fn symmetric_band_fraction(half_width: f64) -> f64 {
    let s = half_width.sin();
    0.5 * (3.0 * s - s * s * s)
}

/// The average emission angle `(2/π)·∫₀^{π/2} sin³θ cosθ dθ = 1/(2π)`.
pub fn average_emission_angle() -> f64 {
    AVERAGE_EMISSION_ANGLE
}

pub const AVERAGE_EMISSION_ANGLE: f64 = 1.0 / (2.0 * PI);

/// Power-weighted mean projection `⟨cosθ⟩ = ∫ sin³θ cosθ / ∫ sin³θ` over a
/// quarter sphere, i.e. `(1/4)/(2/3) = 3/8`.
pub const MEAN_EMISSION_PROJECTION: f64 = 3.0 / 8.0;

/// Fractions of quarter-sphere emission falling on the sloped and the
/// parallel Bragg surfaces for lattice angle `theta_gr`.
pub fn bragg_family_fractions(theta_gr: f64) -> Result<(f64, f64), RadiometryError> {
    if !(theta_gr > 0.0 && theta_gr < FRAC_PI_2) {
        return Err(RadiometryError::LatticeAngle(theta_gr));
    }
    // ∫₀^{π/2} sin³ = 2/3; the sloped band is [π/2-θgr, π/2].
    let split = FRAC_PI_2 - theta_gr;
    let eta_slp = sin3_integral(split, FRAC_PI_2) / (2.0 / 3.0);
    let eta_par = 1.0 - eta_slp;
    Ok((eta_slp, eta_par))
}
