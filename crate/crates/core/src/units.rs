//! Physical constants and the unit conversions used at the I/O boundary.
//!
//! Lengths are carried in nanometres and angles in radians internally.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const NM_PER_UM: f64 = 1000.0;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn um_to_nm(um: f64) -> f64 {
    um * NM_PER_UM
}

pub fn nm_to_um(nm: f64) -> f64 {
    nm / NM_PER_UM
}
