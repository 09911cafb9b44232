//! Physical constants (CODATA 2018, SI) and unit helpers.
//!
//! Every frequency or rate in this crate is an angular rate in rad/s. A value
//! quoted as "10 kHz" means `2π × 10⁴` rad/s.

use std::f64::consts::PI;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// One barn in m².
pub const BARN: f64 = 1e-28;

/// Cyclic frequency in Hz to angular rate.
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

pub fn mhz(f: f64) -> f64 {
    hz(f * 1e6)
}

/// Energy in eV to angular rate E/ħ.
pub fn ev(e: f64) -> f64 {
    e * E_CHARGE / HBAR
}

/// Angular rate to cyclic frequency in Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

pub fn to_khz(omega: f64) -> f64 {
    to_hz(omega) * 1e-3
}

/// ONQ response in units of 2π·Hz/(MV/m)², as quoted for the D tensor, to
/// rad·s⁻¹ per (V/m)².
pub fn hz_per_mv_m_sq(d: f64) -> f64 {
    hz(d) * 1e-12
}

/// Inverse of [`hz_per_mv_m_sq`].
pub fn to_hz_per_mv_m_sq(d: f64) -> f64 {
    to_hz(d) * 1e12
}
