//! Physical constants (CODATA 2018) and the unit conversions applied at the
//! config boundary. Everything inside the crate is SI with angular
//! frequencies in rad/s.

use std::f64::consts::TAU;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Atomic unit of electric dipole moment, a0·e, in C·m.
pub const BOHR_DIPOLE: f64 = 8.478_353_625_5e-30;
/// R∞·c in Hz.
pub const RYDBERG_HZ: f64 = 3.289_841_960_250_8e15;
pub const ELECTRON_MASS_U: f64 = 5.485_799_090_65e-4;
pub const RB87_MASS_U: f64 = 86.909_180_531;

/// Reduced-mass Rydberg constant of Rb-87 as an angular frequency.
pub fn rydberg_rb87() -> f64 {
    TAU * RYDBERG_HZ / (1.0 + ELECTRON_MASS_U / RB87_MASS_U)
}

#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

#[inline]
pub fn um(x: f64) -> f64 {
    x * 1e-6
}

#[inline]
pub fn to_um(x: f64) -> f64 {
    x * 1e6
}

#[inline]
pub fn us(t: f64) -> f64 {
    t * 1e-6
}

#[inline]
pub fn to_us(t: f64) -> f64 {
    t * 1e6
}
