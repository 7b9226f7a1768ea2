//! Elliptic Gaussian emission mode and cavity-enhanced collection.

use crate::error::{domain, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeam {
    /// Waists (w_0x, w_0y), m.
    pub waist: [f64; 2],
    pub k0: f64,
}

impl GaussianBeam {
    pub fn new(waist: [f64; 2], k0: f64) -> Result<Self> {
        if !(waist[0] > 0.0 && waist[1] > 0.0 && k0 > 0.0) {
            return Err(domain("beam waists and wavenumber must be positive"));
        }
        Ok(GaussianBeam { waist, k0 })
    }

    /// Mode matched to a cloud of transverse widths σ: w_0 = 2σ.
    pub fn for_cloud(sigma_x: f64, sigma_y: f64, k0: f64) -> Result<Self> {
        GaussianBeam::new([2.0 * sigma_x, 2.0 * sigma_y], k0)
    }

    /// ζ = π w_0² / λ_0.
    pub fn rayleigh_range(&self) -> [f64; 2] {
        let lambda = 2.0 * PI / self.k0;
        [PI * self.waist[0].powi(2) / lambda, PI * self.waist[1].powi(2) / lambda]
    }

    pub fn width(&self, z: f64) -> [f64; 2] {
        let zr = self.rayleigh_range();
        [self.waist[0] * (1.0 + (z / zr[0]).powi(2)).sqrt(), self.waist[1] * (1.0 + (z / zr[1]).powi(2)).sqrt()]
    }

    /// Far-field divergence λ_0/(π w_0).
    pub fn divergence(&self) -> [f64; 2] {
        [2.0 / (self.k0 * self.waist[0]), 2.0 / (self.k0 * self.waist[1])]
    }

    /// Solid angle π Δθ_x Δθ_y.
    pub fn solid_angle(&self) -> f64 {
        let d = self.divergence();
        PI * d[0] * d[1]
    }

    /// Field with unit transverse power, without the Gouy phase.
    pub fn field(&self, x: f64, y: f64, z: f64) -> C64 {
        let [zx, zy] = self.rayleigh_range();
        let [wx, wy] = self.width(z);
        // q = z − iζ, written so that the transverse profile decays
        let qx = C64::new(z, -zx);
        let qy = C64::new(z, -zy);
        let i = C64::new(0.0, 1.0);
        let phase = i * self.k0 * (C64::new(z, 0.0) + x * x / (2.0 * qx) + y * y / (2.0 * qy));
        (2.0 / (PI * wx * wy)).sqrt() * phase.exp()
    }
}

/// Elliptic Gaussian mode at (x, y, z) for waists `waists` and wavenumber `k0`.
pub fn gaussian_beam_mode(x: f64, y: f64, z: f64, waists: [f64; 2], k0: f64) -> Result<C64> {
    Ok(GaussianBeam::new(waists, k0)?.field(x, y, z))
}

/// |v|²nN / (|v|²nN + 4π) with n = F/2π round trips.
pub fn cavity_output_probability(overlap_v: f64, finesse: f64, n_atoms_eff: f64) -> Result<f64> {
    let v2 = overlap_v * overlap_v;
    if !(0.0..=1.0).contains(&v2) {
        return Err(domain(format!("|v|^2 = {v2} outside [0, 1]")));
    }
    if !(finesse > 0.0) {
        return Err(domain("finesse must be positive"));
    }
    if v2 == 0.0 || n_atoms_eff == 0.0 {
        return Ok(0.0);
    }
    let x = v2 * finesse / (2.0 * PI) * n_atoms_eff;
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(x / (x + 4.0 * PI))
}
