//! Secondary physical quantities derived from the scenario parameters.
//!
//! All frequencies are angular (rad/s), lengths in metres, dipole moments in
//! atomic units (a0·e). Conversions to and from Hz/µm happen only in the
//! scenario layer.

use crate::diagnostics::Warning;
use crate::error::{domain, Result};
use crate::units::{self, BOHR_DIPOLE, EPSILON_0, HBAR, SPEED_OF_LIGHT};
use std::f64::consts::TAU;

/// Every fixed input of a scenario: species, cavity, lasers and decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Rydberg constant of the species as an angular frequency.
    pub rydberg_constant: f64,
    pub quantum_defect_s: f64,
    pub quantum_defect_p: f64,
    /// Principal quantum number of |i⟩ (P state).
    pub n_i: u32,
    /// Principal quantum number of |s⟩ (S state).
    pub n_s: u32,
    pub dipole_si: f64,
    pub dipole_gi: f64,
    pub dipole_se: f64,
    pub cavity_length: f64,
    pub electrode_gap: f64,
    pub rel_permittivity: f64,
    /// Distance from the cloud centre to the chip surface (surface at x = x0).
    pub surface_position: f64,
    pub omega_c: f64,
    pub omega_eg: f64,
    pub gamma_e: f64,
    pub gamma_s: f64,
    pub gamma_i: f64,
    /// Mean one-photon detuning Δ of the intermediate level.
    pub delta_intermediate: f64,
    /// Three-photon detuning δ_e.
    pub delta_e: f64,
    /// Stark gradient α: δ_s(x) = α x.
    pub stark_gradient: f64,
    pub omega_d: f64,
    pub pump_wavevector: [f64; 3],
    pub drive_wavevector: [f64; 3],
    /// Required |Δ| / max coupling before an adiabaticity warning is raised.
    pub adiabatic_ratio: f64,
}

impl PhysicalParams {
    /// Rb-87 on a 10.5 mm strip-line resonator: the reference setup.
    pub fn paper() -> Self {
        let cavity_length = 10.5e-3;
        let rel_permittivity = 5.6;
        let mut p = PhysicalParams {
            rydberg_constant: units::rydberg_rb87(),
            quantum_defect_s: 3.131,
            quantum_defect_p: 2.651,
            n_i: 68,
            n_s: 69,
            dipole_si: 2185.0,
            dipole_gi: 2.23e-4,
            dipole_se: 3.88e-3,
            cavity_length,
            electrode_gap: 10e-6,
            rel_permittivity,
            surface_position: 40e-6,
            omega_c: full_wave_cavity_frequency(cavity_length, rel_permittivity),
            omega_eg: TAU * SPEED_OF_LIGHT / 780.241_209e-9,
            gamma_e: units::hz(6.1e6),
            gamma_s: units::hz(1.6e3),
            gamma_i: units::hz(1.6e3),
            delta_intermediate: units::hz(10e6),
            delta_e: 0.0,
            stark_gradient: units::hz(0.5e6) / 1e-6,
            omega_d: units::hz(1e6),
            pump_wavevector: [0.0; 3],
            drive_wavevector: [0.0; 3],
            adiabatic_ratio: 5.0,
        };
        p.set_beams(297e-9, 0.0, None);
        p
    }

    /// Pump along +z with the given wavelength; drive tilted by `drive_tilt`
    /// (rad) towards +x in the x–z plane. Without an explicit drive
    /// wavelength the drive frequency follows from energy conservation,
    /// ω_d = ω_p + ω_c − ω_eg − δ_e.
    pub fn set_beams(&mut self, pump_wavelength: f64, drive_tilt: f64, drive_wavelength: Option<f64>) {
        let kp = TAU / pump_wavelength;
        let kd = match drive_wavelength {
            Some(l) => TAU / l,
            None => {
                let omega_p = kp * SPEED_OF_LIGHT;
                (omega_p + self.omega_c - self.omega_eg - self.delta_e) / SPEED_OF_LIGHT
            }
        };
        self.pump_wavevector = [0.0, 0.0, kp];
        self.drive_wavevector = [kd * drive_tilt.sin(), 0.0, kd * drive_tilt.cos()];
    }

    /// Copy with the drive rotated to `drive_tilt`, both wavelengths kept.
    pub fn with_drive_tilt(&self, drive_tilt: f64) -> Self {
        let mut p = self.clone();
        p.set_beams(TAU / norm3(self.pump_wavevector), drive_tilt, Some(TAU / norm3(self.drive_wavevector)));
        p
    }

    /// Angle of the drive wavevector from the pump (z) axis in the x–z plane.
    pub fn drive_tilt(&self) -> f64 {
        self.drive_wavevector[0].atan2(self.drive_wavevector[2])
    }

    pub fn k0(&self) -> f64 {
        self.omega_eg / SPEED_OF_LIGHT
    }

    /// k_p − k_d, the phase-matched emission wavevector.
    pub fn phase_matching_vector(&self) -> [f64; 3] {
        let p = self.pump_wavevector;
        let d = self.drive_wavevector;
        [p[0] - d[0], p[1] - d[1], p[2] - d[2]]
    }

    pub fn field_per_photon(&self) -> f64 {
        field_per_photon(self.cavity_length, self.electrode_gap, self.omega_c)
    }

    /// Vacuum Rabi frequency at the antinode (chip surface).
    pub fn eta_antinode(&self) -> f64 {
        vacuum_rabi(self.dipole_si, self.field_per_photon(), 1.0)
    }

    /// Evanescent cavity mode u(x) = exp(−(x0 − x)/D).
    pub fn mode_function(&self, x: f64) -> f64 {
        (-(self.surface_position - x) / self.electrode_gap).exp()
    }

    pub fn eta_at(&self, x: f64) -> f64 {
        self.eta_antinode() * self.mode_function(x)
    }

    pub fn gamma(&self) -> f64 {
        gamma_eff(self.omega_d, self.gamma_e).expect("validated decay rate")
    }

    /// ω_si from the quantum-defect formula.
    pub fn transition_frequency_si(&self) -> Result<f64> {
        let s = rydberg_level_energy(self.rydberg_constant, self.n_s, self.quantum_defect_s)?;
        let i = rydberg_level_energy(self.rydberg_constant, self.n_i, self.quantum_defect_p)?;
        Ok(s - i)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rydberg_constant", self.rydberg_constant),
            ("dipole_si", self.dipole_si),
            ("dipole_gi", self.dipole_gi),
            ("dipole_se", self.dipole_se),
            ("cavity_length", self.cavity_length),
            ("electrode_gap", self.electrode_gap),
            ("rel_permittivity", self.rel_permittivity),
            ("surface_position", self.surface_position),
            ("omega_c", self.omega_c),
            ("omega_eg", self.omega_eg),
            ("gamma_e", self.gamma_e),
            ("omega_d", self.omega_d),
            ("adiabatic_ratio", self.adiabatic_ratio),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("gamma_s", self.gamma_s), ("gamma_i", self.gamma_i)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.delta_intermediate == 0.0 || !self.delta_intermediate.is_finite() {
            return Err(domain("intermediate detuning must be non-zero"));
        }
        if !self.stark_gradient.is_finite() || !self.delta_e.is_finite() {
            return Err(domain("detunings must be finite"));
        }
        let kpm = norm3(self.phase_matching_vector());
        if !(kpm > 0.0) {
            return Err(domain("pump and drive wavevectors cancel"));
        }
        Ok(())
    }

    /// Validity guards that can be checked from parameters alone.
    /// `omega_p_max` is the peak pump Rabi frequency and `eta_max` the largest
    /// vacuum Rabi frequency in the cloud.
    pub fn guard_warnings(&self, omega_p_max: f64, eta_max: f64) -> Vec<Warning> {
        let mut out = Vec::new();
        let strongest = omega_p_max.abs().max(eta_max.abs());
        if strongest > 0.0 {
            let ratio = self.delta_intermediate.abs() / strongest;
            if ratio < self.adiabatic_ratio {
                out.push(Warning::Adiabaticity { ratio, required: self.adiabatic_ratio });
            }
        }
        if self.omega_d >= 0.5 * self.gamma_e {
            out.push(Warning::DriveNotWeak { omega_d: self.omega_d, half_gamma_e: 0.5 * self.gamma_e });
        }
        let gamma = self.gamma();
        if gamma < 5.0 * 0.5 * self.gamma_s {
            out.push(Warning::BroadeningTooSmall {
                gamma,
                competitor: 0.5 * self.gamma_s,
                what: "Gamma_s/2".into(),
            });
        }
        let delta_e_tilde = self.delta_e + omega_p_max * omega_p_max / self.delta_intermediate;
        if gamma < 5.0 * delta_e_tilde.abs() {
            out.push(Warning::BroadeningTooSmall {
                gamma,
                competitor: delta_e_tilde.abs(),
                what: "|delta_e~|".into(),
            });
        }
        out
    }
}

/// ω_c = 2πc/(L√ε_r) for the full-wavelength strip-line mode.
pub fn full_wave_cavity_frequency(length: f64, rel_permittivity: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / (length * rel_permittivity.sqrt())
}

/// Level energy −R/(n−δ)² of a Rydberg state, as an angular frequency.
pub fn rydberg_level_energy(rydberg_constant: f64, n: u32, defect: f64) -> Result<f64> {
    let n_eff = n as f64 - defect;
    if !(n_eff > 0.0) {
        return Err(domain(format!("effective quantum number n - delta = {n_eff} is not positive")));
    }
    Ok(-rydberg_constant / (n_eff * n_eff))
}

/// Field per photon √(ħω_c / ε0 V_c) with V_c = 2πD²L.
pub fn field_per_photon(cavity_length: f64, electrode_gap: f64, omega_c: f64) -> f64 {
    let volume = TAU * electrode_gap * electrode_gap * cavity_length;
    (HBAR * omega_c / (EPSILON_0 * volume)).sqrt()
}

/// η = (℘/ħ) ε_c u with ℘ given in a0·e.
pub fn vacuum_rabi(dipole: f64, field: f64, mode_value: f64) -> f64 {
    dipole * BOHR_DIPOLE / HBAR * field * mode_value
}

/// Laser intensity in W/cm² that gives Rabi frequency `rabi` on a transition
/// with dipole moment `dipole` (a0·e).
pub fn intensity_for_rabi(rabi: f64, dipole: f64) -> Result<f64> {
    if !(dipole.abs() > 0.0) {
        return Err(domain("dipole moment must be non-zero"));
    }
    let field = HBAR * rabi / (dipole * BOHR_DIPOLE);
    Ok(0.5 * EPSILON_0 * SPEED_OF_LIGHT * field * field * 1e-4)
}

/// Drive-induced broadening of |s⟩: γ = |Ω_d|²/(Γ_e/2).
pub fn gamma_eff(omega_d: f64, gamma_e: f64) -> Result<f64> {
    if !(gamma_e > 0.0) {
        return Err(domain("Gamma_e must be positive"));
    }
    if omega_d.abs() >= 0.5 * gamma_e {
        log::warn!("Omega_d = {omega_d:.4e} rad/s is not below Gamma_e/2; broadening picture is marginal");
    }
    Ok(omega_d * omega_d / (0.5 * gamma_e))
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{hz, to_hz};
    use proptest::prelude::*;

    #[test]
    fn s_p_transition_near_12_ghz() {
        let p = PhysicalParams::paper();
        let f = to_hz(p.transition_frequency_si().unwrap());
        assert!((f - 12.1e9).abs() < 0.1e9, "{f}");
    }

    #[test]
    fn level_energy_trivial_cases() {
        let r = 1.0e16;
        let a = rydberg_level_energy(r, 40, 0.0).unwrap();
        assert_eq!(a - rydberg_level_energy(r, 40, 0.0).unwrap(), 0.0);
        let gap = rydberg_level_energy(r, 2, 0.0).unwrap() - rydberg_level_energy(r, 1, 0.0).unwrap();
        assert!((gap - 0.75 * r).abs() < 1e-12 * r);
        assert!(rydberg_level_energy(r, 3, 3.0).is_err());
        assert!(rydberg_level_energy(r, 2, 3.2).is_err());
    }

    #[test]
    fn field_per_photon_reference_geometry() {
        let e = field_per_photon(10.5e-3, 10e-6, hz(12e9));
        assert!((e - 0.37).abs() < 0.01, "{e}");
        let q = field_per_photon(4.0 * 10.5e-3, 10e-6, hz(12e9));
        assert!((q / e - 0.5).abs() < 1e-12);
        let w = field_per_photon(10.5e-3, 10e-6, hz(48e9));
        assert!((w / e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_rabi_at_cloud_centre() {
        let eta = vacuum_rabi(2185.0, 0.37, (-4.0f64).exp());
        assert!((to_hz(eta) - 190e3).abs() < 5e3, "{}", to_hz(eta));
        assert_eq!(vacuum_rabi(2185.0, 0.37, 0.0), 0.0);
        assert!((vacuum_rabi(4370.0, 0.37, 0.1) / vacuum_rabi(2185.0, 0.37, 0.1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn laser_intensities() {
        let i0 = intensity_for_rabi(hz(200e3), 2.23e-4).unwrap();
        assert!((i0 / 650.0 - 1.0).abs() < 0.05, "{i0}");
        let id = intensity_for_rabi(hz(1e6), 3.88e-3).unwrap();
        assert!((id / 55.0 - 1.0).abs() < 0.05, "{id}");
        assert_eq!(intensity_for_rabi(0.0, 1.0).unwrap(), 0.0);
        assert!(intensity_for_rabi(1.0, 0.0).is_err());
    }

    #[test]
    fn broadening() {
        // 1 MHz² / 3.05 MHz
        let g = gamma_eff(hz(1e6), hz(6.1e6)).unwrap();
        assert!((to_hz(g) - 1e6 / 3.05).abs() < 1.0);
        assert!((to_hz(g) / 1e6 - 0.328).abs() < 5e-4);
        assert_eq!(gamma_eff(0.0, 1.0).unwrap(), 0.0);
        let g2 = gamma_eff(hz(2e6), hz(6.1e6)).unwrap();
        assert!((g2 / g - 4.0).abs() < 1e-12);
        assert!(gamma_eff(1.0, 0.0).is_err());
    }

    #[test]
    fn reference_params_are_consistent() {
        let p = PhysicalParams::paper();
        p.validate().unwrap();
        // derived drive wavelength lands near 480 nm
        let kd = norm3(p.drive_wavevector);
        let lambda_d = TAU / kd;
        assert!((lambda_d - 480e-9).abs() < 1e-9, "{lambda_d}");
        assert!((to_hz(p.omega_c) / 1e9 - 12.0).abs() < 0.1);
        let eta0 = to_hz(p.eta_at(0.0));
        assert!((eta0 - 190e3).abs() < 5e3);
        assert!(p.guard_warnings(hz(200e3), p.eta_at(16e-6)).is_empty());
        // k0 = ω_eg / c
        assert!((p.k0() * SPEED_OF_LIGHT / p.omega_eg - 1.0).abs() < 1e-15);
    }

    #[test]
    fn guards_fire() {
        let p = PhysicalParams::paper();
        let w = p.guard_warnings(p.delta_intermediate, 0.0);
        assert!(w.iter().any(|w| matches!(w, Warning::Adiabaticity { .. })));
        let mut q = p.clone();
        q.omega_d = q.gamma_e;
        assert!(q.guard_warnings(0.0, 0.0).iter().any(|w| matches!(w, Warning::DriveNotWeak { .. })));
    }

    proptest! {
        #[test]
        fn homogeneity(scale in 1e-3f64..1e3, rabi in 1e3f64..1e8, field in 1e-3f64..10.0) {
            let a = vacuum_rabi(2185.0, field, 0.3);
            let b = vacuum_rabi(2185.0, scale * field, 0.3);
            prop_assert!((b / a - scale).abs() <= 1e-12 * scale);
            let i1 = intensity_for_rabi(rabi, 1e-3).unwrap();
            let i2 = intensity_for_rabi(scale * rabi, 1e-3).unwrap();
            prop_assert!((i2 / i1 / (scale * scale) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn level_energy_increases_with_n(n in 5u32..200, defect in 0.0f64..4.0) {
            let r = units::rydberg_rb87();
            let a = rydberg_level_energy(r, n, defect).unwrap();
            let b = rydberg_level_energy(r, n + 1, defect).unwrap();
            prop_assert!(b > a);
        }
    }
}
