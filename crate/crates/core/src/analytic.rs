//! Quasi-steady solution of the reduced equations and its factorization
//! into a temporal mode A_k(t) and a spatial mode B_k.

use crate::diagnostics::Warning;
use crate::dynamics::{EmitterAmplitudes, PulseSpec};
use crate::ensemble::AtomCloud;
use crate::error::{domain, Result};
use crate::physics::{norm3, PhysicalParams};
use crate::quadrature::{cumulative_trapezoid, cumulative_trapezoid_complex};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// δ̃_s^(j) without the pump light shift, which is small against γ for the
/// pulses of interest and would otherwise make β time dependent.
fn static_detuning(cloud: &AtomCloud, delta: f64) -> Vec<f64> {
    cloud.eta.iter().zip(&cloud.delta_s).map(|(&e, &d)| d - e * e / delta).collect()
}

/// β = Δ⁻² Σ_j |η_j|² / (γ − iδ̃_j).
pub fn beta_coefficient(cloud: &AtomCloud, params: &PhysicalParams) -> Result<C64> {
    let gamma = params.gamma();
    if !(gamma > 0.0) {
        return Err(domain("beta needs a positive effective broadening"));
    }
    let delta = params.delta_intermediate;
    if delta == 0.0 {
        return Err(domain("intermediate detuning must be non-zero"));
    }
    let det = static_detuning(cloud, delta);
    let sum: C64 = cloud.eta.iter().zip(&det).map(|(&e, &d)| C64::new(e * e, 0.0) / C64::new(gamma, -d)).sum();
    Ok(sum / (delta * delta))
}

/// Per-atom spatial weights η_j / (Δ(γ − iδ̃_j)); B_k is their phased sum.
pub fn spatial_weights(cloud: &AtomCloud, params: &PhysicalParams) -> Result<Vec<C64>> {
    let gamma = params.gamma();
    let delta = params.delta_intermediate;
    if delta == 0.0 {
        return Err(domain("intermediate detuning must be non-zero"));
    }
    let det = static_detuning(cloud, delta);
    Ok(cloud.eta.iter().zip(&det).map(|(&e, &d)| C64::new(e / delta, 0.0) / C64::new(gamma, -d)).collect())
}

/// Unit vector `k_hat` scaled to |k| = k0, then q = k_p − k_d − k.
pub(crate) fn mismatch(params: &PhysicalParams, k_hat: [f64; 3]) -> [f64; 3] {
    let n = norm3(k_hat);
    let k0 = params.k0();
    let pm = params.phase_matching_vector();
    [pm[0] - k0 * k_hat[0] / n, pm[1] - k0 * k_hat[1] / n, pm[2] - k0 * k_hat[2] / n]
}

pub(crate) fn phased_sum(weights: &[C64], positions: &[[f64; 3]], q: [f64; 3]) -> C64 {
    weights
        .iter()
        .zip(positions)
        .map(|(w, r)| {
            let phase = q[0] * r[0] + q[1] * r[1] + q[2] * r[2];
            w * C64::from_polar(1.0, phase)
        })
        .sum()
}

/// B_k without the g_k* prefactor.
pub fn spatial_mode(k_hat: [f64; 3], cloud: &AtomCloud, params: &PhysicalParams) -> Result<C64> {
    let w = spatial_weights(cloud, params)?;
    Ok(phased_sum(&w, &cloud.positions, mismatch(params, k_hat)))
}

/// B_k over many directions, in parallel.
pub fn spatial_modes(k_hats: &[[f64; 3]], cloud: &AtomCloud, params: &PhysicalParams) -> Result<Vec<C64>> {
    let w = spatial_weights(cloud, params)?;
    Ok(k_hats.par_iter().map(|&k| phased_sum(&w, &cloud.positions, mismatch(params, k))).collect())
}

/// A_k(t) on `grid` for the detuning `detuning = ω_k − ω_eg`.
pub fn temporal_mode(detuning: f64, pulse: &PulseSpec, beta: C64, grid: &[f64]) -> Vec<C64> {
    let pump: Vec<C64> = grid.iter().map(|&t| pulse.value(t)).collect();
    let fluence = pump_fluence(&pump, grid);
    let integrand: Vec<C64> = (0..grid.len())
        .map(|i| pump[i] * C64::from_polar(1.0, detuning * grid[i]) * (-beta * fluence[i]).exp())
        .collect();
    cumulative_trapezoid_complex(grid, &integrand)
}

fn pump_fluence(pump: &[C64], grid: &[f64]) -> Vec<f64> {
    let p2: Vec<f64> = pump.iter().map(|z| z.norm_sqr()).collect();
    cumulative_trapezoid(grid, &p2)
}

/// ε(t) = Ω_p(t) exp(−β ∫₀ᵗ |Ω_p|²).
pub fn envelope(pulse: &PulseSpec, beta: C64, grid: &[f64]) -> Vec<C64> {
    let pump: Vec<C64> = grid.iter().map(|&t| pulse.value(t)).collect();
    envelope_of(&pump, grid, beta)
}

/// The same map for tabulated pump samples.
pub fn envelope_of(pump: &[C64], grid: &[f64], beta: C64) -> Vec<C64> {
    let s = pump_fluence(pump, grid);
    pump.iter().zip(&s).map(|(p, s)| p * (-beta * s).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticForm {
    /// Time-dependent η̃_j(t) and δ̃_s^(j)(t) inside the quasi-steady relation.
    Adiabatic,
    /// Static β and detunings; b_j(t) factorizes into Ω_p(t)b0(t) times a
    /// per-atom weight, so that a_k = −i(γ/Ω_d) A_k B_k holds exactly.
    Factorized,
}

#[derive(Debug, Clone)]
pub struct AnalyticSolution {
    pub form: AnalyticForm,
    pub gamma: f64,
    pub beta: C64,
    pub times: Vec<f64>,
    pub pump: Vec<C64>,
    pub b0: Vec<C64>,
    pub envelope: Vec<C64>,
    pub warnings: Vec<Warning>,
    coupling: Vec<f64>,
    detuning: Vec<f64>,
    delta: f64,
    omega_d: f64,
}

/// Quasi-steady amplitudes b0(t) and b_j(t) on `grid`. b_j are evaluated on
/// demand through [`EmitterAmplitudes`].
pub fn analytic_amplitudes(
    cloud: &AtomCloud,
    pulse: &PulseSpec,
    params: &PhysicalParams,
    grid: &[f64],
    form: AnalyticForm,
) -> Result<AnalyticSolution> {
    if params.omega_d == 0.0 {
        return Err(domain("analytic solution is singular without a drive field (omega_d = 0)"));
    }
    let delta = params.delta_intermediate;
    let gamma = params.gamma();
    let beta = beta_coefficient(cloud, params)?;
    let warnings = params.guard_warnings(pulse.peak_amplitude(), cloud.max_eta());
    for w in &warnings {
        log::warn!("{w}");
    }
    let pump: Vec<C64> = grid.iter().map(|&t| pulse.value(t)).collect();
    let detuning = static_detuning(cloud, delta);
    let (coupling, b0): (Vec<f64>, Vec<C64>) = match form {
        AnalyticForm::Factorized => {
            let s = pump_fluence(&pump, grid);
            (cloud.eta.iter().map(|e| e / delta).collect(), s.iter().map(|s| (-beta * s).exp()).collect())
        }
        AnalyticForm::Adiabatic => {
            let g: Vec<f64> =
                cloud.eta.iter().zip(&cloud.delta_s).map(|(&e, &d)| e / delta * (1.0 + d / (2.0 * delta))).collect();
            let rate: Vec<C64> = pump
                .par_iter()
                .map(|p| {
                    let shift = p.norm_sqr() / delta;
                    let sum: C64 = g.iter().zip(&detuning).map(|(&g, &d)| C64::new(g * g, 0.0) / C64::new(gamma, -(d + shift))).sum();
                    sum * p.norm_sqr()
                })
                .collect();
            let integral = cumulative_trapezoid_complex(grid, &rate);
            (g, integral.iter().map(|x| (-x).exp()).collect())
        }
    };
    let envelope = pump.iter().zip(&b0).map(|(p, b)| p * b).collect();
    Ok(AnalyticSolution {
        form,
        gamma,
        beta,
        times: grid.to_vec(),
        pump,
        b0,
        envelope,
        warnings,
        coupling,
        detuning,
        delta,
        omega_d: params.omega_d,
    })
}

impl AnalyticSolution {
    fn shift(&self, t: usize) -> f64 {
        match self.form {
            AnalyticForm::Adiabatic => self.pump[t].norm_sqr() / self.delta,
            AnalyticForm::Factorized => 0.0,
        }
    }

    /// b_j at one output time.
    pub fn emitter_at(&self, t: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.coupling.len()];
        self.emitter_into(t, &mut out);
        out
    }

    pub fn excited_population(&self) -> Vec<f64> {
        (0..self.times.len()).map(|t| self.emitter_at(t).iter().map(|b| b.norm_sqr()).sum()).collect()
    }

    /// max_t ‖∂_t b(t)‖ / (γ‖b(t)‖) over times where b is non-negligible.
    /// Small values mean the quasi-steady assumption is self-consistent.
    pub fn quasi_steady_residual(&self) -> f64 {
        let n = self.times.len();
        let slices: Vec<Vec<C64>> = (0..n).map(|t| self.emitter_at(t)).collect();
        let norms: Vec<f64> = slices.iter().map(|s| s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
        let top = norms.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for t in 1..n - 1 {
            if norms[t] < 1e-3 * top {
                continue;
            }
            let h = self.times[t + 1] - self.times[t - 1];
            let d: f64 = slices[t + 1].iter().zip(&slices[t - 1]).map(|(a, b)| ((a - b) / h).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(d / (self.gamma * norms[t]));
        }
        worst
    }
}

impl EmitterAmplitudes for AnalyticSolution {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn n_atoms(&self) -> usize {
        self.coupling.len()
    }
    fn emitter_into(&self, t: usize, out: &mut [C64]) {
        let common = -self.gamma / self.omega_d * self.pump[t] * self.b0[t];
        let shift = self.shift(t);
        for ((o, &g), &d) in out.iter_mut().zip(&self.coupling).zip(&self.detuning) {
            *o = common * g / C64::new(self.gamma, -(d + shift));
        }
    }
}

/// −i(γ/Ω_d) A_k(t) B_k.
pub fn factorized_amplitude(gamma: f64, omega_d: f64, temporal: &[C64], spatial: C64) -> Vec<C64> {
    temporal.iter().map(|a| -I * (gamma / omega_d) * a * spatial).collect()
}
