//! Photon observables computed from b_j(t): directional amplitudes, angular
//! maps, the phase-matched fraction and the spatial emission profile.

pub mod angular;
pub mod beam;
pub mod density;
pub mod fit;

pub use angular::{direction, AngularGrid, AngularMap};
pub use beam::{cavity_output_probability, gaussian_beam_mode, GaussianBeam};
pub use density::{directional_density, sphere_integral, DensityOperator, DensityOptions, SphereQuadrature};
pub use fit::{gaussian_fit, FitOptions, GaussianFit};

use crate::analytic::{mismatch, phased_sum};
use crate::diagnostics::Warning;
use crate::dynamics::EmitterAmplitudes;
use crate::ensemble::AtomCloud;
use crate::error::{Error, Result};
use crate::physics::PhysicalParams;
use crate::quadrature::{cumulative_trapezoid_complex, gauss_legendre, trapezoid_weights};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// ∫₀^{t_end} b_j(t) e^{iΔω t} dt for every atom, Δω = ω_k − ω_eg.
pub fn time_integrals<A: EmitterAmplitudes>(amps: &A, detuning: f64) -> Vec<C64> {
    let n = amps.n_atoms();
    let times = amps.times();
    let w = trapezoid_weights(times);
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut b = vec![C64::new(0.0, 0.0); n];
    for (t, wt) in w.iter().enumerate() {
        amps.emitter_into(t, &mut b);
        let f = C64::from_polar(*wt, detuning * times[t]);
        for (a, b) in acc.iter_mut().zip(&b) {
            *a += f * b;
        }
    }
    acc
}

/// a_k(t_end) = i Σ_j e^{iq·r_j} ∫ b_j e^{iΔωt} dt, without the g_k* prefactor.
pub fn photon_amplitude<A: EmitterAmplitudes>(
    amps: &A,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    k_hat: [f64; 3],
    detuning: f64,
) -> C64 {
    let integrals = time_integrals(amps, detuning);
    I * phased_sum(&integrals, &cloud.positions, mismatch(params, k_hat))
}

/// a_k(t) on the amplitude grid.
pub fn photon_amplitude_series<A: EmitterAmplitudes>(
    amps: &A,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    k_hat: [f64; 3],
    detuning: f64,
) -> Vec<C64> {
    let n = amps.n_atoms();
    let times = amps.times();
    let mut u = vec![C64::new(0.0, 0.0); n];
    density::phase_factors(cloud, params, k_hat, &mut u);
    let mut b = vec![C64::new(0.0, 0.0); n];
    let s: Vec<C64> = times
        .iter()
        .enumerate()
        .map(|(t, &tt)| {
            amps.emitter_into(t, &mut b);
            I * b.iter().zip(&u).map(|(b, u)| b * u).sum::<C64>() * C64::from_polar(1.0, detuning * tt)
        })
        .collect();
    cumulative_trapezoid_complex(times, &s)
}

/// |a_k(t_end)|² over the grid at fixed Δω.
pub fn angular_map<A: EmitterAmplitudes>(
    amps: &A,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    grid: &AngularGrid,
    detuning: f64,
) -> AngularMap {
    let integrals = time_integrals(amps, detuning);
    angular_map_from_integrals(&integrals, cloud, params, grid)
}

pub fn angular_map_from_integrals(integrals: &[C64], cloud: &AtomCloud, params: &PhysicalParams, grid: &AngularGrid) -> AngularMap {
    let dirs = grid.directions();
    let values = dirs.par_iter().map(|&d| phased_sum(integrals, &cloud.positions, mismatch(params, d)).norm_sqr()).collect();
    AngularMap { grid: grid.clone(), values }
}

/// Resolution and coverage checks of a grid against a fitted lobe.
pub fn grid_warnings(grid: &AngularGrid, fit: &GaussianFit) -> Vec<Warning> {
    let mut out = Vec::new();
    let [sx, sy] = grid.spacing();
    for (axis, width, step, centre, ax) in
        [('x', fit.width_x, sx, fit.theta_x0, &grid.theta_x), ('y', fit.width_y, sy, fit.theta_y0, &grid.theta_y)]
    {
        let across = width / step;
        if across < 8.0 {
            out.push(Warning::CoarseAngularGrid { axis, points_across_width: across });
        }
        let span = (centre - ax[0]).min(ax[ax.len() - 1] - centre) / width;
        if span < 4.0 {
            out.push(Warning::NarrowAngularGrid { axis, span_in_widths: span });
        }
    }
    out
}

/// P(r_j) = Γ_e ∫ |b_j|² dt.
pub fn spatial_emission<A: EmitterAmplitudes>(amps: &A, gamma_e: f64) -> Vec<f64> {
    let n = amps.n_atoms();
    let w = trapezoid_weights(amps.times());
    let mut acc = vec![0.0; n];
    let mut b = vec![C64::new(0.0, 0.0); n];
    for (t, wt) in w.iter().enumerate() {
        amps.emitter_into(t, &mut b);
        for (a, b) in acc.iter_mut().zip(&b) {
            *a += wt * b.norm_sqr();
        }
    }
    acc.iter().map(|a| gamma_e * a).collect()
}

/// Sum of per-atom probabilities falling in each bin of `edges` along `axis`.
pub fn profile_histogram(cloud: &AtomCloud, probabilities: &[f64], axis: usize, edges: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; edges.len() - 1];
    for (r, p) in cloud.positions.iter().zip(probabilities) {
        let x = r[axis];
        if x < edges[0] || x >= edges[edges.len() - 1] {
            continue;
        }
        let k = edges.partition_point(|e| *e <= x) - 1;
        h[k] += p;
    }
    h
}

/// Bin integrals of |η(x)|²/(γ² + δ_s(x)²)·e^{−x²/2σ_x²}.
pub fn lorentzian_profile_model(cloud: &AtomCloud, gamma: f64, edges: &[f64]) -> Vec<f64> {
    let sx = cloud.geometry.sigma[0];
    let prof = &cloud.profile;
    edges
        .windows(2)
        .map(|e| {
            let (xs, ws) = gauss_legendre(16, e[0], e[1]);
            xs.iter()
                .zip(&ws)
                .map(|(&x, w)| {
                    let eta = prof.eta(x);
                    let d = prof.delta_s(x);
                    w * eta * eta / (gamma * gamma + d * d) * (-x * x / (2.0 * sx * sx)).exp()
                })
                .sum()
        })
        .collect()
}

/// ‖a/Σa − b/Σb‖₂ / ‖b/Σb‖₂.
pub fn normalized_l2(a: &[f64], b: &[f64]) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x / sa - y / sb).powi(2)).sum();
    let den: f64 = b.iter().map(|y| (y / sb).powi(2)).sum();
    (num / den).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMatched {
    /// P_ΔΩ = W/(W + P_tot).
    pub probability: f64,
    /// W: coherent excess of the density over its incoherent level,
    /// integrated over the lobe window.
    pub coherent: f64,
    /// P_tot = Γ_e ∫ Σ|b_j|² dt.
    pub incoherent: f64,
    /// ΔΩ = π Δθ_x Δθ_y of the fitted lobe.
    pub solid_angle: f64,
    /// Half-size of the integration window in fitted widths.
    pub window_widths: f64,
}

impl PhaseMatched {
    /// Absolute probability that the photon leaves in the lobe.
    pub fn absolute(&self) -> f64 {
        self.probability * self.incoherent
    }
}

/// Fraction of the emission that goes into the phase-matched lobe.
///
/// The window is the rectangle ±`window_widths` fitted widths around the
/// fitted centre, clipped to the grid.
pub fn phase_matched_probability(
    op: &DensityOperator,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    grid: &AngularGrid,
    fit: Option<&GaussianFit>,
    window_widths: f64,
) -> Result<PhaseMatched> {
    let fit = fit.ok_or(Error::Unfitted)?;
    let weights = grid.solid_angle_weights();
    let mut dirs = Vec::new();
    let mut w = Vec::new();
    for (ix, &tx) in grid.theta_x.iter().enumerate() {
        if (tx - fit.theta_x0).abs() > window_widths * fit.width_x {
            continue;
        }
        for (iy, &ty) in grid.theta_y.iter().enumerate() {
            if (ty - fit.theta_y0).abs() > window_widths * fit.width_y {
                continue;
            }
            dirs.push(direction(tx, ty));
            w.push(weights[grid.index(ix, iy)]);
        }
    }
    let p = op.densities(cloud, params, &dirs);
    let base = op.incoherent_level();
    let coherent: f64 = p.iter().zip(&w).map(|(p, w)| (p - base) * w).sum();
    let incoherent = op.total_emitted;
    let probability = if coherent + incoherent > 0.0 { coherent / (coherent + incoherent) } else { 0.0 };
    Ok(PhaseMatched { probability, coherent, incoherent, solid_angle: fit.solid_angle(), window_widths })
}

/// NΔΩ/(NΔΩ + 4π).
pub fn cooperative_estimate(n_eff: f64, solid_angle: f64) -> f64 {
    let x = n_eff * solid_angle;
    x / (x + 4.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionOptions {
    pub detuning: f64,
    pub fit: FitOptions,
    pub density: DensityOptions,
    pub window_widths: f64,
}

impl Default for EmissionOptions {
    fn default() -> Self {
        EmissionOptions { detuning: 0.0, fit: FitOptions::default(), density: DensityOptions::default(), window_widths: 4.0 }
    }
}

#[derive(Debug, Clone)]
pub struct EmissionResult {
    /// |a_k(t_end)|², unnormalized.
    pub map: AngularMap,
    pub fit: GaussianFit,
    pub phase_matched: PhaseMatched,
    pub p_total_emitted: f64,
    /// P(r_j).
    pub spatial: Vec<f64>,
    pub density_rank: usize,
    pub warnings: Vec<Warning>,
}

impl EmissionResult {
    pub fn p_phase_matched(&self) -> f64 {
        self.phase_matched.absolute()
    }
}

/// Map, fit, phase-matched fraction and spatial profile in one pass.
pub fn analyze<A: EmitterAmplitudes>(
    amps: &A,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    grid: &AngularGrid,
    opts: &EmissionOptions,
) -> Result<EmissionResult> {
    let op = DensityOperator::build(amps, params.gamma_e, &opts.density);
    analyze_with(amps, &op, cloud, params, grid, opts)
}

/// [`analyze`] with a prebuilt density operator. The operator depends only on
/// the amplitudes, so scans over beam directions can share it.
pub fn analyze_with<A: EmitterAmplitudes>(
    amps: &A,
    op: &DensityOperator,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    grid: &AngularGrid,
    opts: &EmissionOptions,
) -> Result<EmissionResult> {
    let map = angular_map(amps, cloud, params, grid, opts.detuning);
    let fit = gaussian_fit(&map, &opts.fit)?;
    let warnings = grid_warnings(grid, &fit);
    for w in &warnings {
        log::warn!("{w}");
    }
    let phase_matched = phase_matched_probability(op, cloud, params, grid, Some(&fit), opts.window_widths)?;
    let spatial = spatial_emission(amps, params.gamma_e);
    Ok(EmissionResult {
        map,
        fit,
        phase_matched,
        p_total_emitted: op.total_emitted,
        spatial,
        density_rank: op.rank,
        warnings,
    })
}
