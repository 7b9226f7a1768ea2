//! Execution of the named experiments. Each seed writes into its own
//! directory; the summary is merged afterwards on one thread.

use super::config::{load_scenario, EnvelopeKind, Experiment, Overrides, Scenario, SweepParameter};
use crate::analytic::{beta_coefficient, factorized_amplitude, spatial_mode, temporal_mode};
use crate::diagnostics::{mean_std, relative_l2, Warning};
use crate::dynamics::{
    amplitude_deviation, evolve_full, evolve_reduced, oracle_detuning, output_grid, EvolveOptions, PulseShape, PulseSpec,
};
use crate::emission::{
    angular_map_from_integrals, direction, gaussian_fit, grid_warnings, lorentzian_profile_model, normalized_l2,
    phase_matched_probability, photon_amplitude_series, profile_histogram, spatial_emission, time_integrals,
    DensityOperator, DensityOptions, FitOptions,
};
use crate::ensemble::{emission_layer_width, participation_fraction, sample_cloud, CloudGeometry};
use crate::error::{Error, Result};
use crate::physics::{intensity_for_rabi, PhysicalParams};
use crate::quadrature::uniform_grid;
use crate::shaping::{pump_for_absorption, pump_for_emission, relative_l2 as complex_l2, residual_chirp, round_trip_envelope, TargetEnvelope};
use crate::units::{to_hz, to_um};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Bins of the spatial emission profile: 48 over ±6 µm.
const PROFILE_BINS: usize = 48;
const PROFILE_HALF_SPAN: f64 = 6e-6;

#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub transition_frequency_hz: f64,
    pub cavity_frequency_hz: f64,
    pub field_per_photon_v_per_m: f64,
    pub eta0_hz: f64,
    pub gamma_hz: f64,
    pub pump_intensity_w_cm2: f64,
    pub drive_intensity_w_cm2: f64,
    pub peak_pump_hz: f64,
    pub drive_tilt_pi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub drive_tilt_pi: f64,
    pub n_atoms: usize,
    /// β as [re, im] in s.
    pub beta: [f64; 2],
    pub xi: f64,
    pub layer_width_um: f64,
    pub final_ground_population: f64,
    pub peak_excited_population: f64,
    pub bookkeeping_error: f64,
    pub accepted_steps: usize,
    pub theta_x0_pi: f64,
    pub theta_y0_pi: f64,
    pub width_x_pi: f64,
    pub width_y_pi: f64,
    pub fit_residual: f64,
    pub fit_residual_x: f64,
    pub fit_residual_y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_delta_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_delta_omega_absolute: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_rank: Option<usize>,
    pub p_total_emitted: f64,
    /// Relative L2 of the x profile against the Lorentzian-weighted model.
    pub profile_l2: f64,
    /// Relative L2 of |a_k(t)|², numerical against factorized.
    pub photon_curve_l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_delta_omega_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_delta_omega_std: Option<f64>,
    pub theta_x0_pi_mean: f64,
    pub theta_x0_pi_std: f64,
    pub width_x_pi_mean: f64,
    pub width_y_pi_mean: f64,
    pub xi_mean: f64,
    pub profile_l2_mean: f64,
}

impl Aggregate {
    pub fn of(runs: &[SeedRun]) -> Self {
        let col = |f: fn(&SeedRun) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let p: Option<Vec<f64>> = runs.iter().map(|r| r.p_delta_omega).collect();
        let p = p.map(|v| mean_std(&v));
        let (tx, txs) = col(|r| r.theta_x0_pi);
        Aggregate {
            runs: runs.len(),
            p_delta_omega_mean: p.map(|p| p.0),
            p_delta_omega_std: p.map(|p| p.1),
            theta_x0_pi_mean: tx,
            theta_x0_pi_std: txs,
            width_x_pi_mean: col(|r| r.width_x_pi).0,
            width_y_pi_mean: col(|r| r.width_y_pi).0,
            xi_mean: col(|r| r.xi).0,
            profile_l2_mean: col(|r| r.profile_l2).0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltPoint {
    pub drive_tilt_pi: f64,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapingRun {
    pub seed: u64,
    pub envelope: String,
    pub fill: f64,
    pub beta: [f64; 2],
    pub receiver_beta: [f64; 2],
    /// envelope(pump) against the target, from the ε = Ω_p e^{−β∫|Ω_p|²} map.
    pub round_trip_l2: f64,
    /// |ε| from the integrated reduced model against |target|.
    pub dynamic_envelope_l2: f64,
    pub residual_chirp_rad: f64,
    pub peak_emission_pump_hz: f64,
    pub peak_absorption_pump_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRun {
    pub seed: u64,
    pub n_atoms: usize,
    pub delta_intermediate_hz: f64,
    pub deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub parameter: SweepParameter,
    pub value: f64,
    pub aggregate: Aggregate,
    pub runs: Vec<SeedRun>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub experiment: Experiment,
    pub preset: String,
    pub seeds: Vec<u64>,
    pub derived: Derived,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Aggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<SeedRun>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tilt_scan: Vec<TiltPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub shaping: Vec<ShapingRun>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub oracle: Vec<OracleRun>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub summary_path: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub n_atoms: usize,
    pub derived: Derived,
    pub warnings: Vec<Warning>,
}

pub fn derived_scalars(params: &PhysicalParams, pulse: &PulseSpec) -> Result<Derived> {
    let peak = pulse.peak_amplitude();
    Ok(Derived {
        transition_frequency_hz: to_hz(params.transition_frequency_si()?),
        cavity_frequency_hz: to_hz(params.omega_c),
        field_per_photon_v_per_m: params.field_per_photon(),
        eta0_hz: to_hz(params.eta_at(0.0)),
        gamma_hz: to_hz(params.gamma()),
        pump_intensity_w_cm2: intensity_for_rabi(peak, params.dipole_gi)?,
        drive_intensity_w_cm2: intensity_for_rabi(params.omega_d, params.dipole_se)?,
        peak_pump_hz: to_hz(peak),
        drive_tilt_pi: params.drive_tilt() / PI,
    })
}

/// Parses the scenario and evaluates the physics guards on the first seed's
/// cloud without running any dynamics.
pub fn validate_config(path: &Path, overrides: &Overrides) -> Result<ValidationReport> {
    let sc = load_scenario(path, overrides)?;
    let cloud = sample_cloud(&CloudGeometry { seed: sc.seeds[0], ..sc.geometry }, &sc.params)?;
    Ok(ValidationReport {
        experiment: sc.experiment,
        seeds: sc.seeds.clone(),
        n_atoms: sc.geometry.n_atoms,
        derived: derived_scalars(&sc.params, &sc.pulse)?,
        warnings: sc.params.guard_warnings(sc.pulse.peak_amplitude(), cloud.max_eta()),
    })
}

/// Loads, runs and writes `summary.json` into the output directory.
pub fn run_scenario(path: &Path, overrides: &Overrides) -> Result<RunReport> {
    let sc = load_scenario(path, overrides)?;
    run(&sc)
}

pub fn run(sc: &Scenario) -> Result<RunReport> {
    fs::create_dir_all(&sc.output_dir)?;
    let mut summary = Summary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: sc.config_hash.clone(),
        experiment: sc.experiment,
        preset: "paper".into(),
        seeds: sc.seeds.clone(),
        derived: derived_scalars(&sc.params, &sc.pulse)?,
        aggregate: None,
        runs: Vec::new(),
        tilt_scan: Vec::new(),
        shaping: Vec::new(),
        oracle: Vec::new(),
        sweep: Vec::new(),
        warnings: Vec::new(),
    };
    let mut warnings = Vec::new();
    match sc.experiment {
        Experiment::Reference | Experiment::AngularMap => {
            let with_density = sc.experiment == Experiment::Reference;
            let tilt = [sc.params.drive_tilt()];
            let out = per_seed(sc, |seed| {
                seed_pipeline(sc, &sc.params, &sc.pulse, &sc.geometry, seed, &seed_dir(&sc.output_dir, seed), with_density, &tilt)
            })?;
            for (runs, w) in out {
                summary.runs.extend(runs);
                warnings.extend(w);
            }
            summary.aggregate = Some(Aggregate::of(&summary.runs));
        }
        Experiment::TiltScan => {
            let out = per_seed(sc, |seed| {
                seed_pipeline(sc, &sc.params, &sc.pulse, &sc.geometry, seed, &seed_dir(&sc.output_dir, seed), true, &sc.tilt_angles)
            })?;
            for (runs, w) in out {
                summary.runs.extend(runs);
                warnings.extend(w);
            }
            for (i, &a) in sc.tilt_angles.iter().enumerate() {
                let runs: Vec<SeedRun> = summary.runs.iter().skip(i).step_by(sc.tilt_angles.len()).cloned().collect();
                summary.tilt_scan.push(TiltPoint { drive_tilt_pi: a / PI, aggregate: Aggregate::of(&runs) });
            }
        }
        Experiment::Shaping => {
            let out = per_seed(sc, |seed| shaping_run(sc, seed))?;
            for (r, w) in out {
                summary.shaping.push(r);
                warnings.extend(w);
            }
        }
        Experiment::Oracle => {
            let out = per_seed(sc, |seed| oracle_run(sc, seed))?;
            summary.oracle = out;
        }
        Experiment::Sweep => {
            let (param, values) = sc.sweep.clone().ok_or_else(|| Error::Config("sweep block missing".into()))?;
            for (k, &v) in values.iter().enumerate() {
                let (params, pulse, geometry) = apply_sweep(sc, param, v)?;
                let dir = sc.output_dir.join(format!("sweep_{k:03}"));
                let tilt = [params.drive_tilt()];
                let out = per_seed(sc, |seed| {
                    seed_pipeline(sc, &params, &pulse, &geometry, seed, &seed_dir(&dir, seed), true, &tilt)
                })?;
                let mut runs = Vec::new();
                for (r, w) in out {
                    runs.extend(r);
                    warnings.extend(w);
                }
                summary.sweep.push(SweepPoint { parameter: param, value: v, aggregate: Aggregate::of(&runs), runs });
            }
        }
    }
    for w in warnings {
        if !summary.warnings.contains(&w) {
            summary.warnings.push(w);
        }
    }
    let summary_path = sc.output_dir.join("summary.json");
    let mut f = BufWriter::new(File::create(&summary_path)?);
    serde_json::to_writer_pretty(&mut f, &summary).map_err(|e| Error::Io(e.into()))?;
    writeln!(f)?;
    f.flush()?;
    Ok(RunReport { summary, summary_path })
}

fn seed_dir(base: &Path, seed: u64) -> PathBuf {
    base.join(format!("seed_{seed}"))
}

/// Seeds in groups of `jobs`; results keep the seed order.
fn per_seed<T: Send>(sc: &Scenario, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(sc.seeds.len());
    for group in sc.seeds.chunks(sc.jobs) {
        let r: Vec<Result<T>> = if group.len() == 1 { vec![f(group[0])] } else { group.par_iter().map(|&s| f(s)).collect() };
        for r in r {
            out.push(r?);
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Evolution, angular map, fit and phase-matched fraction for one seed at
/// each drive tilt. The dynamics do not depend on the drive direction, so
/// one trajectory and one density operator serve every tilt.
#[allow(clippy::too_many_arguments)]
fn seed_pipeline(
    sc: &Scenario,
    params: &PhysicalParams,
    pulse: &PulseSpec,
    geometry: &CloudGeometry,
    seed: u64,
    dir: &Path,
    with_density: bool,
    tilts: &[f64],
) -> Result<(Vec<SeedRun>, Vec<Warning>)> {
    fs::create_dir_all(dir)?;
    let cloud = sample_cloud(&CloudGeometry { seed, ..*geometry }, params)?;
    let grid = output_grid(pulse, sc.time_points);
    let opts = EvolveOptions { tolerances: sc.tolerances, store_spin: false, ..Default::default() };
    let traj = evolve_reduced(&cloud, pulse, params, &grid, &opts)?;
    traj.write_text(create(&dir.join("trajectory.txt"))?)?;
    let mut warnings = params.guard_warnings(pulse.peak_amplitude(), cloud.max_eta());

    let gamma = params.gamma();
    let beta = beta_coefficient(&cloud, params)?;
    let spatial = spatial_emission(&traj, params.gamma_e);
    let edges = uniform_grid(-PROFILE_HALF_SPAN, PROFILE_HALF_SPAN, PROFILE_BINS + 1);
    let hist = profile_histogram(&cloud, &spatial, 0, &edges);
    let model = lorentzian_profile_model(&cloud, gamma, &edges);
    let profile_l2 = normalized_l2(&hist, &model);
    {
        let mut w = create(&dir.join("profile_x.txt"))?;
        writeln!(w, "# columns: x_um p_simulated p_model (model scaled to the simulated total)")?;
        let scale = hist.iter().sum::<f64>() / model.iter().sum::<f64>();
        for k in 0..PROFILE_BINS {
            writeln!(w, "{:.6e} {:.12e} {:.12e}", to_um(0.5 * (edges[k] + edges[k + 1])), hist[k], model[k] * scale)?;
        }
        w.flush()?;
    }

    let op = with_density.then(|| DensityOperator::build(&traj, params.gamma_e, &DensityOptions::default()));
    let integrals = time_integrals(&traj, 0.0);
    let temporal = temporal_mode(0.0, pulse, beta, &grid);
    let xi = participation_fraction(&cloud, gamma);
    let layer = emission_layer_width(&cloud, gamma);
    let total = op.as_ref().map(|o| o.total_emitted).unwrap_or_else(|| spatial.iter().sum());
    let pe_peak = traj.excited_population.iter().cloned().fold(0.0, f64::max);

    let mut runs = Vec::with_capacity(tilts.len());
    for (i, &tilt) in tilts.iter().enumerate() {
        let p = params.with_drive_tilt(tilt);
        let suffix = if tilts.len() > 1 { format!("_tilt{i}") } else { String::new() };
        let map = angular_map_from_integrals(&integrals, &cloud, &p, &sc.angular);
        map.write_text(create(&dir.join(format!("angular_map{suffix}.txt")))?)?;
        let fit = gaussian_fit(&map, &FitOptions::default())?;
        warnings.extend(grid_warnings(&sc.angular, &fit));
        let pm = match &op {
            Some(op) => Some(phase_matched_probability(op, &cloud, &p, &sc.angular, Some(&fit), 4.0)?),
            None => None,
        };

        let k_hat = direction(fit.theta_x0, fit.theta_y0);
        let numeric: Vec<f64> = photon_amplitude_series(&traj, &cloud, &p, k_hat, 0.0).iter().map(|a| a.norm_sqr()).collect();
        let analytic: Vec<f64> = factorized_amplitude(gamma, p.omega_d, &temporal, spatial_mode(k_hat, &cloud, &p)?)
            .iter()
            .map(|a| a.norm_sqr())
            .collect();
        {
            let mut w = create(&dir.join(format!("timeseries{suffix}.txt")))?;
            writeln!(w, "# k along theta_x = {:.6e} pi, theta_y = {:.6e} pi", fit.theta_x0 / PI, fit.theta_y0 / PI)?;
            writeln!(w, "# columns: t_s abs2_b0 p_e abs2_ak_numerical abs2_ak_factorized")?;
            for t in 0..grid.len() {
                writeln!(
                    w,
                    "{:.12e} {:.12e} {:.12e} {:.12e} {:.12e}",
                    grid[t],
                    traj.b0[t].norm_sqr(),
                    traj.excited_population[t],
                    numeric[t],
                    analytic[t]
                )?;
            }
            w.flush()?;
        }

        runs.push(SeedRun {
            seed,
            drive_tilt_pi: tilt / PI,
            n_atoms: cloud.len(),
            beta: [beta.re, beta.im],
            xi,
            layer_width_um: to_um(layer),
            final_ground_population: traj.b0.last().map(|b| b.norm_sqr()).unwrap_or(1.0),
            peak_excited_population: pe_peak,
            bookkeeping_error: traj.bookkeeping_error(),
            accepted_steps: traj.stats.accepted,
            theta_x0_pi: fit.theta_x0 / PI,
            theta_y0_pi: fit.theta_y0 / PI,
            width_x_pi: fit.width_x / PI,
            width_y_pi: fit.width_y / PI,
            fit_residual: fit.residual,
            fit_residual_x: fit.residual_x,
            fit_residual_y: fit.residual_y,
            p_delta_omega: pm.map(|m| m.probability),
            p_delta_omega_absolute: pm.map(|m| m.absolute()),
            density_rank: op.as_ref().map(|o| o.rank),
            p_total_emitted: total,
            profile_l2,
            photon_curve_l2: relative_l2(&numeric, &analytic),
        });
    }
    Ok((runs, warnings))
}

/// Target envelope on a uniform grid spanning the scenario pulse window.
pub fn target_envelope(kind: &EnvelopeKind, t_end: f64, points: usize) -> Result<TargetEnvelope> {
    let times = uniform_grid(0.0, t_end, points);
    match kind {
        EnvelopeKind::Gaussian { width } => TargetEnvelope::gaussian(times, 0.5 * t_end, *width),
        EnvelopeKind::RisingExponential { rate } => {
            TargetEnvelope::rising_exponential(times, *rate, 0.7 * t_end, t_end / 30.0)
        }
        EnvelopeKind::FlatTop { width } => TargetEnvelope::flat_top(times, 0.5 * t_end, *width, width / 8.0),
        EnvelopeKind::File(path) => {
            let r = std::io::BufReader::new(File::open(path)?);
            TargetEnvelope::read_text(r, &path.display().to_string())
        }
    }
}

fn envelope_name(kind: &EnvelopeKind) -> String {
    match kind {
        EnvelopeKind::Gaussian { .. } => "gaussian".into(),
        EnvelopeKind::RisingExponential { .. } => "rising_exponential".into(),
        EnvelopeKind::FlatTop { .. } => "flat_top".into(),
        EnvelopeKind::File(p) => p.display().to_string(),
    }
}

fn shaping_run(sc: &Scenario, seed: u64) -> Result<(ShapingRun, Vec<Warning>)> {
    let dir = seed_dir(&sc.output_dir, seed);
    fs::create_dir_all(&dir)?;
    let cloud = sample_cloud(&CloudGeometry { seed, ..sc.geometry }, &sc.params)?;
    let beta = beta_coefficient(&cloud, &sc.params)?;
    let receiver = sc.receiver_beta.unwrap_or(beta);
    let target = target_envelope(&sc.envelope, sc.pulse.t_end, sc.time_points)?.normalized_to(sc.fill / (2.0 * beta.re))?;
    let emit = pump_for_emission(&target, beta, sc.margin)?;
    let absorb = pump_for_absorption(&target, receiver)?;
    target.write_text(create(&dir.join("target.txt"))?)?;
    emit.write_native(&target.times, create(&dir.join("emission_pump.txt"))?)?;
    absorb.write_native(&target.times, create(&dir.join("absorption_pump.txt"))?)?;
    let round = round_trip_envelope(&emit, beta, &target.times);

    let warnings = sc.params.guard_warnings(emit.peak_amplitude(), cloud.max_eta());
    let opts = EvolveOptions { tolerances: sc.tolerances, store_spin: false, ..Default::default() };
    let traj = evolve_reduced(&cloud, &emit, &sc.params, &target.times, &opts)?;
    let produced: Vec<f64> = target.times.iter().zip(&traj.b0).map(|(&t, b)| (emit.value(t) * b).norm()).collect();
    let wanted: Vec<f64> = target.values.iter().map(|v| v.norm()).collect();
    {
        let mut w = create(&dir.join("envelope.txt"))?;
        writeln!(w, "# columns: t_s abs_target abs_round_trip abs_integrated")?;
        for i in 0..target.times.len() {
            writeln!(w, "{:.12e} {:.12e} {:.12e} {:.12e}", target.times[i], wanted[i], round[i].norm(), produced[i])?;
        }
        w.flush()?;
    }
    let peak = |p: &PulseSpec| to_hz(p.peak_amplitude());
    Ok((
        ShapingRun {
            seed,
            envelope: envelope_name(&sc.envelope),
            fill: sc.fill,
            beta: [beta.re, beta.im],
            receiver_beta: [receiver.re, receiver.im],
            round_trip_l2: complex_l2(&round, &target.values),
            dynamic_envelope_l2: relative_l2(&produced, &wanted),
            residual_chirp_rad: residual_chirp(&target, beta),
            peak_emission_pump_hz: peak(&emit),
            peak_absorption_pump_hz: peak(&absorb),
        },
        warnings,
    ))
}

fn oracle_run(sc: &Scenario, seed: u64) -> Result<OracleRun> {
    let geometry = CloudGeometry { n_atoms: sc.oracle_atoms, seed, ..sc.geometry };
    let cloud = sample_cloud(&geometry, &sc.params)?;
    let mut params = sc.params.clone();
    params.delta_intermediate = oracle_detuning(&cloud, &sc.pulse, sc.oracle_ratio);
    let grid = output_grid(&sc.pulse, sc.time_points);
    let opts = EvolveOptions { tolerances: sc.tolerances, store_spin: false, ..Default::default() };
    let reduced = evolve_reduced(&cloud, &sc.pulse, &params, &grid, &opts)?;
    let full = evolve_full(&cloud, &sc.pulse, &params, &grid, &opts)?;
    let dir = seed_dir(&sc.output_dir, seed);
    fs::create_dir_all(&dir)?;
    reduced.write_text(create(&dir.join("oracle_reduced.txt"))?)?;
    full.write_text(create(&dir.join("oracle_full.txt"))?)?;
    let deviation = amplitude_deviation(&full, &reduced)?;
    Ok(OracleRun {
        seed,
        n_atoms: cloud.len(),
        delta_intermediate_hz: to_hz(params.delta_intermediate),
        deviation,
        threshold: sc.oracle_threshold,
        pass: deviation < sc.oracle_threshold,
    })
}

fn apply_sweep(sc: &Scenario, param: SweepParameter, v: f64) -> Result<(PhysicalParams, PulseSpec, CloudGeometry)> {
    let mut params = sc.params.clone();
    let mut pulse = sc.pulse.clone();
    let mut geometry = sc.geometry;
    match param {
        SweepParameter::DriveTiltPi => params = params.with_drive_tilt(v * PI),
        SweepParameter::DeltaIntermediateHz => params.delta_intermediate = crate::units::hz(v),
        SweepParameter::StarkGradientHzPerUm => params.stark_gradient = crate::units::hz(v) / 1e-6,
        SweepParameter::OmegaDHz => params.omega_d = crate::units::hz(v),
        SweepParameter::NAtoms => {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::Config(format!("n_atoms sweep value {v} is not a positive integer")));
            }
            geometry.n_atoms = v as usize;
        }
        SweepParameter::Omega0Hz => match &mut pulse.shape {
            PulseShape::Erf { omega0, .. } => *omega0 = crate::units::hz(v),
            PulseShape::Tabulated { values, .. } => {
                let peak = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
                if peak == 0.0 {
                    return Err(Error::Config("cannot rescale an all-zero tabulated pulse".into()));
                }
                let s = crate::units::hz(v) / peak;
                values.iter_mut().for_each(|z| *z *= C64::new(s, 0.0));
            }
        },
    }
    params.validate().map_err(|e| Error::Config(format!("sweep value {v}: {e}")))?;
    Ok((params, pulse, geometry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("scenario.toml");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn default_validation_is_clean() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "");
        let r = validate_config(&p, &Overrides::default()).unwrap();
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        assert!((r.derived.eta0_hz - 190e3).abs() < 5e3);
    }

    #[test]
    fn small_detuning_warns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(dir.path(), "[physics]\ndelta_intermediate_hz = 200e3\n");
        let r = validate_config(&p, &Overrides::default()).unwrap();
        assert!(r.warnings.iter().any(|w| matches!(w, Warning::Adiabaticity { .. })));
    }

    #[test]
    fn oracle_experiment_passes() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_config(
            dir.path(),
            "experiment = \"oracle\"\nseeds = [3]\n[grid]\ntime_points = 128\n[oracle]\nn_atoms = 3\n",
        );
        let r = run_scenario(&p, &Overrides::default()).unwrap();
        assert_eq!(r.summary.oracle.len(), 1);
        assert!(r.summary.oracle[0].pass, "{:?}", r.summary.oracle[0]);
        assert!(r.summary_path.exists());
    }

    #[test]
    fn small_reference_run_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let text = "seeds = [7]\n[cloud]\nn_atoms = 300\n[grid]\ntime_points = 256\nnx = 41\nny = 31\n";
        let p = write_config(dir.path(), text);
        let a = run_scenario(&p, &Overrides { output_dir: Some(dir.path().join("a")), ..Default::default() }).unwrap();
        let b = run_scenario(&p, &Overrides { output_dir: Some(dir.path().join("b")), ..Default::default() }).unwrap();
        let ja = fs::read(&a.summary_path).unwrap();
        let jb = fs::read(&b.summary_path).unwrap();
        assert_eq!(ja, jb);
        let s = &a.summary;
        assert!(s.aggregate.as_ref().unwrap().p_delta_omega_mean.is_some());
        for f in ["trajectory.txt", "angular_map.txt", "timeseries.txt", "profile_x.txt"] {
            assert!(dir.path().join("a/seed_7").join(f).exists(), "{f}");
        }
    }

    #[test]
    fn shaping_experiment_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let text = "experiment = \"shaping\"\nseeds = [1]\n[cloud]\nn_atoms = 400\n[grid]\ntime_points = 512\n";
        let p = write_config(dir.path(), text);
        let r = run_scenario(&p, &Overrides::default()).unwrap();
        let s = &r.summary.shaping[0];
        assert!(s.round_trip_l2 < 1e-4, "{s:?}");
        assert!(s.peak_emission_pump_hz > 0.0 && s.peak_absorption_pump_hz > 0.0);
    }
}
