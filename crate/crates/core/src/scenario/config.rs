//! Declarative scenario files (TOML). Frequencies are ordinary frequencies in
//! Hz, lengths in µm, times in µs and angles in units of π rad; everything is
//! converted to SI angular units here and nowhere else.

use crate::dynamics::{PulseSpec, Tolerances, DEFAULT_OUTPUT_POINTS};
use crate::emission::AngularGrid;
use crate::ensemble::CloudGeometry;
use crate::error::{Error, Result};
use crate::physics::{full_wave_cavity_frequency, PhysicalParams};
use crate::units::{hz, to_hz, um, us};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Reference,
    AngularMap,
    TiltScan,
    Shaping,
    Oracle,
    Sweep,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub experiment: Option<Experiment>,
    pub preset: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<String>,
    /// Seeds processed concurrently.
    pub jobs: Option<usize>,
    #[serde(default)]
    pub physics: PhysicsBlock,
    #[serde(default)]
    pub cloud: CloudBlock,
    #[serde(default)]
    pub pulse: PulseBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub integrator: IntegratorBlock,
    #[serde(default)]
    pub tilt_scan: TiltScanBlock,
    #[serde(default)]
    pub shaping: ShapingBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub rydberg_constant_hz: Option<f64>,
    pub quantum_defect_s: Option<f64>,
    pub quantum_defect_p: Option<f64>,
    pub n_i: Option<u32>,
    pub n_s: Option<u32>,
    pub dipole_si: Option<f64>,
    pub dipole_gi: Option<f64>,
    pub dipole_se: Option<f64>,
    pub cavity_length_um: Option<f64>,
    pub electrode_gap_um: Option<f64>,
    pub rel_permittivity: Option<f64>,
    pub surface_position_um: Option<f64>,
    pub cavity_frequency_hz: Option<f64>,
    pub emission_wavelength_um: Option<f64>,
    pub gamma_e_hz: Option<f64>,
    pub gamma_s_hz: Option<f64>,
    pub gamma_i_hz: Option<f64>,
    pub delta_intermediate_hz: Option<f64>,
    pub delta_e_hz: Option<f64>,
    pub stark_gradient_hz_per_um: Option<f64>,
    pub omega_d_hz: Option<f64>,
    pub pump_wavelength_um: Option<f64>,
    pub drive_wavelength_um: Option<f64>,
    pub drive_tilt_pi: Option<f64>,
    pub adiabatic_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CloudBlock {
    pub sigma_um: Option<[f64; 3]>,
    pub n_atoms: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    /// "erf" (default) or "file".
    pub kind: Option<String>,
    pub omega0_hz: Option<f64>,
    pub t_end_us: Option<f64>,
    pub t0_us: Option<f64>,
    pub sigma_t_us: Option<f64>,
    /// Tabulated pulse, columns t_s re_rad_s [im_rad_s].
    pub file: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub time_points: Option<usize>,
    pub theta_x_pi: Option<[f64; 2]>,
    pub theta_y_pi: Option<[f64; 2]>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorBlock {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TiltScanBlock {
    pub angles_pi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingBlock {
    /// "gaussian", "rising_exponential", "flat_top" or "file".
    pub envelope: Option<String>,
    pub file: Option<String>,
    /// 2 Re β ∫|ε|² of the target.
    pub fill: Option<f64>,
    pub width_us: Option<f64>,
    pub rate_per_us: Option<f64>,
    pub margin: Option<f64>,
    /// β of the receiving node as [re, im] in s; defaults to the sending node's.
    pub receiver_beta: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub n_atoms: Option<usize>,
    /// Δ as a multiple of the largest of Ω_0, η_j and |δ_s^(j)|.
    pub delta_ratio: Option<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// One of the [`SweepParameter`] names.
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    DriveTiltPi,
    Omega0Hz,
    DeltaIntermediateHz,
    StarkGradientHzPerUm,
    OmegaDHz,
    NAtoms,
}

impl SweepParameter {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "drive_tilt_pi" => SweepParameter::DriveTiltPi,
            "omega0_hz" => SweepParameter::Omega0Hz,
            "delta_intermediate_hz" => SweepParameter::DeltaIntermediateHz,
            "stark_gradient_hz_per_um" => SweepParameter::StarkGradientHzPerUm,
            "omega_d_hz" => SweepParameter::OmegaDHz,
            "n_atoms" => SweepParameter::NAtoms,
            other => return Err(Error::Config(format!("unknown sweep parameter '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeKind {
    Gaussian { width: f64 },
    RisingExponential { rate: f64 },
    FlatTop { width: f64 },
    File(PathBuf),
}

/// A fully resolved scenario in SI units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub experiment: Experiment,
    pub params: PhysicalParams,
    pub geometry: CloudGeometry,
    pub pulse: PulseSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub time_points: usize,
    pub angular: AngularGrid,
    pub tolerances: Tolerances,
    pub tilt_angles: Vec<f64>,
    pub envelope: EnvelopeKind,
    pub fill: f64,
    pub margin: f64,
    pub receiver_beta: Option<num_complex::Complex64>,
    pub oracle_atoms: usize,
    pub oracle_ratio: f64,
    pub oracle_threshold: f64,
    pub sweep: Option<(SweepParameter, Vec<f64>)>,
    /// SHA-256 of the scenario text.
    pub config_hash: String,
}

/// Overrides given on the command line; they win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub preset: Option<String>,
    pub time_points: Option<usize>,
    pub angular_points: Option<(usize, usize)>,
}

pub fn parse_scenario_text(text: &str, source: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| Error::Parse { path: source.into(), message: e.to_string() })
}

pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })?;
    let file = parse_scenario_text(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(&file, &text, base, overrides)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

/// Applies the physics block on top of the reference parameters.
pub fn resolve_physics(b: &PhysicsBlock) -> Result<PhysicalParams> {
    let mut p = PhysicalParams::paper();
    let set = |slot: &mut f64, v: Option<f64>, f: fn(f64) -> f64| {
        if let Some(v) = v {
            *slot = f(v);
        }
    };
    let id = |v: f64| v;
    set(&mut p.rydberg_constant, b.rydberg_constant_hz, hz);
    set(&mut p.quantum_defect_s, b.quantum_defect_s, id);
    set(&mut p.quantum_defect_p, b.quantum_defect_p, id);
    if let Some(n) = b.n_i {
        p.n_i = n;
    }
    if let Some(n) = b.n_s {
        p.n_s = n;
    }
    set(&mut p.dipole_si, b.dipole_si, id);
    set(&mut p.dipole_gi, b.dipole_gi, id);
    set(&mut p.dipole_se, b.dipole_se, id);
    set(&mut p.cavity_length, b.cavity_length_um, um);
    set(&mut p.electrode_gap, b.electrode_gap_um, um);
    set(&mut p.rel_permittivity, b.rel_permittivity, id);
    set(&mut p.surface_position, b.surface_position_um, um);
    p.omega_c = match b.cavity_frequency_hz {
        Some(f) => hz(f),
        None => full_wave_cavity_frequency(p.cavity_length, p.rel_permittivity),
    };
    if let Some(l) = b.emission_wavelength_um {
        p.omega_eg = 2.0 * PI * crate::units::SPEED_OF_LIGHT / um(positive("emission_wavelength_um", l)?);
    }
    set(&mut p.gamma_e, b.gamma_e_hz, hz);
    set(&mut p.gamma_s, b.gamma_s_hz, hz);
    set(&mut p.gamma_i, b.gamma_i_hz, hz);
    set(&mut p.delta_intermediate, b.delta_intermediate_hz, hz);
    set(&mut p.delta_e, b.delta_e_hz, hz);
    if let Some(a) = b.stark_gradient_hz_per_um {
        p.stark_gradient = hz(a) / 1e-6;
    }
    set(&mut p.omega_d, b.omega_d_hz, hz);
    set(&mut p.adiabatic_ratio, b.adiabatic_ratio, id);
    let pump = match b.pump_wavelength_um {
        Some(l) => um(positive("pump_wavelength_um", l)?),
        None => 297e-9,
    };
    let drive = match b.drive_wavelength_um {
        Some(l) => Some(um(positive("drive_wavelength_um", l)?)),
        None => None,
    };
    p.set_beams(pump, b.drive_tilt_pi.unwrap_or(0.0) * PI, drive);
    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

pub fn resolve_pulse(b: &PulseBlock, base: &Path) -> Result<PulseSpec> {
    match b.kind.as_deref().unwrap_or("erf") {
        "erf" => {
            let t_end = match b.t_end_us {
                Some(t) => us(positive("pulse.t_end_us", t)?),
                None => 10e-6,
            };
            let omega0 = hz(b.omega0_hz.unwrap_or(200e3));
            let t0 = b.t0_us.map(us).unwrap_or(t_end / 3.0);
            let sigma = match b.sigma_t_us {
                Some(s) => us(positive("pulse.sigma_t_us", s)?),
                None => t_end / 8.0,
            };
            PulseSpec::erf(omega0, t0, sigma, t_end).map_err(|e| Error::Config(e.to_string()))
        }
        "file" => {
            let f = b.file.as_ref().ok_or_else(|| Error::Config("pulse.kind = \"file\" needs pulse.file".into()))?;
            let path = base.join(f);
            let r = std::io::BufReader::new(std::fs::File::open(&path)?);
            PulseSpec::read_text(r, &path.display().to_string())
        }
        other => Err(Error::Config(format!("unknown pulse.kind '{other}' (expected erf or file)"))),
    }
}

pub fn resolve(file: &ScenarioFile, text: &str, base: &Path, o: &Overrides) -> Result<Scenario> {
    use sha2::{Digest, Sha256};
    let preset = o.preset.clone().or_else(|| file.preset.clone()).unwrap_or_else(|| "paper".into());
    if preset != "paper" {
        return Err(Error::Config(format!("unknown preset '{preset}' (available: paper)")));
    }
    let params = resolve_physics(&file.physics)?;
    let sigma = file.cloud.sigma_um.unwrap_or([4.0, 4.0, 24.0]).map(um);
    let geometry = CloudGeometry { sigma, n_atoms: file.cloud.n_atoms.unwrap_or(15_000), seed: 0 };
    geometry.validate().map_err(|e| Error::Config(e.to_string()))?;
    let pulse = resolve_pulse(&file.pulse, base)?;
    let seeds = o.seeds.clone().or_else(|| file.seeds.clone()).unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    if seeds.is_empty() {
        return Err(Error::Config("seeds must not be empty".into()));
    }
    let output_dir = o.output_dir.clone().unwrap_or_else(|| base.join(file.output_dir.as_deref().unwrap_or("rydconv-out")));
    let g = &file.grid;
    let time_points = o.time_points.or(g.time_points).unwrap_or(DEFAULT_OUTPUT_POINTS);
    if time_points < 16 {
        return Err(Error::Config("grid.time_points must be at least 16".into()));
    }
    let (nx, ny) = o.angular_points.unwrap_or((g.nx.unwrap_or(161), g.ny.unwrap_or(101)));
    let tx = g.theta_x_pi.unwrap_or([-0.07, 0.09]);
    let ty = g.theta_y_pi.unwrap_or([-0.05, 0.05]);
    let angular = AngularGrid::uniform((tx[0] * PI, tx[1] * PI), nx, (ty[0] * PI, ty[1] * PI), ny)
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut tolerances = Tolerances::default();
    if let Some(r) = file.integrator.rtol {
        tolerances.rtol = positive("integrator.rtol", r)?;
    }
    if let Some(a) = file.integrator.atol {
        tolerances.atol = positive("integrator.atol", a)?;
    }
    let s = &file.shaping;
    let envelope = match s.envelope.as_deref().unwrap_or("gaussian") {
        "gaussian" => EnvelopeKind::Gaussian { width: us(positive("shaping.width_us", s.width_us.unwrap_or(1.2))?) },
        "flat_top" => EnvelopeKind::FlatTop { width: us(positive("shaping.width_us", s.width_us.unwrap_or(4.0))?) },
        "rising_exponential" => {
            EnvelopeKind::RisingExponential { rate: positive("shaping.rate_per_us", s.rate_per_us.unwrap_or(1.5))? * 1e6 }
        }
        "file" => EnvelopeKind::File(base.join(
            s.file.as_ref().ok_or_else(|| Error::Config("shaping.envelope = \"file\" needs shaping.file".into()))?,
        )),
        other => return Err(Error::Config(format!("unknown shaping.envelope '{other}'"))),
    };
    let fill = s.fill.unwrap_or(0.9);
    if !(fill > 0.0 && fill < 1.0) {
        return Err(Error::Config(format!("shaping.fill must lie in (0, 1), got {fill}")));
    }
    let sweep = match (&file.sweep.parameter, &file.sweep.values) {
        (Some(p), Some(v)) => Some((SweepParameter::parse(p)?, v.clone())),
        (None, None) => None,
        _ => return Err(Error::Config("sweep needs both parameter and values".into())),
    };
    let experiment = file.experiment.unwrap_or(Experiment::Reference);
    if experiment == Experiment::Sweep && sweep.is_none() {
        return Err(Error::Config("experiment = \"sweep\" needs a [sweep] block".into()));
    }
    let hash = Sha256::digest(text.as_bytes());
    Ok(Scenario {
        experiment,
        params,
        geometry,
        pulse,
        seeds,
        output_dir,
        jobs: file.jobs.unwrap_or(1).max(1),
        time_points,
        angular,
        tolerances,
        tilt_angles: file.tilt_scan.angles_pi.clone().unwrap_or_else(|| vec![0.0, 0.009]).iter().map(|a| a * PI).collect(),
        envelope,
        fill,
        margin: s.margin.unwrap_or(crate::shaping::DEFAULT_MARGIN),
        receiver_beta: s.receiver_beta.map(|[re, im]| num_complex::Complex64::new(re, im)),
        oracle_atoms: file.oracle.n_atoms.unwrap_or(3),
        oracle_ratio: file.oracle.delta_ratio.unwrap_or(20.0),
        oracle_threshold: file.oracle.threshold.unwrap_or(0.05),
        sweep,
        config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

/// Hz value of an angular frequency, for summaries.
pub fn in_hz(omega: f64) -> f64 {
    to_hz(omega)
}
