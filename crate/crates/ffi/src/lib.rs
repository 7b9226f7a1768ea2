//! C ABI over `rydconv`.
//!
//! Objects are opaque handles returned through `out` pointers and released
//! with the matching `rc_*_free`. Every fallible call returns an [`RcStatus`];
//! on failure [`rc_last_error`] gives a message for the calling thread.
//! Units are SI with angular frequencies in rad/s.

use num_complex::Complex64 as C64;
use rydconv::dynamics::{evolve_full, evolve_reduced, output_grid, EvolveOptions, PulseSpec, Trajectory};
use rydconv::emission::{analyze, AngularGrid, EmissionOptions};
use rydconv::ensemble::{sample_cloud, AtomCloud, CloudGeometry};
use rydconv::physics::PhysicalParams;
use rydconv::scenario::{run_scenario, Overrides};
use rydconv::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Domain = 4,
    StepUnderflow = 5,
    OracleCap = 6,
    FitDivergence = 7,
    Unfitted = 8,
    ShapingDenominator = 9,
    EmptyEnvelope = 10,
    Config = 11,
    Parse = 12,
    Io = 13,
    Panic = 14,
}

/// Scalar parameters reachable through [`rc_params_get`] / [`rc_params_set`].
/// The derived entries are read-only.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcParam {
    DeltaIntermediate = 0,
    DeltaE = 1,
    OmegaD = 2,
    GammaE = 3,
    GammaS = 4,
    GammaI = 5,
    StarkGradient = 6,
    SurfacePosition = 7,
    DriveTilt = 8,
    AdiabaticRatio = 9,
    Gamma = 100,
    Eta0 = 101,
    FieldPerPhoton = 102,
    TransitionFrequency = 103,
    CavityFrequency = 104,
}

/// Emission observables on the reference angular grid. Angles in rad.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RcEmissionSummary {
    pub p_delta_omega: f64,
    pub p_delta_omega_absolute: f64,
    pub p_total_emitted: f64,
    pub theta_x0: f64,
    pub theta_y0: f64,
    pub width_x: f64,
    pub width_y: f64,
    pub fit_residual: f64,
    pub density_rank: u64,
}

pub struct RcParams(PhysicalParams);
pub struct RcPulse(PulseSpec);
pub struct RcCloud(AtomCloud);
pub struct RcTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_) => RcStatus::Domain,
            Error::StepUnderflow { .. } => RcStatus::StepUnderflow,
            Error::OracleCap { .. } => RcStatus::OracleCap,
            Error::FitDivergence { .. } => RcStatus::FitDivergence,
            Error::Unfitted => RcStatus::Unfitted,
            Error::ShapingDenominator { .. } => RcStatus::ShapingDenominator,
            Error::EmptyEnvelope => RcStatus::EmptyEnvelope,
            Error::Config(_) => RcStatus::Config,
            Error::Parse { .. } => RcStatus::Parse,
            Error::Io(_) => RcStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: RcStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn call(f: impl FnOnce() -> Result<(), Failure>) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            RcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            RcStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(RcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(RcStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(RcStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(fail(RcStatus::NullPointer, format!("{what} buffer is null")));
    }
    if len < needed {
        return Err(fail(RcStatus::BufferTooSmall, format!("{what} buffer holds {len}, need {needed}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_complex(values: &[C64], re: *mut f64, im: *mut f64, len: usize) -> Result<(), Failure> {
    let r = out_slice(re, len, values.len(), "real part")?;
    let i = out_slice(im, len, values.len(), "imaginary part")?;
    for (k, v) in values.iter().enumerate() {
        r[k] = v.re;
        i[k] = v.im;
    }
    Ok(())
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(RcStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| fail(RcStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `rc_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reference parameter set.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rc_params_reference(out: *mut *mut RcParams) -> RcStatus {
    call(|| put(out, RcParams(PhysicalParams::paper())))
}

/// # Safety
/// `params` must be null or a handle from `rc_params_*`; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn rc_params_clone(params: *const RcParams, out: *mut *mut RcParams) -> RcStatus {
    call(|| {
        let p = get(params, "params")?;
        put(out, RcParams(p.0.clone()))
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_params_free(params: *mut RcParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_params_get(params: *const RcParams, key: RcParam, out: *mut f64) -> RcStatus {
    call(|| {
        let p = &get(params, "params")?.0;
        let out = get_mut(out, "out")?;
        *out = match key {
            RcParam::DeltaIntermediate => p.delta_intermediate,
            RcParam::DeltaE => p.delta_e,
            RcParam::OmegaD => p.omega_d,
            RcParam::GammaE => p.gamma_e,
            RcParam::GammaS => p.gamma_s,
            RcParam::GammaI => p.gamma_i,
            RcParam::StarkGradient => p.stark_gradient,
            RcParam::SurfacePosition => p.surface_position,
            RcParam::DriveTilt => p.drive_tilt(),
            RcParam::AdiabaticRatio => p.adiabatic_ratio,
            RcParam::Gamma => p.gamma(),
            RcParam::Eta0 => p.eta_at(0.0),
            RcParam::FieldPerPhoton => p.field_per_photon(),
            RcParam::TransitionFrequency => p.transition_frequency_si()?,
            RcParam::CavityFrequency => p.omega_c,
        };
        Ok(())
    })
}

/// Sets one parameter. The change is rolled back if the result fails
/// validation.
///
/// # Safety
/// `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_params_set(params: *mut RcParams, key: RcParam, value: f64) -> RcStatus {
    call(|| {
        let p = &mut get_mut(params, "params")?.0;
        let mut next = p.clone();
        match key {
            RcParam::DeltaIntermediate => next.delta_intermediate = value,
            RcParam::DeltaE => next.delta_e = value,
            RcParam::OmegaD => next.omega_d = value,
            RcParam::GammaE => next.gamma_e = value,
            RcParam::GammaS => next.gamma_s = value,
            RcParam::GammaI => next.gamma_i = value,
            RcParam::StarkGradient => next.stark_gradient = value,
            RcParam::SurfacePosition => next.surface_position = value,
            RcParam::DriveTilt => next = next.with_drive_tilt(value),
            RcParam::AdiabaticRatio => next.adiabatic_ratio = value,
            _ => return Err(fail(RcStatus::InvalidArgument, format!("{key:?} is derived and read-only"))),
        }
        next.validate()?;
        *p = next;
        Ok(())
    })
}

/// Reference pump pulse.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_pulse_reference(out: *mut *mut RcPulse) -> RcStatus {
    call(|| put(out, RcPulse(PulseSpec::paper())))
}

/// Ω_0·½[1 + erf((t − t0)/(√2 σ_t))] on [0, t_end].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_pulse_erf(omega0: f64, t0: f64, sigma_t: f64, t_end: f64, out: *mut *mut RcPulse) -> RcStatus {
    call(|| put(out, RcPulse(PulseSpec::erf(omega0, t0, sigma_t, t_end)?)))
}

/// Linearly interpolated pulse from `len` samples.
///
/// # Safety
/// `times`, `re` and `im` must each point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_pulse_tabulated(
    times: *const f64,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut RcPulse,
) -> RcStatus {
    call(|| {
        if times.is_null() || re.is_null() || im.is_null() {
            return Err(fail(RcStatus::NullPointer, "sample array is null"));
        }
        let t = std::slice::from_raw_parts(times, len).to_vec();
        let r = std::slice::from_raw_parts(re, len);
        let i = std::slice::from_raw_parts(im, len);
        let v = r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)).collect();
        put(out, RcPulse(PulseSpec::tabulated(t, v)?))
    })
}

/// # Safety
/// `pulse` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_pulse_value(pulse: *const RcPulse, t: f64, re: *mut f64, im: *mut f64) -> RcStatus {
    call(|| {
        let v = rydconv::dynamics::pump_envelope(t, &get(pulse, "pulse")?.0)?;
        *get_mut(re, "re")? = v.re;
        *get_mut(im, "im")? = v.im;
        Ok(())
    })
}

/// # Safety
/// `pulse` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_pulse_free(pulse: *mut RcPulse) {
    if !pulse.is_null() {
        drop(Box::from_raw(pulse));
    }
}

/// Gaussian cloud with standard deviations `sigma[0..3]` (m).
///
/// # Safety
/// `params` must be a live handle, `sigma` must point to three doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_cloud_sample(
    params: *const RcParams,
    sigma: *const f64,
    n_atoms: usize,
    seed: u64,
    out: *mut *mut RcCloud,
) -> RcStatus {
    call(|| {
        let p = &get(params, "params")?.0;
        if sigma.is_null() {
            return Err(fail(RcStatus::NullPointer, "sigma is null"));
        }
        let s = std::slice::from_raw_parts(sigma, 3);
        let g = CloudGeometry { sigma: [s[0], s[1], s[2]], n_atoms, seed };
        put(out, RcCloud(sample_cloud(&g, p)?))
    })
}

/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_cloud_len(cloud: *const RcCloud) -> usize {
    cloud.as_ref().map(|c| c.0.len()).unwrap_or(0)
}

/// Copies positions as x0 y0 z0 x1 ... (3·N doubles).
///
/// # Safety
/// `cloud` must be a live handle and `xyz` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_cloud_positions(cloud: *const RcCloud, xyz: *mut f64, len: usize) -> RcStatus {
    call(|| {
        let c = &get(cloud, "cloud")?.0;
        let out = out_slice(xyz, len, 3 * c.len(), "position")?;
        for (k, r) in c.positions.iter().enumerate() {
            out[3 * k..3 * k + 3].copy_from_slice(r);
        }
        Ok(())
    })
}

/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_cloud_free(cloud: *mut RcCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// β = Σ_j η_j²/Δ² · 1/(γ − iδ̃_j) as (re, im) in s.
///
/// # Safety
/// Handles must be live; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_beta(params: *const RcParams, cloud: *const RcCloud, re: *mut f64, im: *mut f64) -> RcStatus {
    call(|| {
        let b = rydconv::analytic::beta_coefficient(&get(cloud, "cloud")?.0, &get(params, "params")?.0)?;
        *get_mut(re, "re")? = b.re;
        *get_mut(im, "im")? = b.im;
        Ok(())
    })
}

unsafe fn evolve_with(
    full: bool,
    params: *const RcParams,
    cloud: *const RcCloud,
    pulse: *const RcPulse,
    points: usize,
    out: *mut *mut RcTrajectory,
) -> RcStatus {
    call(|| {
        let p = &get(params, "params")?.0;
        let c = &get(cloud, "cloud")?.0;
        let pulse = &get(pulse, "pulse")?.0;
        if points < 2 {
            return Err(fail(RcStatus::InvalidArgument, "need at least two output points"));
        }
        let grid = output_grid(pulse, points);
        let opts = EvolveOptions { store_spin: false, ..Default::default() };
        let tr = if full { evolve_full(c, pulse, p, &grid, &opts)? } else { evolve_reduced(c, pulse, p, &grid, &opts)? };
        put(out, RcTrajectory(tr))
    })
}

/// Reduced-model evolution on `points` uniform output times.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_evolve(
    params: *const RcParams,
    cloud: *const RcCloud,
    pulse: *const RcPulse,
    points: usize,
    out: *mut *mut RcTrajectory,
) -> RcStatus {
    evolve_with(false, params, cloud, pulse, points, out)
}

/// Full-model evolution including |i⟩; small ensembles only.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_evolve_full(
    params: *const RcParams,
    cloud: *const RcCloud,
    pulse: *const RcPulse,
    points: usize,
    out: *mut *mut RcTrajectory,
) -> RcStatus {
    evolve_with(true, params, cloud, pulse, points, out)
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_len(traj: *const RcTrajectory) -> usize {
    traj.as_ref().map(|t| t.0.len()).unwrap_or(0)
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_n_atoms(traj: *const RcTrajectory) -> usize {
    traj.as_ref().map(|t| t.0.n_atoms).unwrap_or(0)
}

/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_times(traj: *const RcTrajectory, out: *mut f64, len: usize) -> RcStatus {
    call(|| {
        let t = &get(traj, "trajectory")?.0;
        out_slice(out, len, t.len(), "times")?.copy_from_slice(&t.times);
        Ok(())
    })
}

/// Σ_j |b_j|² at every output time.
///
/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_excited(traj: *const RcTrajectory, out: *mut f64, len: usize) -> RcStatus {
    call(|| {
        let t = &get(traj, "trajectory")?.0;
        out_slice(out, len, t.len(), "excited population")?.copy_from_slice(&t.excited_population);
        Ok(())
    })
}

/// State norm |b0|² + Σ|c_j|² + Σ|b_j|²; decayed probability is not included.
///
/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_norm(traj: *const RcTrajectory, out: *mut f64, len: usize) -> RcStatus {
    call(|| {
        let t = &get(traj, "trajectory")?.0;
        out_slice(out, len, t.len(), "norm")?.copy_from_slice(&t.norm);
        Ok(())
    })
}

/// b0(t).
///
/// # Safety
/// `traj` must be a live handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_b0(traj: *const RcTrajectory, re: *mut f64, im: *mut f64, len: usize) -> RcStatus {
    call(|| write_complex(&get(traj, "trajectory")?.0.b0, re, im, len))
}

/// b_j at output index `t_index` for all atoms.
///
/// # Safety
/// `traj` must be a live handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_emitter(
    traj: *const RcTrajectory,
    t_index: usize,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> RcStatus {
    call(|| {
        let t = &get(traj, "trajectory")?.0;
        if t_index >= t.len() {
            return Err(fail(RcStatus::InvalidArgument, format!("time index {t_index} out of range ({})", t.len())));
        }
        write_complex(t.emitter_at(t_index), re, im, len)
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rc_trajectory_free(traj: *mut RcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Angular map, Gaussian fit and phase-matched fraction on the reference
/// angular grid.
///
/// # Safety
/// Handles must be live and belong together; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_emission_summary(
    params: *const RcParams,
    cloud: *const RcCloud,
    traj: *const RcTrajectory,
    out: *mut RcEmissionSummary,
) -> RcStatus {
    call(|| {
        let p = &get(params, "params")?.0;
        let c = &get(cloud, "cloud")?.0;
        let t = &get(traj, "trajectory")?.0;
        let out = get_mut(out, "out")?;
        if t.n_atoms != c.len() {
            return Err(fail(RcStatus::InvalidArgument, "trajectory and cloud differ in size"));
        }
        let r = analyze(t, c, p, &AngularGrid::reference(), &EmissionOptions::default())?;
        *out = RcEmissionSummary {
            p_delta_omega: r.phase_matched.probability,
            p_delta_omega_absolute: r.phase_matched.absolute(),
            p_total_emitted: r.p_total_emitted,
            theta_x0: r.fit.theta_x0,
            theta_y0: r.fit.theta_y0,
            width_x: r.fit.width_x,
            width_y: r.fit.width_y,
            fit_residual: r.fit.residual,
            density_rank: r.density_rank as u64,
        };
        Ok(())
    })
}

/// Runs a scenario file. `output_dir` may be null to use the directory named
/// in the file. `summary_path` (optional) receives the NUL-terminated path of
/// `summary.json`, truncated to `summary_path_len` bytes.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `output_dir` null or one;
/// `summary_path` null or writable for `summary_path_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_run_scenario(
    config_path: *const c_char,
    output_dir: *const c_char,
    summary_path: *mut c_char,
    summary_path_len: usize,
) -> RcStatus {
    call(|| {
        let config = path_arg(config_path, "config_path")?;
        let mut o = Overrides::default();
        if !output_dir.is_null() {
            o.output_dir = Some(path_arg(output_dir, "output_dir")?);
        }
        let report = run_scenario(&config, &o)?;
        if !summary_path.is_null() && summary_path_len > 0 {
            let s = report.summary_path.display().to_string();
            let n = s.len().min(summary_path_len - 1);
            ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), summary_path, n);
            *summary_path.add(n) = 0;
        }
        Ok(())
    })
}
