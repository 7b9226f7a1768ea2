//! Amplitude equations for the single-excitation manifold.

pub mod integrator;
pub mod pulse;
pub mod trajectory;

pub use integrator::{ComplexOde, ErrorNorm, IntegrationStats, Tolerances};
pub use pulse::{pump_envelope, PulseShape, PulseSpec};
pub use trajectory::{EmitterAmplitudes, Trajectory};

use crate::ensemble::AtomCloud;
use crate::error::{domain, Error, Result};
use crate::physics::PhysicalParams;
use crate::quadrature::uniform_grid;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Default number of stored output times.
pub const DEFAULT_OUTPUT_POINTS: usize = 2048;

/// Atoms per parallel work unit. Fixed so the reduction order never depends
/// on the thread count.
const CHUNK: usize = 2048;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub tolerances: Tolerances,
    /// Keep c_j(t). Costs T·N complex values.
    pub store_spin: bool,
    /// Largest ensemble accepted by the full model.
    pub oracle_cap: usize,
    pub initial_b0: C64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { tolerances: Tolerances::default(), store_spin: true, oracle_cap: 64, initial_b0: C64::new(1.0, 0.0) }
    }
}

/// Uniform output grid over the pulse window.
pub fn output_grid(pulse: &PulseSpec, points: usize) -> Vec<f64> {
    uniform_grid(0.0, pulse.t_end, points)
}

fn check_grid(grid: &[f64], pulse: &PulseSpec) -> Result<()> {
    if grid.len() < 2 {
        return Err(domain("output grid needs at least two times"));
    }
    if grid[0] != 0.0 {
        return Err(domain(format!("output grid must start at 0, starts at {}", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("output grid must be strictly increasing"));
    }
    let last = grid[grid.len() - 1];
    if (last - pulse.t_end).abs() > 1e-9 * pulse.t_end.abs().max(f64::MIN_POSITIVE) {
        return Err(domain(format!("output grid ends at {last}, pulse at {}", pulse.t_end)));
    }
    Ok(())
}

/// Reduced model with |i⟩ eliminated. State layout:
/// [b0, c_0..c_N, b_0..b_N, loss_e, loss_s], losses carried in the real part.
struct Reduced<'a> {
    n: usize,
    pulse: &'a PulseSpec,
    /// η_j/Δ·(1 + δ_j/2Δ)
    coupling: Vec<f64>,
    /// δ_j − η_j²/Δ
    detuning: Vec<f64>,
    delta: f64,
    delta_e: f64,
    omega_d: f64,
    half_gs: f64,
    half_ge: f64,
}

impl Reduced<'_> {
    fn emitter_offset(&self) -> usize {
        1 + self.n
    }
}

impl ComplexOde for Reduced<'_> {
    fn dim(&self) -> usize {
        2 * self.n + 3
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        let op = self.pulse.value(t);
        let shift = op.norm_sqr() / self.delta;
        let b0 = y[0];
        let drive = I * self.omega_d;
        let e_rate = C64::new(-self.half_ge, self.delta_e + shift);
        let (c, rest) = y[1..].split_at(n);
        let b = &rest[..n];
        let (dy0, drest) = dy.split_at_mut(1);
        let (dc, drest) = drest.split_at_mut(n);
        let (db, dloss) = drest.split_at_mut(n);
        let source = I * op * b0;

        let partials: Vec<(C64, f64, f64)> = dc
            .par_chunks_mut(CHUNK)
            .zip(db.par_chunks_mut(CHUNK))
            .enumerate()
            .map(|(k, (dc, db))| {
                let lo = k * CHUNK;
                let mut feed = C64::new(0.0, 0.0);
                let mut pe = 0.0;
                let mut ps = 0.0;
                for i in 0..dc.len() {
                    let j = lo + i;
                    let cj = c[j];
                    let bj = b[j];
                    let g = self.coupling[j];
                    let s_rate = C64::new(-self.half_gs, self.detuning[j] + shift);
                    dc[i] = s_rate * cj + source * g + drive * bj;
                    db[i] = e_rate * bj + drive * cj;
                    feed += cj * g;
                    pe += bj.norm_sqr();
                    ps += cj.norm_sqr();
                }
                (feed, pe, ps)
            })
            .collect();
        let (mut feed, mut pe, mut ps) = (C64::new(0.0, 0.0), 0.0, 0.0);
        for (f, e, s) in partials {
            feed += f;
            pe += e;
            ps += s;
        }
        dy0[0] = I * op.conj() * feed;
        dloss[0] = C64::new(2.0 * self.half_ge * pe, 0.0);
        dloss[1] = C64::new(2.0 * self.half_gs * ps, 0.0);
    }
}

/// Integrates the reduced equations for the whole cloud.
pub fn evolve_reduced(
    cloud: &AtomCloud,
    pulse: &PulseSpec,
    params: &PhysicalParams,
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_grid(grid, pulse)?;
    let delta = params.delta_intermediate;
    if delta == 0.0 {
        return Err(domain("intermediate detuning must be non-zero"));
    }
    let n = cloud.len();
    let sys = Reduced {
        n,
        pulse,
        coupling: cloud.eta.iter().zip(&cloud.delta_s).map(|(&e, &d)| e / delta * (1.0 + d / (2.0 * delta))).collect(),
        detuning: cloud.eta.iter().zip(&cloud.delta_s).map(|(&e, &d)| d - e * e / delta).collect(),
        delta,
        delta_e: params.delta_e,
        omega_d: params.omega_d,
        half_gs: 0.5 * params.gamma_s,
        half_ge: 0.5 * params.gamma_e,
    };
    let mut y0 = vec![C64::new(0.0, 0.0); sys.dim()];
    y0[0] = opts.initial_b0;

    let t_len = grid.len();
    let mut rec = Recorder::new(t_len, n, opts.store_spin, false);
    let off = sys.emitter_offset();
    let stats = integrator::integrate(&sys, &y0, grid, &opts.tolerances, |i, _, y| {
        rec.record(i, y[0], &y[1..off], &y[off..off + n], None, [y[off + n].re, y[off + n + 1].re, 0.0]);
    })?;
    Ok(rec.finish(grid, n, stats))
}

/// Four-level model before elimination. State layout:
/// [b0, d_0..d_N, c_0..c_N, b_0..b_N, loss_e, loss_s, loss_i].
struct Full<'a> {
    n: usize,
    pulse: &'a PulseSpec,
    eta: &'a [f64],
    delta_s: &'a [f64],
    delta: f64,
    delta_e: f64,
    omega_d: f64,
    half_gi: f64,
    half_gs: f64,
    half_ge: f64,
}

impl ComplexOde for Full<'_> {
    fn dim(&self) -> usize {
        3 * self.n + 4
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        let op = self.pulse.value(t);
        let b0 = y[0];
        let d = &y[1..1 + n];
        let c = &y[1 + n..1 + 2 * n];
        let b = &y[1 + 2 * n..1 + 3 * n];
        let i_rate = C64::new(-self.half_gi, self.delta);
        let e_rate = C64::new(-self.half_ge, self.delta_e);
        let mut sum_d = C64::new(0.0, 0.0);
        let (mut pe, mut ps, mut pi) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let s_rate = C64::new(-self.half_gs, self.delta_s[j]);
            dy[1 + j] = i_rate * d[j] + I * op * b0 - I * self.eta[j] * c[j];
            dy[1 + n + j] = s_rate * c[j] - I * self.eta[j] * d[j] + I * self.omega_d * b[j];
            dy[1 + 2 * n + j] = e_rate * b[j] + I * self.omega_d * c[j];
            sum_d += d[j];
            pe += b[j].norm_sqr();
            ps += c[j].norm_sqr();
            pi += d[j].norm_sqr();
        }
        dy[0] = I * op.conj() * sum_d;
        dy[1 + 3 * n] = C64::new(2.0 * self.half_ge * pe, 0.0);
        dy[2 + 3 * n] = C64::new(2.0 * self.half_gs * ps, 0.0);
        dy[3 + 3 * n] = C64::new(2.0 * self.half_gi * pi, 0.0);
    }
}

/// Integrates the full four-level amplitudes. Intended as a small-N check on
/// [`evolve_reduced`]; refuses clouds above `opts.oracle_cap`.
pub fn evolve_full(
    cloud: &AtomCloud,
    pulse: &PulseSpec,
    params: &PhysicalParams,
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let n = cloud.len();
    if n > opts.oracle_cap {
        return Err(Error::OracleCap { n_atoms: n, cap: opts.oracle_cap });
    }
    check_grid(grid, pulse)?;
    let sys = Full {
        n,
        pulse,
        eta: &cloud.eta,
        delta_s: &cloud.delta_s,
        delta: params.delta_intermediate,
        delta_e: params.delta_e,
        omega_d: params.omega_d,
        half_gi: 0.5 * params.gamma_i,
        half_gs: 0.5 * params.gamma_s,
        half_ge: 0.5 * params.gamma_e,
    };
    let mut y0 = vec![C64::new(0.0, 0.0); sys.dim()];
    y0[0] = opts.initial_b0;
    let mut rec = Recorder::new(grid.len(), n, true, true);
    let stats = integrator::integrate(&sys, &y0, grid, &opts.tolerances, |i, _, y| {
        let d = &y[1..1 + n];
        let c = &y[1 + n..1 + 2 * n];
        let b = &y[1 + 2 * n..1 + 3 * n];
        let l = &y[1 + 3 * n..];
        rec.record(i, y[0], c, b, Some(d), [l[0].re, l[1].re, l[2].re]);
    })?;
    Ok(rec.finish(grid, n, stats))
}

/// Δ for an oracle comparison: `ratio` times the largest of Ω_p, η_j and
/// |δ_s^(j)|.
pub fn oracle_detuning(cloud: &AtomCloud, pulse: &PulseSpec, ratio: f64) -> f64 {
    let ds = cloud.delta_s.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    ratio * pulse.peak_amplitude().max(cloud.max_eta()).max(ds)
}

/// Largest mismatch of |b0| and |b_j| between a full and a reduced run on the
/// same grid, each relative to the largest reduced magnitude of that amplitude.
pub fn amplitude_deviation(full: &Trajectory, reduced: &Trajectory) -> Result<f64> {
    if full.times != reduced.times || full.n_atoms != reduced.n_atoms {
        return Err(domain("trajectories differ in grid or ensemble size"));
    }
    let rel = |a: &[C64], b: &[C64]| {
        let scale = b.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x.norm() - y.norm()).abs()));
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    };
    Ok(rel(&full.b0, &reduced.b0).max(rel(&full.emitter, &reduced.emitter)))
}

struct Recorder {
    n: usize,
    b0: Vec<C64>,
    spin: Option<Vec<C64>>,
    emitter: Vec<C64>,
    intermediate: Option<Vec<C64>>,
    pe: Vec<f64>,
    ps: Vec<f64>,
    norm: Vec<f64>,
    losses: [Vec<f64>; 3],
}

impl Recorder {
    fn new(t: usize, n: usize, spin: bool, intermediate: bool) -> Self {
        let zero = C64::new(0.0, 0.0);
        Recorder {
            n,
            b0: vec![zero; t],
            spin: spin.then(|| vec![zero; t * n]),
            emitter: vec![zero; t * n],
            intermediate: intermediate.then(|| vec![zero; t * n]),
            pe: vec![0.0; t],
            ps: vec![0.0; t],
            norm: vec![0.0; t],
            losses: [vec![0.0; t], vec![0.0; t], vec![0.0; t]],
        }
    }

    fn record(&mut self, i: usize, b0: C64, c: &[C64], b: &[C64], d: Option<&[C64]>, losses: [f64; 3]) {
        let n = self.n;
        self.b0[i] = b0;
        self.emitter[i * n..(i + 1) * n].copy_from_slice(b);
        if let Some(s) = &mut self.spin {
            s[i * n..(i + 1) * n].copy_from_slice(c);
        }
        let mut pi = 0.0;
        if let (Some(dst), Some(d)) = (&mut self.intermediate, d) {
            dst[i * n..(i + 1) * n].copy_from_slice(d);
            pi = d.iter().map(|z| z.norm_sqr()).sum();
        }
        self.pe[i] = b.iter().map(|z| z.norm_sqr()).sum();
        self.ps[i] = c.iter().map(|z| z.norm_sqr()).sum();
        self.norm[i] = b0.norm_sqr() + self.pe[i] + self.ps[i] + pi;
        for k in 0..3 {
            self.losses[k][i] = losses[k];
        }
    }

    fn finish(self, grid: &[f64], n: usize, stats: IntegrationStats) -> Trajectory {
        let [decayed_e, decayed_s, decayed_i] = self.losses;
        Trajectory {
            times: grid.to_vec(),
            b0: self.b0,
            n_atoms: n,
            spin: self.spin,
            emitter: self.emitter,
            intermediate: self.intermediate,
            excited_population: self.pe,
            spin_population: self.ps,
            norm: self.norm,
            decayed_e,
            decayed_s,
            decayed_i,
            stats,
        }
    }
}
