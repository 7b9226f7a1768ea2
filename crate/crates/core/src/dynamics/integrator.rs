//! Dormand–Prince 5(4) with PI step-size control for complex linear systems.
//!
//! The integrator lands exactly on every requested output time; internal
//! steps are clamped so that no dense-output interpolation is needed.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

/// A first-order system ∂_t y = f(t, y) over complex amplitudes.
pub trait ComplexOde: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorNorm {
    /// Largest scaled component error (strict).
    Max,
    /// Root-mean-square of the scaled component errors.
    Rms,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub norm: ErrorNorm,
    /// Smallest admissible step, relative to the output span.
    pub min_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-8, atol: 1e-12, norm: ErrorNorm::Max, min_step_fraction: 1e-14, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// b − b̂ (fifth minus embedded fourth order)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `sys` from `y0` at `t_out[0]` and calls `observe(i, t_out[i], y)`
/// at every output time, the initial one included.
pub fn integrate<S, F>(sys: &S, y0: &[C64], t_out: &[f64], tol: &Tolerances, mut observe: F) -> Result<IntegrationStats>
where
    S: ComplexOde,
    F: FnMut(usize, f64, &[C64]),
{
    let n = sys.dim();
    assert_eq!(y0.len(), n);
    assert!(!t_out.is_empty());
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    observe(0, t_out[0], &y);
    if t_out.len() == 1 {
        return Ok(stats);
    }
    let span = t_out[t_out.len() - 1] - t_out[0];
    let h_min = tol.min_step_fraction * span.abs();

    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut ytmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    let mut t = t_out[0];
    sys.rhs(t, &y, &mut k1);
    stats.rhs_evaluations += 1;
    let mut h = initial_step(sys, t, &y, &k1, tol, span, &mut ytmp, &mut k2);
    stats.rhs_evaluations += 1;
    let mut err_old = 1e-4f64;

    for (i, &target) in t_out.iter().enumerate().skip(1) {
        while t < target {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            let remaining = target - t;
            let clamped = h >= remaining;
            let step = if clamped { remaining } else { h };
            if step < h_min && !clamped {
                return Err(Error::StepUnderflow { time: t, step });
            }

            combine(&mut ytmp, &y, step, &[(A21, &k1)]);
            sys.rhs(t + C2 * step, &ytmp, &mut k2);
            combine(&mut ytmp, &y, step, &[(A31, &k1), (A32, &k2)]);
            sys.rhs(t + C3 * step, &ytmp, &mut k3);
            combine(&mut ytmp, &y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            sys.rhs(t + C4 * step, &ytmp, &mut k4);
            combine(&mut ytmp, &y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            sys.rhs(t + C5 * step, &ytmp, &mut k5);
            combine(&mut ytmp, &y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            sys.rhs(t + step, &ytmp, &mut k6);
            combine(&mut ynew, &y, step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            sys.rhs(t + step, &ynew, &mut k7);
            stats.rhs_evaluations += 6;

            let err = error_norm(&y, &ynew, step, [&k1, &k3, &k4, &k5, &k6, &k7], tol);
            if err <= 1.0 {
                t = if clamped { target } else { t + step };
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                // PI controller (Hairer, β = 0.04)
                let fac = 0.9 * err.max(1e-10).powf(-0.2 + 0.75 * 0.04) * err_old.powf(0.04);
                let fac = fac.clamp(0.2, 10.0);
                err_old = err.max(1e-4);
                let proposal = step * fac;
                // a clamped step says nothing about the natural step length
                h = if clamped { h.max(proposal) } else { proposal };
            } else {
                stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                h = step * fac;
                if h < h_min {
                    return Err(Error::StepUnderflow { time: t, step: h });
                }
            }
        }
        observe(i, target, &y);
    }
    Ok(stats)
}

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &Vec<C64>)]) {
    match terms {
        [(a1, k1)] => {
            for i in 0..out.len() {
                out[i] = y[i] + k1[i] * (h * a1);
            }
        }
        _ => {
            out.copy_from_slice(y);
            for (a, k) in terms {
                let s = h * a;
                for i in 0..out.len() {
                    out[i] += k[i] * s;
                }
            }
        }
    }
}

fn error_norm(y: &[C64], ynew: &[C64], h: f64, k: [&Vec<C64>; 6], tol: &Tolerances) -> f64 {
    let [k1, k3, k4, k5, k6, k7] = k;
    let mut acc = 0.0f64;
    for i in 0..y.len() {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = tol.atol + tol.rtol * y[i].norm().max(ynew[i].norm());
        let r = e.norm() / sc;
        match tol.norm {
            ErrorNorm::Max => acc = acc.max(r),
            ErrorNorm::Rms => acc += r * r,
        }
    }
    match tol.norm {
        ErrorNorm::Max => acc,
        ErrorNorm::Rms => (acc / y.len() as f64).sqrt(),
    }
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S: ComplexOde>(
    sys: &S,
    t: f64,
    y: &[C64],
    f0: &[C64],
    tol: &Tolerances,
    span: f64,
    ytmp: &mut [C64],
    f1: &mut [C64],
) -> f64 {
    let scale = |i: usize| tol.atol + tol.rtol * y[i].norm();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..y.len()).map(|i| v(i).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let d0 = rms(&|i| y[i].norm() / scale(i));
    let d1 = rms(&|i| f0[i].norm() / scale(i));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    for i in 0..y.len() {
        ytmp[i] = y[i] + f0[i] * h0;
    }
    sys.rhs(t + h0, ytmp, f1);
    let d2 = rms(&|i| (f1[i] - f0[i]).norm() / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6 * span) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotation {
        omega: f64,
        decay: f64,
    }

    impl ComplexOde for Rotation {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = y[0] * C64::new(-self.decay, self.omega);
        }
    }

    #[test]
    fn exponential_solution() {
        let sys = Rotation { omega: 3.0, decay: 0.4 };
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let mut out = Vec::new();
        integrate(&sys, &[C64::new(1.0, 0.0)], &ts, &Tolerances::default(), |_, t, y| out.push((t, y[0]))).unwrap();
        assert_eq!(out.len(), ts.len());
        for (t, y) in out {
            let exact = C64::new(-0.4 * t, 3.0 * t).exp();
            assert!((y - exact).norm() < 1e-7, "t={t}");
        }
    }

    struct Pair;
    impl ComplexOde for Pair {
        fn dim(&self) -> usize {
            2
        }
        // Rabi oscillation i∂t(a, b) = −(b, a)
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            let i = C64::new(0.0, 1.0);
            dy[0] = i * y[1];
            dy[1] = i * y[0];
        }
    }

    #[test]
    fn two_level_rabi() {
        let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let mut last = vec![];
        integrate(&Pair, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &ts, &Tolerances::default(), |_, t, y| {
            assert!((y[0].norm() - t.cos().abs()).abs() < 1e-7);
            last = y.to_vec();
        })
        .unwrap();
        assert!((last[0].norm_sqr() + last[1].norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn underflow_reports_time() {
        struct Blowup;
        impl ComplexOde for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
                dy[0] = y[0] * y[0] * (1.0 / (1.0 - t).max(1e-300));
            }
        }
        let tol = Tolerances { max_steps: 100_000, ..Tolerances::default() };
        let r = integrate(&Blowup, &[C64::new(1.0, 0.0)], &[0.0, 2.0], &tol, |_, _, _| {});
        match r {
            Err(Error::StepUnderflow { time, .. }) => assert!(time > 0.0 && time < 1.0),
            other => panic!("expected underflow, got {other:?}"),
        }
    }
}
