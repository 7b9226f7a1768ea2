//! Pump pulses that produce (sending node) or absorb (receiving node) a
//! photon of prescribed envelope ε(t).

use crate::analytic::envelope_of;
use crate::dynamics::pulse::read_complex_columns;
use crate::dynamics::PulseSpec;
use crate::error::{domain, Error, Result};
use crate::quadrature::{cumulative_trapezoid, trapezoid};
use num_complex::Complex64 as C64;
use std::io::{BufRead, Write};

/// Default slack kept in the emission denominator 1 − 2Re β ∫|ε|².
pub const DEFAULT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEnvelope {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
}

impl TargetEnvelope {
    pub fn new(times: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(domain("envelope needs matching time and value arrays of length >= 2"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("envelope time grid must be strictly increasing"));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(domain("envelope contains non-finite samples"));
        }
        Ok(TargetEnvelope { times, values })
    }

    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        TargetEnvelope::new(times, values)
    }

    /// e^{−(t−c)²/2σ²}.
    pub fn gaussian(times: Vec<f64>, centre: f64, sigma: f64) -> Result<Self> {
        Self::from_fn(times, |t| C64::new((-(t - centre).powi(2) / (2.0 * sigma * sigma)).exp(), 0.0))
    }

    /// e^{κ(t−t_c)} switched off smoothly around t_c over `ramp`.
    pub fn rising_exponential(times: Vec<f64>, rate: f64, cutoff: f64, ramp: f64) -> Result<Self> {
        Self::from_fn(times, |t| {
            C64::new((rate * (t - cutoff)).exp() * 0.5 * (1.0 - ((t - cutoff) / ramp).tanh()), 0.0)
        })
    }

    /// Plateau of length `width` centred on `centre` with tanh edges.
    pub fn flat_top(times: Vec<f64>, centre: f64, width: f64, ramp: f64) -> Result<Self> {
        Self::from_fn(times, |t| {
            let a = ((t - centre + 0.5 * width) / ramp).tanh();
            let b = ((t - centre - 0.5 * width) / ramp).tanh();
            C64::new(0.5 * (a - b), 0.0)
        })
    }

    /// ∫|ε|² dt.
    pub fn norm(&self) -> f64 {
        let p: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&self.times, &p)
    }

    /// Running ∫₀ᵗ|ε|².
    pub fn cumulative(&self) -> Vec<f64> {
        let p: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        cumulative_trapezoid(&self.times, &p)
    }

    /// Copy rescaled so that ∫|ε|² = `norm`.
    pub fn normalized_to(&self, norm: f64) -> Result<Self> {
        let current = self.norm();
        if current == 0.0 {
            return Err(Error::EmptyEnvelope);
        }
        let s = (norm / current).sqrt();
        Ok(TargetEnvelope { times: self.times.clone(), values: self.values.iter().map(|v| v * s).collect() })
    }

    pub fn read_text<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let (times, values) = read_complex_columns(r, source)?;
        TargetEnvelope::new(times, values)
            .map_err(|e| Error::Parse { path: source.into(), message: e.to_string() })
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rydconv envelope v1")?;
        writeln!(w, "# columns: t_s re im")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", t, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Ω_p(t) = ε(t)[1 − 2Re β ∫₀ᵗ|ε|²]^{−1/2} on the target grid.
pub fn pump_for_emission(target: &TargetEnvelope, beta: C64, margin: f64) -> Result<PulseSpec> {
    let b = beta.re;
    let e = target.cumulative();
    let mut out = Vec::with_capacity(e.len());
    for ((t, v), e) in target.times.iter().zip(&target.values).zip(&e) {
        let denom = 1.0 - 2.0 * b * e;
        if denom < margin {
            return Err(Error::ShapingDenominator { time: *t, value: denom });
        }
        out.push(v * denom.powf(-0.5));
    }
    PulseSpec::tabulated(target.times.clone(), out)
}

/// Ω_p(t) = −ε(t)[2Re β ∫₀ᵗ|ε|²]^{−1/2} on the target grid.
///
/// The formula diverges as t^{−1/2} where ∫|ε|² first becomes non-zero. The
/// sample there is replaced by the mean of that divergence over the next
/// interval assuming |ε| constant across it, which equals twice the
/// magnitude of the following sample, with the phase of −ε.
pub fn pump_for_absorption(target: &TargetEnvelope, beta: C64) -> Result<PulseSpec> {
    let b = beta.re;
    if !(b > 0.0) {
        return Err(domain("absorption pulse needs Re beta > 0"));
    }
    let e = target.cumulative();
    let n = e.len();
    if e[n - 1] == 0.0 {
        return Err(Error::EmptyEnvelope);
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        if e[i] > 0.0 {
            out[i] = -target.values[i] / (2.0 * b * e[i]).sqrt();
        }
    }
    for i in 0..n - 1 {
        if e[i] == 0.0 && e[i + 1] > 0.0 {
            let v = target.values[i];
            if v.norm() > 0.0 {
                out[i] = -(v / v.norm()) * (2.0 * out[i + 1].norm());
            }
        }
    }
    PulseSpec::tabulated(target.times.clone(), out)
}

/// Emitted envelope Ω_p e^{−Re β ∫|Ω_p|²} for a tabulated pump, sampled on
/// its own grid.
pub fn round_trip_envelope(pulse: &PulseSpec, beta: C64, grid: &[f64]) -> Vec<C64> {
    let pump: Vec<C64> = grid.iter().map(|&t| pulse.value(t)).collect();
    envelope_of(&pump, grid, C64::new(beta.re, 0.0))
}

/// Phase Im β ∫|ε|² (rad) that the shaping factors leave unaccounted for.
pub fn residual_chirp(target: &TargetEnvelope, beta: C64) -> f64 {
    beta.im * target.norm()
}

/// ‖a − b‖₂ / ‖b‖₂ over samples.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::uniform_grid;
    use proptest::prelude::*;

    const BETA: C64 = C64 { re: 2.4e-8, im: 3.0e-9 };

    fn gaussian(fill: f64) -> TargetEnvelope {
        let t = uniform_grid(0.0, 10e-6, 2048);
        let g = TargetEnvelope::from_fn(t, |t| C64::new((-((t - 5e-6) / 1.2e-6).powi(2)).exp(), 0.0)).unwrap();
        g.normalized_to(fill / (2.0 * BETA.re)).unwrap()
    }

    #[test]
    fn smooth_targets_round_trip() {
        let t = uniform_grid(0.0, 10e-6, 2048);
        let targets = [
            TargetEnvelope::gaussian(t.clone(), 5e-6, 1.2e-6).unwrap(),
            TargetEnvelope::rising_exponential(t.clone(), 1.5e6, 7e-6, 0.3e-6).unwrap(),
            TargetEnvelope::flat_top(t.clone(), 5e-6, 4e-6, 0.5e-6).unwrap(),
        ];
        for g in targets {
            let g = g.normalized_to(0.9 / (2.0 * BETA.re)).unwrap();
            let p = pump_for_emission(&g, BETA, DEFAULT_MARGIN).unwrap();
            let err = relative_l2(&round_trip_envelope(&p, BETA, &g.times), &g.values);
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn zero_target_gives_zero_pump() {
        let t = uniform_grid(0.0, 1e-6, 16);
        let z = TargetEnvelope::new(t.clone(), vec![C64::new(0.0, 0.0); 16]).unwrap();
        let p = pump_for_emission(&z, BETA, DEFAULT_MARGIN).unwrap();
        assert!(t.iter().all(|&t| p.value(t) == C64::new(0.0, 0.0)));
        assert!(matches!(pump_for_absorption(&z, BETA), Err(Error::EmptyEnvelope)));
    }

    #[test]
    fn no_depletion_returns_target() {
        let g = gaussian(0.5);
        let p = pump_for_emission(&g, C64::new(0.0, 0.0), DEFAULT_MARGIN).unwrap();
        for (t, v) in g.times.iter().zip(&g.values) {
            assert_eq!(p.value(*t), *v);
        }
    }

    #[test]
    fn gaussian_round_trip() {
        let g = gaussian(0.9);
        let p = pump_for_emission(&g, BETA, DEFAULT_MARGIN).unwrap();
        let back = round_trip_envelope(&p, BETA, &g.times);
        assert!(relative_l2(&back, &g.values) < 1e-4);
    }

    #[test]
    fn overfilled_target_names_the_time() {
        let g = gaussian(1.2);
        match pump_for_emission(&g, BETA, DEFAULT_MARGIN) {
            Err(Error::ShapingDenominator { time, value }) => {
                assert!(time > 4e-6 && time < 10e-6);
                assert!(value < DEFAULT_MARGIN);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rising_exponential_absorption_closed_form() {
        let kappa = 1.5e6;
        let t = uniform_grid(0.0, 8e-6, 4001);
        let env = TargetEnvelope::from_fn(t.clone(), |t| C64::new(3e3 * (kappa * t / 2.0).exp(), 0.0)).unwrap();
        let p = pump_for_absorption(&env, BETA).unwrap();
        let level = (kappa / (2.0 * BETA.re)).sqrt();
        for &ti in t.iter().skip(400) {
            let exact = -level * (kappa * ti / 2.0).exp() / ((kappa * ti).exp() - 1.0).sqrt();
            assert!((p.value(ti).re - exact).abs() < 2e-3 * exact.abs(), "t={ti}");
        }
        assert!((p.value(8e-6).re + level).abs() < 1e-2 * level);
    }

    #[test]
    fn absorption_first_sample_regularized() {
        let t = uniform_grid(0.0, 1e-6, 101);
        let env = TargetEnvelope::from_fn(t.clone(), |_| C64::new(0.0, 2.0)).unwrap();
        let p = pump_for_absorption(&env, BETA).unwrap();
        let first = p.value(0.0);
        let second = p.value(t[1]);
        assert!(first.re.is_finite() && first.im.is_finite());
        assert!((first.norm() - 2.0 * second.norm()).abs() < 1e-12 * first.norm());
        // phase of −ε
        assert!((first / first.norm() - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let g = gaussian(0.3);
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = TargetEnvelope::read_text(&buf[..], "mem").unwrap();
        assert_eq!(back, g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn absorption_is_scale_free(c in 1e-3f64..1e3) {
            let g = gaussian(0.5);
            let scaled = TargetEnvelope::new(g.times.clone(), g.values.iter().map(|v| v * c).collect()).unwrap();
            let a = pump_for_absorption(&g, BETA).unwrap();
            let b = pump_for_absorption(&scaled, BETA).unwrap();
            for &t in &g.times {
                prop_assert!((a.value(t) - b.value(t)).norm() <= 1e-9 * a.value(t).norm().max(1e-300));
            }
        }

        #[test]
        fn emission_scales_with_rescaled_beta(c in 0.1f64..10.0) {
            let g = gaussian(0.7);
            let scaled = TargetEnvelope::new(g.times.clone(), g.values.iter().map(|v| v * c).collect()).unwrap();
            let a = pump_for_emission(&g, BETA, DEFAULT_MARGIN).unwrap();
            let b = pump_for_emission(&scaled, BETA / (c * c), DEFAULT_MARGIN).unwrap();
            for &t in &g.times {
                prop_assert!((b.value(t) - a.value(t) * c).norm() <= 1e-9 * (a.value(t) * c).norm().max(1e-300));
            }
        }
    }
}
