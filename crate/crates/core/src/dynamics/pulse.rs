use crate::error::{domain, Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::SQRT_2;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    /// Ω_0·½[1 + erf((t − t0)/(√2 σ_t))].
    Erf { omega0: f64, t0: f64, sigma_t: f64 },
    /// Linearly interpolated samples; the grid is strictly increasing.
    Tabulated { times: Vec<f64>, values: Vec<C64> },
}

/// Pump Rabi frequency Ω_p(t) on `[0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub t_end: f64,
}

impl PulseSpec {
    pub fn erf(omega0: f64, t0: f64, sigma_t: f64, t_end: f64) -> Result<Self> {
        if !(sigma_t > 0.0 && t_end > 0.0) {
            return Err(domain("erf pulse needs positive sigma_t and t_end"));
        }
        Ok(PulseSpec { shape: PulseShape::Erf { omega0, t0, sigma_t }, t_end })
    }

    /// The reference pump: Ω_0 = 2π·200 kHz, t_end = 10 µs, t0 = t_end/3,
    /// σ_t = t_end/8.
    pub fn paper() -> Self {
        let t_end = 10e-6;
        PulseSpec::erf(crate::units::hz(200e3), t_end / 3.0, t_end / 8.0, t_end).unwrap()
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(domain("tabulated pulse needs at least two (t, value) samples"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("tabulated pulse grid must be strictly increasing"));
        }
        if times[0] > 0.0 {
            return Err(domain(format!("tabulated pulse starts at {:e} s, after t = 0", times[0])));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(domain("tabulated pulse contains non-finite samples"));
        }
        let t_end = *times.last().unwrap();
        Ok(PulseSpec { shape: PulseShape::Tabulated { times, values }, t_end })
    }

    /// Ω_p(t) without range checking; tabulated pulses hold their end values.
    pub fn value(&self, t: f64) -> C64 {
        match &self.shape {
            PulseShape::Erf { omega0, t0, sigma_t } => {
                C64::new(omega0 * 0.5 * (1.0 + libm::erf((t - t0) / (SQRT_2 * sigma_t))), 0.0)
            }
            PulseShape::Tabulated { times, values } => interpolate(times, values, t),
        }
    }

    /// max |Ω_p| over the pulse support.
    pub fn peak_amplitude(&self) -> f64 {
        match &self.shape {
            PulseShape::Erf { omega0, t0, sigma_t } => {
                // monotone in t, so the maximum sits at t_end
                omega0.abs() * 0.5 * (1.0 + libm::erf((self.t_end - t0) / (SQRT_2 * sigma_t)))
            }
            PulseShape::Tabulated { values, .. } => values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// Samples on `grid` as a tabulated pulse.
    pub fn sampled(&self, grid: &[f64]) -> Result<PulseSpec> {
        PulseSpec::tabulated(grid.to_vec(), grid.iter().map(|&t| self.value(t)).collect())
    }

    pub fn write_text<W: Write>(&self, grid: &[f64], mut w: W) -> Result<()> {
        writeln!(w, "# rydconv pulse v1")?;
        writeln!(w, "# columns: t_s re_rad_s im_rad_s")?;
        for &t in grid {
            let v = self.value(t);
            writeln!(w, "{:.17e} {:.17e} {:.17e}", t, v.re, v.im)?;
        }
        Ok(())
    }

    /// Writes the native samples of a tabulated pulse (or `grid` samples otherwise).
    pub fn write_native<W: Write>(&self, grid: &[f64], w: W) -> Result<()> {
        match &self.shape {
            PulseShape::Tabulated { times, .. } => self.write_text(times, w),
            PulseShape::Erf { .. } => self.write_text(grid, w),
        }
    }

    pub fn read_text<R: BufRead>(r: R, source: &str) -> Result<PulseSpec> {
        let (times, values) = read_complex_columns(r, source)?;
        PulseSpec::tabulated(times, values)
    }
}

/// Checked evaluation: `t` must lie in `[0, t_end]`.
pub fn pump_envelope(t: f64, pulse: &PulseSpec) -> Result<C64> {
    if !(t >= 0.0 && t <= pulse.t_end) {
        return Err(domain(format!("t = {t:e} s outside pulse support [0, {:e}]", pulse.t_end)));
    }
    Ok(pulse.value(t))
}

fn interpolate(times: &[f64], values: &[C64], t: f64) -> C64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    if t == t0 {
        return values[k - 1];
    }
    let f = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - f) + values[k] * f
}

/// Reads whitespace-separated `t re [im]` rows; `#` starts a comment line.
pub(crate) fn read_complex_columns<R: BufRead>(r: R, source: &str) -> Result<(Vec<f64>, Vec<C64>)> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { path: source.into(), message: format!("line {}: {e}", idx + 1) })?;
        match cols.len() {
            2 => values.push(C64::new(cols[1], 0.0)),
            3 => values.push(C64::new(cols[1], cols[2])),
            n => {
                return Err(Error::Parse {
                    path: source.into(),
                    message: format!("line {}: expected 2 or 3 columns, found {n}", idx + 1),
                })
            }
        }
        times.push(cols[0]);
    }
    Ok((times, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::uniform_grid;

    #[test]
    fn erf_midpoint_and_plateau() {
        let p = PulseSpec::paper();
        let PulseShape::Erf { omega0, t0, .. } = p.shape else { unreachable!() };
        assert!((pump_envelope(t0, &p).unwrap().re - 0.5 * omega0).abs() < 1e-9 * omega0);
        // t_end = 3 t0 and σ_t = t_end/8: 1 − v/Ω0 = ½ erfc(16/(3√2))
        let v = pump_envelope(p.t_end, &p).unwrap().re / omega0;
        let expect = 1.0 - 0.5 * libm::erfc(16.0 / (3.0 * SQRT_2));
        assert!((v - expect).abs() < 1e-12);
        assert!(v > 0.9999);
        assert!(pump_envelope(-1e-9, &p).is_err());
        assert!(pump_envelope(p.t_end * 1.01, &p).is_err());
    }

    #[test]
    fn tabulated_reproduces_nodes() {
        let p = PulseSpec::paper();
        let grid = uniform_grid(0.0, p.t_end, 257);
        let tab = p.sampled(&grid).unwrap();
        for &t in &grid {
            assert_eq!(pump_envelope(t, &tab).unwrap(), p.value(t));
        }
        // midpoint is the linear average
        let m = 0.5 * (grid[10] + grid[11]);
        let lin = (p.value(grid[10]) + p.value(grid[11])) * 0.5;
        assert!((tab.value(m) - lin).norm() < 1e-9 * lin.norm());
    }

    #[test]
    fn tabulated_validation() {
        assert!(PulseSpec::tabulated(vec![0.0, 1.0, 1.0], vec![C64::new(0.0, 0.0); 3]).is_err());
        assert!(PulseSpec::tabulated(vec![0.1, 1.0], vec![C64::new(0.0, 0.0); 2]).is_err());
        assert!(PulseSpec::tabulated(vec![0.0], vec![C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = PulseSpec::paper();
        let grid = uniform_grid(0.0, p.t_end, 64);
        let mut buf = Vec::new();
        p.write_text(&grid, &mut buf).unwrap();
        let back = PulseSpec::read_text(&buf[..], "mem").unwrap();
        for &t in &grid {
            assert!((back.value(t) - p.value(t)).norm() <= 1e-15 * p.peak_amplitude());
        }
    }
}
