//! Direction grids around the z axis and dense angular maps.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Small-angle grid with θ_x = θ cos φ, θ_y = θ sin φ, where θ is the polar
/// angle from +z and φ the azimuth. The map k̂ = (sin θ cos φ, sin θ sin φ, cos θ)
/// is exact for every grid point, and k̂(0, 0) = ẑ.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
}

impl AngularGrid {
    pub fn new(theta_x: Vec<f64>, theta_y: Vec<f64>) -> Result<Self> {
        for (name, axis) in [("theta_x", &theta_x), ("theta_y", &theta_y)] {
            if axis.len() < 3 {
                return Err(Error::Domain(format!("{name} axis needs at least 3 points")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Domain(format!("{name} axis must be strictly increasing")));
            }
        }
        Ok(AngularGrid { theta_x, theta_y })
    }

    /// Uniform axes, ranges in radians.
    pub fn uniform(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Domain("angular axes need at least 3 points".into()));
        }
        let axis = |(a, b): (f64, f64), n: usize| crate::quadrature::uniform_grid(a, b, n);
        AngularGrid::new(axis(x, nx), axis(y, ny))
    }

    /// Default window for the reference cloud: θ_x ∈ [−0.07π, 0.09π],
    /// θ_y ∈ [−0.05π, 0.05π] at 0.001π spacing.
    pub fn reference() -> Self {
        AngularGrid::uniform((-0.07 * PI, 0.09 * PI), 161, (-0.05 * PI, 0.05 * PI), 101).expect("valid grid")
    }

    pub fn nx(&self) -> usize {
        self.theta_x.len()
    }

    pub fn ny(&self) -> usize {
        self.theta_y.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index: θ_x varies slowest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny() + iy
    }

    pub fn directions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for &tx in &self.theta_x {
            for &ty in &self.theta_y {
                out.push(direction(tx, ty));
            }
        }
        out
    }

    /// Quadrature weights dΩ = (sin θ/θ) dθ_x dθ_y with trapezoid axis weights.
    pub fn solid_angle_weights(&self) -> Vec<f64> {
        let wx = crate::quadrature::trapezoid_weights(&self.theta_x);
        let wy = crate::quadrature::trapezoid_weights(&self.theta_y);
        let mut out = Vec::with_capacity(self.len());
        for (ix, &tx) in self.theta_x.iter().enumerate() {
            for (iy, &ty) in self.theta_y.iter().enumerate() {
                out.push(wx[ix] * wy[iy] * jacobian(tx, ty));
            }
        }
        out
    }

    /// Smallest spacing along each axis.
    pub fn spacing(&self) -> [f64; 2] {
        let min_step = |a: &[f64]| a.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        [min_step(&self.theta_x), min_step(&self.theta_y)]
    }
}

/// Unit vector for a (θ_x, θ_y) pair.
pub fn direction(theta_x: f64, theta_y: f64) -> [f64; 3] {
    let theta = theta_x.hypot(theta_y);
    if theta == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    let s = theta.sin() / theta;
    [s * theta_x, s * theta_y, theta.cos()]
}

fn jacobian(theta_x: f64, theta_y: f64) -> f64 {
    let theta = theta_x.hypot(theta_y);
    if theta == 0.0 {
        1.0
    } else {
        theta.sin() / theta
    }
}

/// Values on an [`AngularGrid`], row-major with θ_x slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularMap {
    pub grid: AngularGrid,
    pub values: Vec<f64>,
}

impl AngularMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Grid indices of the largest value.
    pub fn peak(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.grid.ny(), best % self.grid.ny())
    }

    /// The map reflected about θ_x = 0. Requires a symmetric θ_x axis.
    pub fn reflected_x(&self) -> Option<AngularMap> {
        let tx = &self.grid.theta_x;
        let n = tx.len();
        if (0..n).any(|i| (tx[i] + tx[n - 1 - i]).abs() > 1e-12 * tx[n - 1].abs()) {
            return None;
        }
        let mut values = vec![0.0; self.values.len()];
        for ix in 0..n {
            for iy in 0..self.grid.ny() {
                values[self.grid.index(n - 1 - ix, iy)] = self.at(ix, iy);
            }
        }
        Some(AngularMap { grid: self.grid.clone(), values })
    }

    /// Text layout: a header row `nan θ_y/π ...`, then one row per θ_x
    /// holding `θ_x/π` followed by the values. Lines starting with `#` are comments.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rydconv angular map v1, angles in units of pi rad")?;
        write!(w, "nan")?;
        for ty in &self.grid.theta_y {
            write!(w, " {:.12e}", ty / PI)?;
        }
        writeln!(w)?;
        for (ix, tx) in self.grid.theta_x.iter().enumerate() {
            write!(w, "{:.12e}", tx / PI)?;
            for iy in 0..self.grid.ny() {
                write!(w, " {:.12e}", self.at(ix, iy))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let bad = |line: usize, m: String| Error::Parse { path: source.into(), message: format!("line {line}: {m}") };
        let mut theta_y: Option<Vec<f64>> = None;
        let mut theta_x = Vec::new();
        let mut values = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = s.split_whitespace().map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| bad(n + 1, e.to_string()))?;
            match &theta_y {
                None => {
                    if nums.is_empty() || !nums[0].is_nan() {
                        return Err(bad(n + 1, "expected header row starting with nan".into()));
                    }
                    theta_y = Some(nums[1..].iter().map(|v| v * PI).collect());
                }
                Some(ty) => {
                    if nums.len() != ty.len() + 1 {
                        return Err(bad(n + 1, format!("expected {} columns, found {}", ty.len() + 1, nums.len())));
                    }
                    theta_x.push(nums[0] * PI);
                    values.extend_from_slice(&nums[1..]);
                }
            }
        }
        let theta_y = theta_y.ok_or_else(|| bad(0, "empty map".into()))?;
        let grid = AngularGrid::new(theta_x, theta_y)
            .map_err(|e| Error::Parse { path: source.into(), message: e.to_string() })?;
        Ok(AngularMap { grid, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_exact_on_axis() {
        assert_eq!(direction(0.0, 0.0), [0.0, 0.0, 1.0]);
        for (tx, ty) in [(0.01, 0.0), (0.0, -0.2), (0.1, 0.05)] {
            let d = direction(tx, ty);
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-15);
            let theta = d[2].acos();
            assert!((theta - tx.hypot(ty)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_solid_angle() {
        // square grid of half-width a: for small a the solid angle ≈ (2a)²
        let a: f64 = 0.05;
        let g = AngularGrid::uniform((-a, a), 201, (-a, a), 201).unwrap();
        let s: f64 = g.solid_angle_weights().iter().sum();
        assert!((s / (4.0 * a * a) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn map_text_round_trip() {
        let g = AngularGrid::uniform((-0.1, 0.1), 5, (-0.05, 0.05), 3).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|i| i as f64 * 1.5).collect();
        let m = AngularMap { grid: g, values };
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = AngularMap::read_text(&buf[..], "mem").unwrap();
        assert_eq!(back.values, m.values);
        for (a, b) in back.grid.theta_x.iter().zip(&m.grid.theta_x) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(m.peak(), (4, 2));
    }

    #[test]
    fn reflection_needs_symmetric_axis() {
        let g = AngularGrid::uniform((-0.1, 0.2), 5, (-0.05, 0.05), 3).unwrap();
        let m = AngularMap { values: vec![0.0; g.len()], grid: g };
        assert!(m.reflected_x().is_none());
    }
}
