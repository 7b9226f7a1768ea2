//! Levenberg–Marquardt fit of an elliptic Gaussian lobe.

use super::angular::AngularMap;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub theta_x0: f64,
    pub theta_y0: f64,
    /// 1/e half-widths Δθ_x, Δθ_y (rad).
    pub width_x: f64,
    pub width_y: f64,
    /// Relative rms misfit over the fitted points.
    pub residual: f64,
    /// Relative rms misfit along the θ_x row through the peak.
    pub residual_x: f64,
    /// Same along the θ_y column through the peak.
    pub residual_y: f64,
    pub iterations: usize,
}

impl GaussianFit {
    pub fn model(&self, tx: f64, ty: f64) -> f64 {
        gauss(&[self.amplitude, self.theta_x0, self.theta_y0, self.width_x, self.width_y], tx, ty)
    }

    /// ΔΩ = π Δθ_x Δθ_y.
    pub fn solid_angle(&self) -> f64 {
        std::f64::consts::PI * self.width_x * self.width_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Only points at or above this fraction of the peak enter the fit.
    pub mask_fraction: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { mask_fraction: 0.1, max_iterations: 500, tolerance: 1e-14 }
    }
}

fn gauss(p: &[f64; 5], tx: f64, ty: f64) -> f64 {
    let ux = (tx - p[1]) / p[3];
    let uy = (ty - p[2]) / p[4];
    p[0] * (-(ux * ux) - uy * uy).exp()
}

/// Fits A·exp(−(θ_x−θ_x0)²/Δθ_x²)·exp(−(θ_y−θ_y0)²/Δθ_y²) to the map.
pub fn gaussian_fit(map: &AngularMap, opts: &FitOptions) -> Result<GaussianFit> {
    let g = &map.grid;
    let (px, py) = map.peak();
    let peak = map.at(px, py);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::FitDivergence { iterations: 0, residual: f64::NAN });
    }
    let mut pts = Vec::new();
    for ix in 0..g.nx() {
        for iy in 0..g.ny() {
            let v = map.at(ix, iy);
            if v >= opts.mask_fraction * peak {
                pts.push((g.theta_x[ix], g.theta_y[iy], v));
            }
        }
    }
    // moments of the masked lobe as the starting point
    let total: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / total;
    let my = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / total;
    let vx = pts.iter().map(|p| (p.0 - mx).powi(2) * p.2).sum::<f64>() / total;
    let vy = pts.iter().map(|p| (p.1 - my).powi(2) * p.2).sum::<f64>() / total;
    let [sx, sy] = g.spacing();
    let mut p = [peak, g.theta_x[px], g.theta_y[py], (2.0 * vx).sqrt().max(sx), (2.0 * vy).sqrt().max(sy)];

    let cost = |p: &[f64; 5]| pts.iter().map(|&(x, y, v)| (v - gauss(p, x, y)).powi(2)).sum::<f64>();
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_iterations {
        it += 1;
        let mut jtj = [[0.0f64; 5]; 5];
        let mut jtr = [0.0f64; 5];
        for &(x, y, v) in &pts {
            let f = gauss(&p, x, y);
            let dx = x - p[1];
            let dy = y - p[2];
            let j = [
                f / p[0],
                f * 2.0 * dx / (p[3] * p[3]),
                f * 2.0 * dy / (p[4] * p[4]),
                f * 2.0 * dx * dx / p[3].powi(3),
                f * 2.0 * dy * dy / p[4].powi(3),
            ];
            let r = v - f;
            for a in 0..5 {
                jtr[a] += j[a] * r;
                for b in 0..5 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..5 {
                a[k][k] += lambda * jtj[k][k].max(1e-300);
            }
            let Some(step) = solve5(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for k in 0..5 {
                trial[k] += step[k];
            }
            trial[3] = trial[3].abs();
            trial[4] = trial[4].abs();
            let ct = cost(&trial);
            if ct.is_finite() && ct <= c {
                let rel = (c - ct) / c.max(f64::MIN_POSITIVE);
                let small = step.iter().zip(&trial).all(|(s, t)| s.abs() <= 1e-12 * t.abs().max(1e-300));
                p = trial;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < opts.tolerance || small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step left: at a minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    let data_norm: f64 = pts.iter().map(|p| p.2 * p.2).sum();
    let residual = (c / data_norm).sqrt();
    if !converged || !p.iter().all(|v| v.is_finite()) || p[3] == 0.0 || p[4] == 0.0 {
        return Err(Error::FitDivergence { iterations: it, residual });
    }
    let fit = GaussianFit {
        amplitude: p[0],
        theta_x0: p[1],
        theta_y0: p[2],
        width_x: p[3],
        width_y: p[4],
        residual,
        residual_x: 0.0,
        residual_y: 0.0,
        iterations: it,
    };
    let threshold = opts.mask_fraction * peak;
    let row_residual = |samples: Vec<(f64, f64, f64)>| {
        let (mut num, mut den) = (0.0, 0.0);
        for (x, y, v) in samples {
            if v >= threshold {
                num += (v - fit.model(x, y)).powi(2);
                den += v * v;
            }
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    };
    let iy0 = nearest(&g.theta_y, fit.theta_y0);
    let ix0 = nearest(&g.theta_x, fit.theta_x0);
    let rx = row_residual((0..g.nx()).map(|ix| (g.theta_x[ix], g.theta_y[iy0], map.at(ix, iy0))).collect());
    let ry = row_residual((0..g.ny()).map(|iy| (g.theta_x[ix0], g.theta_y[iy], map.at(ix0, iy))).collect());
    Ok(GaussianFit { residual_x: rx, residual_y: ry, ..fit })
}

fn nearest(axis: &[f64], v: f64) -> usize {
    let mut best = 0;
    for (i, a) in axis.iter().enumerate() {
        if (a - v).abs() < (axis[best] - v).abs() {
            best = i;
        }
    }
    best
}

/// Gaussian elimination with partial pivoting.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..5 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let s: f64 = (row + 1..5).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::super::angular::AngularGrid;
    use super::*;
    use std::f64::consts::PI;

    fn synthetic(p: [f64; 5]) -> AngularMap {
        let grid = AngularGrid::uniform((-0.07 * PI, 0.09 * PI), 161, (-0.05 * PI, 0.05 * PI), 101).unwrap();
        let values = grid.theta_x.iter().flat_map(|&x| grid.theta_y.iter().map(move |&y| gauss(&p, x, y))).collect();
        AngularMap { grid, values }
    }

    #[test]
    fn recovers_its_own_model() {
        let truth = [3.7e4, 0.0141 * PI, -0.0013 * PI, 0.0152 * PI, 0.0081 * PI];
        let fit = gaussian_fit(&synthetic(truth), &FitOptions::default()).unwrap();
        let got = [fit.amplitude, fit.theta_x0, fit.theta_y0, fit.width_x, fit.width_y];
        for k in 0..5 {
            assert!((got[k] - truth[k]).abs() <= 1e-6 * truth[k].abs(), "param {k}: {} vs {}", got[k], truth[k]);
        }
        assert!(fit.residual < 1e-8);
        assert!(fit.residual_x < 1e-8);
    }

    #[test]
    fn skewed_lobe_has_larger_row_residual() {
        let truth = [1.0, 0.0, 0.0, 0.015 * PI, 0.008 * PI];
        let mut m = synthetic(truth);
        let g = m.grid.clone();
        for ix in 0..g.nx() {
            for iy in 0..g.ny() {
                let x = g.theta_x[ix];
                m.values[g.index(ix, iy)] *= 1.0 + 0.3 * (x / (0.015 * PI)).tanh();
            }
        }
        let fit = gaussian_fit(&m, &FitOptions::default()).unwrap();
        assert!(fit.residual_x > fit.residual_y);
        assert!(fit.residual_x > 1e-3);
    }

    #[test]
    fn flat_zero_map_is_rejected() {
        let mut m = synthetic([1.0, 0.0, 0.0, 0.01, 0.01]);
        m.values.iter_mut().for_each(|v| *v = 0.0);
        assert!(matches!(gaussian_fit(&m, &FitOptions::default()), Err(Error::FitDivergence { .. })));
    }

    #[test]
    fn linear_solve() {
        let a = [
            [4.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 3.0, 1.0, 0.0, 0.0],
            [0.0, 1.0, 2.0, 0.5, 0.0],
            [0.0, 0.0, 0.5, 5.0, 1.0],
            [0.0, 0.0, 0.0, 1.0, 1.0],
        ];
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let b: Vec<f64> = (0..5).map(|i| (0..5).map(|k| a[i][k] * x[k]).sum()).collect();
        let got = solve5(a, b.try_into().unwrap()).unwrap();
        for k in 0..5 {
            assert!((got[k] - x[k]).abs() < 1e-12);
        }
    }
}
