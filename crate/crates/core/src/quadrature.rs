//! Grids and quadrature rules shared by the time and angle integrals.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// `n` uniformly spaced points covering `[start, end]` inclusive.
pub fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid needs at least two points");
    let h = (end - start) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { end } else { start + h * i as f64 })
        .collect()
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub fn trapezoid_complex(x: &[f64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (ys[0] + ys[1]) * (0.5 * (xs[1] - xs[0])))
        .sum()
}

/// Running trapezoid integral; element `i` is the integral over `[x[0], x[i]]`.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

pub fn cumulative_trapezoid_complex(x: &[f64], y: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for i in 1..x.len() {
        acc += (y[i] + y[i - 1]) * (0.5 * (x[i] - x[i - 1]));
        out.push(acc);
    }
    out
}

/// Trapezoid weights for a (possibly non-uniform) grid.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (x[i] - x[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}

/// Neumaier-compensated sum; order-dependent but reproducible.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6, -1.0, 2.0);
        // degree 11 is exact for 6 nodes
        let f = |t: f64| t.powi(11) - 3.0 * t.powi(4) + 1.0;
        let exact = |t: f64| t.powi(12) / 12.0 - 3.0 * t.powi(5) / 5.0 + t;
        let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum();
        assert!((q - (exact(2.0) - exact(-1.0))).abs() < 1e-10);
    }

    #[test]
    fn cumulative_trapezoid_matches_total() {
        let x = uniform_grid(0.0, 1.0, 101);
        let y: Vec<f64> = x.iter().map(|t| t * t).collect();
        let c = cumulative_trapezoid(&x, &y);
        assert!((c[100] - trapezoid(&x, &y)).abs() < 1e-15);
        assert!((c[100] - 1.0 / 3.0).abs() < 2e-5);
        let w = trapezoid_weights(&x);
        let s: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!((s - c[100]).abs() < 1e-15);
    }

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = uniform_grid(0.0, 10e-6, 2048);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2047], 10e-6);
    }
}
