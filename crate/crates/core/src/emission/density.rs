//! Time-integrated directional emission density
//! p(k̂) = (Γ_e/4π) ∫ |Σ_j b_j(t) e^{i(k_p − k_d − k0 k̂)·r_j}|² dt.
//!
//! Evaluating p over many directions goes through a low-rank factorization
//! of the weighted amplitude matrix X_tj = √w_t b_j(t): with X ≈ Q M and
//! orthonormal Q, p(k̂) = (Γ_e/4π)‖M u(k̂)‖² to within the discarded tail.

use crate::analytic::mismatch;
use crate::dynamics::EmitterAmplitudes;
use crate::ensemble::AtomCloud;
use crate::physics::PhysicalParams;
use crate::quadrature::{gauss_legendre, trapezoid_weights};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Phase factors e^{iq·r_j} for one direction.
pub(crate) fn phase_factors(cloud: &AtomCloud, params: &PhysicalParams, k_hat: [f64; 3], out: &mut [C64]) {
    let q = mismatch(params, k_hat);
    for (o, r) in out.iter_mut().zip(&cloud.positions) {
        *o = C64::from_polar(1.0, q[0] * r[0] + q[1] * r[1] + q[2] * r[2]);
    }
}

/// Direct evaluation, O(T·N) per direction.
pub fn directional_density<A: EmitterAmplitudes>(
    amps: &A,
    cloud: &AtomCloud,
    params: &PhysicalParams,
    k_hat: [f64; 3],
) -> f64 {
    let n = amps.n_atoms();
    let mut u = vec![C64::new(0.0, 0.0); n];
    phase_factors(cloud, params, k_hat, &mut u);
    let w = trapezoid_weights(amps.times());
    let mut b = vec![C64::new(0.0, 0.0); n];
    let mut acc = 0.0;
    for (t, wt) in w.iter().enumerate() {
        amps.emitter_into(t, &mut b);
        let s: C64 = b.iter().zip(&u).map(|(b, u)| b * u).sum();
        acc += wt * s.norm_sqr();
    }
    params.gamma_e / (4.0 * PI) * acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// Relative Frobenius tail ‖X − QQ†X‖²/‖X‖² at which the rank search stops.
    pub tolerance: f64,
    pub initial_rank: usize,
    pub max_rank: usize,
    /// Energy fraction of X that the compressed factors may drop.
    pub truncation: f64,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions { tolerance: 1e-8, initial_rank: 8, max_rank: 512, truncation: 1e-8, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub rank: usize,
    pub n_atoms: usize,
    /// M = Q†X, row-major rank × N.
    factors: Vec<C64>,
    pub gamma_e: f64,
    /// Γ_e Σ_t w_t Σ_j |b_j(t)|², the independent-emitter total.
    pub total_emitted: f64,
    /// Relative tail left out of the factorization.
    pub residual: f64,
}

const TIME_BLOCK: usize = 64;
const DIRECTION_BLOCK: usize = 16;
const ATOM_TILE: usize = 256;

/// Rotates M onto the eigenvectors of MM† and drops the weakest rows while
/// their total energy stays below `budget`. Returns the kept rows and the
/// dropped energy.
fn compress(m: Vec<Vec<C64>>, budget: f64) -> (Vec<Vec<C64>>, f64) {
    let r = m.len();
    if r == 0 {
        return (m, 0.0);
    }
    let gram = nalgebra::DMatrix::<C64>::from_fn(r, r, |a, b| m[a].iter().zip(&m[b]).map(|(x, y)| x * y.conj()).sum());
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut keep = r;
    let mut dropped = 0.0;
    while keep > 1 {
        let lam = eig.eigenvalues[order[keep - 1]].max(0.0);
        if dropped + lam > budget {
            break;
        }
        dropped += lam;
        keep -= 1;
    }
    let n = m[0].len();
    let rows = order[..keep]
        .iter()
        .map(|&e| {
            let mut row = vec![C64::new(0.0, 0.0); n];
            for a in 0..r {
                let v = eig.eigenvectors[(a, e)].conj();
                for (o, x) in row.iter_mut().zip(&m[a]) {
                    *o += v * x;
                }
            }
            row
        })
        .collect();
    (rows, dropped)
}

impl DensityOperator {
    pub fn build<A: EmitterAmplitudes>(amps: &A, gamma_e: f64, opts: &DensityOptions) -> Self {
        let n = amps.n_atoms();
        let times = amps.times();
        let nt = times.len();
        let sw: Vec<f64> = trapezoid_weights(times).iter().map(|w| w.sqrt()).collect();
        let x_norm: f64 = (0..nt)
            .into_par_iter()
            .map_init(
                || vec![C64::new(0.0, 0.0); n],
                |buf, t| {
                    amps.emitter_into(t, buf);
                    sw[t] * sw[t] * buf.iter().map(|z| z.norm_sqr()).sum::<f64>()
                },
            )
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let total_emitted = gamma_e * x_norm;
        if x_norm == 0.0 || n == 0 {
            return DensityOperator { rank: 0, n_atoms: n, factors: Vec::new(), gamma_e, total_emitted, residual: 0.0 };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let cap = opts.max_rank.min(nt).min(n).max(1);
        let mut r = opts.initial_rank.clamp(1, cap);
        loop {
            let omega: Vec<C64> = (0..n * r)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect();
            // Y = XΩ, stored column-major (r columns of length T)
            let rows: Vec<Vec<C64>> = (0..nt)
                .into_par_iter()
                .map_init(
                    || vec![C64::new(0.0, 0.0); n],
                    |buf, t| {
                        amps.emitter_into(t, buf);
                        let mut row = vec![C64::new(0.0, 0.0); r];
                        for (j, b) in buf.iter().enumerate() {
                            let om = &omega[j * r..(j + 1) * r];
                            for k in 0..r {
                                row[k] += b * om[k];
                            }
                        }
                        row.iter_mut().for_each(|v| *v *= sw[t]);
                        row
                    },
                )
                .collect();
            let mut cols: Vec<Vec<C64>> = (0..r).map(|k| rows.iter().map(|row| row[k]).collect()).collect();
            let q = orthonormalize(&mut cols);
            let m = project(amps, &q, &sw);
            let m_norm: f64 = m.par_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>()).collect::<Vec<f64>>().iter().sum();
            let residual = ((x_norm - m_norm) / x_norm).max(0.0);
            if residual <= opts.tolerance || r >= cap {
                let (m, dropped) = compress(m, opts.truncation * x_norm);
                let rank = m.len();
                let factors = m.into_iter().flatten().collect();
                let residual = residual + dropped / x_norm;
                return DensityOperator { rank, n_atoms: n, factors, gamma_e, total_emitted, residual };
            }
            r = (2 * r).min(cap);
        }
    }

    /// Density of the incoherent background, total/4π.
    pub fn incoherent_level(&self) -> f64 {
        self.total_emitted / (4.0 * PI)
    }

    /// (Γ_e/4π)‖M u‖² for precomputed phase factors u.
    pub fn density_for(&self, u: &[C64]) -> f64 {
        let n = self.n_atoms;
        let s: f64 = (0..self.rank)
            .map(|k| self.factors[k * n..(k + 1) * n].iter().zip(u).map(|(m, u)| m * u).sum::<C64>().norm_sqr())
            .sum();
        self.gamma_e / (4.0 * PI) * s
    }

    /// Densities for a block of directions whose phase factors are stored
    /// back to back in `u`. Tiles over atoms so each factor row is streamed
    /// once per block rather than once per direction.
    fn density_block(&self, u: &[C64], count: usize) -> Vec<f64> {
        let n = self.n_atoms;
        let r = self.rank;
        let mut acc = vec![C64::new(0.0, 0.0); r * count];
        let mut lo = 0;
        while lo < n {
            let hi = (lo + ATOM_TILE).min(n);
            for k in 0..r {
                let row = &self.factors[k * n + lo..k * n + hi];
                for b in 0..count {
                    let ub = &u[b * n + lo..b * n + hi];
                    let s: C64 = row.iter().zip(ub).map(|(m, u)| m * u).sum();
                    acc[k * count + b] += s;
                }
            }
            lo = hi;
        }
        (0..count).map(|b| self.gamma_e / (4.0 * PI) * (0..r).map(|k| acc[k * count + b].norm_sqr()).sum::<f64>()).collect()
    }

    pub fn density(&self, cloud: &AtomCloud, params: &PhysicalParams, k_hat: [f64; 3]) -> f64 {
        let mut u = vec![C64::new(0.0, 0.0); self.n_atoms];
        phase_factors(cloud, params, k_hat, &mut u);
        self.density_for(&u)
    }

    pub fn densities(&self, cloud: &AtomCloud, params: &PhysicalParams, dirs: &[[f64; 3]]) -> Vec<f64> {
        let n = self.n_atoms;
        dirs.par_chunks(DIRECTION_BLOCK)
            .map_init(
                || vec![C64::new(0.0, 0.0); n * DIRECTION_BLOCK],
                |u, block| {
                    for (b, &d) in block.iter().enumerate() {
                        phase_factors(cloud, params, d, &mut u[b * n..(b + 1) * n]);
                    }
                    self.density_block(u, block.len())
                },
            )
            .flatten()
            .collect()
    }
}

/// Two passes of modified Gram–Schmidt; drops numerically dependent columns.
fn orthonormalize(cols: &mut [Vec<C64>]) -> Vec<Vec<C64>> {
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let mut q: Vec<Vec<C64>> = Vec::new();
    for c in cols.iter_mut() {
        for _ in 0..2 {
            for e in &q {
                let proj: C64 = e.iter().zip(c.iter()).map(|(e, c)| e.conj() * c).sum();
                for (ci, ei) in c.iter_mut().zip(e) {
                    *ci -= proj * ei;
                }
            }
        }
        let nc = norm(c);
        if nc > 1e-13 * scale {
            q.push(c.iter().map(|z| z / nc).collect());
        }
    }
    q
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// M = Q†X, accumulated over fixed time blocks so the sum order is fixed.
fn project<A: EmitterAmplitudes>(amps: &A, q: &[Vec<C64>], sw: &[f64]) -> Vec<Vec<C64>> {
    let n = amps.n_atoms();
    let nt = amps.times().len();
    let mut m = vec![vec![C64::new(0.0, 0.0); n]; q.len()];
    let mut block = vec![C64::new(0.0, 0.0); TIME_BLOCK * n];
    let mut start = 0;
    while start < nt {
        let len = TIME_BLOCK.min(nt - start);
        block[..len * n].par_chunks_mut(n).enumerate().for_each(|(i, s)| amps.emitter_into(start + i, s));
        let block = &block;
        m.par_iter_mut().zip(q).for_each(|(row, qk)| {
            for i in 0..len {
                let t = start + i;
                let coef = qk[t].conj() * sw[t];
                for (r, b) in row.iter_mut().zip(&block[i * n..(i + 1) * n]) {
                    *r += coef * b;
                }
            }
        });
        start += len;
    }
    m
}

/// Product rule over the sphere in polar angles about +z: a fine
/// Gauss–Legendre cap θ < `cap` that holds the phase-matched lobe, and a
/// coarser rule over the rest. Azimuths use the periodic trapezoid rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereQuadrature {
    pub cap: f64,
    pub inner: (usize, usize),
    pub outer: (usize, usize),
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        SphereQuadrature { cap: 0.3, inner: (64, 128), outer: (96, 96) }
    }
}

impl SphereQuadrature {
    pub fn nodes(&self) -> (Vec<[f64; 3]>, Vec<f64>) {
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for (lo, hi, (nt, np)) in [(0.0, self.cap, self.inner), (self.cap, PI, self.outer)] {
            let (th, wt) = gauss_legendre(nt, lo, hi);
            for (t, w) in th.iter().zip(&wt) {
                for k in 0..np {
                    let phi = 2.0 * PI * k as f64 / np as f64;
                    dirs.push([t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()]);
                    weights.push(w * t.sin() * 2.0 * PI / np as f64);
                }
            }
        }
        (dirs, weights)
    }
}

/// ∫ p(k̂) dΩ over the full sphere.
pub fn sphere_integral(op: &DensityOperator, cloud: &AtomCloud, params: &PhysicalParams, quad: &SphereQuadrature) -> f64 {
    let (dirs, w) = quad.nodes();
    let p = op.densities(cloud, params, &dirs);
    p.iter().zip(&w).map(|(p, w)| p * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_reduced, output_grid, EvolveOptions, PulseSpec};
    use crate::ensemble::{sample_cloud, CloudGeometry};
    use crate::units::us;

    fn run(n: usize, seed: u64) -> (AtomCloud, PhysicalParams, crate::dynamics::Trajectory) {
        let p = PhysicalParams::paper();
        let c = sample_cloud(&CloudGeometry { n_atoms: n, ..CloudGeometry::paper(seed) }, &p).unwrap();
        let pulse = PulseSpec::erf(crate::units::hz(600e3), us(1.0), us(0.4), us(3.0)).unwrap();
        let grid = output_grid(&pulse, 256);
        let tr = evolve_reduced(&c, &pulse, &p, &grid, &EvolveOptions::default()).unwrap();
        (c, p, tr)
    }

    #[test]
    fn low_rank_matches_direct() {
        let (c, p, tr) = run(300, 5);
        let op = DensityOperator::build(&tr, p.gamma_e, &DensityOptions::default());
        assert!(op.residual <= 2e-8);
        for d in [[0.0, 0.0, 1.0], [0.04, -0.01, 1.0], [0.5, 0.5, 0.2]] {
            let exact = directional_density(&tr, &c, &p, d);
            let approx = op.density(&c, &p, d);
            assert!((approx - exact).abs() < 1e-6 * exact.max(op.incoherent_level()), "{d:?}: {approx} vs {exact}");
        }
    }

    #[test]
    fn single_atom_is_isotropic() {
        let (c, p, tr) = run(1, 2);
        let op = DensityOperator::build(&tr, p.gamma_e, &DensityOptions::default());
        let iso = op.incoherent_level();
        for d in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.3, -0.4, -0.8]] {
            assert!((op.density(&c, &p, d) - iso).abs() < 1e-12 * iso);
        }
        let total = sphere_integral(&op, &c, &p, &SphereQuadrature::default());
        assert!((total / op.total_emitted - 1.0).abs() < 1e-10);
    }

    #[test]
    fn orthonormal_basis() {
        let mut cols = vec![
            vec![C64::new(1.0, 0.0), C64::new(1.0, 1.0), C64::new(0.0, 2.0)],
            vec![C64::new(2.0, 0.0), C64::new(2.0, 2.0), C64::new(0.0, 4.0)],
            vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0), C64::new(3.0, 0.0)],
        ];
        let q = orthonormalize(&mut cols);
        assert_eq!(q.len(), 2);
        let dot: C64 = q[0].iter().zip(&q[1]).map(|(a, b)| a.conj() * b).sum();
        assert!(dot.norm() < 1e-14);
        assert!((norm(&q[1]) - 1.0).abs() < 1e-14);
    }
}
