//! Random atomic clouds and their position-dependent couplings.

use crate::error::{domain, Error, Result};
use crate::physics::PhysicalParams;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::TAU;
use std::io::{BufRead, Write};

/// Gaussian trap geometry and the seed of the sampling stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudGeometry {
    /// Standard deviations (σ_x, σ_y, σ_z) in metres.
    pub sigma: [f64; 3],
    pub n_atoms: usize,
    pub seed: u64,
}

impl CloudGeometry {
    pub fn paper(seed: u64) -> Self {
        CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 15_000, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(domain("cloud must contain at least one atom"));
        }
        let [sx, sy, sz] = self.sigma;
        if !(sx > 0.0 && sy > 0.0 && sz.is_finite()) {
            return Err(domain("cloud widths must be positive"));
        }
        if sz < sx || sz < sy {
            return Err(domain(format!(
                "cloud must be elongated along z (sigma_z = {sz:e} < max(sigma_x, sigma_y))"
            )));
        }
        Ok(())
    }

    /// Peak density ρ0 = N / ((2π)^{3/2} σ_x σ_y σ_z).
    pub fn peak_density(&self) -> f64 {
        let [sx, sy, sz] = self.sigma;
        self.n_atoms as f64 / (TAU.powf(1.5) * sx * sy * sz)
    }
}

/// Parameters of η(x) and δ_s(x) that travel with a cloud, so that derived
/// quantities (participation fraction, export) need nothing else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingProfile {
    pub eta_antinode: f64,
    pub surface_position: f64,
    pub decay_length: f64,
    pub stark_gradient: f64,
}

impl CouplingProfile {
    pub fn from_params(p: &PhysicalParams) -> Self {
        CouplingProfile {
            eta_antinode: p.eta_antinode(),
            surface_position: p.surface_position,
            decay_length: p.electrode_gap,
            stark_gradient: p.stark_gradient,
        }
    }

    pub fn eta(&self, x: f64) -> f64 {
        self.eta_antinode * (-(self.surface_position - x) / self.decay_length).exp()
    }

    pub fn delta_s(&self, x: f64) -> f64 {
        self.stark_gradient * x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    pub positions: Vec<[f64; 3]>,
    /// η(r_j), rad/s.
    pub eta: Vec<f64>,
    /// Bare two-photon detuning δ_s^(j) = α x_j, rad/s.
    pub delta_s: Vec<f64>,
    pub geometry: CloudGeometry,
    pub profile: CouplingProfile,
}

impl AtomCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max_eta(&self) -> f64 {
        self.eta.iter().cloned().fold(0.0, f64::max)
    }

    /// Build a cloud from explicit positions, evaluating η and δ_s from the
    /// profile.
    pub fn from_positions(positions: Vec<[f64; 3]>, geometry: CloudGeometry, profile: CouplingProfile) -> Self {
        let eta = positions.iter().map(|r| profile.eta(r[0])).collect();
        let delta_s = positions.iter().map(|r| profile.delta_s(r[0])).collect();
        AtomCloud { positions, eta, delta_s, geometry, profile }
    }

    /// Reflect x_j ↦ −x_j together with α ↦ −α, keeping every atom's η_j and
    /// δ_s^(j). Emission observables of the result are the x-parity images of
    /// the original ones.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.positions {
            r[0] = -r[0];
        }
        out.profile.stark_gradient = -out.profile.stark_gradient;
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        let p = &self.profile;
        writeln!(w, "# rydconv cloud v1")?;
        writeln!(w, "# n_atoms {}", self.len())?;
        writeln!(w, "# sigma_m {:.17e} {:.17e} {:.17e}", g.sigma[0], g.sigma[1], g.sigma[2])?;
        writeln!(w, "# seed {}", g.seed)?;
        writeln!(w, "# eta_antinode_rad_s {:.17e}", p.eta_antinode)?;
        writeln!(w, "# surface_position_m {:.17e}", p.surface_position)?;
        writeln!(w, "# decay_length_m {:.17e}", p.decay_length)?;
        writeln!(w, "# stark_gradient_rad_s_m {:.17e}", p.stark_gradient)?;
        writeln!(w, "# columns: x_m y_m z_m eta_rad_s delta_s_rad_s")?;
        for j in 0..self.len() {
            let r = self.positions[j];
            writeln!(
                w,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                r[0], r[1], r[2], self.eta[j], self.delta_s[j]
            )?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, source: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: source.to_string(), message: format!("line {line}: {msg}") };
        let mut sigma = None;
        let mut seed = 0u64;
        let mut header = std::collections::HashMap::new();
        let mut positions = Vec::new();
        let mut eta = Vec::new();
        let mut delta_s = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                match parts.next() {
                    Some("sigma_m") => {
                        let v: Vec<f64> = parts.map(str::parse).collect::<std::result::Result<_, _>>().map_err(|e| err(lineno, format!("{e}")))?;
                        if v.len() != 3 {
                            return Err(err(lineno, "sigma_m needs three values".into()));
                        }
                        sigma = Some([v[0], v[1], v[2]]);
                    }
                    Some("seed") => {
                        seed = parts.next().unwrap_or("0").parse().map_err(|e| err(lineno, format!("{e}")))?;
                    }
                    Some(key) if key.ends_with("_rad_s") || key.ends_with("_m") || key.ends_with("_rad_s_m") => {
                        if let Some(v) = parts.next() {
                            let v: f64 = v.parse().map_err(|e| err(lineno, format!("{e}")))?;
                            header.insert(key.to_string(), v);
                        }
                    }
                    _ => {}
                }
                continue;
            }
            let v: Vec<f64> = t
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(lineno, format!("{e}")))?;
            if v.len() != 5 {
                return Err(err(lineno, format!("expected 5 columns, found {}", v.len())));
            }
            positions.push([v[0], v[1], v[2]]);
            eta.push(v[3]);
            delta_s.push(v[4]);
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| err(0, format!("missing header field {k}")));
        let profile = CouplingProfile {
            eta_antinode: get("eta_antinode_rad_s")?,
            surface_position: get("surface_position_m")?,
            decay_length: get("decay_length_m")?,
            stark_gradient: get("stark_gradient_rad_s_m")?,
        };
        let sigma = sigma.ok_or_else(|| err(0, "missing sigma_m header".into()))?;
        if positions.is_empty() {
            return Err(err(0, "cloud file has no atoms".into()));
        }
        let geometry = CloudGeometry { sigma, n_atoms: positions.len(), seed };
        Ok(AtomCloud { positions, eta, delta_s, geometry, profile })
    }
}

/// Draw N atoms from the trap distribution with a ChaCha8 stream seeded from
/// `geometry.seed`. Atoms that would sit at or beyond the chip surface are
/// redrawn.
pub fn sample_cloud(geometry: &CloudGeometry, params: &PhysicalParams) -> Result<AtomCloud> {
    geometry.validate()?;
    let profile = CouplingProfile::from_params(params);
    let mut rng = ChaCha8Rng::seed_from_u64(geometry.seed);
    let [sx, sy, sz] = geometry.sigma;
    let mut positions = Vec::with_capacity(geometry.n_atoms);
    while positions.len() < geometry.n_atoms {
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        let r = [x * sx, y * sy, z * sz];
        if r[0] >= profile.surface_position {
            continue;
        }
        positions.push(r);
    }
    Ok(AtomCloud::from_positions(positions, *geometry, profile))
}

/// Grid points used to locate the emission layer width.
pub const LAYER_GRID_POINTS: usize = 2001;

/// Full width at half maximum of w(x) = η(x)²/(γ² + δ_s(x)²)·e^{−x²/2σ_x²},
/// evaluated on a 2001-point grid over ±6σ_x.
pub fn emission_layer_width(cloud: &AtomCloud, gamma: f64) -> f64 {
    let sx = cloud.geometry.sigma[0];
    let p = &cloud.profile;
    let span = 6.0 * sx;
    let n = LAYER_GRID_POINTS;
    let xs: Vec<f64> = (0..n).map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64).collect();
    let w: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e = p.eta(x);
            let d = p.delta_s(x);
            e * e / (gamma * gamma + d * d) * (-x * x / (2.0 * sx * sx)).exp()
        })
        .collect();
    let peak = w.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return 0.0;
    }
    let half = 0.5 * peak;
    let first = w.iter().position(|&v| v >= half).unwrap();
    let last = w.iter().rposition(|&v| v >= half).unwrap();
    let left = if first == 0 {
        xs[0]
    } else {
        let (x0, x1, y0, y1) = (xs[first - 1], xs[first], w[first - 1], w[first]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };
    let right = if last == n - 1 {
        xs[n - 1]
    } else {
        let (x0, x1, y0, y1) = (xs[last], xs[last + 1], w[last], w[last + 1]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };
    right - left
}

/// ξ = Δx/σ_x, clamped to at most one.
pub fn participation_fraction(cloud: &AtomCloud, gamma: f64) -> f64 {
    (emission_layer_width(cloud, gamma) / cloud.geometry.sigma[0]).min(1.0)
}

/// Second-order couplings after eliminating |i⟩ for one value of Ω_p.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCouplings {
    pub eta_tilde: Vec<C64>,
    pub delta_s_tilde: Vec<f64>,
    pub delta_e_tilde: f64,
}

pub fn effective_couplings(cloud: &AtomCloud, omega_p: C64, params: &PhysicalParams) -> Result<EffectiveCouplings> {
    let delta = params.delta_intermediate;
    if delta == 0.0 {
        return Err(domain("intermediate detuning must be non-zero"));
    }
    let pump_shift = omega_p.norm_sqr() / delta;
    let eta_tilde = cloud
        .eta
        .iter()
        .zip(&cloud.delta_s)
        .map(|(&e, &d)| omega_p * (e / delta * (1.0 + d / (2.0 * delta))))
        .collect();
    let delta_s_tilde = cloud.eta.iter().zip(&cloud.delta_s).map(|(&e, &d)| d + pump_shift - e * e / delta).collect();
    Ok(EffectiveCouplings { eta_tilde, delta_s_tilde, delta_e_tilde: params.delta_e + pump_shift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{hz, to_hz};

    fn params() -> PhysicalParams {
        PhysicalParams::paper()
    }

    #[test]
    fn reference_cloud_statistics() {
        let p = params();
        let g = CloudGeometry::paper(7);
        let c = sample_cloud(&g, &p).unwrap();
        assert_eq!(c.len(), 15_000);
        // ρ0 close to the quoted 2.35 µm⁻³
        let rho = g.peak_density() * 1e-18;
        assert!((rho / 2.35 - 1.0).abs() < 0.06, "{rho}");
        let n = c.len() as f64;
        for axis in 0..3 {
            let m: f64 = c.positions.iter().map(|r| r[axis]).sum::<f64>() / n;
            let var: f64 = c.positions.iter().map(|r| (r[axis] - m).powi(2)).sum::<f64>() / (n - 1.0);
            let s = g.sigma[axis];
            // standard error of the sample std is s/sqrt(2N)
            assert!((var.sqrt() - s).abs() < 5.0 * s / (2.0 * n).sqrt(), "axis {axis}");
            assert!(m.abs() < 5.0 * s / n.sqrt());
        }
        for j in 0..c.len() {
            let x = c.positions[j][0];
            assert_eq!(c.delta_s[j], p.stark_gradient * x);
            assert!(c.eta[j] <= c.profile.eta_antinode);
        }
    }

    #[test]
    fn coupling_is_monotone_in_x() {
        let p = params();
        let c = sample_cloud(&CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 500, seed: 3 }, &p).unwrap();
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.sort_by(|&a, &b| c.positions[a][0].partial_cmp(&c.positions[b][0]).unwrap());
        for w in idx.windows(2) {
            assert!(c.eta[w[1]] >= c.eta[w[0]]);
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let p = params();
        let g = CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 200, seed: 11 };
        assert_eq!(sample_cloud(&g, &p).unwrap(), sample_cloud(&g, &p).unwrap());
        let other = CloudGeometry { seed: 12, ..g };
        assert_ne!(sample_cloud(&g, &p).unwrap().positions, sample_cloud(&other, &p).unwrap().positions);
    }

    #[test]
    fn degenerate_single_atom() {
        let p = params();
        let g = CloudGeometry { sigma: [1e-9; 3], n_atoms: 1, seed: 0 };
        let c = sample_cloud(&g, &p).unwrap();
        assert!(c.delta_s[0].abs() < p.stark_gradient * 5e-9);
        assert!((c.eta[0] / p.eta_at(0.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let p = params();
        let g = CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 0, seed: 0 };
        assert!(sample_cloud(&g, &p).is_err());
        let flat = CloudGeometry { sigma: [4e-6, 4e-6, 1e-6], n_atoms: 5, seed: 0 };
        assert!(sample_cloud(&flat, &p).is_err());
    }

    #[test]
    fn detuning_mean_over_seeds() {
        let p = params();
        let n = 2000;
        let bound = 4.0 * p.stark_gradient * 4e-6 / (n as f64).sqrt();
        for seed in 0..100 {
            let g = CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: n, seed };
            let c = sample_cloud(&g, &p).unwrap();
            let mean = c.delta_s.iter().sum::<f64>() / n as f64;
            assert!(mean.abs() < bound, "seed {seed}: {mean} vs {bound}");
        }
    }

    /// Independent brute-force FWHM: bisection on the continuous weight.
    fn fwhm_by_bisection(profile: &CouplingProfile, sx: f64, gamma: f64) -> f64 {
        let w = |x: f64| {
            let e = profile.eta(x);
            let d = profile.delta_s(x);
            e * e / (gamma * gamma + d * d) * (-x * x / (2.0 * sx * sx)).exp()
        };
        // locate the maximum by golden-section search
        let (mut a, mut b) = (-6.0 * sx, 6.0 * sx);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if w(c) > w(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let xm = 0.5 * (a + b);
        let half = 0.5 * w(xm);
        let cross = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (w(mid) - half).signum() == (w(lo) - half).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        cross(xm, 6.0 * sx) - cross(-6.0 * sx, xm)
    }

    #[test]
    fn layer_width_reference_parameters() {
        let p = params();
        let c = sample_cloud(&CloudGeometry { n_atoms: 10, ..CloudGeometry::paper(1) }, &p).unwrap();
        let gamma = p.gamma();
        let dx = emission_layer_width(&c, gamma);
        let oracle = fwhm_by_bisection(&c.profile, 4e-6, gamma);
        assert!((dx - oracle).abs() < 0.01 * oracle, "{dx} vs {oracle}");
        // Lorentzian-dominated: close to 2γ/α
        assert!((dx / (2.0 * gamma / p.stark_gradient) - 1.0).abs() < 0.05);
        let xi = participation_fraction(&c, gamma);
        assert!((xi - dx / 4e-6).abs() < 1e-12);
        assert!(xi > 0.3 && xi < 0.34, "{xi}");
    }

    #[test]
    fn participation_limits() {
        let mut p = params();
        p.stark_gradient = 0.0;
        let c = sample_cloud(&CloudGeometry { n_atoms: 10, ..CloudGeometry::paper(1) }, &p).unwrap();
        assert_eq!(participation_fraction(&c, p.gamma()), 1.0);
        let p = params();
        let c = sample_cloud(&CloudGeometry { n_atoms: 10, ..CloudGeometry::paper(1) }, &p).unwrap();
        assert_eq!(participation_fraction(&c, 1e3 * p.gamma()), 1.0);
    }

    #[test]
    fn participation_non_increasing_in_gradient() {
        let p = params();
        let base = sample_cloud(&CloudGeometry { n_atoms: 10, ..CloudGeometry::paper(1) }, &p).unwrap();
        let gamma = p.gamma();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let mut c = base.clone();
            c.profile.stark_gradient = hz(0.05e6) / 1e-6 * k as f64;
            let xi = participation_fraction(&c, gamma);
            assert!(xi <= last + 1e-12, "alpha step {k}");
            last = xi;
        }
    }

    #[test]
    fn effective_coupling_values() {
        let p = params();
        let g = CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 50, seed: 5 };
        let c = sample_cloud(&g, &p).unwrap();
        let none = effective_couplings(&c, C64::new(0.0, 0.0), &p).unwrap();
        assert!(none.eta_tilde.iter().all(|e| e.norm() == 0.0));
        assert_eq!(none.delta_e_tilde, p.delta_e);

        let single = AtomCloud {
            positions: vec![[0.0; 3]],
            eta: vec![hz(190e3)],
            delta_s: vec![0.0],
            geometry: g,
            profile: c.profile,
        };
        let e = effective_couplings(&single, C64::new(hz(200e3), 0.0), &p).unwrap();
        assert!((to_hz(e.eta_tilde[0].re) - 3.8e3).abs() < 1e-6);

        let mut q = p.clone();
        q.delta_intermediate = -p.delta_intermediate;
        let op = C64::new(hz(200e3), 0.0);
        let plus = effective_couplings(&single, op, &p).unwrap();
        let minus = effective_couplings(&single, op, &q).unwrap();
        assert!((plus.eta_tilde[0] + minus.eta_tilde[0]).norm() < 1e-12 * plus.eta_tilde[0].norm());
        assert!((plus.delta_s_tilde[0] + minus.delta_s_tilde[0]).abs() < 1e-9);
        assert!((plus.delta_e_tilde + minus.delta_e_tilde).abs() < 1e-9);

        q.delta_intermediate = 0.0;
        assert!(effective_couplings(&single, op, &q).is_err());
    }

    #[test]
    fn separable_couplings() {
        let p = params();
        let c = sample_cloud(&CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 100, seed: 2 }, &p).unwrap();
        let op = C64::from_polar(hz(150e3), 0.3);
        let e = effective_couplings(&c, op, &p).unwrap();
        let delta = p.delta_intermediate;
        let reference = e.eta_tilde[0] / c.eta[0] / (1.0 + c.delta_s[0] / (2.0 * delta));
        for j in 0..c.len() {
            let r = e.eta_tilde[j] / c.eta[j] / (1.0 + c.delta_s[j] / (2.0 * delta));
            assert!((r - reference).norm() < 1e-12 * reference.norm());
        }
    }

    #[test]
    fn text_round_trip() {
        let p = params();
        let c = sample_cloud(&CloudGeometry { sigma: [4e-6, 4e-6, 24e-6], n_atoms: 40, seed: 9 }, &p).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = AtomCloud::read_text(&buf[..], "mem").unwrap();
        assert_eq!(back, c);
        assert!(AtomCloud::read_text(&b"# sigma_m 1 1 1\n1 2 3\n"[..], "bad").is_err());
    }
}
