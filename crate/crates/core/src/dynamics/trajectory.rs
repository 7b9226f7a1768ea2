use crate::dynamics::integrator::IntegrationStats;
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::io::{BufRead, Read, Write};

/// Amplitudes on the output grid. Per-atom arrays are time-major:
/// element `t * n_atoms + j` is atom `j` at time index `t`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub b0: Vec<C64>,
    pub n_atoms: usize,
    /// c_j, the |s⟩ amplitudes. Optional for large ensembles.
    pub spin: Option<Vec<C64>>,
    /// b_j, the |e⟩ amplitudes. Always stored; emission needs them.
    pub emitter: Vec<C64>,
    /// d_j, the |i⟩ amplitudes (full model only).
    pub intermediate: Option<Vec<C64>>,
    /// p_e(t) = Σ|b_j|²
    pub excited_population: Vec<f64>,
    /// p_s(t) = Σ|c_j|²
    pub spin_population: Vec<f64>,
    pub norm: Vec<f64>,
    /// Probability lost through Γ_e up to each time.
    pub decayed_e: Vec<f64>,
    pub decayed_s: Vec<f64>,
    pub decayed_i: Vec<f64>,
    pub stats: IntegrationStats,
}

/// Anything that can supply b_j(t) on a time grid, one time slice at a time.
pub trait EmitterAmplitudes: Sync {
    fn times(&self) -> &[f64];
    fn n_atoms(&self) -> usize;
    /// Writes b_j(t_index) for all atoms into `out`.
    fn emitter_into(&self, t_index: usize, out: &mut [C64]);
}

impl EmitterAmplitudes for Trajectory {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn n_atoms(&self) -> usize {
        self.n_atoms
    }
    fn emitter_into(&self, t_index: usize, out: &mut [C64]) {
        out.copy_from_slice(self.emitter_at(t_index));
    }
}

const MAGIC: &[u8; 8] = b"RYDTRAJ1";
const VERSION: u32 = 1;
const FLAG_SPIN: u32 = 1;
const FLAG_INTERMEDIATE: u32 = 2;

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn emitter_at(&self, t: usize) -> &[C64] {
        &self.emitter[t * self.n_atoms..(t + 1) * self.n_atoms]
    }

    pub fn spin_at(&self, t: usize) -> Option<&[C64]> {
        self.spin.as_ref().map(|s| &s[t * self.n_atoms..(t + 1) * self.n_atoms])
    }

    pub fn intermediate_at(&self, t: usize) -> Option<&[C64]> {
        self.intermediate.as_ref().map(|s| &s[t * self.n_atoms..(t + 1) * self.n_atoms])
    }

    /// Time series of one atom's |e⟩ amplitude.
    pub fn emitter_series(&self, j: usize) -> Vec<C64> {
        (0..self.len()).map(|t| self.emitter[t * self.n_atoms + j]).collect()
    }

    pub fn spin_series(&self, j: usize) -> Option<Vec<C64>> {
        self.spin.as_ref().map(|s| (0..self.len()).map(|t| s[t * self.n_atoms + j]).collect())
    }

    /// Total loss through all decay channels up to each time.
    pub fn decayed(&self) -> Vec<f64> {
        (0..self.len()).map(|t| self.decayed_e[t] + self.decayed_s[t] + self.decayed_i[t]).collect()
    }

    /// Largest |norm + decayed − 1| over the grid.
    pub fn bookkeeping_error(&self) -> f64 {
        self.decayed().iter().zip(&self.norm).map(|(d, n)| (n + d - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Columns: t, Re b0, Im b0, |b0|², p_e, norm, decayed_e, decayed_s.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rydconv trajectory v1 n_atoms={}", self.n_atoms)?;
        writeln!(w, "# t_s re_b0 im_b0 abs2_b0 p_e norm decayed_e decayed_s")?;
        for i in 0..self.len() {
            let b = self.b0[i];
            writeln!(
                w,
                "{:.12e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e}",
                self.times[i],
                b.re,
                b.im,
                b.norm_sqr(),
                self.excited_population[i],
                self.norm[i],
                self.decayed_e[i],
                self.decayed_s[i]
            )?;
        }
        Ok(())
    }

    /// Reads the columnar text export. Per-atom arrays are not part of it.
    pub fn read_text_summary<R: BufRead>(r: R, source: &str) -> Result<Vec<[f64; 8]>> {
        let mut out = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = s.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| Error::Parse { path: source.into(), message: format!("line {}: {e}", n + 1) })?;
            let row: [f64; 8] = vals.try_into().map_err(|_| Error::Parse {
                path: source.into(),
                message: format!("line {}: expected 8 columns", n + 1),
            })?;
            out.push(row);
        }
        Ok(out)
    }

    /// Little-endian binary dump.
    ///
    /// Layout: magic `RYDTRAJ1`, u32 version, u32 flags (1 = spin, 2 = intermediate),
    /// u64 T, u64 N, then f64 arrays of length T in the order times, norm,
    /// decayed_e, decayed_s, decayed_i, then complex arrays as interleaved
    /// (re, im) f64 pairs: b0 (T), emitter (T·N), spin (T·N, if flagged),
    /// intermediate (T·N, if flagged). Per-atom arrays are time-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let mut flags = 0;
        if self.spin.is_some() {
            flags |= FLAG_SPIN;
        }
        if self.intermediate.is_some() {
            flags |= FLAG_INTERMEDIATE;
        }
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&flags.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_atoms as u64).to_le_bytes())?;
        for arr in [&self.times, &self.norm, &self.decayed_e, &self.decayed_s, &self.decayed_i] {
            write_f64s(&mut w, arr)?;
        }
        write_c64s(&mut w, &self.b0)?;
        write_c64s(&mut w, &self.emitter)?;
        if let Some(s) = &self.spin {
            write_c64s(&mut w, s)?;
        }
        if let Some(d) = &self.intermediate {
            write_c64s(&mut w, d)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, source: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse { path: source.into(), message: m.into() };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a trajectory dump"));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let flags = read_u32(&mut r)?;
        let t = read_u64(&mut r)? as usize;
        let n = read_u64(&mut r)? as usize;
        let times = read_f64s(&mut r, t)?;
        let norm = read_f64s(&mut r, t)?;
        let decayed_e = read_f64s(&mut r, t)?;
        let decayed_s = read_f64s(&mut r, t)?;
        let decayed_i = read_f64s(&mut r, t)?;
        let b0 = read_c64s(&mut r, t)?;
        let emitter = read_c64s(&mut r, t * n)?;
        let spin = if flags & FLAG_SPIN != 0 { Some(read_c64s(&mut r, t * n)?) } else { None };
        let intermediate = if flags & FLAG_INTERMEDIATE != 0 { Some(read_c64s(&mut r, t * n)?) } else { None };
        let excited_population = (0..t).map(|i| emitter[i * n..(i + 1) * n].iter().map(|b| b.norm_sqr()).sum()).collect();
        let spin_population = match &spin {
            Some(s) => (0..t).map(|i| s[i * n..(i + 1) * n].iter().map(|c| c.norm_sqr()).sum()).collect(),
            None => (0..t).map(|i| norm[i] - b0[i].norm_sqr() - emitter[i * n..(i + 1) * n].iter().map(|b| b.norm_sqr()).sum::<f64>()).collect(),
        };
        Ok(Trajectory {
            times,
            b0,
            n_atoms: n,
            spin,
            emitter,
            intermediate,
            excited_population,
            spin_population,
            norm,
            decayed_e,
            decayed_s,
            decayed_i,
            stats: IntegrationStats::default(),
        })
    }
}

fn write_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 8);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn write_c64s<W: Write>(w: &mut W, v: &[C64]) -> Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 16);
    for z in v {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn read_c64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<C64>> {
    let v = read_f64s(r, 2 * n)?;
    Ok(v.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let t = 3;
        let n = 2;
        let emitter: Vec<C64> = (0..t * n).map(|k| C64::new(k as f64 * 0.01, -(k as f64) * 0.02)).collect();
        Trajectory {
            times: vec![0.0, 1.0, 2.0],
            b0: vec![C64::new(1.0, 0.0), C64::new(0.9, 0.1), C64::new(0.8, 0.2)],
            n_atoms: n,
            spin: Some(vec![C64::new(0.0, 0.5); t * n]),
            emitter: emitter.clone(),
            intermediate: None,
            excited_population: (0..t).map(|i| emitter[i * n..(i + 1) * n].iter().map(|b| b.norm_sqr()).sum()).collect(),
            spin_population: vec![0.5; t],
            norm: vec![1.0, 0.99, 0.98],
            decayed_e: vec![0.0, 0.01, 0.02],
            decayed_s: vec![0.0; t],
            decayed_i: vec![0.0; t],
            stats: IntegrationStats::default(),
        }
    }

    #[test]
    fn binary_round_trip() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = Trajectory::read_binary(&buf[..], "mem").unwrap();
        assert_eq!(back.times, tr.times);
        assert_eq!(back.b0, tr.b0);
        assert_eq!(back.emitter, tr.emitter);
        assert_eq!(back.spin, tr.spin);
        assert!(back.intermediate.is_none());
        assert_eq!(back.excited_population, tr.excited_population);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(Trajectory::read_binary(&b"NOTATRAJxxxxxxxxxxxxxxxxxxxx"[..], "mem").is_err());
    }

    #[test]
    fn text_round_trip() {
        let tr = sample();
        let mut buf = Vec::new();
        tr.write_text(&mut buf).unwrap();
        let rows = Trajectory::read_text_summary(&buf[..], "mem").unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[1][1] - 0.9).abs() < 1e-12);
        assert!((rows[2][5] - 0.98).abs() < 1e-12);
    }

    #[test]
    fn series_accessors() {
        let tr = sample();
        assert_eq!(tr.emitter_series(1), vec![tr.emitter[1], tr.emitter[3], tr.emitter[5]]);
        assert_eq!(tr.emitter_at(2), &tr.emitter[4..6]);
        assert!((tr.bookkeeping_error() - 0.0).abs() < 1e-15);
    }
}
