//! Brute-force spectral solver of the two-particle hard-core problem.
//!
//! The Hamiltonian separates in the centre-of-mass coordinate
//! `R = (α x_g' + x')/(1+α)` (mass `M = m + m_g`) and the relative coordinate
//! `r = x' − x_g'` (reduced mass `μ`). The map has unit Jacobian. `R` is
//! discretized on a periodic grid and propagated with FFTs; `r` lives on
//! `(0, L_r)` with Dirichlet walls and is propagated in the sine basis,
//! which is exactly the odd image extension about `r = 0`. Free evolution
//! is diagonal in both bases, so a single step of any length is exact up
//! to the discretization.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::exact_collision::ExactCollision;
use crate::scalar::normal_cdf;

const DUMP_MAGIC: &[u8; 8] = b"CQBMGRID";
const DUMP_VERSION: u32 = 1;

/// Grid layout: `n_com × n_rel` points, `R` centred on zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub n_com: usize,
    pub n_rel: usize,
    /// Length of the periodic `R` box.
    pub com_extent: f64,
    /// Position `L_r` of the far Dirichlet wall in `r`.
    pub rel_extent: f64,
    /// Reject grids whose `r` spacing violates `Δr < πħ/(4 p_max)`.
    pub enforce_nyquist: bool,
}

impl GridParams {
    /// Grid that keeps both packets inside ±10 widths up to `t_max`, with
    /// the periodic `R` box padded 4× around that support.
    pub fn covering(exact: &ExactCollision<f64>, t_max: f64, n: usize) -> Self {
        let w = Widths::new(exact, t_max);
        let w0 = Widths::new(exact, 0.0);
        let com_extent = 4.0 * 20.0 * w.sd_com;
        let reach = w0.centre_rel.max(w.centre_rel) + 10.0 * w.sd_rel;
        Self { n_com: n, n_rel: n, com_extent, rel_extent: 1.25 * reach, enforce_nyquist: true }
    }

    pub fn d_com(&self) -> f64 {
        self.com_extent / self.n_com as f64
    }

    pub fn d_rel(&self) -> f64 {
        self.rel_extent / (self.n_rel + 1) as f64
    }

    pub fn com_coordinate(&self, i: usize) -> f64 {
        -0.5 * self.com_extent + i as f64 * self.d_com()
    }

    pub fn rel_coordinate(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.d_rel()
    }

    /// Same box with the spacing divided by `factor` along both axes.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n_com: self.n_com * factor, n_rel: (self.n_rel + 1) * factor - 1, ..*self }
    }

    fn validate(&self) -> Result<()> {
        if self.n_com < 2 || self.n_rel < 2 {
            return Err(invalid("grid", "needs at least two points per axis"));
        }
        if !(self.com_extent > 0.0 && self.rel_extent > 0.0) {
            return Err(invalid("grid", "extents must be positive"));
        }
        Ok(())
    }
}

/// Packet scales of a collision at time `t`, in `(R, r)`.
#[derive(Debug, Clone, Copy)]
struct Widths {
    sd_com: f64,
    sd_rel: f64,
    centre_rel: f64,
    max_rel_momentum: f64,
    max_com_momentum: f64,
}

impl Widths {
    fn new(exact: &ExactCollision<f64>, t: f64) -> Self {
        let pair = exact.pair();
        let labels = exact.com_labels();
        let a = pair.alpha;
        let b = pair.brownian_packet(labels.x, labels.p).evolve(t);
        let var = b.position_variance();
        let sd_p = pair.hbar / pair.brownian_width;
        Self {
            sd_com: (var / (1.0 + a)).sqrt(),
            sd_rel: (var * (1.0 + a) / a).sqrt(),
            centre_rel: (b.mean_position() * (1.0 + a) / a).abs(),
            max_rel_momentum: labels.p.abs() + 6.0 * sd_p * (a / (2.0 * (1.0 + a))).sqrt(),
            max_com_momentum: 6.0 * sd_p * ((1.0 + a) / 2.0).sqrt(),
        }
    }
}

/// Two-particle amplitudes on the `(R, r)` grid, row-major with `r` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub params: GridParams,
    pub total_mass: f64,
    pub reduced_mass: f64,
    pub alpha: f64,
    pub hbar: f64,
    pub t: f64,
    pub data: Vec<Complex64>,
}

/// Diagnostics gathered while sampling the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationReport {
    pub norm: f64,
    /// Mass of the sampled product state at `r ≤ 0` (dropped by the wall).
    pub wall_leakage: f64,
    /// Mass of the product state outside the grid box.
    pub truncated_mass: f64,
    pub rel_spacing_limit: f64,
}

impl GridWavefunction {
    /// Samples the incoming product state of `exact` at `t = 0`.
    pub fn discretize(exact: &ExactCollision<f64>, params: GridParams) -> Result<(Self, DiscretizationReport)> {
        params.validate()?;
        let pair = exact.pair();
        let w = Widths::new(exact, 0.0);
        let limit = std::f64::consts::PI * pair.hbar / (4.0 * w.max_rel_momentum);
        if params.enforce_nyquist {
            if params.d_rel() >= limit {
                return Err(Error::GridTooCoarse { what: "relative", spacing: params.d_rel(), limit });
            }
            let com_limit = std::f64::consts::PI * pair.hbar / (4.0 * w.max_com_momentum);
            if params.d_com() >= com_limit {
                return Err(Error::GridTooCoarse { what: "centre-of-mass", spacing: params.d_com(), limit: com_limit });
            }
        }
        let half = 0.5 * params.com_extent;
        let outside_com = 2.0 * normal_cdf(-half / w.sd_com);
        let wall_leakage = normal_cdf(-w.centre_rel / w.sd_rel);
        let beyond_far_wall = normal_cdf((w.centre_rel - params.rel_extent) / w.sd_rel);
        let truncated_mass = outside_com + beyond_far_wall;
        if truncated_mass > 1e-10 {
            return Err(Error::GridTooSmall { what: "grid", mass: truncated_mass });
        }

        let labels = exact.com_labels();
        let g = pair.gas_packet(labels.x_g, labels.p_g);
        let b = pair.brownian_packet(labels.x, labels.p);
        let a = pair.alpha;
        let mut data = vec![Complex64::new(0.0, 0.0); params.n_com * params.n_rel];
        data.par_chunks_mut(params.n_rel).enumerate().for_each(|(i, row)| {
            let big = params.com_coordinate(i);
            for (j, v) in row.iter_mut().enumerate() {
                let r = params.rel_coordinate(j);
                *v = g.amplitude(big - r / (1.0 + a)) * b.amplitude(big + a * r / (1.0 + a));
            }
        });
        let psi = Self {
            params,
            total_mass: pair.total_mass(),
            reduced_mass: pair.reduced_mass(),
            alpha: a,
            hbar: pair.hbar,
            t: 0.0,
            data,
        };
        let norm = psi.norm();
        Ok((psi, DiscretizationReport { norm, wall_leakage, truncated_mass, rel_spacing_limit: limit }))
    }

    /// `(x_g', x')` of grid point `(i, j)`.
    pub fn pair_coordinates(&self, i: usize, j: usize) -> (f64, f64) {
        let big = self.params.com_coordinate(i);
        let r = self.params.rel_coordinate(j);
        (big - r / (1.0 + self.alpha), big + self.alpha * r / (1.0 + self.alpha))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.params.d_com() * self.params.d_rel()
    }

    fn com_wavenumbers(&self) -> Vec<f64> {
        let n = self.params.n_com;
        (0..n)
            .map(|k| {
                let kk = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
                std::f64::consts::TAU * kk / self.params.com_extent
            })
            .collect()
    }

    fn rel_wavenumbers(&self) -> Vec<f64> {
        (1..=self.params.n_rel).map(|k| std::f64::consts::PI * k as f64 / self.params.rel_extent).collect()
    }

    /// Spectral coefficients: FFT along `R`, sine transform along `r`.
    fn to_spectral(&self, plans: &Plans) -> Vec<Complex64> {
        let mut data = self.data.clone();
        plans.sine_rows(&mut data, self.params.n_rel);
        plans.fft_columns(&mut data, self.params.n_com, self.params.n_rel, false);
        data
    }

    fn from_spectral(&mut self, mut data: Vec<Complex64>, plans: &Plans) {
        let (n_com, n_rel) = (self.params.n_com, self.params.n_rel);
        plans.fft_columns(&mut data, n_com, n_rel, true);
        plans.sine_rows(&mut data, n_rel);
        let scale = 1.0 / n_com as f64 * 2.0 / (n_rel + 1) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
        self.data = data;
    }

    /// Free evolution with the hard wall at `r = 0` for a further time `dt ≥ 0`.
    pub fn propagate(&self, dt: f64) -> Result<Self> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("t", format!("must be non-negative, got {dt}")));
        }
        let mut out = self.clone();
        out.t = self.t + dt;
        if dt == 0.0 {
            return Ok(out);
        }
        let plans = Plans::new(self.params.n_com, self.params.n_rel);
        let mut spec = self.to_spectral(&plans);
        let kc = self.com_wavenumbers();
        let kr = self.rel_wavenumbers();
        let (hbar, big_m, mu) = (self.hbar, self.total_mass, self.reduced_mass);
        let rel_phase: Vec<Complex64> =
            kr.iter().map(|k| Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * mu))).collect();
        spec.par_chunks_mut(self.params.n_rel).zip(kc.par_iter()).for_each(|(row, &k)| {
            let com_phase = Complex64::from_polar(1.0, -hbar * k * k * dt / (2.0 * big_m));
            for (v, ph) in row.iter_mut().zip(&rel_phase) {
                *v *= com_phase * ph;
            }
        });
        out.from_spectral(spec, &plans);
        Ok(out)
    }

    /// Kinetic energy expectation, evaluated spectrally.
    pub fn energy(&self) -> f64 {
        let plans = Plans::new(self.params.n_com, self.params.n_rel);
        let spec = self.to_spectral(&plans);
        let kc = self.com_wavenumbers();
        let kr = self.rel_wavenumbers();
        let (mut e, mut w) = (0.0, 0.0);
        for (i, row) in spec.chunks(self.params.n_rel).enumerate() {
            for (j, v) in row.iter().enumerate() {
                let p = v.norm_sqr();
                e += p * self.hbar * self.hbar * (kc[i] * kc[i] / (2.0 * self.total_mass) + kr[j] * kr[j] / (2.0 * self.reduced_mass));
                w += p;
            }
        }
        e / w
    }

    /// Expectation of the total momentum (conjugate to `R`).
    pub fn total_momentum(&self) -> f64 {
        let plans = Plans::new(self.params.n_com, self.params.n_rel);
        let spec = self.to_spectral(&plans);
        let kc = self.com_wavenumbers();
        let (mut p, mut w) = (0.0, 0.0);
        for (i, row) in spec.chunks(self.params.n_rel).enumerate() {
            let s: f64 = row.iter().map(|v| v.norm_sqr()).sum();
            p += s * self.hbar * kc[i];
            w += s;
        }
        p / w
    }

    /// Largest probability current `(ħ/μ) Im(ψ* ∂_r ψ)` through `r = 0`,
    /// with `ψ` and `∂_r ψ` at the wall summed from the sine series.
    pub fn wall_current(&self) -> f64 {
        let plans = Plans::new(self.params.n_com, self.params.n_rel);
        let mut coeffs = self.data.clone();
        plans.sine_rows(&mut coeffs, self.params.n_rel);
        let kr = self.rel_wavenumbers();
        let scale = 2.0 / (self.params.n_rel + 1) as f64;
        coeffs
            .chunks(self.params.n_rel)
            .map(|row| {
                // Every sine mode vanishes at the wall.
                let value = Complex64::new(0.0, 0.0);
                let slope: Complex64 = row.iter().zip(&kr).map(|(c, k)| c * *k).sum::<Complex64>() * scale;
                (self.hbar / self.reduced_mass * (value.conj() * slope).im).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Relative L2 distance to `exact` evaluated at the grid points.
    pub fn distance_to(&self, exact: &ExactCollision<f64>) -> f64 {
        let n_rel = self.params.n_rel;
        let (diff, norm) = self
            .data
            .par_chunks(n_rel)
            .enumerate()
            .map(|(i, row)| {
                let (mut d, mut n) = (0.0, 0.0);
                for (j, v) in row.iter().enumerate() {
                    let (xg, x) = self.pair_coordinates(i, j);
                    let e = exact.wavefunction(self.t, xg, x);
                    d += (v - e).norm_sqr();
                    n += e.norm_sqr();
                }
                (d, n)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (diff / norm).sqrt()
    }

    /// Writes `|ψ|²` with a fixed little-endian header:
    /// magic `CQBMGRID`, `u32` version, `u64 n_com`, `u64 n_rel`,
    /// `f64 R_0, ΔR, r_0, Δr, t`, then `n_com·n_rel` `f64` values, `r` fastest.
    pub fn write_density<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.n_com as u64).to_le_bytes())?;
        w.write_all(&(self.params.n_rel as u64).to_le_bytes())?;
        for v in [self.params.com_coordinate(0), self.params.d_com(), self.params.rel_coordinate(0), self.params.d_rel(), self.t] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.data {
            w.write_all(&c.norm_sqr().to_le_bytes())?;
        }
        Ok(())
    }
}

/// Density frame read back from [`GridWavefunction::write_density`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub n_com: usize,
    pub n_rel: usize,
    pub com_origin: f64,
    pub d_com: f64,
    pub rel_origin: f64,
    pub d_rel: f64,
    pub t: f64,
    pub density: Vec<f64>,
}

impl DensityFrame {
    pub fn read<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(bad("not a density dump"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != DUMP_VERSION {
            return Err(bad("unsupported dump version"));
        }
        let mut b8 = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> io::Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_com = next_u64(&mut r)? as usize;
        let n_rel = next_u64(&mut r)? as usize;
        let mut f = [0.0; 5];
        for v in f.iter_mut() {
            *v = f64::from_bits(next_u64(&mut r)?);
        }
        let mut density = Vec::with_capacity(n_com * n_rel);
        for _ in 0..n_com * n_rel {
            density.push(f64::from_bits(next_u64(&mut r)?));
        }
        Ok(Self { n_com, n_rel, com_origin: f[0], d_com: f[1], rel_origin: f[2], d_rel: f[3], t: f[4], density })
    }
}

/// Outcome of a grid certification run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub t: f64,
    pub relative_l2_error: f64,
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub discretization: DiscretizationReport,
}

/// Propagates the sampled initial state to `t` and measures the distance to
/// the closed form.
pub fn compare_to_analytic(exact: &ExactCollision<f64>, t: f64, params: GridParams) -> Result<Comparison> {
    let (psi0, report) = GridWavefunction::discretize(exact, params)?;
    let psi = psi0.propagate(t)?;
    Ok(Comparison {
        t,
        relative_l2_error: psi.distance_to(exact),
        norm_drift: (psi.norm() - psi0.norm()).abs() / psi0.norm(),
        energy_drift: (psi.energy() - psi0.energy()).abs() / psi0.energy(),
        discretization: report,
    })
}

struct Plans {
    com_forward: std::sync::Arc<dyn Fft<f64>>,
    com_inverse: std::sync::Arc<dyn Fft<f64>>,
    sine: std::sync::Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n_com: usize, n_rel: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            com_forward: planner.plan_fft_forward(n_com),
            com_inverse: planner.plan_fft_inverse(n_com),
            sine: planner.plan_fft_forward(2 * (n_rel + 1)),
        }
    }

    /// Unnormalized DST-I of every row: `S_k = Σ_j v_j sin(π j k/(n+1))`.
    fn sine_rows(&self, data: &mut [Complex64], n: usize) {
        let len = 2 * (n + 1);
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::new(0.0, 0.0); len],
            |buf, row| {
                buf[0] = Complex64::new(0.0, 0.0);
                buf[n + 1] = Complex64::new(0.0, 0.0);
                for (j, v) in row.iter().enumerate() {
                    buf[j + 1] = *v;
                    buf[len - 1 - j] = -v;
                }
                self.sine.process(buf);
                // FFT of the odd extension is −2i S_k.
                for (k, v) in row.iter_mut().enumerate() {
                    *v = buf[k + 1] * Complex64::new(0.0, 0.5);
                }
            },
        );
    }

    fn fft_columns(&self, data: &mut [Complex64], n_com: usize, n_rel: usize, inverse: bool) {
        let plan = if inverse { &self.com_inverse } else { &self.com_forward };
        let mut transposed = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut transposed, n_com, n_rel);
        transposed.par_chunks_mut(n_com).for_each(|col| plan.process(col));
        transpose(&transposed, data, n_rel, n_com);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
        for (r, v) in out.iter_mut().enumerate() {
            *v = src[r * cols + c];
        }
    });
}
