//! Smearing weight, effect operators and Kraus operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{HilbertGrid, OperatorGrid};
use crate::error::{invalid, Error, Result};
use crate::exact_collision::CollisionPair;

/// Eigenvalues of `π̂` in `[-CLAMP_FLOOR, 0)` are treated as zero.
const CLAMP_FLOOR: f64 = 1e-6;
/// Mesh half-width in standard deviations.
const MESH_REACH: f64 = 6.0;

/// `w(x, p) = 2α/(πħ(1−α)²) exp[−2α/(1−α)² (x²/σ² + σ²p²/ħ²)]`.
///
/// At `α = 1` the weight collapses to a point mass and
/// [`Error::EqualMassSingularity`] is returned.
pub fn smearing_weight(alpha: f64, width: f64, hbar: f64, x: f64, p: f64) -> Result<f64> {
    if alpha == 1.0 {
        return Err(Error::EqualMassSingularity);
    }
    if !(alpha > 0.0 && width > 0.0 && hbar > 0.0) {
        return Err(invalid("alpha", "alpha, width and hbar must be positive"));
    }
    let c = 2.0 * alpha / ((1.0 - alpha) * (1.0 - alpha));
    let q = x * x / (width * width) + width * width * p * p / (hbar * hbar);
    Ok(c / (std::f64::consts::PI * hbar) * (-c * q).exp())
}

/// Standard deviations of `w` in position and momentum (zero at `α = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmearingWidths {
    pub x: f64,
    pub p: f64,
}

impl SmearingWidths {
    pub fn new(alpha: f64, width: f64, hbar: f64) -> Self {
        let f = (1.0 - alpha).abs() / (2.0 * alpha.sqrt());
        Self { x: width * f, p: hbar / width * f }
    }
}

/// Effect and Kraus operators of one collision on a [`HilbertGrid`].
///
/// `π̂` is assembled once at the grid centre; every other `π̂(x̃, p̃)` and
/// its square root follow by displacement covariance.
#[derive(Debug, Clone)]
pub struct CollisionChannel {
    pub pair: CollisionPair<f64>,
    pub grid: HilbertGrid,
    /// Mesh points per standard deviation of `w` (at least 6).
    pub points_per_sd: f64,
    pub smearing: SmearingWidths,
    base_effect: DMatrix<Complex64>,
    base_root: DMatrix<Complex64>,
    /// Most negative eigenvalue of the base effect clamped to zero.
    pub clamped_eigenvalue: f64,
}

/// Result of [`CollisionChannel::apply`].
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub rho: OperatorGrid,
    pub trace_error: f64,
    pub mesh_points: usize,
    pub min_eigenvalue: f64,
}

impl CollisionChannel {
    pub fn new(pair: CollisionPair<f64>, grid: HilbertGrid, points_per_sd: f64) -> Result<Self> {
        if (pair.brownian_width - grid.width).abs() > 1e-12 * grid.width {
            return Err(Error::MismatchedWidths { lhs: pair.brownian_width, rhs: grid.width });
        }
        if (pair.hbar - grid.hbar).abs() > 1e-12 * grid.hbar {
            return Err(invalid("hbar", "grid and pair disagree"));
        }
        if !(points_per_sd >= 6.0) {
            return Err(invalid("points_per_sd", "need at least 6 points per standard deviation"));
        }
        let alpha = pair.alpha;
        let smearing = SmearingWidths::new(alpha, grid.width, grid.hbar);
        let centre = grid.centre();
        let base_effect = if alpha == 1.0 {
            let v = grid.coherent_state(centre, 0.0);
            &v * v.adjoint() * Complex64::new(1.0 / (std::f64::consts::TAU * grid.hbar), 0.0)
        } else {
            if smearing.x < grid.dx {
                return Err(Error::GridTooCoarse { what: "smearing weight", spacing: grid.dx, limit: smearing.x });
            }
            let hx = smearing.x / points_per_sd;
            let hp = smearing.p / points_per_sd;
            let m = (MESH_REACH * points_per_sd).ceil() as i64;
            let nodes: Vec<(f64, f64)> =
                (-m..=m).flat_map(|i| (-m..=m).map(move |k| (i as f64 * hx, k as f64 * hp))).collect();
            let norm = hx * hp / (std::f64::consts::TAU * grid.hbar);
            let mut cols = DMatrix::<Complex64>::zeros(grid.n, nodes.len());
            cols.as_mut_slice().par_chunks_mut(grid.n).zip(nodes.par_iter()).for_each(|(col, &(x, p))| {
                let weight = (smearing_weight(alpha, grid.width, grid.hbar, x, p).unwrap_or(0.0) * norm).sqrt();
                let v = grid.coherent_state(centre + x, p);
                col.iter_mut().zip(v.iter()).for_each(|(c, a)| *c = a * weight);
            });
            &cols * cols.adjoint()
        };
        let base_effect = (&base_effect + base_effect.adjoint()) * Complex64::new(0.5, 0.0);
        let (base_root, clamped_eigenvalue) = hermitian_sqrt(&base_effect)?;
        Ok(Self { pair, grid, points_per_sd, smearing, base_effect, base_root, clamped_eigenvalue })
    }

    /// Displacement `(2α/(1+α)(x_g − x̃), 2/(1+α)(p_g − αp̃))` of the Kraus operator.
    pub fn kraus_shift(&self, gas: (f64, f64), x_tilde: f64, p_tilde: f64) -> (f64, f64) {
        let a = self.pair.alpha;
        (2.0 * a / (1.0 + a) * (gas.0 - x_tilde), 2.0 / (1.0 + a) * (gas.1 - a * p_tilde))
    }

    fn offset(&self, x_tilde: f64, p_tilde: f64) -> (f64, f64) {
        (x_tilde - self.grid.centre(), p_tilde)
    }

    /// `π̂(x̃, p̃)`.
    pub fn effect_operator(&self, x_tilde: f64, p_tilde: f64) -> OperatorGrid {
        let (a, b) = self.offset(x_tilde, p_tilde);
        OperatorGrid { grid: self.grid.clone(), matrix: self.grid.displace_operator(&self.base_effect, a, b) }
    }

    /// `√π̂(x̃, p̃)`.
    pub fn effect_root(&self, x_tilde: f64, p_tilde: f64) -> OperatorGrid {
        let (a, b) = self.offset(x_tilde, p_tilde);
        OperatorGrid { grid: self.grid.clone(), matrix: self.grid.displace_operator(&self.base_root, a, b) }
    }

    /// `K_{x_g p_g}(x̃, p̃) = D(shift) √π̂(x̃, p̃)`.
    pub fn kraus(&self, gas: (f64, f64), x_tilde: f64, p_tilde: f64) -> OperatorGrid {
        let root = self.effect_root(x_tilde, p_tilde);
        let (a, b) = self.kraus_shift(gas, x_tilde, p_tilde);
        let mut m = root.matrix;
        let n = self.grid.n;
        m.as_mut_slice().chunks_mut(n).for_each(|c| self.grid.displace(c, a, b));
        OperatorGrid { grid: self.grid.clone(), matrix: m }
    }

    /// `∫∫ dx̃ dp̃ π̂(x̃, p̃)` with `x̃` on a mesh over `x_range` and `p̃` on the
    /// reciprocal lattice of the grid (the whole representable band).
    pub fn integrated_effects(&self, x_range: (f64, f64)) -> OperatorGrid {
        let n = self.grid.n;
        let hx = if self.pair.alpha == 1.0 {
            self.grid.width / (std::f64::consts::SQRT_2 * self.points_per_sd)
        } else {
            self.smearing.x / self.points_per_sd
        };
        let count = ((x_range.1 - x_range.0) / hx).ceil().max(1.0) as usize;
        let hx = (x_range.1 - x_range.0) / count as f64;
        let sum = (0..=count)
            .into_par_iter()
            .map(|i| {
                let w = if i == 0 || i == count { 0.5 } else { 1.0 };
                let x = x_range.0 + i as f64 * hx;
                self.grid.displace_operator(&self.base_effect, x - self.grid.centre(), 0.0) * Complex64::new(w * hx, 0.0)
            })
            .reduce(|| DMatrix::zeros(n, n), |a, b| a + b);
        // Σ_p̃ Δp̃ e^{ip̃(x_j − x_k)/ħ} = (2πħ/Δx) δ_jk on the reciprocal lattice.
        let diag = std::f64::consts::TAU * self.grid.hbar / self.grid.dx;
        let matrix = DMatrix::from_fn(n, n, |j, k| if j == k { sum[(j, j)] * diag } else { Complex64::new(0.0, 0.0) });
        OperatorGrid { grid: self.grid.clone(), matrix }
    }

    /// Applies `ρ ↦ U(t) ∫∫ dx̃ dp̃ K ρ K† U(t)†` for a gas state `(x_g, p_g)`.
    ///
    /// The `(x̃, p̃)` mesh is uniform with `points_per_sd` points per
    /// standard deviation of `w` and reaches 6 standard deviations of the
    /// overlap `⟨ρ, π̂(x̃, p̃)⟩` around the centre of `ρ`.
    pub fn apply(&self, rho: &OperatorGrid, gas: (f64, f64), t: f64) -> Result<ChannelOutput> {
        if rho.grid != self.grid {
            return Err(invalid("rho", "lives on a different grid"));
        }
        let n = self.grid.n;
        let trace_in = rho.trace().re;
        let eig = ((&rho.matrix + rho.matrix.adjoint()) * Complex64::new(0.5, 0.0)).symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let components: Vec<(f64, DVector<Complex64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-14 * top)
            .map(|(k, &l)| (l, eig.eigenvectors.column(k).into_owned()))
            .collect();

        let (mx, vx, mp, vp) = phase_space_moments(&self.grid, &components);
        let (sx, sp) = if self.pair.alpha == 1.0 {
            let s = self.grid.width / std::f64::consts::SQRT_2;
            (s, self.grid.hbar / (self.grid.width * std::f64::consts::SQRT_2))
        } else {
            (self.smearing.x, self.smearing.p)
        };
        let hx = sx / self.points_per_sd;
        let hp = sp / self.points_per_sd;
        let coh_x = self.grid.width * self.grid.width / 2.0;
        let coh_p = self.grid.hbar * self.grid.hbar / (2.0 * self.grid.width * self.grid.width);
        let reach_x = MESH_REACH * (vx + coh_x + sx * sx).sqrt();
        let reach_p = MESH_REACH * (vp + coh_p + sp * sp).sqrt();
        let ix = (reach_x / hx).ceil() as i64;
        let ip = (reach_p / hp).ceil() as i64;
        let nodes: Vec<(f64, f64)> =
            (-ix..=ix).flat_map(|i| (-ip..=ip).map(move |k| (mx + i as f64 * hx, mp + k as f64 * hp))).collect();

        let cell = Complex64::new(hx * hp, 0.0);
        let acc = nodes
            .par_iter()
            .fold(
                || DMatrix::<Complex64>::zeros(n, n),
                |mut acc, &(xt, pt)| {
                    let (a0, b0) = self.offset(xt, pt);
                    let (sa, sb) = self.kraus_shift(gas, xt, pt);
                    for (lambda, v) in &components {
                        let mut u: Vec<Complex64> = v.iter().copied().collect();
                        self.grid.displace(&mut u, -a0, -b0);
                        let mut w = &self.base_root * DVector::from_vec(u);
                        // D(shift)·D(offset) equals D(shift + offset) up to a phase.
                        self.grid.displace(w.as_mut_slice(), a0 + sa, b0 + sb);
                        acc.gerc(cell * *lambda, &w, &w, Complex64::new(1.0, 0.0));
                    }
                    acc
                },
            )
            .reduce(|| DMatrix::zeros(n, n), |a, b| a + b);
        let matrix = self.grid.evolve_operator(&acc, t, self.pair.brownian_mass);
        let out = OperatorGrid { grid: self.grid.clone(), matrix };
        let trace_error = (out.trace().re - trace_in).abs();
        let min_eigenvalue = out.eigenvalues()[0];
        Ok(ChannelOutput { rho: out, trace_error, mesh_points: nodes.len(), min_eigenvalue })
    }
}

/// Centre and variances of a mixed state in position and momentum.
fn phase_space_moments(grid: &HilbertGrid, comps: &[(f64, DVector<Complex64>)]) -> (f64, f64, f64, f64) {
    let (mut w, mut x1, mut x2, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (l, v) in comps {
        for (j, a) in v.iter().enumerate() {
            let d = l * a.norm_sqr();
            let x = grid.position(j);
            w += d;
            x1 += d * x;
            x2 += d * x * x;
        }
        for (k, a) in grid.momentum_amplitudes(v.as_slice()).iter().enumerate() {
            let d = l * a.norm_sqr();
            let p = grid.hbar * grid.wavenumber(k);
            p1 += d * p;
            p2 += d * p * p;
        }
    }
    let (mx, mp) = (x1 / w, p1 / w);
    (mx, (x2 / w - mx * mx).max(0.0), mp, (p2 / w - mp * mp).max(0.0))
}

/// Positive square root of a Hermitian matrix, clamping eigenvalues in
/// `[-1e-6, 0)` to zero. Returns the root and the most negative clamped value.
fn hermitian_sqrt(m: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, f64)> {
    let eig = m.clone().symmetric_eigen();
    let mut worst = 0.0f64;
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &l in eig.eigenvalues.iter() {
        if l < -CLAMP_FLOOR {
            return Err(Error::NegativeEigenvalueBeyondTolerance { value: l, floor: -CLAMP_FLOOR });
        }
        worst = worst.min(l);
        roots.push(Complex64::new(l.max(0.0).sqrt(), 0.0));
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, k| q[(i, k)] * roots[k]);
    Ok((&scaled * q.adjoint(), worst))
}
