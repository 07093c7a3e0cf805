//! Collision channel on a uniform, periodic position grid.
//!
//! Operators are dense `N × N` matrices in the position basis with
//! grid-normalized vectors (`Σ |v_j|² = 1`). Displacements and free
//! evolution act through FFTs, so they are exact on band-limited states.

mod effects;
mod projection;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::packets::GaussianPacket;

pub use effects::{smearing_weight, ChannelOutput, CollisionChannel, SmearingWidths};
pub use projection::{
    build_projection, coherent_projection_expectation, collision_probability, idempotency_defect,
    probability_operator, rate_operator, PhaseSpaceRegion,
};

/// Position grid `x_j = x_0 + j Δx`, `j = 0..N`, periodic with length `NΔx`,
/// together with the coherent-state width `σ` and `ħ`.
#[derive(Clone)]
pub struct HilbertGrid {
    pub n: usize,
    pub dx: f64,
    pub x0: f64,
    pub width: f64,
    pub hbar: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for HilbertGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HilbertGrid")
            .field("n", &self.n)
            .field("dx", &self.dx)
            .field("x0", &self.x0)
            .field("width", &self.width)
            .field("hbar", &self.hbar)
            .finish()
    }
}

impl PartialEq for HilbertGrid {
    fn eq(&self, other: &Self) -> bool {
        (self.n, self.dx, self.x0, self.width, self.hbar) == (other.n, other.dx, other.x0, other.width, other.hbar)
    }
}

impl HilbertGrid {
    /// Requires at least 8 points per `σ`.
    pub fn new(n: usize, dx: f64, x0: f64, width: f64, hbar: f64) -> Result<Self> {
        if n < 8 {
            return Err(invalid("n", "grid needs at least 8 points"));
        }
        for (name, v) in [("dx", dx), ("width", width), ("hbar", hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        if dx > width / 8.0 {
            return Err(Error::GridTooCoarse { what: "position", spacing: dx, limit: width / 8.0 });
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n, dx, x0, width, hbar, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    /// Grid symmetric about `x = 0`.
    pub fn centred(n: usize, dx: f64, width: f64, hbar: f64) -> Result<Self> {
        Self::new(n, dx, -0.5 * n as f64 * dx, width, hbar)
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn position(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn centre(&self) -> f64 {
        self.position(self.n / 2)
    }

    /// Wavenumber of FFT bin `k`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        let kk = if k < self.n.div_ceil(2) { k as f64 } else { k as f64 - self.n as f64 };
        std::f64::consts::TAU * kk / self.length()
    }

    /// Largest representable momentum `πħ/Δx`.
    pub fn nyquist_momentum(&self) -> f64 {
        std::f64::consts::PI * self.hbar / self.dx
    }

    /// Coherent state `|x, p⟩` of width `σ`, sampled and scaled by `√Δx`.
    pub fn coherent_state(&self, x: f64, p: f64) -> DVector<Complex64> {
        let packet = GaussianPacket { x, p, width: self.width, mass: 1.0, hbar: self.hbar };
        let s = self.dx.sqrt();
        DVector::from_iterator(self.n, (0..self.n).map(|j| packet.amplitude(self.position(j)) * s))
    }

    /// Applies `D(a, b) = e^{−iab/2ħ} e^{ibx̂/ħ} e^{−iap̂/ħ}` in place.
    pub fn displace(&self, v: &mut [Complex64], a: f64, b: f64) {
        let (shift, modulation) = self.displacement_phases(a, b);
        self.apply_displacement(v, &shift, &modulation);
    }

    fn displacement_phases(&self, a: f64, b: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let scale = 1.0 / self.n as f64;
        let shift = (0..self.n).map(|k| Complex64::from_polar(scale, -self.wavenumber(k) * a)).collect();
        let global = -a * b / (2.0 * self.hbar);
        let modulation =
            (0..self.n).map(|j| Complex64::from_polar(1.0, b * self.position(j) / self.hbar + global)).collect();
        (shift, modulation)
    }

    fn apply_displacement(&self, v: &mut [Complex64], shift: &[Complex64], modulation: &[Complex64]) {
        self.forward.process(v);
        v.iter_mut().zip(shift).for_each(|(x, s)| *x *= s);
        self.inverse.process(v);
        v.iter_mut().zip(modulation).for_each(|(x, m)| *x *= m);
    }

    /// Free evolution `e^{−i p̂² t/2mħ}` in place.
    pub fn evolve(&self, v: &mut [Complex64], t: f64, mass: f64) {
        let phases = self.evolution_phases(t, mass);
        self.forward.process(v);
        v.iter_mut().zip(&phases).for_each(|(x, s)| *x *= s);
        self.inverse.process(v);
    }

    fn evolution_phases(&self, t: f64, mass: f64) -> Vec<Complex64> {
        let scale = 1.0 / self.n as f64;
        (0..self.n)
            .map(|k| {
                let kk = self.wavenumber(k);
                Complex64::from_polar(scale, -self.hbar * kk * kk * t / (2.0 * mass))
            })
            .collect()
    }

    /// `D(a, b) M D(a, b)†`.
    pub fn displace_operator(&self, m: &DMatrix<Complex64>, a: f64, b: f64) -> DMatrix<Complex64> {
        let (shift, modulation) = self.displacement_phases(a, b);
        self.conjugate_by(m, |v| self.apply_displacement(v, &shift, &modulation))
    }

    /// `U(t) M U(t)†`.
    pub fn evolve_operator(&self, m: &DMatrix<Complex64>, t: f64, mass: f64) -> DMatrix<Complex64> {
        let phases = self.evolution_phases(t, mass);
        self.conjugate_by(m, |v| {
            self.forward.process(v);
            v.iter_mut().zip(&phases).for_each(|(x, s)| *x *= s);
            self.inverse.process(v);
        })
    }

    /// `A M A†` for a linear map `A` given by its in-place action on vectors.
    fn conjugate_by<F: Fn(&mut [Complex64])>(&self, m: &DMatrix<Complex64>, op: F) -> DMatrix<Complex64> {
        let mut a = m.clone();
        a.as_mut_slice().chunks_mut(self.n).for_each(&op);
        let mut b = a.adjoint();
        b.as_mut_slice().chunks_mut(self.n).for_each(&op);
        b.adjoint()
    }

    /// Momentum-space amplitudes (FFT bin order), unit-normalized like `v`.
    pub fn momentum_amplitudes(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut w = v.to_vec();
        self.forward.process(&mut w);
        let s = 1.0 / (self.n as f64).sqrt();
        w.iter_mut().for_each(|x| *x *= s);
        w
    }
}

/// Dense operator over a [`HilbertGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorGrid {
    pub grid: HilbertGrid,
    pub matrix: DMatrix<Complex64>,
}

/// Spectrum summary of a Hermitian operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBounds {
    pub min: f64,
    pub max: f64,
    /// Excess of the largest eigenvalue over one, zero if none.
    pub excess_over_one: f64,
}

impl OperatorGrid {
    pub fn new(grid: HilbertGrid, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != grid.n || matrix.ncols() != grid.n {
            return Err(invalid("matrix", format!("expected {n}×{n}", n = grid.n)));
        }
        Ok(Self { grid, matrix })
    }

    /// Pure state `|v⟩⟨v|`.
    pub fn pure_state(grid: HilbertGrid, v: &DVector<Complex64>) -> Self {
        let matrix = v * v.adjoint();
        Self { grid, matrix }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `max |M − M†|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian_part().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn spectrum_bounds(&self) -> SpectrumBounds {
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        SpectrumBounds { min, max, excess_over_one: (max - 1.0).max(0.0) }
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// `⟨v|M|v⟩`.
    pub fn expectation(&self, v: &DVector<Complex64>) -> Complex64 {
        v.dotc(&(&self.matrix * v))
    }

    /// `Tr(M A)`.
    pub fn trace_with(&self, other: &OperatorGrid) -> Complex64 {
        self.matrix.iter().zip(other.matrix.transpose().iter()).map(|(a, b)| a * b).sum()
    }

    pub fn mean_position(&self) -> f64 {
        (0..self.grid.n).map(|j| self.matrix[(j, j)].re * self.grid.position(j)).sum::<f64>() / self.trace().re
    }

    /// `Tr(M p̂)/Tr(M)` with `p̂` the spectral momentum.
    pub fn mean_momentum(&self) -> f64 {
        let n = self.grid.n;
        let mut cols = self.matrix.clone();
        cols.as_mut_slice().chunks_mut(n).for_each(|c| self.grid.forward.process(c));
        let mut both = cols.adjoint();
        both.as_mut_slice().chunks_mut(n).for_each(|c| self.grid.forward.process(c));
        // `both` is (F M F†)† up to 1/N; its diagonal holds the momentum density.
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let w = both[(k, k)].re;
            num += w * self.grid.hbar * self.grid.wavenumber(k);
            den += w;
        }
        num / den
    }

    /// Operator norm of `M − c·1` restricted to the index range `rows`.
    pub fn distance_to_scalar(&self, c: f64, rows: std::ops::Range<usize>) -> f64 {
        let len = rows.len();
        let block = self.matrix.view((rows.start, rows.start), (len, len)).into_owned()
            - DMatrix::<Complex64>::identity(len, len) * Complex64::new(c, 0.0);
        block.singular_values().max()
    }
}
