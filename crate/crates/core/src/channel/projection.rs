//! Approximate phase-space projection, collision probability and rate operators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{HilbertGrid, OperatorGrid};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breakpoints, kronrod_15_rule, QuadOptions};
use crate::thermal::{mean_abs_shifted_normal, ThermalGasSpec};

/// Set `S(x_g, p_g)` of Brownian phase points `(x, p)` that meet the gas
/// packet within `δ`: `0 < (x − x_g)/(p_g/m_g − p/m) < δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceRegion {
    pub x_g: f64,
    pub p_g: f64,
    pub gas_mass: f64,
    pub brownian_mass: f64,
    pub delta: f64,
}

impl PhaseSpaceRegion {
    pub fn new(x_g: f64, p_g: f64, gas_mass: f64, brownian_mass: f64, delta: f64) -> Result<Self> {
        if !(x_g.is_finite() && p_g.is_finite()) {
            return Err(invalid("gas", "phase point must be finite"));
        }
        if !(gas_mass > 0.0 && brownian_mass > 0.0) {
            return Err(invalid("mass", "masses must be positive"));
        }
        if !(delta.is_finite()) || delta < 0.0 {
            return Err(invalid("delta", format!("must be non-negative and finite, got {delta}")));
        }
        if delta == 0.0 {
            return Err(Error::EmptyRegion);
        }
        Ok(Self { x_g, p_g, gas_mass, brownian_mass, delta })
    }

    pub fn relative_velocity(&self, p: f64) -> f64 {
        self.p_g / self.gas_mass - p / self.brownian_mass
    }

    /// Momentum at which the relative velocity vanishes.
    pub fn kink_momentum(&self) -> f64 {
        self.brownian_mass * self.p_g / self.gas_mass
    }

    /// Position interval of the region at momentum `p`; `None` when the
    /// particles move together.
    pub fn window(&self, p: f64) -> Option<(f64, f64)> {
        let v = self.relative_velocity(p);
        if v == 0.0 {
            return None;
        }
        let end = self.x_g + v * self.delta;
        Some(if v > 0.0 { (self.x_g, end) } else { (end, self.x_g) })
    }

    pub fn contains(&self, x: f64, p: f64) -> bool {
        self.window(p).is_some_and(|(a, b)| a < x && x < b)
    }
}

/// `⟨y|x,p⟩⟨x,p|y'⟩` integrated over `x ∈ (a, b)`, without the `e^{ip(y−y')/ħ}` factor.
fn window_factor(width: f64, window: (f64, f64), mid: f64) -> f64 {
    0.5 * (libm::erf((window.1 - mid) / width) - libm::erf((window.0 - mid) / width))
}

/// `Γ_δ = ∫∫_S dx dp/(2πħ) |x,p⟩⟨x,p|`.
///
/// The position integral is done in closed form; the momentum integral uses
/// fixed 15-point panels over the representable band `|p| < πħ/Δx`, split at
/// the kink of the region boundary.
pub fn build_projection(region: &PhaseSpaceRegion, grid: &HilbertGrid) -> Result<OperatorGrid> {
    let n = grid.n;
    let sigma = grid.width;
    let hbar = grid.hbar;
    let p_max = grid.nyquist_momentum();
    let reach = (12.0 * sigma).min(grid.length());
    let band = (reach / grid.dx).ceil() as usize;
    let panel = std::f64::consts::PI * hbar / reach;

    let kink = region.kink_momentum();
    let mut edges = vec![-p_max];
    if kink > -p_max && kink < p_max {
        edges.push(kink);
    }
    edges.push(p_max);
    let rule: Vec<(f64, f64)> = kronrod_15_rule().collect();
    let mut nodes = Vec::new();
    for w in edges.windows(2) {
        let count = ((w[1] - w[0]) / panel).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / count as f64;
        for i in 0..count {
            let c = w[0] + (i as f64 + 0.5) * h;
            for &(t, wt) in &rule {
                let p = c + 0.5 * h * t;
                if let Some(win) = region.window(p) {
                    nodes.push((p, 0.5 * h * wt / (std::f64::consts::TAU * hbar), win));
                }
            }
        }
    }

    let rows: Vec<Vec<(usize, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = grid.position(j);
            (j..n.min(j + band + 1))
                .map(|k| {
                    let d = y - grid.position(k);
                    let mid = 0.5 * (y + grid.position(k));
                    let envelope = (-d * d / (4.0 * sigma * sigma)).exp() * grid.dx;
                    let s: Complex64 = nodes
                        .iter()
                        .map(|&(p, wt, win)| Complex64::from_polar(wt * window_factor(sigma, win, mid), p * d / hbar))
                        .sum();
                    (k, s * envelope)
                })
                .collect()
        })
        .collect();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (j, row) in rows.into_iter().enumerate() {
        for (k, v) in row {
            m[(j, k)] = v;
            m[(k, j)] = v.conj();
        }
    }
    OperatorGrid::new(grid.clone(), m)
}

/// `⟨x,p|Γ_δ|x,p⟩` in the continuum, by one-dimensional adaptive quadrature:
/// `∫ dp' N(p'; p, ħ²/σ²) ½[erf((b−x)/σ√2) − erf((a−x)/σ√2)]`.
pub fn coherent_projection_expectation(region: &PhaseSpaceRegion, x: f64, p: f64, width: f64, hbar: f64) -> Result<f64> {
    let sd = hbar / width;
    let s2 = width * std::f64::consts::SQRT_2;
    let f = |q: f64| {
        let z = (q - p) / sd;
        let weight = (-0.5 * z * z).exp() / (sd * (std::f64::consts::TAU).sqrt());
        region
            .window(q)
            .map_or(0.0, |(a, b)| weight * 0.5 * (libm::erf((b - x) / s2) - libm::erf((a - x) / s2)))
    };
    let opts = QuadOptions::with_abs_tol(1e-13);
    Ok(integrate_with_breakpoints(f, p - 40.0 * sd, p + 40.0 * sd, &[region.kink_momentum(), p], &opts)?.value)
}

/// `P_δ(x_g, p_g) = n_g μ(p_g) Γ_δ(x_g, p_g)`.
pub fn probability_operator(
    region: &PhaseSpaceRegion,
    gas: &ThermalGasSpec<f64>,
    grid: &HilbertGrid,
) -> Result<OperatorGrid> {
    let mut gamma = build_projection(region, grid)?;
    let weight = gas.number_density * gas.momentum_weight(region.p_g)?;
    gamma.matrix *= Complex64::new(weight, 0.0);
    Ok(gamma)
}

/// `Tr[ρ P_δ(x_g, p_g)]`, the probability of a collision with the gas
/// packet `(x_g, p_g)` during `δ`.
pub fn collision_probability(rho: &OperatorGrid, region: &PhaseSpaceRegion, gas: &ThermalGasSpec<f64>) -> Result<f64> {
    let p = probability_operator(region, gas, &rho.grid)?;
    Ok(rho.trace_with(&p).re)
}

/// Aggregated rate `R = P_δ/δ` with `P_δ = ∫∫ dx_g dp_g P_δ(x_g, p_g)`.
///
/// `R` is diagonal in momentum: its symbol at momentum `k` is
/// `n_g E|p_g/m_g − (k + η)/m|` with `p_g ~ μ_σg` and `η` the momentum
/// spread of a coherent state, `η ~ N(0, ħ²/2σ²)`.
pub fn rate_operator(gas: &ThermalGasSpec<f64>, brownian_mass: f64, grid: &HilbertGrid) -> Result<OperatorGrid> {
    if !(brownian_mass > 0.0) {
        return Err(invalid("brownian_mass", "must be positive"));
    }
    let n = grid.n;
    let s_gas = gas.mixing_momentum_variance()? / (gas.gas_mass * gas.gas_mass);
    let s_coh = grid.hbar * grid.hbar / (2.0 * grid.width * grid.width * brownian_mass * brownian_mass);
    let s = (s_gas + s_coh).sqrt();
    // Circulant in position: R_jl = c[(j − l) mod N], c = IDFT of the symbol.
    let mut c: Vec<Complex64> = (0..n)
        .map(|k| {
            let u = grid.hbar * grid.wavenumber(k) / brownian_mass;
            Complex64::new(gas.number_density * mean_abs_shifted_normal(s, u), 0.0)
        })
        .collect();
    grid.inverse.process(&mut c);
    let inv_n = 1.0 / n as f64;
    let m = DMatrix::from_fn(n, n, |j, l| c[(j + n - l) % n] * inv_n);
    OperatorGrid::new(grid.clone(), m)
}

/// `⟨v|Γ²|v⟩ − ⟨v|Γ|v⟩`: zero for a true projection, negative otherwise.
pub fn idempotency_defect(gamma: &OperatorGrid, v: &DVector<Complex64>) -> f64 {
    let gv = &gamma.matrix * v;
    gv.norm_squared() - v.dotc(&gv).re
}
