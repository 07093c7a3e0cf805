//! Moment equations of the slow Brownian particle.
//!
//! The state `(⟨x⟩, ⟨p⟩, ⟨x²⟩, ⟨{x,p}⟩, ⟨p²⟩)` obeys the linear system
//!
//! ```text
//! d⟨x⟩/dt      = ⟨p⟩/m
//! d⟨p⟩/dt      = −f ⟨p⟩
//! d⟨x²⟩/dt     = ⟨{x,p}⟩/m + D_art
//! d⟨{x,p}⟩/dt  = 2⟨p²⟩/m − f ⟨{x,p}⟩
//! d⟨p²⟩/dt     = 2f (m k_B T − ⟨p²⟩)
//! ```
//!
//! with `f = 4 n_g √(2 m_g k_B T)/(√π m)` and
//! `D_art = (n_g/3√π)(2k_BT/m_g)^{3/2} δ²`.

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::thermal::ThermalGasSpec;
use crate::trajectories::EnsembleStats;

/// Ratio `|⟨p⟩/m| / √(k_BT/m_g)` above which the slow-particle warning fires.
pub const SLOW_PARTICLE_WARNING: f64 = 0.3;

/// `f = 4 n_g √(2 m_g k_B T)/(√π m)`.
pub fn friction_constant<T: Real>(gas: &ThermalGasSpec<T>, mass: T) -> Result<T> {
    gas.validate()?;
    if !(mass > T::zero()) {
        return Err(invalid("mass", "must be positive"));
    }
    let kt = gas.thermal_energy();
    Ok(lit::<T>(4.0) * gas.number_density * (lit::<T>(2.0) * gas.gas_mass * kt).sqrt() / (T::PI().sqrt() * mass))
}

/// `D_art = (n_g/3√π)(2k_BT/m_g)^{3/2} δ²`.
pub fn artifact_diffusion<T: Real>(gas: &ThermalGasSpec<T>, delta: T) -> T {
    let v2 = lit::<T>(2.0) * gas.thermal_energy() / gas.gas_mass;
    gas.number_density / (lit::<T>(3.0) * T::PI().sqrt()) * v2 * v2.sqrt() * delta * delta
}

/// Coefficients of the moment equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams<T> {
    pub f: T,
    pub diffusion_coefficient: T,
    pub mass: T,
    pub thermal_energy: T,
    /// Thermal velocity `√(k_BT/m_g)` of the gas, for the slow-particle check.
    pub gas_velocity: T,
}

impl<T: Real> FrictionParams<T> {
    /// Coefficients for a gas and coarse step `δ`; `include_artifact = false`
    /// drops the `D_art` term.
    pub fn from_gas(gas: &ThermalGasSpec<T>, mass: T, delta: T, include_artifact: bool) -> Result<Self> {
        if !(delta >= T::zero() && delta.is_finite()) {
            return Err(invalid("delta", "must be non-negative and finite"));
        }
        let f = friction_constant(gas, mass)?;
        let d = if include_artifact { artifact_diffusion(gas, delta) } else { T::zero() };
        let kt = gas.thermal_energy();
        Ok(Self { f, diffusion_coefficient: d, mass, thermal_energy: kt, gas_velocity: (kt / gas.gas_mass).sqrt() })
    }

    /// Generator `A` and source `b` of `dy/dt = A y + b` in the order
    /// `(x, p, x², {x,p}, p²)`.
    pub fn system(&self) -> ([[T; 5]; 5], [T; 5]) {
        let z = T::zero();
        let (f, m) = (self.f, self.mass);
        let inv_m = T::one() / m;
        let two = lit::<T>(2.0);
        let a = [
            [z, inv_m, z, z, z],
            [z, -f, z, z, z],
            [z, z, z, inv_m, z],
            [z, z, z, -f, two * inv_m],
            [z, z, z, z, -two * f],
        ];
        let b = [z, z, self.diffusion_coefficient, z, two * f * m * self.thermal_energy];
        (a, b)
    }

    /// Largest real part among eigenvalues of the `(p, {x,p}, p²)` block of
    /// the assembled generator.
    pub fn spectral_abscissa(&self) -> T {
        let (a, _) = self.system();
        let idx = [1, 3, 4];
        let block = nalgebra::Matrix3::from_fn(|i, j| to_f64(a[idx[i]][idx[j]]));
        let ev = block.complex_eigenvalues();
        lit(ev.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Slow-particle ratio `|⟨p⟩/m| / √(k_BT/m_g)`.
    pub fn slow_particle_ratio(&self, state: &MomentState<T>) -> T {
        (state.mean_p / self.mass).abs() / self.gas_velocity
    }
}

/// The five tracked moments at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState<T> {
    pub mean_x: T,
    pub mean_p: T,
    pub mean_x2: T,
    /// Symmetrized `⟨{x,p}⟩ = ⟨xp + px⟩`.
    pub mean_xp: T,
    pub mean_p2: T,
    pub t: T,
}

impl<T: Real> MomentState<T> {
    pub fn validate(&self) -> Result<()> {
        let slack = lit::<T>(1e-12);
        if self.mean_x2 - self.mean_x * self.mean_x < -slack * self.mean_x2.abs().max(T::one()) {
            return Err(invalid("mean_x2", "position variance is negative"));
        }
        if self.mean_p2 - self.mean_p * self.mean_p < -slack * self.mean_p2.abs().max(T::one()) {
            return Err(invalid("mean_p2", "momentum variance is negative"));
        }
        Ok(())
    }

    fn to_array(self) -> [T; 5] {
        [self.mean_x, self.mean_p, self.mean_x2, self.mean_xp, self.mean_p2]
    }

    fn from_array(y: [T; 5], t: T) -> Self {
        Self { mean_x: y[0], mean_p: y[1], mean_x2: y[2], mean_xp: y[3], mean_p2: y[4], t }
    }

    pub fn position_variance(&self) -> T {
        self.mean_x2 - self.mean_x * self.mean_x
    }

    pub fn from_stats(s: &EnsembleStats<T>) -> Self {
        Self { mean_x: s.mean_x, mean_p: s.mean_p, mean_x2: s.mean_x2, mean_xp: s.mean_xp, mean_p2: s.mean_p2, t: s.t }
    }
}

/// Integrated trajectory and the slow-particle diagnostic of its start.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries<T> {
    pub states: Vec<MomentState<T>>,
    pub slow_particle_ratio: T,
    pub slow_particle_warning: bool,
}

fn derivative<T: Real>(a: &[[T; 5]; 5], b: &[T; 5], y: &[T; 5]) -> [T; 5] {
    let mut d = *b;
    for i in 0..5 {
        for j in 0..5 {
            d[i] = d[i] + a[i][j] * y[j];
        }
    }
    d
}

fn rk4_step<T: Real>(a: &[[T; 5]; 5], b: &[T; 5], y: [T; 5], h: T) -> [T; 5] {
    let half = h / lit(2.0);
    let axpy = |y: &[T; 5], k: &[T; 5], s: T| {
        let mut o = *y;
        for i in 0..5 {
            o[i] = o[i] + k[i] * s;
        }
        o
    };
    let k1 = derivative(a, b, &y);
    let k2 = derivative(a, b, &axpy(&y, &k1, half));
    let k3 = derivative(a, b, &axpy(&y, &k2, half));
    let k4 = derivative(a, b, &axpy(&y, &k3, h));
    let mut o = y;
    for i in 0..5 {
        o[i] = o[i] + h / lit(6.0) * (k1[i] + lit::<T>(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    o
}

fn check_step<T: Real>(params: &FrictionParams<T>, dt: T) -> Result<()> {
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(invalid("dt", "must be positive and finite"));
    }
    if params.f > T::zero() {
        let limit = lit::<T>(0.01) / params.f;
        if dt > limit {
            return Err(Error::StepTooCoarse { dt: to_f64(dt), limit: to_f64(limit) });
        }
    }
    Ok(())
}

/// Classical 4th-order Runge–Kutta integration from `initial.t` over
/// `horizon`, recording every step (the last step is shortened to land on
/// the horizon).
pub fn integrate<T: Real>(
    initial: &MomentState<T>,
    params: &FrictionParams<T>,
    horizon: T,
    dt: T,
) -> Result<MomentSeries<T>> {
    if !(horizon >= T::zero() && horizon.is_finite()) {
        return Err(invalid("horizon", "must be non-negative and finite"));
    }
    let steps = to_f64(horizon / dt).ceil() as usize;
    let times: Vec<T> = (1..=steps).map(|i| initial.t + (dt * lit::<T>(i as f64)).min(horizon)).collect();
    integrate_at(initial, params, &times, dt)
}

/// Integrates and records at the given increasing `times`, with steps no
/// longer than `dt`. The initial state is always the first record; a
/// leading time equal to `initial.t` is not repeated.
pub fn integrate_at<T: Real>(
    initial: &MomentState<T>,
    params: &FrictionParams<T>,
    times: &[T],
    dt: T,
) -> Result<MomentSeries<T>> {
    initial.validate()?;
    check_step(params, dt)?;
    let (a, b) = params.system();
    let mut y = initial.to_array();
    let mut t = initial.t;
    let mut states = vec![*initial];
    for (i, &target) in times.iter().enumerate() {
        if target < t {
            return Err(invalid("times", "must be increasing and not before the initial state"));
        }
        let span = target - t;
        let n = to_f64(span / dt).ceil().max(0.0) as usize;
        if n > 0 {
            let h = span / lit(n as f64);
            for _ in 0..n {
                y = rk4_step(&a, &b, y, h);
            }
        }
        t = target;
        if !(i == 0 && target == initial.t) {
            states.push(MomentState::from_array(y, t));
        }
    }
    let ratio = params.slow_particle_ratio(initial);
    Ok(MomentSeries { states, slow_particle_ratio: ratio, slow_particle_warning: to_f64(ratio) > SLOW_PARTICLE_WARNING })
}

/// Exact solution of the linear system at `initial.t + t`.
pub fn closed_form<T: Real>(initial: &MomentState<T>, params: &FrictionParams<T>, t: T) -> MomentState<T> {
    let (f, m, d) = (params.f, params.mass, params.diffusion_coefficient);
    let two = lit::<T>(2.0);
    let (x0, p0, x20, c0, p20) = (initial.mean_x, initial.mean_p, initial.mean_x2, initial.mean_xp, initial.mean_p2);
    let end = initial.t + t;
    if f == T::zero() {
        return MomentState {
            mean_x: x0 + p0 * t / m,
            mean_p: p0,
            mean_x2: x20 + c0 * t / m + p20 * t * t / (m * m) + d * t,
            mean_xp: c0 + two * p20 * t / m,
            mean_p2: p20,
            t: end,
        };
    }
    let mkt = m * params.thermal_energy;
    let gap = p20 - mkt;
    let e1 = (-f * t).exp();
    let e2 = (-two * f * t).exp();
    // (1 − e^{−ft})/f and (1 − e^{−2ft})/2f without cancellation.
    let g1 = -(-f * t).exp_m1() / f;
    let g2 = -(-two * f * t).exp_m1() / (two * f);
    let c = c0 * e1 + two / m * (mkt * g1 + gap * (e1 - e2) / f);
    let int_c = c0 * g1 + two / m * (mkt * (t - g1) / f + gap * (g1 - g2) / f);
    MomentState {
        mean_x: x0 + p0 * g1 / m,
        mean_p: p0 * e1,
        mean_x2: x20 + int_c / m + d * t,
        mean_xp: c,
        mean_p2: mkt + gap * e2,
        t: end,
    }
}

/// Long-time growth rate of the position variance, `2k_BT/(m f) + D_art`.
pub fn asymptotic_spreading_rate<T: Real>(params: &FrictionParams<T>) -> T {
    lit::<T>(2.0) * params.thermal_energy / (params.mass * params.f) + params.diffusion_coefficient
}

/// Deviation of the ODE from Monte Carlo estimates in units of the MC
/// standard error, maximized over the shared time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport<T> {
    /// Order `(x, p, x², {x,p}, p²)`.
    pub max_deviation_in_se: [T; 5],
    pub slow_particle_ratio: T,
    pub slow_particle_violation: bool,
}

impl<T: Real> ComparisonReport<T> {
    pub fn worst(&self) -> T {
        self.max_deviation_in_se.iter().copied().fold(T::zero(), T::max)
    }
}

/// Compares an ODE series with Monte Carlo statistics on identical time grids.
/// A moment whose standard error vanishes counts as zero deviation when it
/// agrees to rounding and infinite otherwise.
pub fn compare_to_trajectories<T: Real>(
    ode: &MomentSeries<T>,
    mc: &[EnsembleStats<T>],
) -> Result<ComparisonReport<T>> {
    if ode.states.len() != mc.len() {
        return Err(Error::GridMismatch { reason: format!("{} ODE records vs {} MC records", ode.states.len(), mc.len()) });
    }
    let mut worst = [T::zero(); 5];
    for (o, s) in ode.states.iter().zip(mc) {
        let scale = o.t.abs().max(s.t.abs()).max(T::one());
        if (o.t - s.t).abs() > lit::<T>(1e-9) * scale {
            return Err(Error::GridMismatch { reason: format!("time {} vs {}", o.t, s.t) });
        }
        let pairs = [
            (o.mean_x, s.mean_x, s.se_x),
            (o.mean_p, s.mean_p, s.se_p),
            (o.mean_x2, s.mean_x2, s.se_x2),
            (o.mean_xp, s.mean_xp, s.se_xp),
            (o.mean_p2, s.mean_p2, s.se_p2),
        ];
        for (k, (a, b, se)) in pairs.into_iter().enumerate() {
            let diff = (a - b).abs();
            let dev = if se > T::zero() {
                diff / se
            } else if diff <= lit::<T>(1e-9) * a.abs().max(T::one()) {
                T::zero()
            } else {
                T::infinity()
            };
            worst[k] = worst[k].max(dev);
        }
    }
    Ok(ComparisonReport {
        max_deviation_in_se: worst,
        slow_particle_ratio: ode.slow_particle_ratio,
        slow_particle_violation: ode.slow_particle_warning,
    })
}

pub type MomentState64 = MomentState<f64>;
pub type FrictionParams64 = FrictionParams<f64>;
pub type MomentSeries64 = MomentSeries<f64>;
