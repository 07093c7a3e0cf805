//! Monte Carlo unraveling with Gaussian trajectories.
//!
//! Each trajectory is a matched-width coherent state labeled by its phase
//! point. Collisions happen as a Poisson process with the flux rate of the
//! packet mixture; at a collision the phase point is pushed through the
//! classical two-body map, which is exact for matched widths.
//!
//! Ensembles are split into chunks of [`CHUNK`] trajectories. Chunk `k` draws
//! from `ChaCha8Rng::seed_from_u64(seed)` on stream `k`, and chunk results
//! are merged in chunk order, so statistics do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::exact_collision::CollisionPair;
use crate::packets::{classical_collision_map, PairLabels};
use crate::scalar::{lit, normal_cdf, to_f64, Real};
use crate::thermal::ThermalGasSpec;

/// Trajectories per rng stream.
pub const CHUNK: usize = 1024;
/// Largest admitted collision probability per step.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;

/// One Gaussian trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState<T> {
    pub x: T,
    pub p: T,
    pub width: T,
    pub mass: T,
    pub t: T,
    /// Free-evolution time since the packet last had width `σ`.
    pub age: T,
}

impl<T: Real> TrajectoryState<T> {
    /// Internal `(⟨x²⟩, ⟨{x,p}⟩)` of the freely spread packet beyond the
    /// coherent floor: `ħ²τ²/(2σ²m²)` and `ħ²τ/(σ²m)`.
    pub fn spreading(&self, hbar: T) -> (T, T) {
        let k = hbar * hbar / (self.width * self.width * self.mass);
        (k * self.age * self.age / (lit::<T>(2.0) * self.mass), k * self.age)
    }
}

/// Where inside a coarse step the collision acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionTiming {
    /// At an instant uniform in `[0, δ]`, at contact (no position jump).
    #[default]
    Uniform,
    /// At `δ/2`, with the gas packet placed where it is at the midpoint for
    /// a collision instant uniform in `[0, δ]`; positions follow the
    /// classical map and jump.
    Midpoint,
}

/// Ensemble averages of the quantum moments with standard errors.
///
/// Moments include the internal spread of each packet, a coherent state
/// freely evolved for its age `τ`: `⟨x²⟩ = E[x² + ħ²τ²/2σ²m²] + σ²/2`,
/// `⟨p²⟩ = E[p²] + ħ²/2σ²`, `⟨{x,p}⟩ = E[2xp + ħ²τ/σ²m]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats<T> {
    pub t: T,
    pub n: usize,
    pub mean_x: T,
    pub mean_p: T,
    pub mean_x2: T,
    pub mean_xp: T,
    pub mean_p2: T,
    pub se_x: T,
    pub se_p: T,
    pub se_x2: T,
    pub se_xp: T,
    pub se_p2: T,
    /// Mean accumulated position-jump contribution to `⟨x²⟩`.
    pub excess_x2: T,
    pub se_excess_x2: T,
}

impl<T: Real> EnsembleStats<T> {
    pub fn position_variance(&self) -> T {
        self.mean_x2 - self.mean_x * self.mean_x
    }

    pub fn momentum_variance(&self) -> T {
        self.mean_p2 - self.mean_p * self.mean_p
    }
}

/// Initial ensemble described by its quantum moments. Labels are drawn from
/// a Gaussian whose variances are the given ones minus the coherent-state floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec<T> {
    pub n: usize,
    pub mean_x: T,
    pub mean_p: T,
    pub var_x: T,
    pub var_p: T,
}

/// Everything a run needs besides the initial ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams<T> {
    pub pair: CollisionPair<T>,
    pub gas: ThermalGasSpec<T>,
    pub delta: T,
    pub horizon: T,
    pub timing: CollisionTiming,
    pub seed: u64,
}

impl<T: Real> TrajectoryParams<T> {
    pub fn validate(&self) -> Result<()> {
        self.gas.validate()?;
        let tol = lit::<T>(1e-9);
        if ((self.gas.gas_mass - self.pair.gas_mass) / self.pair.gas_mass).abs() > tol {
            return Err(invalid("gas_mass", "gas spec and collision pair disagree"));
        }
        if ((self.gas.packet_width - self.pair.gas_width) / self.pair.gas_width).abs() > tol {
            return Err(Error::MismatchedWidths { lhs: to_f64(self.gas.packet_width), rhs: to_f64(self.pair.gas_width) });
        }
        if ((self.gas.hbar - self.pair.hbar) / self.pair.hbar).abs() > tol {
            return Err(invalid("hbar", "gas spec and collision pair disagree"));
        }
        if !(self.delta > T::zero() && self.delta.is_finite()) {
            return Err(invalid("delta", "must be positive and finite"));
        }
        if !(self.horizon >= T::zero() && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be non-negative and finite"));
        }
        Ok(())
    }

    /// Number of coarse steps covering the horizon.
    pub fn steps(&self) -> usize {
        to_f64(self.horizon / self.delta).round() as usize
    }
}

/// Rate of collisions of a localized particle with momentum `p`:
/// `n_g ∫ μ_σg(p_g) |p_g/m_g − p/m| dp_g`.
pub fn collision_rate<T: Real>(p: T, gas: &ThermalGasSpec<T>, pair: &CollisionPair<T>) -> Result<T> {
    gas.collision_rate(p / pair.brownian_mass)
}

/// Upper-tail weight `G(z) = ∫_z^∞ φ(t)(t − a) dt = φ(z) − a Q(z)`.
fn flux_tail(z: f64, a: f64) -> f64 {
    let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    phi - a * normal_cdf(-z)
}

/// Draws `z > a` with density `∝ φ(z)(z − a)` by inverting `G`
/// with Newton steps safeguarded by bisection.
fn sample_flux_side(a: f64, u: f64) -> f64 {
    let target = u * flux_tail(a, a);
    let mut lo = a;
    let mut hi = a.max(0.0) + 1.0;
    while flux_tail(hi, a) > target {
        hi = a + 2.0 * (hi - a);
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let h = flux_tail(z, a) - target;
        if h == 0.0 {
            return z;
        }
        if h > 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = -(-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * (z - a);
        let newton = z - h / slope;
        let next = if slope < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 1e-15 * (1.0 + z.abs()) || hi - lo <= 1e-15 * (1.0 + z.abs()) {
            return next;
        }
        z = next;
    }
    z
}

/// Draws the momentum of the colliding packet from the flux-weighted density
/// `∝ μ_σg(p_g) |p_g/m_g − p/m|`.
pub fn sample_collision_partner<T: Real, R: Rng + ?Sized>(
    p: T,
    gas: &ThermalGasSpec<T>,
    pair: &CollisionPair<T>,
    rng: &mut R,
) -> Result<T> {
    let sd = to_f64(gas.mixing_momentum_variance()?.sqrt());
    let m_g = to_f64(gas.gas_mass);
    let s = sd / m_g;
    let a = to_f64(p / pair.brownian_mass) / s;
    let right = flux_tail(a, a);
    let left = flux_tail(-a, -a);
    let side: f64 = rng.random();
    let u: f64 = rng.random();
    // u ∈ [0, 1): map to (0, 1] so the inversion never targets G = 0 exactly.
    let u = 1.0 - u;
    let z = if side * (left + right) < right { sample_flux_side(a, u) } else { -sample_flux_side(-a, u) };
    Ok(lit(z * s * m_g))
}

/// Outcome counters of one coarse step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub collisions: usize,
}

/// Advances one trajectory by `δ`. Returns the jump contribution
/// `2(x_before − x_start)J + J²` to `(x − x_start)²` (zero without a jump).
fn step_one<T: Real, R: Rng + ?Sized>(
    s: &mut TrajectoryState<T>,
    params: &TrajectoryParams<T>,
    rng: &mut R,
    report: &mut StepReport,
) -> Result<T> {
    let delta = params.delta;
    let m = s.mass;
    let rate = collision_rate(s.p, &params.gas, &params.pair)?;
    let prob = rate * delta;
    if to_f64(prob) > MAX_STEP_PROBABILITY {
        return Err(Error::StepTooLarge { rate_delta: to_f64(prob), limit: MAX_STEP_PROBABILITY });
    }
    let draw: f64 = rng.random();
    if draw >= to_f64(prob) {
        s.x = s.x + s.p * delta / m;
        s.t = s.t + delta;
        s.age = s.age + delta;
        return Ok(T::zero());
    }
    report.collisions += 1;
    let p_g = sample_collision_partner(s.p, &params.gas, &params.pair, rng)?;
    let tau = delta * lit::<T>(rng.random::<f64>());
    let alpha = params.pair.alpha;
    let x_start = s.x;
    let mut excess = T::zero();
    match params.timing {
        CollisionTiming::Uniform => {
            s.x = s.x + s.p * tau / m;
            let out = classical_collision_map(alpha, PairLabels { x_g: s.x, p_g, x: s.x, p: s.p });
            s.p = out.p;
            s.x = s.x + s.p * (delta - tau) / m;
            s.age = delta - tau;
        }
        CollisionTiming::Midpoint => {
            let half = delta / lit(2.0);
            s.x = s.x + s.p * half / m;
            let v_rel = p_g / params.pair.gas_mass - s.p / m;
            let x_g = s.x + v_rel * (half - tau);
            let out = classical_collision_map(alpha, PairLabels { x_g, p_g, x: s.x, p: s.p });
            let jump = out.x - s.x;
            excess = lit::<T>(2.0) * (s.x - x_start) * jump + jump * jump;
            s.x = out.x;
            s.p = out.p;
            s.x = s.x + s.p * half / m;
            s.age = half;
        }
    }
    s.t = s.t + delta;
    Ok(excess)
}

/// Advances every trajectory by one coarse step `δ` with a single rng.
pub fn step_ensemble<T: Real, R: Rng + ?Sized>(
    states: &mut [TrajectoryState<T>],
    params: &TrajectoryParams<T>,
    rng: &mut R,
) -> Result<StepReport> {
    let mut report = StepReport::default();
    for s in states.iter_mut() {
        step_one(s, params, rng, &mut report)?;
    }
    Ok(report)
}

/// Draws the initial labels of `spec.n` trajectories.
pub fn initial_states<T: Real, R: Rng + ?Sized>(
    spec: &EnsembleSpec<T>,
    pair: &CollisionPair<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<TrajectoryState<T>>> {
    let (fx, fp) = coherent_floor(pair);
    let vx = spec.var_x - fx;
    let vp = spec.var_p - fp;
    let slack = lit::<T>(1e-12);
    if vx < -slack * fx || vp < -slack * fp {
        return Err(invalid("ensemble", "variances below the coherent-state floor σ²/2, ħ²/2σ²"));
    }
    let (sx, sp) = (to_f64(vx.max(T::zero()).sqrt()), to_f64(vp.max(T::zero()).sqrt()));
    Ok((0..n)
        .map(|_| {
            let zx: f64 = StandardNormal.sample(rng);
            let zp: f64 = StandardNormal.sample(rng);
            TrajectoryState {
                x: spec.mean_x + lit(sx * zx),
                p: spec.mean_p + lit(sp * zp),
                width: pair.brownian_width,
                mass: pair.brownian_mass,
                t: T::zero(),
                age: T::zero(),
            }
        })
        .collect())
}

/// `(σ²/2, ħ²/2σ²)`.
fn coherent_floor<T: Real>(pair: &CollisionPair<T>) -> (T, T) {
    let two = lit::<T>(2.0);
    let s2 = pair.brownian_width * pair.brownian_width;
    (s2 / two, pair.hbar * pair.hbar / (two * s2))
}

/// Power sums of the recorded quantities of one chunk at one time.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: usize,
    s1: [f64; 6],
    s2: [f64; 6],
}

impl Sums {
    fn add(&mut self, s: &TrajectoryState<f64>, hbar: f64, excess: f64) {
        let (sx2, sxp) = s.spreading(hbar);
        let q = [s.x, s.p, s.x * s.x + sx2, s.x * s.p + 0.5 * sxp, s.p * s.p, excess];
        self.n += 1;
        for i in 0..6 {
            self.s1[i] += q[i];
            self.s2[i] += q[i] * q[i];
        }
    }

    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        for i in 0..6 {
            self.s1[i] += o.s1[i];
            self.s2[i] += o.s2[i];
        }
    }

    fn stats<T: Real>(&self, t: T, pair: &CollisionPair<T>) -> EnsembleStats<T> {
        let n = self.n as f64;
        let mean = |i: usize| self.s1[i] / n;
        let se = |i: usize| {
            let m = mean(i);
            let var = (self.s2[i] / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            (var / n).sqrt()
        };
        let (fx, fp) = coherent_floor(pair);
        let two = lit::<T>(2.0);
        EnsembleStats {
            t,
            n: self.n,
            mean_x: lit(mean(0)),
            mean_p: lit(mean(1)),
            mean_x2: lit::<T>(mean(2)) + fx,
            mean_xp: two * lit::<T>(mean(3)),
            mean_p2: lit::<T>(mean(4)) + fp,
            se_x: lit(se(0)),
            se_p: lit(se(1)),
            se_x2: lit(se(2)),
            se_xp: two * lit::<T>(se(3)),
            se_p2: lit(se(4)),
            excess_x2: lit(mean(5)),
            se_excess_x2: lit(se(5)),
        }
    }
}

/// Runs `spec.n` trajectories over the horizon and records ensemble
/// statistics after every coarse step (and at `t = 0`).
pub fn run<T: Real>(spec: &EnsembleSpec<T>, params: &TrajectoryParams<T>) -> Result<Vec<EnsembleStats<T>>> {
    params.validate()?;
    if spec.n < 2 {
        return Err(invalid("n", "need at least two trajectories"));
    }
    let steps = params.steps();
    let chunks = spec.n.div_ceil(CHUNK);
    let p64 = to_f64_params(params);
    let spec64 = EnsembleSpec {
        n: spec.n,
        mean_x: to_f64(spec.mean_x),
        mean_p: to_f64(spec.mean_p),
        var_x: to_f64(spec.var_x),
        var_p: to_f64(spec.var_p),
    };
    let partial: Vec<Result<Vec<Sums>>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k as u64);
            let size = CHUNK.min(spec.n - k * CHUNK);
            let mut states = initial_states(&spec64, &p64.pair, size, &mut rng)?;
            let mut excess = vec![0.0; size];
            let mut record = Vec::with_capacity(steps + 1);
            let snapshot = |states: &[TrajectoryState<f64>], excess: &[f64]| {
                let mut s = Sums::default();
                states.iter().zip(excess).for_each(|(st, e)| s.add(st, p64.pair.hbar, *e));
                s
            };
            record.push(snapshot(&states, &excess));
            let mut report = StepReport::default();
            for _ in 0..steps {
                for (s, e) in states.iter_mut().zip(excess.iter_mut()) {
                    *e += step_one(s, &p64, &mut rng, &mut report)?;
                }
                record.push(snapshot(&states, &excess));
            }
            Ok(record)
        })
        .collect();
    let mut total = vec![Sums::default(); steps + 1];
    for chunk in partial {
        for (acc, s) in total.iter_mut().zip(chunk?.iter()) {
            acc.merge(s);
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(i, s)| s.stats(params.delta * lit::<T>(i as f64), &params.pair))
        .collect())
}

fn to_f64_params<T: Real>(p: &TrajectoryParams<T>) -> TrajectoryParams<f64> {
    let c = &p.pair;
    let g = &p.gas;
    TrajectoryParams {
        pair: CollisionPair {
            brownian_mass: to_f64(c.brownian_mass),
            gas_mass: to_f64(c.gas_mass),
            alpha: to_f64(c.alpha),
            brownian_width: to_f64(c.brownian_width),
            gas_width: to_f64(c.gas_width),
            hbar: to_f64(c.hbar),
        },
        gas: ThermalGasSpec {
            temperature: to_f64(g.temperature),
            number_density: to_f64(g.number_density),
            gas_mass: to_f64(g.gas_mass),
            packet_width: to_f64(g.packet_width),
            hbar: to_f64(g.hbar),
            k_b: to_f64(g.k_b),
        },
        delta: to_f64(p.delta),
        horizon: to_f64(p.horizon),
        timing: p.timing,
        seed: p.seed,
    }
}

pub type TrajectoryState64 = TrajectoryState<f64>;
pub type EnsembleStats64 = EnsembleStats<f64>;
pub type EnsembleSpec64 = EnsembleSpec<f64>;
pub type TrajectoryParams64 = TrajectoryParams<f64>;
