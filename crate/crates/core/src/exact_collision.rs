//! Exact hard-core collision of two Gaussian packets with matched widths.
//!
//! With `α σ_g² = σ²` the two-particle Gaussian separates in centre-of-mass
//! and relative coordinates, and the hard wall at `x_g' = x'` is handled by
//! an odd image. In the centre-of-mass frame the solution is
//!
//! ```text
//! ψ(t, x_g', x') = U_g(t)|x_g,p_g⟩ U(t)|x,p⟩ − U_g(t)|−x_g,−p_g⟩ U(t)|−x,−p⟩,   x_g' < x'
//! ```
//!
//! and zero otherwise. [`ExactCollision::wavefunction`] evaluates it in the
//! compact form `A e^Q (e^{−(x_g'−x')B} − e^{(x_g'−x')B})`.
//!
//! Lab-frame inputs are boosted into the centre-of-mass frame and, if the
//! gas particle starts on the right, mirrored. Marginals are mapped back.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::faddeeva::{gaussian_lower_tail, gaussian_upper_tail};
use crate::packets::{classical_collision_map, EvolvedPacket, GaussianPacket, PairLabels};
use crate::quadrature::{integrate, integrate_with_breakpoints, QuadOptions};
use crate::scalar::{lit, to_f64, Real};
use crate::thermal::ThermalGasSpec;

/// Masses, widths and `ħ` of a colliding gas/Brownian pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPair<T> {
    pub brownian_mass: T,
    pub gas_mass: T,
    /// `m_g / m`.
    pub alpha: T,
    pub brownian_width: T,
    pub gas_width: T,
    pub hbar: T,
}

/// Dimensionless validity diagnostics of a collision scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport<T> {
    /// `|x_g − x| / √(σ_g² + σ²)`; large means the packets start apart.
    pub overlap_ratio: T,
    /// `|p_g| σ_g √(1+α) / ħ` in the centre-of-mass frame; large means the
    /// relative velocity dominates its uncertainty.
    pub momentum_ratio: T,
    /// Collision time; infinite for zero relative momentum.
    pub collision_time: T,
    /// `√2 (1+α) n_g ħ / √(π m_g k_B T)`.
    pub ldht_number: T,
    /// `δ / t_c`; large means partial collisions are negligible.
    pub coarse_graining_ratio: T,
    /// Collision probability of the Brownian particle during `δ`.
    pub step_collision_probability: T,
}

impl<T: Real> CollisionPair<T> {
    /// Pair with `m_g = α m` and `σ_g = σ/√α`.
    pub fn matched(brownian_mass: T, alpha: T, brownian_width: T, hbar: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        Self::new(brownian_mass, alpha * brownian_mass, brownian_width, brownian_width / alpha.sqrt(), hbar)
    }

    /// Pair from explicit masses and widths; widths must satisfy
    /// `α σ_g² = σ²` to 1e-12 relative.
    pub fn new(brownian_mass: T, gas_mass: T, brownian_width: T, gas_width: T, hbar: T) -> Result<Self> {
        for (name, v) in [
            ("brownian_mass", brownian_mass),
            ("gas_mass", gas_mass),
            ("brownian_width", brownian_width),
            ("gas_width", gas_width),
            ("hbar", hbar),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        let alpha = gas_mass / brownian_mass;
        let lhs = alpha * gas_width * gas_width;
        let rhs = brownian_width * brownian_width;
        if (lhs - rhs).abs() > lit::<T>(1e-12) * rhs {
            return Err(Error::MismatchedWidths { lhs: to_f64(lhs), rhs: to_f64(rhs) });
        }
        Ok(Self { brownian_mass, gas_mass, alpha, brownian_width, gas_width, hbar })
    }

    pub fn total_mass(&self) -> T {
        self.brownian_mass + self.gas_mass
    }

    pub fn reduced_mass(&self) -> T {
        self.brownian_mass * self.gas_mass / self.total_mass()
    }

    /// `t_c = √(8/(1+α)) σ_g m_g / |p_g|` for centre-of-mass gas momentum `p_g`.
    pub fn collision_time(&self, p_g: T) -> Result<T> {
        if p_g == T::zero() {
            return Err(Error::ZeroRelativeMomentum);
        }
        Ok((lit::<T>(8.0) / (T::one() + self.alpha)).sqrt() * self.gas_width * self.gas_mass / p_g.abs())
    }

    pub fn brownian_packet(&self, x: T, p: T) -> GaussianPacket<T> {
        GaussianPacket { x, p, width: self.brownian_width, mass: self.brownian_mass, hbar: self.hbar }
    }

    pub fn gas_packet(&self, x_g: T, p_g: T) -> GaussianPacket<T> {
        GaussianPacket { x: x_g, p: p_g, width: self.gas_width, mass: self.gas_mass, hbar: self.hbar }
    }

    /// Outgoing labels of the classical collision.
    pub fn collide(&self, labels: PairLabels<T>) -> PairLabels<T> {
        classical_collision_map(self.alpha, labels)
    }

    /// Gas momentum in the centre-of-mass frame.
    pub fn relative_gas_momentum(&self, labels: &PairLabels<T>) -> T {
        (labels.p_g - self.alpha * labels.p) / (T::one() + self.alpha)
    }

    pub fn validity_report(&self, labels: &PairLabels<T>, gas: &ThermalGasSpec<T>, delta: T) -> ValidityReport<T> {
        let one = T::one();
        let p_rel = self.relative_gas_momentum(labels);
        let overlap_ratio = (labels.x_g - labels.x).abs()
            / (self.gas_width * self.gas_width + self.brownian_width * self.brownian_width).sqrt();
        let momentum_ratio = p_rel.abs() * self.gas_width * (one + self.alpha).sqrt() / self.hbar;
        let collision_time = self.collision_time(p_rel).unwrap_or(T::infinity());
        let ldht_number = T::SQRT_2() * (one + self.alpha) * gas.number_density * self.hbar
            / (T::PI() * gas.gas_mass * gas.thermal_energy()).sqrt();
        let rate = gas.collision_rate(labels.p / self.brownian_mass).unwrap_or(T::nan());
        ValidityReport {
            overlap_ratio,
            momentum_ratio,
            collision_time,
            ldht_number,
            coarse_graining_ratio: delta / collision_time,
            step_collision_probability: rate * delta,
        }
    }
}

/// Which particle a marginal refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    Brownian,
    Gas,
}

/// Exact two-particle state of one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactCollision<T> {
    pair: CollisionPair<T>,
    com: PairLabels<T>,
    /// Lab position of the centre of mass at `t = 0`.
    origin: T,
    /// Centre-of-mass velocity.
    velocity: T,
    /// `−1` if the lab frame is mirrored relative to the computation frame.
    parity: T,
    opts: QuadOptions<T>,
}

impl<T: Real> ExactCollision<T> {
    /// Collision in the centre-of-mass frame with Brownian label `(x, p)`;
    /// the gas label is `(−x/α, −p)`.
    pub fn centre_of_mass(pair: CollisionPair<T>, x: T, p: T) -> Result<Self> {
        let labels = PairLabels { x_g: -x / pair.alpha, p_g: -p, x, p };
        Self::from_lab(pair, labels)
    }

    /// Collision from arbitrary lab-frame labels of approaching packets.
    pub fn from_lab(pair: CollisionPair<T>, labels: PairLabels<T>) -> Result<Self> {
        let total = pair.total_mass();
        let velocity = (labels.p_g + labels.p) / total;
        let origin = (pair.gas_mass * labels.x_g + pair.brownian_mass * labels.x) / total;
        let mut com = PairLabels {
            x_g: labels.x_g - origin,
            p_g: labels.p_g - pair.gas_mass * velocity,
            x: labels.x - origin,
            p: labels.p - pair.brownian_mass * velocity,
        };
        if com.x_g == com.x {
            return Err(invalid("labels", "packets start at the same position"));
        }
        let mut parity = T::one();
        if com.x_g > com.x {
            parity = -T::one();
            com = PairLabels { x_g: -com.x_g, p_g: -com.p_g, x: -com.x, p: -com.p };
        }
        if com.p_g <= com.p {
            return Err(Error::NotApproaching);
        }
        // Restore exact centre-of-mass relations against rounding.
        com.p_g = -com.p;
        com.x_g = -com.x / pair.alpha;
        Ok(Self { pair, com, origin, velocity, parity, opts: QuadOptions::default() })
    }

    /// Absolute tolerance of the marginal quadratures (default `1e-8`).
    pub fn with_tolerance(mut self, abs_tol: T) -> Self {
        self.opts = QuadOptions::with_abs_tol(abs_tol);
        self
    }

    pub fn pair(&self) -> &CollisionPair<T> {
        &self.pair
    }

    /// Labels in the (possibly mirrored) centre-of-mass frame.
    pub fn com_labels(&self) -> PairLabels<T> {
        self.com
    }

    pub fn collision_time(&self) -> T {
        self.pair.collision_time(self.com.p_g).expect("approaching packets have nonzero momentum")
    }

    /// Time at which the classical trajectories meet.
    pub fn classical_collision_instant(&self) -> T {
        -self.com.x * self.pair.brownian_mass / self.com.p
    }

    /// Energy `(1+α)(k̃² + α k̄²) ħ²/(2 m_g)` of the eigenstates labelled by
    /// relative wavenumber `k̃` and centre-of-mass wavenumber `k̄`.
    pub fn eigen_energy(&self, k_rel: T, k_com: T) -> T {
        let CollisionPair { alpha, hbar, gas_mass, .. } = self.pair;
        (T::one() + alpha) * (k_rel * k_rel + alpha * k_com * k_com) * hbar * hbar / (lit::<T>(2.0) * gas_mass)
    }

    /// Expansion coefficient of the initial state in the hard-wall
    /// eigenstates `e^{ik̄(x'+αx_g')} sin(k̃(x_g'−x'))`, for `k̃ > 0`.
    ///
    /// The initial state is recovered as
    /// `(i/√2π) ∫dk̄ ∫_0^∞dk̃ ψ̃(k̃,k̄) · 2 sin(k̃(x_g'−x')) e^{ik̄(x'+αx_g')}` on `x_g' < x'`.
    pub fn spectral_amplitude(&self, k_rel: T, k_com: T) -> Complex<T> {
        let CollisionPair { alpha, brownian_width: sigma, hbar, .. } = self.pair;
        let PairLabels { x, p, .. } = self.com;
        let one = T::one();
        let two = lit::<T>(2.0);
        let pre = (one + alpha) * sigma / (T::TAU() * alpha.sqrt()).sqrt();
        let s2 = sigma * sigma;
        let width = (one + alpha) / (two * alpha) * s2;
        let base = Complex::new(-k_com * k_com / two * (one + alpha) * s2, x * p * (one + alpha) / (two * alpha * hbar));
        let kx = k_rel * x * (one + alpha) / alpha;
        let plus = Complex::new(-(k_rel + p / hbar).powi(2) * width, kx);
        let minus = Complex::new(-(k_rel - p / hbar).powi(2) * width, -kx);
        ((base + plus).exp() - (base + minus).exp()) * pre
    }

    fn packets(&self, t: T) -> [EvolvedPacket<T>; 4] {
        let c = &self.com;
        [
            self.pair.gas_packet(c.x_g, c.p_g).evolve(t),
            self.pair.brownian_packet(c.x, c.p).evolve(t),
            self.pair.gas_packet(-c.x_g, -c.p_g).evolve(t),
            self.pair.brownian_packet(-c.x, -c.p).evolve(t),
        ]
    }

    /// Two-particle amplitude at centre-of-mass coordinates.
    pub fn wavefunction(&self, t: T, x_g_prime: T, x_prime: T) -> Complex<T> {
        if x_g_prime >= x_prime {
            return Complex::new(T::zero(), T::zero());
        }
        let one = T::one();
        let two = lit::<T>(2.0);
        let CollisionPair { brownian_mass: m, alpha, brownian_width: sigma, hbar, gas_mass, .. } = self.pair;
        let PairLabels { x_g, p_g, x, p } = self.com;
        let s2 = sigma * sigma;
        let v = hbar * t / m;
        let d = s2 * s2 + v * v;
        let c = Complex::new(s2, -v);
        let y = x + p * t / m;
        let energy = p * p / (two * m) + p_g * p_g / (two * gas_mass);

        let ln_a = Complex::new((sigma * alpha.sqrt().sqrt() / T::PI().sqrt()).ln(), T::zero())
            - Complex::new(s2, v).ln()
            + Complex::new(T::zero(), -(x_g * p_g + x * p) / (two * hbar) - energy * t / hbar)
            - c * ((one + alpha) / alpha * y * y / (two * d));
        let q = -c * ((x_prime * x_prime + alpha * x_g_prime * x_g_prime) / (two * d));
        let b = Complex::new(s2 * y, p * s2 * s2 / hbar - x * v) / d;
        let delta = b * (x_g_prime - x_prime);
        (ln_a + q - delta).exp() - (ln_a + q + delta).exp()
    }

    /// Outgoing product state `U_g(t)|−x_g,−p_g⟩ U(t)|−x,−p⟩` at centre-of-mass
    /// coordinates.
    pub fn outgoing_product(&self, t: T, x_g_prime: T, x_prime: T) -> Complex<T> {
        let [_, _, g_r, b_r] = self.packets(t);
        g_r.amplitude(x_g_prime) * b_r.amplitude(x_prime)
    }

    fn to_com_position(&self, t: T, lab: T) -> T {
        self.parity * (lab - self.origin - self.velocity * t)
    }

    fn to_com_momentum(&self, particle: Particle, lab: T) -> T {
        let mass = match particle {
            Particle::Brownian => self.pair.brownian_mass,
            Particle::Gas => self.pair.gas_mass,
        };
        self.parity * (lab - mass * self.velocity)
    }

    /// Lab-frame mean position of `particle`'s packets: direct and image.
    fn support(&self, particle: Particle, t: T) -> (T, T, T) {
        let [g_d, b_d, g_r, b_r] = self.packets(t);
        let (d, r) = match particle {
            Particle::Brownian => (b_d, b_r),
            Particle::Gas => (g_d, g_r),
        };
        let (c1, c2) = (d.mean_position(), r.mean_position());
        (c1.min(c2), c1.max(c2), d.position_variance().sqrt())
    }

    /// Position density of `particle` at lab position `x` and time `t`.
    pub fn particle_position_marginal(&self, particle: Particle, t: T, x: T) -> Result<T> {
        let xc = self.to_com_position(t, x);
        let other = match particle {
            Particle::Brownian => Particle::Gas,
            Particle::Gas => Particle::Brownian,
        };
        let (lo_c, hi_c, sd) = self.support(other, t);
        let reach = lit::<T>(12.0) * sd;
        let (mut lo, mut hi) = (lo_c - reach, hi_c + reach);
        match particle {
            Particle::Brownian => hi = hi.min(xc),
            Particle::Gas => lo = lo.max(xc),
        }
        if lo >= hi {
            return Ok(T::zero());
        }
        let f = |u: T| {
            let amp = match particle {
                Particle::Brownian => self.wavefunction(t, u, xc),
                Particle::Gas => self.wavefunction(t, xc, u),
            };
            amp.norm_sqr()
        };
        let r = integrate_with_breakpoints(f, lo, hi, &[lo_c, hi_c], &self.opts)?;
        Ok(r.value.max(T::zero()))
    }

    /// Brownian position density at lab position `x`.
    pub fn position_marginal(&self, t: T, x: T) -> Result<T> {
        self.particle_position_marginal(Particle::Brownian, t, x)
    }

    /// Brownian position density from half-line Gaussian integrals over the
    /// gas coordinate, evaluated with the Faddeeva function.
    pub fn position_marginal_closed_form(&self, t: T, x: T) -> T {
        let xc = self.to_com_position(t, x);
        let [g_d, b_d, g_r, b_r] = self.packets(t);
        let (ad, bd, kd) = g_d.log_coefficients();
        let (ar, br, kr) = g_r.log_coefficients();
        let half_line = |a: Complex<T>, b: Complex<T>, k: Complex<T>| gaussian_lower_tail(a, b, k, xc);
        let i_dd = half_line(ad.conj() + ad, bd.conj() + bd, kd.conj() + kd).re;
        let i_rr = half_line(ar.conj() + ar, br.conj() + br, kr.conj() + kr).re;
        let i_dr = half_line(ad.conj() + ar, bd.conj() + br, kd.conj() + kr);
        let (vd, vr) = (b_d.amplitude(xc), b_r.amplitude(xc));
        let cross = vd.conj() * vr * i_dr;
        (vd.norm_sqr() * i_dd + vr.norm_sqr() * i_rr - cross.re * lit(2.0)).max(T::zero())
    }

    /// Momentum density of `particle` at lab momentum `p`.
    ///
    /// The Fourier integral over the particle's own coordinate runs over a
    /// half line and is done in closed form; the remaining coordinate is
    /// integrated by adaptive quadrature.
    pub fn particle_momentum_marginal(&self, particle: Particle, t: T, p: T) -> Result<T> {
        let pc = self.to_com_momentum(particle, p);
        let [g_d, b_d, g_r, b_r] = self.packets(t);
        let hbar = self.pair.hbar;
        let shift = Complex::new(T::zero(), -pc / hbar);
        let norm = (T::TAU() * hbar).sqrt();
        let (own_d, own_r, other_d, other_r, other) = match particle {
            Particle::Brownian => (b_d, b_r, g_d, g_r, Particle::Gas),
            Particle::Gas => (g_d, g_r, b_d, b_r, Particle::Brownian),
        };
        let (ad, bd, kd) = own_d.log_coefficients();
        let (ar, br, kr) = own_r.log_coefficients();
        let amplitude = |u: T| {
            let (td, tr) = match particle {
                Particle::Brownian => (
                    gaussian_upper_tail(ad, bd + shift, kd, u),
                    gaussian_upper_tail(ar, br + shift, kr, u),
                ),
                Particle::Gas => (
                    gaussian_lower_tail(ad, bd + shift, kd, u),
                    gaussian_lower_tail(ar, br + shift, kr, u),
                ),
            };
            (other_d.amplitude(u) * td - other_r.amplitude(u) * tr) / norm
        };
        let (lo_c, hi_c, sd) = self.support(other, t);
        let reach = lit::<T>(12.0) * sd;
        let r = integrate_with_breakpoints(|u| amplitude(u).norm_sqr(), lo_c - reach, hi_c + reach, &[lo_c, hi_c], &self.opts)?;
        Ok(r.value.max(T::zero()))
    }

    /// Brownian momentum density at lab momentum `p`.
    pub fn momentum_marginal(&self, t: T, p: T) -> Result<T> {
        self.particle_momentum_marginal(Particle::Brownian, t, p)
    }

    fn com_widths(&self, t: T) -> (T, T, T) {
        let [_, b_d, _, _] = self.packets(t);
        let var_b = b_d.position_variance();
        let alpha = self.pair.alpha;
        let one = T::one();
        let sd_big = (var_b / (one + alpha)).sqrt();
        let sd_rel = (var_b * (one + alpha) / alpha).sqrt();
        let centre_rel = (b_d.mean_position() * (one + alpha) / alpha).abs();
        (sd_big, sd_rel, centre_rel)
    }

    /// `∫∫ f(x_g', x') dR dr` over `r > 0`, with `x' = R + α r/(1+α)`,
    /// `x_g' = R − r/(1+α)`.
    fn integrate_relative<F>(&self, t: T, tol: T, f: F) -> Result<Complex<T>>
    where
        F: Fn(T, T) -> Complex<T>,
    {
        let (sd_big, sd_rel, centre_rel) = self.com_widths(t);
        let reach = lit::<T>(12.0);
        let one = T::one();
        let alpha = self.pair.alpha;
        let inner_opts = QuadOptions::with_abs_tol(tol / lit(10.0));
        let outer_opts = QuadOptions::with_abs_tol(tol);
        let failure = std::cell::Cell::new(None);
        let outer = |r: T| {
            let g = |big: T| {
                let x_prime = big + alpha * r / (one + alpha);
                let x_g_prime = big - r / (one + alpha);
                f(x_g_prime, x_prime)
            };
            match integrate(g, -reach * sd_big, reach * sd_big, &inner_opts) {
                Ok(v) => v.value,
                Err(e) => {
                    failure.set(Some(e));
                    Complex::new(T::zero(), T::zero())
                }
            }
        };
        let r = integrate_with_breakpoints(outer, T::zero(), centre_rel + reach * sd_rel, &[centre_rel], &outer_opts)?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(r.value)
    }

    /// Two-particle norm by two-dimensional quadrature.
    pub fn norm(&self, t: T, tol: T) -> Result<T> {
        Ok(self.integrate_relative(t, tol, |xg, x| Complex::new(self.wavefunction(t, xg, x).norm_sqr(), T::zero()))?.re)
    }

    /// `|⟨product|ψ(t)⟩|²` with the outgoing product state.
    pub fn outgoing_fidelity(&self, t: T) -> Result<T> {
        // ψ vanishes on x_g' ≥ x', so the half-plane integral is the full overlap.
        let amp = self.integrate_relative(t, lit(1e-10), |xg, x| {
            self.outgoing_product(t, xg, x).conj() * self.wavefunction(t, xg, x)
        })?;
        Ok(amp.norm_sqr().min(T::one()))
    }

    /// Lab-frame mean momentum of `particle`, `⟨ψ|−iħ∂|ψ⟩` by two-dimensional
    /// quadrature.
    pub fn mean_momentum(&self, particle: Particle, t: T) -> Result<T> {
        let [g_d, b_d, g_r, b_r] = self.packets(t);
        let derivative = |e: &EvolvedPacket<T>, u: T| {
            let (a, b, _) = e.log_coefficients();
            e.amplitude(u) * (b - a * (u + u))
        };
        let minus_i_hbar = Complex::new(T::zero(), -self.pair.hbar);
        let value = self.integrate_relative(t, lit(1e-10), |xg, x| {
            let dpsi = match particle {
                Particle::Brownian => g_d.amplitude(xg) * derivative(&b_d, x) - g_r.amplitude(xg) * derivative(&b_r, x),
                Particle::Gas => derivative(&g_d, xg) * b_d.amplitude(x) - derivative(&g_r, xg) * b_r.amplitude(x),
            };
            self.wavefunction(t, xg, x).conj() * dpsi * minus_i_hbar
        })?;
        let mass = match particle {
            Particle::Brownian => self.pair.brownian_mass,
            Particle::Gas => self.pair.gas_mass,
        };
        Ok(self.parity * value.re + mass * self.velocity)
    }
}

pub type CollisionPair64 = CollisionPair<f64>;
pub type ExactCollision64 = ExactCollision<f64>;
pub type ValidityReport64 = ValidityReport<f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::overlap;
    use approx::assert_relative_eq;

    fn fig1_pair() -> CollisionPair<f64> {
        CollisionPair::matched(1.0, 0.3, 4.0, 1.0).unwrap()
    }

    fn fig1() -> ExactCollision<f64> {
        ExactCollision::centre_of_mass(fig1_pair(), 10.0, -2.0).unwrap()
    }

    /// The closed form in its common textbook phase convention: positive constant phase,
    /// real `σ²` in the constant Gaussian, no energy phase. It differs from
    /// the solution only by a time-dependent global phase.
    fn textbook_form(c: &ExactCollision<f64>, t: f64, xg_: f64, x_: f64) -> Complex<f64> {
        if xg_ >= x_ {
            return Complex::new(0.0, 0.0);
        }
        let CollisionPair { brownian_mass: m, alpha, brownian_width: sigma, hbar, .. } = c.pair;
        let PairLabels { x_g, p_g, x, p } = c.com;
        let s2 = sigma * sigma;
        let v = hbar * t / m;
        let d = s2 * s2 + v * v;
        let y = x + p * t / m;
        let pre = sigma * alpha.sqrt().sqrt() / (std::f64::consts::PI.sqrt() * Complex::new(s2, v));
        let phase = Complex::new(0.0, (x_g * p_g + x * p) / (2.0 * hbar)).exp();
        let gauss = (-(Complex::new((1.0 + alpha) / alpha * s2 * y * y, 0.0)
            + Complex::new(s2, -v) * (x_ * x_ + alpha * xg_ * xg_))
            / (2.0 * d))
            .exp();
        let b = Complex::new(s2 * y, p * s2 * s2 / hbar - x * v) / d;
        pre * phase * gauss * ((-(xg_ - x_) * b).exp() - ((xg_ - x_) * b).exp())
    }

    #[test]
    fn collision_time_values() {
        let pair = fig1_pair();
        let tc = pair.collision_time(2.0).unwrap();
        assert_relative_eq!(tc, (8.0f64 / 1.3).sqrt() * (4.0 / 0.3f64.sqrt()) * 0.3 / 2.0, epsilon = 1e-14);
        assert!((tc - 2.718).abs() < 1e-3);
        assert_relative_eq!(pair.collision_time(4.0).unwrap(), tc / 2.0, epsilon = 1e-15);
        assert_eq!(pair.collision_time(0.0), Err(Error::ZeroRelativeMomentum));
        let light = CollisionPair::matched(1.0, 1e-9, 1.0, 1.0).unwrap();
        let tc0 = light.collision_time(1.0).unwrap();
        assert_relative_eq!(tc0, 8f64.sqrt() * light.gas_width * light.gas_mass, max_relative = 1e-8);
        assert_relative_eq!(fig1().collision_time(), tc);
        assert_relative_eq!(fig1().classical_collision_instant(), 5.0);
    }

    #[test]
    fn mismatched_widths_rejected() {
        assert!(matches!(CollisionPair::new(1.0, 0.3, 4.0, 7.0, 1.0), Err(Error::MismatchedWidths { .. })));
        assert!(CollisionPair::new(1.0, 0.3, 4.0, 4.0 / 0.3f64.sqrt(), 1.0).is_ok());
    }

    #[test]
    fn receding_packets_rejected() {
        let pair = fig1_pair();
        let err = ExactCollision::from_lab(pair, PairLabels { x_g: -20.0, p_g: -1.0, x: 10.0, p: 1.0 });
        assert_eq!(err.unwrap_err(), Error::NotApproaching);
    }

    #[test]
    fn closed_form_equals_image_construction() {
        let c = fig1();
        for &t in &[0.0, 1.0, 2.7, 5.0, 13.6] {
            let [g_d, b_d, g_r, b_r] = c.packets(t);
            let mut worst = 0.0f64;
            let mut peak = 0.0f64;
            for i in 0..60 {
                for j in 0..60 {
                    let xg_ = -70.0 + 1.9 * i as f64;
                    let x_ = -35.0 + 1.2 * j as f64;
                    let images = if xg_ < x_ {
                        g_d.amplitude(xg_) * b_d.amplitude(x_) - g_r.amplitude(xg_) * b_r.amplitude(x_)
                    } else {
                        Complex::new(0.0, 0.0)
                    };
                    let closed = c.wavefunction(t, xg_, x_);
                    worst = worst.max((closed - images).norm());
                    peak = peak.max(images.norm());
                }
            }
            assert!(worst < 1e-12 * peak, "t = {t}: {worst:e} vs peak {peak:e}");
        }
    }

    #[test]
    fn textbook_form_agrees_up_to_global_phase() {
        let c = fig1();
        for &t in &[0.0, 2.0, 6.0] {
            let mut ratio: Option<Complex<f64>> = None;
            for i in 0..25 {
                for j in 0..25 {
                    let (xg_, x_) = (-50.0 + 3.0 * i as f64, -20.0 + 1.7 * j as f64);
                    let a = c.wavefunction(t, xg_, x_);
                    let b = textbook_form(&c, t, xg_, x_);
                    assert!((a.norm() - b.norm()).abs() <= 1e-12 * (1.0 + a.norm()));
                    if a.norm() > 1e-6 {
                        let r = b / a;
                        match ratio {
                            None => ratio = Some(r),
                            Some(r0) => assert!((r - r0).norm() < 1e-8, "phase not global at t = {t}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn vanishes_on_and_beyond_the_wall() {
        let c = fig1();
        for &t in &[0.0, 3.0, 5.0, 9.0] {
            for k in -10..10 {
                let x_ = k as f64 * 2.5;
                assert_eq!(c.wavefunction(t, x_, x_), Complex::new(0.0, 0.0));
                assert_eq!(c.wavefunction(t, x_ + 0.5, x_), Complex::new(0.0, 0.0));
                // Continuous approach from the allowed side.
                assert!(c.wavefunction(t, x_ - 1e-9, x_).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn spectral_amplitude_properties() {
        let c = fig1();
        assert!(c.spectral_amplitude(1e-12, 0.1).norm() < 1e-10);
        // Scan: the modulus peaks near k̃ = |p|/ħ, k̄ = 0.
        let mut best = (0.0, 0.0, 0.0);
        for i in 1..400 {
            for j in -50..=50 {
                let (kr, kc) = (i as f64 * 0.01, j as f64 * 0.02);
                let v = c.spectral_amplitude(kr, kc).norm();
                if v > best.0 {
                    best = (v, kr, kc);
                }
            }
        }
        assert!((best.1 - 2.0).abs() < 0.05 && best.2.abs() < 1e-12, "{best:?}");
    }

    /// Reconstruction of the state from its eigenstate expansion, evolved
    /// with the eigen-energies.
    fn reconstruct(c: &ExactCollision<f64>, t: f64, xg_: f64, x_: f64) -> Complex<f64> {
        let alpha = c.pair.alpha;
        let kc_sd = 1.0 / ((1.0 + alpha) * 16.0f64).sqrt();
        let kr_sd = (alpha / ((1.0 + alpha) * 16.0)).sqrt();
        let opts = QuadOptions::with_abs_tol(1e-11);
        let inner = |kc: f64| {
            let f = |kr: f64| {
                let phase = Complex::new(0.0, kc * (x_ + alpha * xg_) - c.eigen_energy(kr, kc) * t);
                c.spectral_amplitude(kr, kc) * phase.exp() * (2.0 * (kr * (xg_ - x_)).sin())
            };
            integrate_with_breakpoints(f, 0.0, 2.0 + 14.0 * kr_sd, &[2.0], &opts).unwrap().value
        };
        let outer = integrate(inner, -14.0 * kc_sd, 14.0 * kc_sd, &opts).unwrap().value;
        Complex::new(0.0, 1.0 / (2.0f64.sqrt() * std::f64::consts::PI)) * outer
    }

    #[test]
    fn eigenstate_expansion_reproduces_product_state_and_evolution() {
        let c = fig1();
        let [g_d, b_d, ..] = c.packets(0.0);
        for &(xg_, x_) in &[(-33.3, 10.0), (-30.0, 12.0), (-36.0, 8.5)] {
            let rec = reconstruct(&c, 0.0, xg_, x_);
            let prod = g_d.amplitude(xg_) * b_d.amplitude(x_);
            assert!((rec - prod).norm() < 1e-4 * prod.norm().max(1e-3), "{rec} vs {prod}");
        }
        for &(t, xg_, x_) in &[(2.5, -20.0, 5.0), (5.0, -4.0, 1.0), (8.0, 10.0, 14.0)] {
            let rec = reconstruct(&c, t, xg_, x_);
            let psi = c.wavefunction(t, xg_, x_);
            assert!((rec - psi).norm() < 1e-6, "t = {t}: {rec} vs {psi}");
        }
    }

    #[test]
    fn initial_state_is_the_product_state() {
        let c = fig1();
        let [g_d, b_d, ..] = c.packets(0.0);
        let n = 512;
        let (xg0, xg1, x0, x1) = (-80.0, 15.0, -10.0, 30.0);
        let (dxg, dx) = ((xg1 - xg0) / n as f64, (x1 - x0) / n as f64);
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in 0..n {
            let xg_ = xg0 + (i as f64 + 0.5) * dxg;
            for j in 0..n {
                let x_ = x0 + (j as f64 + 0.5) * dx;
                let prod = g_d.amplitude(xg_) * b_d.amplitude(x_);
                diff += (c.wavefunction(0.0, xg_, x_) - prod).norm_sqr();
                norm += prod.norm_sqr();
            }
        }
        assert!((diff / norm).sqrt() < 1e-6, "relative L2 {}", (diff / norm).sqrt());
    }

    #[test]
    fn unitarity() {
        let c = fig1();
        let tc = c.collision_time();
        for &t in &[0.0, tc, 3.0 * tc] {
            let n = c.norm(t, 1e-9).unwrap();
            assert!((n - 1.0).abs() < 1e-6, "norm at t = {t}: {n}");
        }
    }

    #[test]
    fn position_marginal_limits() {
        let c = fig1();
        let b0 = c.pair.brownian_packet(10.0, -2.0);
        let mut worst = 0.0f64;
        for i in 0..81 {
            let x = -10.0 + 0.5 * i as f64;
            worst = worst.max((c.position_marginal(0.0, x).unwrap() - b0.amplitude(x).norm_sqr()).abs());
        }
        assert!(worst < 1e-5, "t = 0 sup error {worst:e}");

        let t = 6.0 * c.collision_time();
        let out = c.pair.brownian_packet(-10.0, 2.0).evolve(t);
        let mut worst = 0.0f64;
        for i in 0..81 {
            let x = out.mean_position() - 20.0 + 0.5 * i as f64;
            worst = worst.max((c.position_marginal(t, x).unwrap() - out.amplitude(x).norm_sqr()).abs());
        }
        assert!(worst < 1e-4, "late sup error {worst:e}");
    }

    #[test]
    fn closed_form_marginal_matches_quadrature() {
        let c = fig1();
        for &t in &[0.0, 2.0, 4.5, 5.0, 7.5] {
            for i in 0..40 {
                let x = -25.0 + 1.3 * i as f64;
                let q = c.position_marginal(t, x).unwrap();
                let cf = c.position_marginal_closed_form(t, x);
                assert!((q - cf).abs() < 1e-7, "t = {t}, x = {x}: {q} vs {cf}");
            }
        }
    }

    #[test]
    fn marginals_normalized_and_nonnegative() {
        let c = fig1();
        let opts = QuadOptions::with_abs_tol(1e-9);
        for &t in &[0.0, 5.0, 10.0] {
            let f = |x: f64| c.position_marginal_closed_form(t, x);
            let r = integrate(f, -80.0, 80.0, &opts).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "position norm {}", r.value);
            let g = |p: f64| {
                let v = c.momentum_marginal(t, p).unwrap();
                assert!(v >= 0.0);
                v
            };
            // Near the wall the momentum density has 1/p⁴ tails.
            let r = integrate_with_breakpoints(g, -60.0, 60.0, &[-2.0, 0.0, 2.0], &QuadOptions::with_abs_tol(1e-8)).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "momentum norm {} at t = {t}", r.value);
        }
    }

    #[test]
    fn momentum_marginal_limits() {
        let c = fig1();
        let before = c.pair.brownian_packet(10.0, -2.0).evolve(0.0);
        let t = 6.0 * c.collision_time();
        let after = c.pair.brownian_packet(-10.0, 2.0).evolve(t);
        for i in 0..41 {
            let p = -4.0 + 0.2 * i as f64;
            let m0 = c.momentum_marginal(0.0, p).unwrap();
            assert!((m0 - before.momentum_amplitude(p).norm_sqr()).abs() < 1e-6, "p = {p}");
            let m1 = c.momentum_marginal(t, p).unwrap();
            assert!((m1 - after.momentum_amplitude(p).norm_sqr()).abs() < 1e-4, "p = {p}");
        }
    }

    #[test]
    fn total_momentum_is_conserved() {
        let c = fig1();
        let tc = c.collision_time();
        for &t in &[0.0, tc, 5.0, 3.0 * tc] {
            let pb = c.mean_momentum(Particle::Brownian, t).unwrap();
            let pg = c.mean_momentum(Particle::Gas, t).unwrap();
            assert!((pb + pg).abs() < 1e-6, "t = {t}: {pb} + {pg}");
        }
    }

    #[test]
    fn mean_momentum_matches_momentum_marginal() {
        let c = fig1();
        let opts = QuadOptions::with_abs_tol(1e-8);
        for &t in &[0.0, 4.0, 5.5] {
            let m1 = integrate_with_breakpoints(|p| p * c.momentum_marginal(t, p).unwrap(), -80.0, 80.0, &[-2.0, 0.0, 2.0], &opts)
                .unwrap()
                .value;
            let direct = c.mean_momentum(Particle::Brownian, t).unwrap();
            assert!((m1 - direct).abs() < 1e-4, "t = {t}: {m1} vs {direct}");
        }
    }

    #[test]
    fn outgoing_fidelity_behaviour() {
        let c = fig1();
        let tc = c.collision_time();
        assert!(c.outgoing_fidelity(5.0 * tc).unwrap() >= 0.99);
        let f0 = c.outgoing_fidelity(0.0).unwrap();
        let [g_d, b_d, g_r, b_r] = c.packets(0.0);
        let product_overlap = (overlap(&g_d, &g_r) * overlap(&b_d, &b_r)).norm_sqr();
        assert!(f0 < 1e-12 && product_overlap < 1e-12);
        let mut last = 0.0;
        for k in 0..=20 {
            let f = c.outgoing_fidelity(0.25 * k as f64 * tc).unwrap();
            assert!(f >= last - 1e-9, "fidelity decreased at step {k}");
            last = f;
        }
    }

    #[test]
    fn validity_report_values() {
        let pair = fig1_pair();
        let gas = ThermalGasSpec::new(1.0, 0.01, 0.3, pair.gas_width).unwrap();
        let labels = PairLabels { x_g: -100.0 / 3.0, p_g: 2.0, x: 10.0, p: -2.0 };
        let r = pair.validity_report(&labels, &gas, 50.0);
        assert_relative_eq!(r.overlap_ratio, (10.0 + 100.0 / 3.0) / (16.0 / 0.3 + 16.0f64).sqrt(), epsilon = 1e-12);
        assert!((r.overlap_ratio - 5.20).abs() < 0.01);
        assert!((r.momentum_ratio - 16.65).abs() < 0.01);
        assert_relative_eq!(r.collision_time, pair.collision_time(2.0).unwrap());
        assert!(r.ldht_number > 0.0 && r.step_collision_probability > 0.0);
        let empty = ThermalGasSpec::new(1.0, 0.0, 0.3, pair.gas_width).unwrap();
        let r0 = pair.validity_report(&labels, &empty, 50.0);
        assert_eq!(r0.ldht_number, 0.0);
    }

    #[test]
    fn frame_covariance() {
        // Same relative motion, boosted and mirrored.
        let pair = fig1_pair();
        let com = fig1();
        let boost = 0.7;
        let shift = 4.0;
        let lab = PairLabels {
            x_g: -(-100.0 / 3.0) + shift,
            p_g: -2.0 + pair.gas_mass * boost,
            x: -10.0 + shift,
            p: 2.0 + pair.brownian_mass * boost,
        };
        let c = ExactCollision::from_lab(pair, lab).unwrap();
        let opts = QuadOptions::with_abs_tol(1e-10);
        for &t in &[0.0, 5.0, 9.0] {
            let moments = |e: &ExactCollision<f64>, centre: f64| {
                let m0 = integrate(|x| e.position_marginal_closed_form(t, x), centre - 60.0, centre + 60.0, &opts).unwrap().value;
                let m1 = integrate(|x| x * e.position_marginal_closed_form(t, x), centre - 60.0, centre + 60.0, &opts).unwrap().value;
                (m0, m1 / m0)
            };
            let (n_com, mean_com) = moments(&com, 0.0);
            let (n_lab, mean_lab) = moments(&c, shift + boost * t);
            assert!((n_com - n_lab).abs() < 1e-8);
            assert!((mean_lab - (shift + boost * t - mean_com)).abs() < 1e-7, "t = {t}");
            let p_com = com.mean_momentum(Particle::Brownian, t).unwrap();
            let p_lab = c.mean_momentum(Particle::Brownian, t).unwrap();
            assert!((p_lab - (boost - p_com)).abs() < 1e-6);
            // Quadrature and closed form agree in the lab frame too.
            let x = shift + boost * t + 3.0;
            assert!((c.position_marginal(t, x).unwrap() - c.position_marginal_closed_form(t, x)).abs() < 1e-7);
        }
    }
}
