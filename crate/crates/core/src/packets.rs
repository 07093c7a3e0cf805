//! Minimum-uncertainty wave packets and the classical collision map.
//!
//! Convention: a packet labelled `(x, p)` with width `σ` has amplitude
//!
//! ```text
//! ⟨x'|x,p⟩ = e^{-ixp/2ħ} (√π σ)^{-1/2} e^{ix'p/ħ} e^{-(x'-x)²/2σ²}
//! ```
//!
//! so its position density has variance `σ²/2` and its momentum density
//! variance `ħ²/(2σ²)`. The global phase `e^{-ixp/2ħ}` makes the packet
//! equal to a Glauber-displaced vacuum.

use num_complex::Complex;
use num_traits::Num;

use crate::error::{invalid, Result};
use crate::faddeeva::gaussian_full_integral;
use crate::scalar::{lit, Real};

/// Gaussian packet `|x, p⟩_σ` of a particle with mass `mass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket<T> {
    pub x: T,
    pub p: T,
    pub width: T,
    pub mass: T,
    pub hbar: T,
}

/// A packet after free evolution for time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolvedPacket<T> {
    pub packet: GaussianPacket<T>,
    pub t: T,
}

impl<T: Real> GaussianPacket<T> {
    pub fn new(x: T, p: T, width: T, mass: T, hbar: T) -> Result<Self> {
        if !(width > T::zero() && width.is_finite()) {
            return Err(invalid("width", format!("must be positive, got {width}")));
        }
        if !(mass > T::zero() && mass.is_finite()) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(hbar > T::zero() && hbar.is_finite()) {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        if !(x.is_finite() && p.is_finite()) {
            return Err(invalid("center", "position and momentum must be finite"));
        }
        Ok(Self { x, p, width, mass, hbar })
    }

    pub fn amplitude(&self, x_prime: T) -> Complex<T> {
        self.evolve(T::zero()).amplitude(x_prime)
    }

    pub fn evolve(&self, t: T) -> EvolvedPacket<T> {
        EvolvedPacket { packet: *self, t }
    }

    /// Same packet with a new phase-space label.
    pub fn relabel(&self, x: T, p: T) -> Self {
        Self { x, p, ..*self }
    }
}

impl<T: Real> EvolvedPacket<T> {
    /// Complex width parameter `σ² + iħt/m`.
    pub fn complex_width(&self) -> Complex<T> {
        let k = &self.packet;
        Complex::new(k.width * k.width, k.hbar * self.t / k.mass)
    }

    /// `⟨x̂⟩ = x + pt/m`.
    pub fn mean_position(&self) -> T {
        self.packet.x + self.packet.p * self.t / self.packet.mass
    }

    pub fn mean_momentum(&self) -> T {
        self.packet.p
    }

    /// `(σ² + ħ²t²/(m²σ²))/2`.
    pub fn position_variance(&self) -> T {
        let k = &self.packet;
        let s2 = k.width * k.width;
        let v = k.hbar * self.t / k.mass;
        (s2 + v * v / s2) / lit(2.0)
    }

    pub fn momentum_variance(&self) -> T {
        let k = &self.packet;
        k.hbar * k.hbar / (lit::<T>(2.0) * k.width * k.width)
    }

    /// Amplitude `⟨x'|U(t)|x,p⟩`.
    pub fn amplitude(&self, x_prime: T) -> Complex<T> {
        let k = &self.packet;
        let c = self.complex_width();
        let d = x_prime - self.mean_position();
        let phase = k.p * x_prime / k.hbar - k.x * k.p / (lit::<T>(2.0) * k.hbar)
            - k.p * k.p * self.t / (lit::<T>(2.0) * k.mass * k.hbar);
        let norm = k.width / (T::PI().sqrt() * k.width).sqrt();
        let expo = -Complex::new(d * d, T::zero()) / (c * lit::<T>(2.0)) + Complex::new(T::zero(), phase);
        expo.exp() * norm / c.sqrt()
    }

    /// Amplitude in the momentum representation, `⟨p'|U(t)|x,p⟩`.
    pub fn momentum_amplitude(&self, p_prime: T) -> Complex<T> {
        let k = &self.packet;
        let two = lit::<T>(2.0);
        let dp = p_prime - k.p;
        let mag = (k.width / (T::PI().sqrt() * k.hbar)).sqrt()
            * (-dp * dp * k.width * k.width / (two * k.hbar * k.hbar)).exp();
        let phase = -k.x * k.p / (two * k.hbar) - dp * k.x / k.hbar
            - p_prime * p_prime * self.t / (two * k.mass * k.hbar);
        Complex::from_polar(mag, phase)
    }

    /// Coefficients `(A, B, K)` with `amplitude(x') = exp(-A x'² + B x' + K)`.
    pub fn log_coefficients(&self) -> (Complex<T>, Complex<T>, Complex<T>) {
        let k = &self.packet;
        let two = lit::<T>(2.0);
        let c = self.complex_width();
        let x0 = Complex::new(self.mean_position(), T::zero());
        let a = Complex::new(T::one(), T::zero()) / (c * two);
        let b = x0 / c + Complex::new(T::zero(), k.p / k.hbar);
        let log_norm = (k.width / (T::PI().sqrt() * k.width).sqrt()).ln();
        let phase = -k.x * k.p / (two * k.hbar) - k.p * k.p * self.t / (two * k.mass * k.hbar);
        let kk = Complex::new(log_norm, phase) - c.ln() / two - x0 * x0 / (c * two);
        (a, b, kk)
    }
}

/// Inner product `⟨a|b⟩` of two evolved packets sharing `ħ`.
pub fn overlap<T: Real>(a: &EvolvedPacket<T>, b: &EvolvedPacket<T>) -> Complex<T> {
    let (aa, ba, ka) = a.log_coefficients();
    let (ab, bb, kb) = b.log_coefficients();
    gaussian_full_integral(aa.conj() + ab, ba.conj() + bb, ka.conj() + kb)
}

/// Phase-space labels of a gas/Brownian pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairLabels<S> {
    pub x_g: S,
    pub p_g: S,
    pub x: S,
    pub p: S,
}

/// Classical hard-core collision of a gas particle and a Brownian particle
/// with mass ratio `alpha = m_g/m`.
///
/// Works over any field, so exact rational arithmetic can be used to check
/// conservation laws.
pub fn classical_collision_map<S: Num + Clone>(alpha: S, labels: PairLabels<S>) -> PairLabels<S> {
    let one = S::one();
    let two = one.clone() + one.clone();
    let denom = one.clone() + alpha.clone();
    let rest = one - alpha.clone();
    let PairLabels { x_g, p_g, x, p } = labels;
    PairLabels {
        x_g: (two.clone() * x.clone() - rest.clone() * x_g.clone()) / denom.clone(),
        x: (two.clone() * alpha.clone() * x_g + rest.clone() * x) / denom.clone(),
        p_g: (two.clone() * alpha * p.clone() - rest.clone() * p_g.clone()) / denom.clone(),
        p: (two * p_g + rest * p) / denom,
    }
}

pub type GaussianPacket64 = GaussianPacket<f64>;
pub type EvolvedPacket64 = EvolvedPacket<f64>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions, QuadResult};
    use approx::assert_relative_eq;
    use num::BigRational;
    use proptest::prelude::*;
    use rustfft::FftPlanner;

    fn packet(x: f64, p: f64) -> GaussianPacket<f64> {
        GaussianPacket::new(x, p, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn peak_magnitude_and_real_at_origin() {
        let k = packet(3.0, -1.5);
        let peak = k.amplitude(3.0).norm();
        assert_relative_eq!(peak, (std::f64::consts::PI * 16.0).powf(-0.25), epsilon = 1e-15);
        let rest = packet(0.0, 0.0);
        for i in -20..=20 {
            let a = rest.amplitude(i as f64 * 0.7);
            assert!(a.re > 0.0 && a.im == 0.0);
        }
    }

    #[test]
    fn normalized_by_quadrature() {
        let k = packet(2.0, 0.8);
        let f = |x: f64| k.amplitude(x).norm_sqr();
        let r: QuadResult<f64, f64> = integrate(f, 2.0 - 40.0, 2.0 + 40.0, &QuadOptions::with_abs_tol(1e-13)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evolution_at_zero_is_identity() {
        let k = packet(1.0, 2.0);
        for i in -10..=10 {
            let x = i as f64;
            assert_eq!(k.evolve(0.0).amplitude(x), k.amplitude(x));
        }
        let e = k.evolve(3.0);
        assert_relative_eq!(e.mean_position(), 1.0 + 2.0 * 3.0);
    }

    #[test]
    fn log_coefficients_reproduce_amplitude() {
        let e = GaussianPacket::new(-3.0, 1.3, 2.0, 0.7, 1.0).unwrap().evolve(1.9);
        let (a, b, k) = e.log_coefficients();
        for i in -20..=20 {
            let x = i as f64 * 0.5;
            let direct = e.amplitude(x);
            let via = (-a * x * x + b * x + k).exp();
            assert!((direct - via).norm() < 1e-13);
        }
    }

    #[test]
    fn momentum_amplitude_is_fourier_transform() {
        let e = GaussianPacket::new(1.0, -0.6, 1.5, 2.0, 1.0).unwrap().evolve(2.5);
        let opts = QuadOptions::with_abs_tol(1e-12);
        for &pp in &[-1.5, -0.6, 0.0, 0.4] {
            let f = |x: f64| e.amplitude(x) * Complex::new(0.0, -pp * x).exp();
            let r: QuadResult<f64, Complex<f64>> = integrate(f, -40.0, 40.0, &opts).unwrap();
            let ft = r.value / (std::f64::consts::TAU).sqrt();
            assert!((ft - e.momentum_amplitude(pp)).norm() < 1e-10, "{ft} vs {}", e.momentum_amplitude(pp));
        }
    }

    #[test]
    fn free_spreading_matches_fft_propagation() {
        let k = GaussianPacket::new(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let t = 4.0;
        let n = 4096;
        let len = 200.0;
        let dx = len / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -len / 2.0 + i as f64 * dx).collect();
        let mut buf: Vec<Complex<f64>> = xs.iter().map(|&x| k.amplitude(x)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            let jj = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            let kk = std::f64::consts::TAU * jj / len;
            *v *= Complex::new(0.0, -kk * kk * t / 2.0).exp() / n as f64;
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let dens: Vec<f64> = buf.iter().map(|c| c.norm_sqr() * dx).collect();
        let mean: f64 = dens.iter().zip(&xs).map(|(d, x)| d * x).sum();
        let var: f64 = dens.iter().zip(&xs).map(|(d, x)| d * (x - mean) * (x - mean)).sum();
        let e = k.evolve(t);
        assert!((mean - e.mean_position()).abs() < 1e-6);
        assert!((var - e.position_variance()).abs() < 1e-6, "{var} vs {}", e.position_variance());
        let max_err = xs
            .iter()
            .zip(&buf)
            .map(|(&x, &c)| (c - e.amplitude(x)).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9);
    }

    #[test]
    fn overlap_properties() {
        let a = GaussianPacket::<f64>::new(0.5, 0.3, 1.2, 1.0, 1.0).unwrap().evolve(0.7);
        assert_relative_eq!(overlap(&a, &a).re, 1.0, epsilon = 1e-13);
        assert!(overlap(&a, &a).im.abs() < 1e-13);
        let far = GaussianPacket::new(60.0, 0.3, 1.2, 1.0, 1.0).unwrap().evolve(0.7);
        assert!(overlap(&a, &far).norm() < 1e-12);
    }

    #[test]
    fn overlap_matches_quadrature() {
        let a = GaussianPacket::new(0.5, 0.3, 1.2, 1.0, 1.0).unwrap().evolve(0.7);
        let b = GaussianPacket::new(-0.4, -0.8, 0.9, 1.0, 1.0).unwrap().evolve(1.6);
        let f = |x: f64| a.amplitude(x).conj() * b.amplitude(x);
        let r: QuadResult<f64, Complex<f64>> = integrate(f, -40.0, 40.0, &QuadOptions::with_abs_tol(1e-13)).unwrap();
        let o = overlap(&a, &b);
        assert!((r.value - o).norm() < 1e-8);
        assert!(o.norm() <= 1.0);
    }

    #[test]
    fn equal_masses_exchange_labels() {
        let out = classical_collision_map(1.0, PairLabels { x_g: -3.0, p_g: 2.0, x: 1.0, p: -0.5 });
        assert_eq!(out, PairLabels { x_g: 1.0, p_g: -0.5, x: -3.0, p: 2.0 });
    }

    #[test]
    fn centre_of_mass_collision_reverses_momenta() {
        let out = classical_collision_map(0.3, PairLabels { x_g: -100.0 / 3.0, p_g: 2.0, x: 10.0, p: -2.0 });
        assert_relative_eq!(out.p, 2.0, epsilon = 1e-14);
        assert_relative_eq!(out.p_g, -2.0, epsilon = 1e-14);
    }

    #[test]
    fn heavy_particle_limit() {
        let (p_g, p) = (1.7, -0.4);
        let out = classical_collision_map(1e-6, PairLabels { x_g: 0.0, p_g, x: 0.0, p });
        assert_relative_eq!(out.p, p + 2.0 * p_g, max_relative = 1e-5);
        assert_relative_eq!(out.p_g, -p_g, max_relative = 1e-5);
    }

    #[test]
    fn conservation_is_exact_in_rationals() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let alpha = r(3, 7);
        let inp = PairLabels { x_g: r(-5, 3), p_g: r(11, 4), x: r(2, 1), p: r(-9, 5) };
        let out = classical_collision_map(alpha.clone(), inp.clone());
        assert_eq!(out.p.clone() + out.p_g.clone(), inp.p.clone() + inp.p_g.clone());
        // Kinetic energy with m = 1, m_g = alpha.
        let energy = |l: &PairLabels<BigRational>| l.p.clone() * l.p.clone() + l.p_g.clone() * l.p_g.clone() / alpha.clone();
        assert_eq!(energy(&out), energy(&inp));
        // At contact both particles stay where they are.
        let out = classical_collision_map(alpha.clone(), PairLabels { x_g: r(1, 2), x: r(1, 2), ..inp });
        assert_eq!(out.x, r(1, 2));
        assert_eq!(out.x_g, r(1, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn collision_conserves_momentum_and_energy(
            alpha in 1e-3f64..10.0,
            x_g in -50.0f64..50.0,
            x in -50.0f64..50.0,
            p_g in -10.0f64..10.0,
            p in -10.0f64..10.0,
        ) {
            let out = classical_collision_map(alpha, PairLabels { x_g, p_g, x, p });
            let m = 1.0;
            let m_g = alpha * m;
            let mom_in = p_g + p;
            let scale = p_g.abs() + p.abs();
            prop_assert!((out.p_g + out.p - mom_in).abs() <= 1e-12 * scale.max(1e-300));
            let e_in = p_g * p_g / (2.0 * m_g) + p * p / (2.0 * m);
            let e_out = out.p_g * out.p_g / (2.0 * m_g) + out.p * out.p / (2.0 * m);
            prop_assert!((e_out - e_in).abs() <= 1e-12 * e_in.max(1e-300));
        }

        #[test]
        fn free_evolution_preserves_norm(x in -5.0f64..5.0, p in -3.0f64..3.0, t in 0.0f64..20.0, w in 0.3f64..3.0) {
            let e = GaussianPacket::new(x, p, w, 1.0, 1.0).unwrap().evolve(t);
            let n = overlap(&e, &e);
            prop_assert!((n.re - 1.0).abs() < 1e-12 && n.im.abs() < 1e-12);
        }
    }
}
