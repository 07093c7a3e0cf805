//! Thermal ideal gas as a convex mixture of Gaussian packets.
//!
//! A gas particle at temperature `T` is written as a uniform mixture over
//! packet centers and a Gaussian mixture over packet momenta. The packet
//! width `σ_g` carries momentum variance `ħ²/(2σ_g²)` of its own, so the
//! mixing density uses the reduced temperature
//! `T_σg = T − ħ²/(2 m_g k_B σ_g²)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Parameters of the thermal gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalGasSpec<T> {
    pub temperature: T,
    pub number_density: T,
    pub gas_mass: T,
    /// Packet width `σ_g` in the `exp(-(x-x')²/2σ²)` convention.
    pub packet_width: T,
    pub hbar: T,
    pub k_b: T,
}

impl<T: Real> ThermalGasSpec<T> {
    /// Builds a spec with `ħ = k_B = 1`.
    pub fn new(temperature: T, number_density: T, gas_mass: T, packet_width: T) -> Result<Self> {
        Self::with_units(temperature, number_density, gas_mass, packet_width, T::one(), T::one())
    }

    pub fn with_units(
        temperature: T,
        number_density: T,
        gas_mass: T,
        packet_width: T,
        hbar: T,
        k_b: T,
    ) -> Result<Self> {
        let spec = Self { temperature, number_density, gas_mass, packet_width, hbar, k_b };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks positivity of every field. A zero density is allowed.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("temperature", self.temperature)?;
        positive("gas_mass", self.gas_mass)?;
        positive("packet_width", self.packet_width)?;
        positive("hbar", self.hbar)?;
        positive("k_b", self.k_b)?;
        if !(self.number_density >= T::zero() && self.number_density.is_finite()) {
            return Err(invalid("number_density", format!("must be non-negative, got {}", self.number_density)));
        }
        Ok(())
    }

    /// `k_B T`.
    pub fn thermal_energy(&self) -> T {
        self.k_b * self.temperature
    }

    /// Reduced temperature `T_σg` of the momentum mixing density.
    pub fn adjusted_temperature(&self) -> Result<T> {
        let correction = self.hbar * self.hbar
            / (lit::<T>(2.0) * self.gas_mass * self.k_b * self.packet_width * self.packet_width);
        let value = self.temperature - correction;
        if value > T::zero() {
            Ok(value)
        } else {
            Err(Error::NonPositiveAdjustedTemperature { value: to_f64(value) })
        }
    }

    /// Variance `m_g k_B T_σg` of the mixing density over packet momenta.
    pub fn mixing_momentum_variance(&self) -> Result<T> {
        Ok(self.gas_mass * self.k_b * self.adjusted_temperature()?)
    }

    /// Momentum variance `ħ²/(2σ_g²)` internal to a single packet.
    pub fn packet_momentum_variance(&self) -> T {
        self.hbar * self.hbar / (lit::<T>(2.0) * self.packet_width * self.packet_width)
    }

    /// Momentum variance `m_g k_B T` of the whole mixture.
    pub fn total_momentum_variance(&self) -> T {
        self.gas_mass * self.thermal_energy()
    }

    /// Density `μ_σg(p_g)` of packet momenta.
    pub fn momentum_weight(&self, p_g: T) -> Result<T> {
        let var = self.mixing_momentum_variance()?;
        Ok((-p_g * p_g / (lit::<T>(2.0) * var)).exp() / (T::TAU() * var).sqrt())
    }

    /// Rate `n_g ∫ μ_σg(p_g) |p_g/m_g − u| dp_g` at which packets of the
    /// mixture hit a point particle moving with velocity `u`.
    pub fn collision_rate(&self, u: T) -> Result<T> {
        let s = self.mixing_momentum_variance()?.sqrt() / self.gas_mass;
        Ok(self.number_density * mean_abs_shifted_normal(s, u))
    }

    /// Draws a packet label `(x_g, p_g)`: position uniform in `window`,
    /// momentum from `μ_σg`.
    pub fn sample_gas_state<R: Rng + ?Sized>(&self, window: (T, T), rng: &mut R) -> Result<(T, T)> {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::EmptyWindow);
        }
        let sd = self.mixing_momentum_variance()?.sqrt();
        let u: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);
        Ok((lo + (hi - lo) * lit(u), sd * lit(z)))
    }
}

/// `E|V − u|` for `V ~ N(0, s²)`.
pub(crate) fn mean_abs_shifted_normal<T: Real>(s: T, u: T) -> T {
    let z = u / s;
    let two = lit::<T>(2.0);
    s * (two / T::PI()).sqrt() * (-z * z / two).exp() + u * crate::scalar::erf(z / T::SQRT_2())
}

pub type ThermalGasSpec64 = ThermalGasSpec<f64>;
