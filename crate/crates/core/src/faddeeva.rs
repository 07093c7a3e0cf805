//! Faddeeva function `w(z) = exp(-z^2) erfc(-iz)` and half-line Gaussian
//! integrals built on it.
//!
//! The first-quadrant kernel combines a Taylor series of `erf` near the
//! origin with Gautschi's continued-fraction/Taylor scheme elsewhere
//! (Poppe–Wijers parameters); other quadrants follow from symmetry.

use num_complex::Complex;

use crate::scalar::{lit, Real};

const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_573_88;

fn w_first_quadrant<T: Real>(xabs: T, yabs: T) -> Complex<T> {
    let factor = lit::<T>(TWO_OVER_SQRT_PI);
    let x = xabs / lit(6.3);
    let y = yabs / lit(4.4);
    let mut qrho = x * x + y * y;
    let xquad = xabs * xabs - yabs * yabs;
    let yquad = lit::<T>(2.0) * xabs * yabs;

    if qrho < lit(0.085264) {
        // Power series of erf around the origin.
        qrho = (T::one() - lit::<T>(0.85) * y) * qrho.sqrt();
        let n = (lit::<T>(6.0) + lit::<T>(72.0) * qrho).round().to_usize().unwrap_or(6);
        let mut j = 2 * n + 1;
        let mut xsum = T::one() / lit(j as f64);
        let mut ysum = T::zero();
        for i in (1..=n).rev() {
            j -= 2;
            let fi = lit::<T>(i as f64);
            let xaux = (xsum * xquad - ysum * yquad) / fi;
            ysum = (xsum * yquad + ysum * xquad) / fi;
            xsum = xaux + T::one() / lit(j as f64);
        }
        let u1 = -factor * (xsum * yabs + ysum * xabs) + T::one();
        let v1 = factor * (xsum * xabs - ysum * yabs);
        let daux = (-xquad).exp();
        let u2 = daux * yquad.cos();
        let v2 = -daux * yquad.sin();
        return Complex::new(u1 * u2 - v1 * v2, u1 * v2 + v1 * u2);
    }

    let (h, kapn, nu) = if qrho > T::one() {
        // Pure continued fraction.
        let rho = qrho.sqrt();
        let nu = (lit::<T>(3.0) + lit::<T>(1442.0) / (lit::<T>(26.0) * rho + lit(77.0)))
            .to_usize()
            .unwrap_or(3);
        (T::zero(), 0usize, nu)
    } else {
        let q = (T::one() - y) * (T::one() - qrho).sqrt();
        let h = lit::<T>(1.88) * q;
        let kapn = (lit::<T>(7.0) + lit::<T>(34.0) * q).round().to_usize().unwrap_or(7);
        let nu = (lit::<T>(16.0) + lit::<T>(26.0) * q).round().to_usize().unwrap_or(16);
        (h, kapn, nu)
    };

    let h2 = lit::<T>(2.0) * h;
    let use_series = h > T::zero();
    let mut qlambda = if use_series { h2.powi(kapn as i32) } else { T::zero() };
    let (mut rx, mut ry, mut sx, mut sy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for n in (0..=nu).rev() {
        let np1 = lit::<T>((n + 1) as f64);
        let tx = yabs + h + np1 * rx;
        let ty = xabs - np1 * ry;
        let c = lit::<T>(0.5) / (tx * tx + ty * ty);
        rx = c * tx;
        ry = c * ty;
        if use_series && n <= kapn {
            let t = qlambda + sx;
            sx = rx * t - ry * sy;
            sy = ry * t + rx * sy;
            qlambda = qlambda / h2;
        }
    }
    let (mut u, v) = if use_series { (factor * sx, factor * sy) } else { (factor * rx, factor * ry) };
    if yabs == T::zero() {
        u = (-xabs * xabs).exp();
    }
    Complex::new(u, v)
}

/// Faddeeva function `w(z)` for any complex `z`.
///
/// Relative accuracy is about `1e-13` in the upper half plane in double
/// precision. In the lower half plane `w` grows like `exp(-z^2)` and the
/// reflection formula is used.
pub fn faddeeva<T: Real>(z: Complex<T>) -> Complex<T> {
    let xabs = z.re.abs();
    let yabs = z.im.abs();
    let mut w = w_first_quadrant(xabs, yabs);
    if z.im < T::zero() {
        // w(z) = 2 exp(-z^2) - w(-z), where -z lies in the upper half plane.
        if -z.re < T::zero() {
            w = w.conj();
        }
        let two = lit::<T>(2.0);
        return (-(z * z)).exp() * two - w;
    }
    if z.re < T::zero() {
        w = w.conj();
    }
    w
}

/// Complementary error function of a complex argument.
pub fn erfc_complex<T: Real>(z: Complex<T>) -> Complex<T> {
    let iz = Complex::new(-z.im, z.re);
    if z.re >= T::zero() {
        (-(z * z)).exp() * faddeeva(iz)
    } else {
        let two = Complex::new(lit::<T>(2.0), T::zero());
        two - (-(z * z)).exp() * faddeeva(-iz)
    }
}

/// `∫_c^∞ exp(-a u² + b u + k) du` for complex `a` with `Re a > 0`.
///
/// Exponents are combined before exponentiation so that large but
/// cancelling terms never overflow.
pub fn gaussian_upper_tail<T: Real>(a: Complex<T>, b: Complex<T>, k: Complex<T>, c: T) -> Complex<T> {
    let s = a.sqrt();
    let half_sqrt_pi = lit::<T>(0.5) * T::PI().sqrt();
    let cc = Complex::new(c, T::zero());
    let z = s * (cc - b / (a * lit::<T>(2.0)));
    let iz = Complex::new(-z.im, z.re);
    let edge = -a * cc * cc + b * cc + k;
    if z.re >= T::zero() {
        (edge.exp() * faddeeva(iz)) * half_sqrt_pi / s
    } else {
        let full = (b * b / (a * lit::<T>(4.0)) + k).exp() * lit::<T>(2.0);
        (full - edge.exp() * faddeeva(-iz)) * half_sqrt_pi / s
    }
}

/// `∫_{-∞}^c exp(-a u² + b u + k) du` for complex `a` with `Re a > 0`.
pub fn gaussian_lower_tail<T: Real>(a: Complex<T>, b: Complex<T>, k: Complex<T>, c: T) -> Complex<T> {
    gaussian_upper_tail(a, -b, k, -c)
}

/// `∫_{-∞}^{∞} exp(-a u² + b u + k) du`.
pub fn gaussian_full_integral<T: Real>(a: Complex<T>, b: Complex<T>, k: Complex<T>) -> Complex<T> {
    (b * b / (a * lit::<T>(4.0)) + k).exp() * (Complex::new(T::PI(), T::zero()) / a).sqrt()
}
