//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The integrator bisects the interval with the largest error estimate until
//! the summed estimate drops below the absolute tolerance. Values may be real
//! or complex; the error norm of a complex value is its modulus.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Nodes and weights of the 15-point Kronrod rule on `[-1, 1]`.
pub(crate) fn kronrod_15_rule() -> impl Iterator<Item = (f64, f64)> {
    (0..7)
        .flat_map(|j| [(-XGK[j], WGK[j]), (XGK[j], WGK[j])])
        .chain(std::iter::once((0.0, WGK[7])))
}

/// Values the integrator can accumulate.
pub trait QuadValue<T: Real>:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self>
{
    fn zero() -> Self;
    fn norm(self) -> T;
}

impl<T: Real> QuadValue<T> for T {
    fn zero() -> Self {
        T::zero()
    }
    fn norm(self) -> T {
        self.abs()
    }
}

impl<T: Real> QuadValue<T> for Complex<T> {
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }
    fn norm(self) -> T {
        Complex::norm(self)
    }
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self { abs_tol: lit(1e-8), rel_tol: T::zero(), max_intervals: 2000 }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn with_abs_tol(abs_tol: T) -> Self {
        Self { abs_tol, ..Self::default() }
    }
}

/// Integral value with its error estimate and the number of integrand calls.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T, V> {
    pub value: V,
    pub abs_error: T,
    pub evaluations: usize,
}

struct Segment<T, V> {
    a: T,
    b: T,
    value: V,
    error: T,
}

impl<T: Real, V> PartialEq for Segment<T, V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real, V> Eq for Segment<T, V> {}
impl<T: Real, V> PartialOrd for Segment<T, V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real, V> Ord for Segment<T, V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Applies the 15-point Kronrod rule on `[a, b]`.
///
/// Returns the Kronrod estimate and the QUADPACK-style error estimate.
pub fn gauss_kronrod_15<T, V, F>(f: &F, a: T, b: T) -> (V, T)
where
    T: Real,
    V: QuadValue<T>,
    F: Fn(T) -> V,
{
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let abs_half = half_len.abs();

    let fc = f(center);
    let mut res_k = fc * lit::<T>(WGK[7]);
    let mut res_g = fc * lit::<T>(WG[3]);
    let mut res_abs = fc.norm() * lit::<T>(WGK[7]);
    let mut fv1 = [V::zero(); 7];
    let mut fv2 = [V::zero(); 7];

    for j in 0..7 {
        let dx = half_len * lit::<T>(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = lit::<T>(WGK[j]);
        res_k = res_k + (f1 + f2) * w;
        res_abs = res_abs + (f1.norm() + f2.norm()) * w;
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * lit::<T>(WG[j / 2]);
        }
    }

    let mean = res_k * half;
    let mut res_asc = (fc - mean).norm() * lit::<T>(WGK[7]);
    for j in 0..7 {
        res_asc = res_asc + ((fv1[j] - mean).norm() + (fv2[j] - mean).norm()) * lit::<T>(WGK[j]);
    }

    let value = res_k * half_len;
    res_abs = res_abs * abs_half;
    res_asc = res_asc * abs_half;
    let mut err = ((res_k - res_g) * half_len).norm();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (lit::<T>(200.0) * err / res_asc).powf(lit(1.5));
        err = if scale < T::one() { res_asc * scale } else { res_asc };
    }
    let eps50 = lit::<T>(50.0) * T::epsilon();
    if res_abs > T::min_positive_value() / eps50 {
        err = err.max(eps50 * res_abs);
    }
    (value, err)
}

/// Integrates `f` over `[a, b]`, starting from the given interior breakpoints.
///
/// Breakpoints outside `(a, b)` are ignored. Fails with
/// [`Error::QuadratureFailure`] when the interval budget is exhausted.
pub fn integrate_with_breakpoints<T, V, F>(
    f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T, V>>
where
    T: Real,
    V: QuadValue<T>,
    F: Fn(T) -> V,
{
    if a == b {
        return Ok(QuadResult { value: V::zero(), abs_error: T::zero(), evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };

    let mut cuts: Vec<T> = breakpoints.iter().copied().filter(|&c| c > lo && c < hi).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = V::zero();
    let mut total_err = T::zero();
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1]);
        evaluations += 15;
        total = total + value;
        total_err = total_err + error;
        heap.push(Segment { a: w[0], b: w[1], value, error });
    }

    let target = |v: V| opts.abs_tol.max(opts.rel_tol * v.norm());
    while total_err > target(total) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure {
                achieved: to_f64(total_err),
                requested: to_f64(target(total)),
            });
        }
        let seg = heap.pop().expect("heap holds at least one segment");
        let mid = lit::<T>(0.5) * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // Interval cannot be split further in this precision.
            return Err(Error::QuadratureFailure {
                achieved: to_f64(total_err),
                requested: to_f64(target(total)),
            });
        }
        let (v1, e1) = gauss_kronrod_15(&f, seg.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, seg.b);
        evaluations += 30;
        total = total - seg.value + v1 + v2;
        total_err = total_err - seg.error + e1 + e2;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }

    // Re-sum to shed the drift from the incremental updates.
    let mut value = V::zero();
    let mut abs_error = T::zero();
    for seg in heap.iter() {
        value = value + seg.value;
        abs_error = abs_error + seg.error;
    }
    Ok(QuadResult { value: value * sign, abs_error, evaluations })
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, V, F>(f: F, a: T, b: T, opts: &QuadOptions<T>) -> Result<QuadResult<T, V>>
where
    T: Real,
    V: QuadValue<T>,
    F: Fn(T) -> V,
{
    integrate_with_breakpoints(f, a, b, &[], opts)
}
