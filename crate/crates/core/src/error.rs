use thiserror::Error;

/// Errors raised by the simulation modules.
///
/// Numerical values are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("adjusted temperature T_sigma = {value} is not positive; enlarge the gas packet width or raise T")]
    NonPositiveAdjustedTemperature { value: f64 },

    #[error("sampling window is empty or not finite")]
    EmptyWindow,

    #[error("packet widths are not matched: alpha*sigma_g^2 = {lhs}, sigma^2 = {rhs}")]
    MismatchedWidths { lhs: f64, rhs: f64 },

    #[error("zero relative momentum: the collision time is undefined")]
    ZeroRelativeMomentum,

    #[error("packets are not approaching each other")]
    NotApproaching,

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds requested {requested:e}")]
    QuadratureFailure { achieved: f64, requested: f64 },

    #[error("grid too coarse: {what} spacing {spacing} exceeds limit {limit}")]
    GridTooCoarse { what: &'static str, spacing: f64, limit: f64 },

    #[error("grid too small: {mass:e} of probability lies outside the {what} extent")]
    GridTooSmall { what: &'static str, mass: f64 },

    #[error("mass ratio alpha = 1 turns the smearing weight into a point mass")]
    EqualMassSingularity,

    #[error("operator has eigenvalue {value:e} below the clamping floor {floor:e}")]
    NegativeEigenvalueBeyondTolerance { value: f64, floor: f64 },

    #[error("phase-space region is empty")]
    EmptyRegion,

    #[error("collision probability per step {rate_delta} exceeds the single-collision limit {limit}")]
    StepTooLarge { rate_delta: f64, limit: f64 },

    #[error("integration step {dt} does not resolve the friction time (limit {limit})")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("time grids do not match: {reason}")]
    GridMismatch { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
