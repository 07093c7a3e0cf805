//! Scenario configuration files.
//!
//! Every scenario reads one TOML file. Unknown keys are rejected and parse
//! errors name the offending field path (`physics.alpha`, ...).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn one() -> f64 {
    1.0
}

/// Masses, widths and units of the colliding pair. The gas mass is
/// `alpha · brownian_mass` and the gas packet width `σ/√α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub brownian_mass: f64,
    pub alpha: f64,
    pub brownian_width: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub k_b: f64,
}

/// Thermal background gas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gas {
    pub temperature: f64,
    pub number_density: f64,
}

/// Phase-space labels of the incoming packets. Without `x_g`/`p_g` the
/// labels are taken in the centre-of-mass frame: `x_g = −x/α`, `p_g = −p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    pub x: f64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_g: Option<f64>,
}

/// Uniform axis `min..=max` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.min + i as f64 * h).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.points > 1 {
            (self.max - self.min) / (self.points - 1) as f64
        } else {
            0.0
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), CliError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) || self.points < 2 {
            return Err(CliError::invalid(name, "needs finite min < max and at least 2 points"));
        }
        Ok(())
    }
}

/// Time grid `0..=t_max`; `t_max` defaults to five collision times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Times {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub points: usize,
}

fn marginal_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollideConfig {
    pub physics: Physics,
    pub labels: Labels,
    pub times: Times,
    pub position: Axis,
    pub momentum: Axis,
    /// Only used for the validity report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<Gas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Largest admitted `|∫ marginal − 1|` on the sampled axes.
    #[serde(default = "marginal_tolerance")]
    pub marginal_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

/// `fig1`: the collision with `x = 10, p = −2, m = 1, α = 0.3, ħ = 1, σ = 4`;
/// only the sampling can be changed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Times>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

impl Fig1Config {
    pub fn resolve(self) -> CollideConfig {
        CollideConfig {
            physics: Physics { brownian_mass: 1.0, alpha: 0.3, brownian_width: 4.0, hbar: 1.0, k_b: 1.0 },
            labels: Labels { x: 10.0, p: -2.0, x_g: None, p_g: None },
            times: self.times.unwrap_or(Times { t_max: None, points: 51 }),
            position: self.position.unwrap_or(Axis { min: -40.0, max: 40.0, points: 801 }),
            momentum: self.momentum.unwrap_or(Axis { min: -12.0, max: 12.0, points: 961 }),
            gas: None,
            delta: None,
            marginal_tolerance: self.marginal_tolerance.unwrap_or_else(marginal_tolerance),
            output: self.output,
        }
    }
}

fn levels() -> usize {
    3
}

fn true_() -> bool {
    true
}

fn oracle_times() -> Vec<f64> {
    vec![0.0, 1.0, 3.0]
}

fn l2_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGrid {
    /// Points per axis of the coarsest grid.
    pub points: usize,
    /// Number of grids, each twice as fine as the previous one.
    #[serde(default = "levels")]
    pub levels: usize,
    /// Reject grids whose spacing cannot resolve the packets' momenta.
    #[serde(default = "true_")]
    pub enforce_nyquist: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub physics: Physics,
    pub labels: Labels,
    pub grid: OracleGrid,
    /// Comparison times in units of the collision time.
    #[serde(default = "oracle_times")]
    pub times_in_collision_times: Vec<f64>,
    /// Largest admitted relative L2 error on the finest grid.
    #[serde(default = "l2_tolerance")]
    pub l2_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

fn points_per_sd() -> f64 {
    6.0
}

fn completeness_margin() -> f64 {
    5.0
}

fn min_fidelity() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertAxis {
    pub points: usize,
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub physics: Physics,
    pub grid: HilbertAxis,
    /// Brownian coherent state fed into the channel.
    pub state: PhasePoint,
    /// Label of the colliding gas packet.
    pub gas_packet: PhasePoint,
    /// Free evolution after the collision.
    #[serde(default)]
    pub t: f64,
    #[serde(default = "points_per_sd")]
    pub points_per_sd: f64,
    /// Distance from the grid edges, in widths, excluded from the
    /// completeness check.
    #[serde(default = "completeness_margin")]
    pub completeness_margin: f64,
    #[serde(default = "min_fidelity")]
    pub min_fidelity: f64,
    #[serde(default = "marginal_tolerance")]
    pub trace_tolerance: f64,
    #[serde(default = "marginal_tolerance")]
    pub completeness_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

/// Initial ensemble of Gaussian trajectories in terms of quantum moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub n: usize,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timing {
    #[default]
    Uniform,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesConfig {
    pub physics: Physics,
    pub gas: Gas,
    pub ensemble: Ensemble,
    pub delta: f64,
    pub horizon: f64,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub mean_x2: f64,
    pub mean_xp: f64,
    pub mean_p2: f64,
}

fn se_tolerance() -> f64 {
    3.0
}

/// Monte Carlo cross-check of the moment equations. The ensemble is drawn
/// with the variances of the initial moments and no `x`–`p` correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compare {
    pub n: usize,
    #[serde(default)]
    pub timing: Timing,
    /// Largest admitted deviation in Monte Carlo standard errors.
    #[serde(default = "se_tolerance")]
    pub tolerance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub physics: Physics,
    pub gas: Gas,
    pub initial: InitialMoments,
    pub delta: f64,
    pub horizon: f64,
    /// Integration step; defaults to `10⁻³/f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Output interval; defaults to `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<f64>,
    #[serde(default = "true_")]
    pub include_artifact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<Compare>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

fn midpoint() -> Timing {
    Timing::Midpoint
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaScanConfig {
    pub physics: Physics,
    pub gas: Gas,
    pub ensemble: Ensemble,
    pub deltas: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "midpoint")]
    pub timing: Timing,
    /// If set, `|slope − 2|` above this value fails the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tolerance: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Output>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

/// Parses `text` as TOML into `T`, reporting the field path on failure.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().to_string();
        CliError::Config { path: if path == "." { String::new() } else { path }, message: msg }
    })
}

pub fn load<T: DeserializeOwned>(file: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| CliError::Config { path: String::new(), message: format!("cannot read {}: {e}", file.display()) })?;
    parse(&text)
}
