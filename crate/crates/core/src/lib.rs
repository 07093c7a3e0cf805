//! Collisional quantum Brownian motion of a particle in a one-dimensional
//! hard-core gas.
//!
//! The crate is layered bottom-up:
//!
//! - [`thermal`]: Gaussian-mixture decomposition of the thermal gas state.
//! - [`packets`]: minimum-uncertainty packets, free evolution, and the
//!   classical two-body collision map.
//! - [`exact_collision`]: closed-form two-particle wavefunction of a
//!   hard-core collision, marginals, fidelity and validity diagnostics.
//! - [`grid_oracle`]: independent spectral solver of the same problem.
//! - [`channel`]: Kraus operators, effect operators and collision
//!   probability operators on a position grid.
//! - [`trajectories`]: Monte Carlo unraveling with Gaussian trajectories.
//! - [`moments`]: moment equations, friction and artifact diffusion.
//!
//! The analytic modules are generic over [`Real`]; the grid-based ones
//! (`grid_oracle`, `channel`) work in `f64`.

pub mod error;
pub mod channel;
pub mod exact_collision;
pub mod faddeeva;
pub mod grid_oracle;
pub mod moments;
pub mod packets;
pub mod quadrature;
pub mod scalar;
pub mod thermal;
pub mod trajectories;

pub use error::{Error, Result};
pub use scalar::Real;
pub use exact_collision::{CollisionPair, ExactCollision, Particle, ValidityReport};
pub use grid_oracle::{compare_to_analytic, Comparison, DensityFrame, GridParams, GridWavefunction};
pub use channel::{CollisionChannel, HilbertGrid, OperatorGrid, PhaseSpaceRegion};
pub use moments::{closed_form, friction_constant, FrictionParams, MomentSeries, MomentState};
pub use packets::{classical_collision_map, overlap, EvolvedPacket, GaussianPacket, PairLabels};
pub use thermal::ThermalGasSpec;
pub use trajectories::{CollisionTiming, EnsembleSpec, EnsembleStats, TrajectoryParams, TrajectoryState};

pub type GaussianPacket64 = packets::GaussianPacket64;
pub type EvolvedPacket64 = packets::EvolvedPacket64;
pub type ThermalGasSpec64 = thermal::ThermalGasSpec64;
pub type CollisionPair64 = exact_collision::CollisionPair64;
pub type ExactCollision64 = exact_collision::ExactCollision64;
pub type ValidityReport64 = exact_collision::ValidityReport64;
pub type TrajectoryState64 = trajectories::TrajectoryState64;
pub type EnsembleStats64 = trajectories::EnsembleStats64;
pub type EnsembleSpec64 = trajectories::EnsembleSpec64;
pub type TrajectoryParams64 = trajectories::TrajectoryParams64;
pub type MomentState64 = moments::MomentState64;
pub type FrictionParams64 = moments::FrictionParams64;
pub type MomentSeries64 = moments::MomentSeries64;
