//! Link-level simulator for beam-space MIMO with a single-feed reconfigurable
//! antenna whose far-field patterns are distorted by near-field objects.
//!
//! Patterns live on an equiangular [`SphericalGrid`]. The free-space states
//! are decomposed into the basis `B1 = (E+ + E-)/2`, `B2 = (E+ - E-)/2`;
//! a [`PerturbationField`] distorts every state, and the crate measures the
//! resulting transmit EVM and the zero-forcing error at a two-antenna
//! receiver.

pub mod beamspace;
pub mod config;
pub mod constellation;
pub mod error;
pub mod generate;
pub mod io;
pub mod link;
pub mod pipeline;
pub mod selftest;
pub mod sphere;
pub mod stats;

pub use beamspace::{
    apply_perturbation, basis_correlation_db, compute_basis, evm_at_angle, evm_map, perturbed_basis,
    power_imbalance_db, state_power_ratios, synthesize_pattern, AverageEvm, BasisPair, EvmMap, PerturbationField,
    StatePatternSet,
};
pub use config::RunConfig;
pub use constellation::{PskConstellation, RatioSet};
pub use error::{Error, Result};
pub use generate::{generate_mirror_pair, generate_perturbation, AntennaProfile, PatternLobe, PerturbationLobe};
pub use link::{
    build_channel, run_monte_carlo, zf_equalize, LinkGeometry, LinkScenario, MonteCarloConfig, MonteCarloResult,
    NoiseModel, RxPolarization, SolidAngle,
};
pub use pipeline::{Metrics, Pipeline};
pub use sphere::{build_grid, inner_product, integrate_power, SphericalGrid, VectorPattern};
pub use stats::{cdf_summary, CdfSummary, EmpiricalCdf};
