//! Monte-Carlo engine for energy-based point-source localization with
//! randomly deployed sensors.
//!
//! The crate covers the whole chain: sampling sensor deployments with
//! exclusion zones ([`geometry`]), simulating quantize-and-transmit sensing
//! rounds ([`signal_model`]), maximum-likelihood localization at the fusion
//! center ([`likelihood`]), Cramér-Rao bounds and bound-optimal thresholds
//! ([`crlb`]), and outage statistics over geometry ensembles
//! ([`montecarlo`]). The [`cli`] module backs the `srcloc` binary.

pub mod cli;
pub mod crlb;
pub mod error;
pub mod geometry;
pub mod likelihood;
pub mod montecarlo;
pub mod nelder_mead;
pub mod quadrature;
pub mod rng;
pub mod signal_model;
pub mod special;

pub use crlb::{crlb_sgle, fisher_information, optimize_thresholds, CrlbResult, FisherMatrix, ThresholdMode};
pub use error::{Error, Result};
pub use geometry::{count_within, distance, sample_geometry, NetworkGeometry, Point, SourceParams};
pub use likelihood::{log_likelihood, ml_estimate, EstimateResult, EstimatorOptions, LocationEstimator, MlEstimator};
pub use signal_model::{simulate_round, EnergyVector, PerSensor, SensorEnsembleConfig};
