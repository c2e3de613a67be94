//! Vehicle–pedestrian interaction modelling at unsignalized crossings.
//!
//! The crate fits a box-truncated multivariate Gaussian mixture to passing-event
//! observations `(1/R, v, v_p, 1/T_adv)`, uses its conditionals to drive
//! simulated pedestrians and a data-derived human driver, and scores an
//! automated-vehicle passing strategy against that baseline.
//!
//! Module map:
//!
//! - [`scenario`]: crossing geometry, time advantage, observation transforms
//! - [`mixture`]: truncated Gaussian mixtures (density, EM, BIC, conditioning, sampling)
//! - [`agents`]: Poisson arrivals, pedestrian speed decisions, Soft-Yield and human-driver strategies
//! - [`sim`]: fixed-step episode engine and the paired experiment protocol
//! - [`eval`]: efficiency / stability / safety metrics and aggressiveness gates
//! - [`ingest`]: trajectory logs to observation matrices, synthetic data
//! - [`config`], [`cli`]: run configuration and the command-line pipeline
//!
//! See `examples/` for one runnable program per capability.

pub mod agents;
pub mod cli;
pub mod config;
pub mod eval;
pub mod ingest;
pub mod mixture;
pub mod scenario;
pub mod seed;
pub mod sim;

pub use mixture::{GaussianComponent, GaussianMixture, TruncationBox};
pub use scenario::{Kinematics, ObservationVector, TtcConvention};
