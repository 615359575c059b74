//! Simulation of Susceptible-Infected cascades on graphs and estimation of
//! high-degree ("super-spreader") vertices from the resulting infection
//! times.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: immutable graphs, class checks and generators.
//! * [`sim`]: exact cascade samplers and trace queries.
//! * [`estimator`]: second-derivative thresholding over `K` traces.
//! * [`hardness`]: the hard ensemble and its indistinguishability diagnostics.
//! * [`experiments`]: seeded, reproducible experiment drivers.

pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod graph;
pub mod hardness;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod trace_io;

pub use error::{Error, Result};
pub use estimator::{
    default_params, deg_hat, estimate_highdeg, DegreeEstimate, EstimatorConfig, HighDegEstimate,
    LogBase,
};
pub use graph::{validate_class, ClassReport, GenSpec, Graph};
pub use hardness::{DetectionReport, HardEnsembleSpec, LeafTraceMatrix};
pub use sim::{
    check_event_a, cut_size, d_i_exact, infection_count, simulate_fpp, simulate_gillespie,
    CascadeTrace, IntervalCount, SimStats,
};
