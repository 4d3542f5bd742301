//! Locating the $L^p$ ball over which two functional parameters differ the most.
//!
//! The pipeline is: simulate or ingest data from a pair of stochastic processes,
//! fit each functional parameter with a Bayesian basis expansion, draw posterior
//! trajectories, and maximize the restricted $L^p$ sub-norm of their difference
//! over all balls of bounded volume. Multi-objective scalarization, averaged
//! (Hardy-Littlewood) objectives, and a Monte Carlo validation harness are
//! provided on top of the core solver.

pub mod basis;
pub mod dissimilarity;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod simulate;

pub use basis::{AnalyticParameter, BasisSet, FunctionalParameter, LinkFunction, ParamSurface};
pub use dissimilarity::{
    BmdSolution, DissimilarityObjective, ObjectiveMode, OptConfig, PosteriorBmd,
    ScalarizedObjective,
};
pub use geometry::{GroundSet, LpBall};
pub use inference::{CoefficientPosterior, GaussianObservations, GaussianPrior, PointPattern};
