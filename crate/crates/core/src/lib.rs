//! Simulation and numerical-analysis toolkit for attraction-repulsion
//! opinion dynamics on the unit interval and its higher-dimensional
//! extensions.
//!
//! The crate is organised around five modules:
//!
//! * [`kernel`]: opinions, model parameters, the pairwise interaction rules
//!   and a contract checker for the attraction-repulsion cleavage conditions.
//! * [`engine`]: finite-population stochastic processes (uniform random pair
//!   and random matching schedulers), trivialization detection, and
//!   Monte-Carlo estimation of the polarization probability.
//! * [`oracle`]: deterministic forcing schedules that drive any configuration
//!   into an absorbing neighborhood, plus energy/martingale diagnostics.
//! * [`meanfield`]: forward-Euler integration of the infinite-population
//!   density equation, limit classification and critical-threshold search.
//! * [`geometry`]: pairwise line interactions on hypercubes and the unit
//!   disk, with cluster summarization of the long-run point clouds.

pub mod engine;
pub mod geometry;
pub mod kernel;
pub mod meanfield;
pub mod oracle;
pub mod seeding;
