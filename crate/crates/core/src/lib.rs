//! Discrete-event simulation of a single-asset continuous double auction.
//!
//! Zero Intelligence and Heuristic Belief Learning traders arrive by Poisson
//! process, observe a noisy exogenous fundamental, update a Bayesian belief
//! about it, and trade single units through a price-time priority book. Runs
//! are fully determined by the configuration and one master seed.

pub mod agents;
pub mod config;
pub mod estimator;
pub mod fundamental;
pub mod kernel;
pub mod orderbook;
pub mod output;
pub mod preferences;
pub mod price;
pub mod rng;

pub use preferences::Side;
pub use price::{Price, TickSize};
