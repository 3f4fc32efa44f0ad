//! Biased stochastic gradient search with Markovian dynamics.
//!
//! The crate provides a generic recursion engine ([`sgd_core`]), dense
//! finite-chain tools ([`finite_markov`]) and three concrete algorithms with
//! exact or quadrature oracles for objective, gradient and estimator bias:
//! discounted-trace policy gradient ([`policy_gradient`]), adaptive population
//! Monte Carlo ([`adaptive_pmc`]) and recursive split-likelihood estimation
//! of hidden Markov models ([`hmm_ident`]). [`experiments`] drives bias-scaling
//! sweeps and verification suites.

pub mod adaptive_pmc;
pub mod error;
pub mod experiments;
pub mod finite_markov;
pub mod hmm_ident;
pub mod policy_gradient;
pub mod rng;
pub mod sgd_core;
pub mod stats;

pub use error::{Error, Result};
pub use finite_markov::{ProbabilityVector, StochasticMatrix};
pub use sgd_core::{ParamVector, ProjectionPolicy, StepSchedule, TailStats, Trajectory};
