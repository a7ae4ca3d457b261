//! Gittins index scheduling for preemptive stochastic single-machine
//! scheduling with finite-support job sizes, the Robust Gittins variant for
//! mispredicted distributions, and exact expected-cost evaluation.

pub mod closeness;
pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod gittins;
pub mod instances;
pub mod par;
pub mod policies;
pub mod rational;

pub use distributions::{FiniteDist, FloatDist, Instance, ParametricDist};
pub use error::{Error, Result};
pub use par::Exec;
pub use rational::Rational;
