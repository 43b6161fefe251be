//! Multi-armed bandits with precedence relations among arm groups and
//! Markovian rewards: model definitions, the asymptotic regret lower bound,
//! an asymptotically efficient allocation rule, regeneration diagnostics and
//! a Monte Carlo harness.

pub mod instances;
pub mod lower_bound;
pub mod markov;
pub mod model;
pub mod params;
pub mod regeneration;
pub mod seeds;
pub mod sim;
pub mod simplex;
pub mod strategy;

pub use markov::{ArmId, ArmSpec, Atom, Drift, Kernel, ModelError, StateSpace};
pub use model::Model;
pub use params::ParameterGrid;
