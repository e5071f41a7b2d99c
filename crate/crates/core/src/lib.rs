//! Thompson Sampling with Jeffreys priors for one-dimensional canonical
//! exponential family bandits, plus Monte Carlo checks of the concentration
//! results behind its optimality.
//!
//! - [`exp_family`]: the six families, KL in Bregman form, Chernoff rates.
//! - [`posterior`]: Jeffreys posteriors, conjugate and Metropolis samplers.
//! - [`bandit`]: environments, policies, episodes, the Lai-Robbins constant.
//! - [`concentration`]: tail experiments, C₂, KL balls, the conditioning event.
//! - [`cli`]: experiment specs and CSV output behind the `expfam-ts` binary.

pub mod bandit;
pub mod cli;
pub mod concentration;
pub mod error;
pub mod exp_family;
pub mod posterior;
pub mod rng;
mod roots;
pub mod stats;

pub use bandit::{BanditInstance, PolicyKind, RegretTrace};
pub use error::{Error, Result};
pub use exp_family::{FamilyDescriptor, FamilyKind, Interval, NaturalParam};
pub use posterior::{ArmPosterior, MhConfig, Sampler};
