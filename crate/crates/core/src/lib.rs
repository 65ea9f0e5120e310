//! Curiosity-Critic intrinsic rewards on a noisy-TV grid world.
//!
//! The crate contains everything needed to run the comparison experiment:
//! a small dense-network stack ([`nn`]), the grid world ([`env`]), the
//! observation-predicting world model ([`world_model`]), estimators of the
//! asymptotic error baseline ([`critics`]), the intrinsic reward methods
//! ([`rewards`]), the ε-greedy V-table policy ([`policy`]) and the seeded
//! experiment harness ([`harness`]). [`theory`] checks the algebra behind the
//! per-step reward numerically.

pub mod critics;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod theory;
pub mod world_model;

pub use error::{Error, Result};
