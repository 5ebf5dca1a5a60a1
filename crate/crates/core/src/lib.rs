//! Decentralized Q-learning for Irregular Repetition Slotted ALOHA.
//!
//! * [`irsa`]: frame physics, replica placement and SIC peeling.
//! * [`agent`]: per-node tabular Q-learning over buffer histories.
//! * [`virtual_experience`]: class-wide batch updates over histories that
//!   share a difference pattern.
//! * [`environment`]: the frame-synchronous multi-agent driver, training
//!   and evaluation loops.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix it to `f64`.

pub mod agent;
pub mod environment;
pub mod error;
pub mod irsa;
pub mod num;
pub mod seed;
pub mod stats;
pub mod virtual_experience;

pub use error::{Error, Result};
pub use num::Real;

pub type DegreeDistribution = irsa::DegreeDistribution<f64>;
pub type QTable = agent::QTable<f64>;
pub type LearningParams = agent::LearningParams<f64>;
pub type LearningRate = agent::LearningRate<f64>;
pub type NodeState = environment::NodeState<f64>;
pub type Network = environment::Network<f64>;
pub type TrainConfig = environment::TrainConfig<f64>;
pub type TrainOutcome = environment::TrainOutcome<f64>;
pub type TraceRow = environment::TraceRow<f64>;
