//! Emergency-rescue traffic simulation with cooperative multi-agent
//! reinforcement learning.
//!
//! Fire engines and traffic lights are trained jointly, either with a
//! monotonic value-mixing learner (QMIX) or with independent Q-learners (IQL).

pub mod cli;
pub mod config;
pub mod error;
pub mod marl;
pub mod nnet;
pub mod rewards;
pub mod roadnet;
pub mod server;
pub mod sim;

pub use error::{Error, Result};
