//! Double-spend and majority-attack risk for proof-of-work ledgers, a
//! consortium collusion simulator, and a learned approve/cancel gate for
//! transactions at risk of a colluding majority.

pub mod cli;
pub mod collusion_detector;
pub mod consortium_sim;
pub mod error;
pub mod payoff_game;
pub mod race_math;
pub mod rng;

pub use error::{Error, Result};
