//! Minimax group-fair federated learning: an MLP with Brier-score training,
//! simplex projections, synthetic and CSV data with client partitioning, the
//! FedMinMax / centralized minimax / FedAvg / AFL / q-FedAvg trainers, and
//! group-risk evaluation with closed-form oracles for the synthetic task.

pub mod data;
pub mod error;
pub mod eval;
pub mod federation;
pub mod numerics;
pub mod parallel;
pub mod simplex;

pub use error::{Error, Result};
