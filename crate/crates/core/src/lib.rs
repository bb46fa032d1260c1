//! Selective uplink training for multi-user massive MIMO.
//!
//! The crate simulates a base station with `N` co-located antennas serving
//! `K` single-antenna users over `J` consecutive fading blocks. Channels
//! evolve as a first-order Gauss-Markov process; in every block only a
//! subset of users sends orthogonal pilots, while the remaining users'
//! channels are predicted from the previous block. Achievable rates are
//! evaluated both by Monte Carlo log-det samples and by a random-matrix
//! deterministic equivalent.
//!
//! Module map:
//! - [`config`]: scenario parameters, user drops, path loss, SNR, Jakes correlation.
//! - [`channel`]: true channel generation and evolution.
//! - [`csi`]: pilots, training observations, MMSE estimation, prediction.
//! - [`selection`]: per-block training-set policies and the exhaustive oracle.
//! - [`rate`]: equivalent noise, log-det rate samples, deterministic equivalent.
//! - [`experiment`]: episodes, sweeps, stream derivation and CSV output.
//!
//! User indices are zero-based throughout the API.

pub mod channel;
pub mod config;
pub mod csi;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod rate;
pub mod selection;

pub use error::{Error, Result};

pub use num_complex::Complex64;
