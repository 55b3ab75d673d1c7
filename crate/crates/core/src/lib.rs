//! Causal rate-constrained coding of the Wiener process.
//!
//! Codecs (sign-of-innovation threshold coding, uniform sampling with a
//! greedy Lloyd-Max quantizer), finite-horizon distortion-rate bounds,
//! Monte Carlo evaluation and a simple control loop built on the codecs.

pub mod cli;
pub mod codec;
pub mod control;
pub mod error;
pub mod eval;
pub mod idrf;
pub mod lloyd;
pub mod output;
pub mod pdf;
pub mod rng;
pub mod soi;
pub mod stats;
pub mod uniform;
pub mod wiener;

pub use error::{LabError, Result};
