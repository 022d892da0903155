//! Numerical core for predictive downlink scheduling over correlated
//! Rayleigh fading.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the
//! algorithmic pieces:
//!
//! - [`specfun`]: `J0`, the first-order Marcum Q-function and adaptive
//!   Simpson quadrature.
//! - [`channel`]: the time-correlated fading model and its closed-form
//!   conditional success probabilities.
//! - [`gan`]: a small multilayer-perceptron GAN trained with Adam that learns
//!   a one-dimensional gain distribution from samples.
//! - [`density`]: sample stores, synthetic tail estimates, empirical CDFs and
//!   the per-schedule success sums used by the scheduler.
//! - [`scheduler`]: schedule enumeration, the entropy-regularised softmax
//!   policy and its cumulative-moving-average update.
//!
//! File formats, configuration and the experiment driver live in the
//! `gansched` crate.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations, unused_qualifications)]

extern crate alloc;

pub mod channel;
pub mod density;
mod error;
pub mod gan;
pub mod scheduler;
pub mod specfun;

pub use error::Error;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
