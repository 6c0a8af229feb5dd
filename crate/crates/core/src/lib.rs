//! Simulator for communication-compressed distributed gradient methods.
//!
//! The building block is the *shifted compressor*: an unbiased compression
//! operator whose variance vanishes as its input approaches a shift vector
//! rather than the origin. On top of it the crate provides
//!
//! - [`compressors`]: Rand-K, Top-K, natural dithering, Bernoulli, induced and
//!   shifted composites, with exact bit accounting;
//! - [`problems`] and [`datagen`]: ridge and logistic finite-sum objectives
//!   split across simulated workers;
//! - [`shifts`]: fixed, optimal ("star"), DIANA-style and randomized shift
//!   updates;
//! - [`algorithms`]: compressed gradient descent with shifts, gradient descent
//!   with compressed iterates and its variance-reduced variant, together with
//!   theoretical step sizes and Lyapunov functions;
//! - [`harness`] and [`verify`]: seeded runs, Monte-Carlo averaging and the
//!   statistical check suites.

pub mod algorithms;
pub mod compressors;
pub mod datagen;
mod error;
pub mod harness;
pub mod problems;
pub mod rng;
pub mod shifts;
pub mod verify;

pub use error::{Error, Result};

/// Dense vector type used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix type used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
