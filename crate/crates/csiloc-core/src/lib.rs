#![cfg_attr(not(feature = "std"), no_std)]
//! Single-access-point WiFi CSI indoor localization.
//!
//! The crate covers the full algorithmic pipeline: amplitude-image
//! preprocessing, a synthetic multipath channel for generating fingerprint
//! databases, a small from-scratch neural engine (convolution, dense, LSTM,
//! Adam), location quantification and tracking models built on it, and the
//! evaluation metrics used to judge them. Everything is `f64`, deterministic
//! under a fixed seed, and usable without the standard library (`alloc` is
//! required).

extern crate alloc;

pub mod csi;
pub mod error;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod quantifier;
pub mod rng;
pub mod sim;
pub mod tensor;
pub mod tracker;

pub use error::{Error, Result};
pub use tensor::Tensor;
