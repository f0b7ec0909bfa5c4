//! Massive digital over-the-air computation.
//!
//! Devices quantize their update vectors against a shared codebook, map each
//! quantization index onto a shared non-orthogonal transmit sequence, and
//! send simultaneously. The superposed observation at a multi-antenna
//! receiver is `Y = P X + Z`, where the first column of `X` holds the
//! integer number of devices that picked each sequence. An approximate
//! message passing detector with an integer-count prior on the pre-equalized
//! antenna and a Bernoulli-Gaussian prior elsewhere recovers those counts,
//! a majority vote across blocks estimates the number of active devices,
//! and the decoded sum drives a federated-learning round.
//!
//! Modules:
//! - [`quantizer`]: shared vector-quantization codebook with error feedback;
//! - [`modcodebook`]: the sequence codebook paired one-to-one with it;
//! - [`channel`]: Rayleigh fading, pre-equalization, superposition, AWGN;
//! - [`detector`]: the AMP loop, hybrid denoisers, EM hyper-parameter
//!   learning, active-device estimation, aggregation;
//! - [`feel`]: the federated edge learning harness and reference arms;
//! - [`metrics`]: NMSE, collision statistics, and overhead accounting.
//!
//! Core math is generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); the aliases below pin the common `f64` instantiation.

pub mod channel;
pub mod detector;
pub mod error;
pub mod mat;
pub mod metrics;
pub mod modcodebook;
pub mod quantizer;
pub mod scalar;
pub mod seed;
pub mod sim;

pub mod feel;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` complex sample.
pub type C64 = num_complex::Complex<f64>;
/// `f32` complex sample.
pub type C32 = num_complex::Complex<f32>;

/// Common `f64` instantiations.
pub type QuantCodebook64 = quantizer::QuantCodebook<f64>;
pub type ModCodebook64 = modcodebook::ModCodebook<f64>;
pub type ChannelRealization64 = channel::ChannelRealization<f64>;
pub type Detection64 = detector::Detection<f64>;
pub type Model64 = feel::Model<f64>;
