//! Physical-layer simulator for a unified OFDM + AFDM block serving a primary
//! OFDM link, multiple delay-shift-keyed backscatter devices and chirp-based
//! range sensing.
//!
//! The signal chain is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which the Monte-Carlo harness uses.

// Negated comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block;
pub mod channel;
pub mod detection;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod params;
pub mod scalar;
pub mod selftest;
pub mod sensing;
pub mod stats;
pub mod waveform;

pub use block::{ComplexBlock, Domain};
pub use error::{Error, Result};
pub use params::{ParamMap, SystemConfig};
pub use scalar::Real;

pub type Block = ComplexBlock<f64>;
pub type Block32 = ComplexBlock<f32>;
pub type Synthesizer = waveform::Synthesizer<f64>;
pub type AffineTransform = waveform::AffineTransform<f64>;
