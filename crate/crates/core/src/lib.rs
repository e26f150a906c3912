//! Sub-Nyquist ultrasound image-line acquisition.
//!
//! The crate simulates per-element echo signals from on-beam scatterers,
//! forms the Nyquist-rate dynamically focused reference line, samples the
//! element signals with warped harmonic kernels so the samples are the
//! beamformed line's Fourier coefficients, and recovers the line's pulse
//! delays and amplitudes from those few samples.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the `f64` instantiations used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod cost;
pub mod error;
pub mod formats;
pub mod imaging;
mod linalg;
pub mod pipeline;
pub mod pulse;
pub mod recovery;
pub mod scalar;
pub mod scene;
pub mod sim;
pub mod xampling;

pub use error::{Error, Result};
pub use scalar::Real;

pub use beamform::{BeamformedLine, FocusMode};
pub use pulse::PulseModel;
pub use recovery::{DelayMethod, LineEstimate, LineRecovery, RecoveryOptions};
pub use sim::{ArrayGeometry, ChannelSet, NoiseSpec, Scatterer, Scene};
pub use xampling::{Kappa, MixingMatrix, XampleConfig, XampleOutput};

pub type PulseModel64 = PulseModel<f64>;
pub type PulseModel32 = PulseModel<f32>;
pub type ArrayGeometry64 = ArrayGeometry<f64>;
pub type ArrayGeometry32 = ArrayGeometry<f32>;
pub type Scene64 = Scene<f64>;
pub type Scene32 = Scene<f32>;
pub type ChannelSet64 = ChannelSet<f64>;
pub type ChannelSet32 = ChannelSet<f32>;
pub type BeamformedLine64 = BeamformedLine<f64>;
pub type BeamformedLine32 = BeamformedLine<f32>;
pub type XampleConfig64 = XampleConfig<f64>;
pub type XampleConfig32 = XampleConfig<f32>;
pub type MixingMatrix64 = MixingMatrix<f64>;
pub type MixingMatrix32 = MixingMatrix<f32>;
pub type LineEstimate64 = LineEstimate<f64>;
pub type LineEstimate32 = LineEstimate<f32>;
pub type LineRecovery64 = LineRecovery<f64>;
pub type LineRecovery32 = LineRecovery<f32>;
