//! Over-the-air computation over a Cloud-RAN with capacity-limited fronthaul.
//!
//! Devices transmit scaled symbols simultaneously; multi-antenna RRHs quantize
//! what they receive and forward it to a BBU, which forms a linear estimate of
//! the sum of the symbols. The crate models channels and fronthaul
//! quantization, optimizes transmit scalars, the receive combiner and the
//! per-antenna bit allocation to minimize the aggregation MSE, and runs Monte
//! Carlo sweeps comparing the resulting scheme against its baselines.

pub mod bitalloc;
pub mod channel;
pub mod error;
pub mod harness;
pub mod quantization;
pub mod solver;
pub mod transceiver;

pub use channel::{ChannelRealization, SystemConfig, Topology};
pub use error::{Error, Result};
pub use quantization::{BitAllocation, BitMode, QuantizationProfile};
pub use solver::{SolverOptions, SolverResult};
pub use transceiver::{ReceiveBeamformer, TransmitPolicy};
