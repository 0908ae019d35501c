//! Analog network coding (ANC) noise and outage analysis for amplify-and-forward
//! relay networks with K source/destination pairs and spatially correlated
//! Rayleigh fading.
//!
//! All numeric types are generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.
//!
//! | module       | contents                                                   |
//! |--------------|------------------------------------------------------------|
//! | [`topology`] | distances, pathloss, symmetric sweeps                      |
//! | [`channel`]  | correlation matrices, correlated CN(0, 1) sampling         |
//! | [`power`]    | total-power split, noise powers, relay amplification       |
//! | [`anc`]      | slot signals, reconstruction, residual decomposition/variance |
//! | [`outage`]   | selection-combining outage estimator and brute-force oracles |

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod anc;
pub mod channel;
mod error;
pub mod outage;
pub mod power;
mod scalar;
pub mod stream;
pub mod topology;

pub use num_complex::Complex;

pub use anc::{
    decompose, noise_variance, reconstruct, reconstruct_all, simulate_cycle, variance_statistic,
    NoiseDecomposition, NoiseVariance, SlotNoise, SlotSignals, Statistic, VarianceSummary,
};
pub use channel::{
    channel_count, sample_channels, sample_ensemble, ChannelRealization, CorrelationSpec, Gamma,
};
pub use error::{Error, Result};
pub use outage::{
    estimate_outage, relay_power_oracle, relay_snr_oracle, residual_variance_oracle, snr_pair,
    Branch, ChannelSource, Combining, MonteCarlo, OutageResult, SnrPair,
};
pub use power::{allocate, amplification_factor, NoisePowers, PowerAllocation};
pub use scalar::Real;
pub use topology::{amplitude_attenuation, build_symmetric_sweep, NetworkTopology, SweepConfig};

pub type NetworkTopology64 = NetworkTopology<f64>;
pub type NetworkTopology32 = NetworkTopology<f32>;
pub type SweepConfig64 = SweepConfig<f64>;
pub type SweepConfig32 = SweepConfig<f32>;
pub type CorrelationSpec64 = CorrelationSpec<f64>;
pub type CorrelationSpec32 = CorrelationSpec<f32>;
pub type ChannelRealization64 = ChannelRealization<f64>;
pub type ChannelRealization32 = ChannelRealization<f32>;
pub type PowerAllocation64 = PowerAllocation<f64>;
pub type PowerAllocation32 = PowerAllocation<f32>;
pub type NoisePowers64 = NoisePowers<f64>;
pub type NoisePowers32 = NoisePowers<f32>;
pub type SlotSignals64 = SlotSignals<f64>;
pub type SlotSignals32 = SlotSignals<f32>;
pub type SnrPair64 = SnrPair<f64>;
pub type SnrPair32 = SnrPair<f32>;
