//! Outage probability under selection combining, estimated by Monte Carlo.
//!
//! Each destination holds two copies of its own symbol: the direct slot and
//! the reconstructed relay copy. Their SNRs are
//!
//! ```text
//! SNR_D = P_{S_j} d_{S_j D_j}^(-a) |h_{S_j D_j}|^2 / sigma_{D_j}^2
//! SNR_R = |A_f g_{R D_j}|^2 P_{S_j} d_{S_j R}^(-a) |h_{S_j R}|^2 / sigma_NC^2
//! ```
//!
//! where `sigma_NC^2` is the closed-form residual variance from
//! [`crate::anc::noise_variance`]. The combiner keeps the larger one (ties go to
//! the direct branch) and the link is in outage when it falls below `beta`.

pub mod oracle;

use crate::anc::noise_variance;
use crate::channel::{sample_channels, ChannelRealization, CorrelationSpec};
use crate::error::{Error, Result};
use crate::power::{amplification_factor, NoisePowers, PowerAllocation};
use crate::scalar::Real;
use crate::stream;
use crate::topology::NetworkTopology;

pub use oracle::{relay_power_oracle, relay_snr_oracle, residual_variance_oracle};

/// z-value of a two-sided 95% normal interval.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Direct,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPair<T> {
    pub snr_direct: T,
    pub snr_relay: T,
}

impl<T: Real> SnrPair<T> {
    /// Selection combining; ties keep the direct branch.
    pub fn selected(&self) -> (Branch, T) {
        if self.snr_relay > self.snr_direct {
            (Branch::Relay, self.snr_relay)
        } else {
            (Branch::Direct, self.snr_direct)
        }
    }
}

// SNR with zero noise saturates at the largest finite value.
fn ratio<T: Real>(signal: T, noise: T) -> T {
    if noise > T::zero() {
        (signal / noise).min(T::max_value())
    } else if signal > T::zero() {
        T::max_value()
    } else {
        T::zero()
    }
}

/// Per-branch SNR at `D_dest` and the number of floored cross links.
pub fn snr_pair<T: Real>(
    dest: usize,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
    sigma2: &NoisePowers<T>,
) -> (SnrPair<T>, usize) {
    let p = alloc.source(dest);
    let g_direct = topo.source_dest_gain(dest, dest);
    let snr_direct = ratio(
        p * g_direct * g_direct * h.source_dest(dest, dest).norm_sqr(),
        sigma2.dest[dest],
    );

    let nv = noise_variance(dest, topo, h, relay_gain, sigma2);
    let forward = (relay_gain * topo.relay_dest_gain(dest)).powi(2) * h.relay_dest(dest).norm_sqr();
    let g_up = topo.source_relay_gain(dest);
    let desired = forward * p * g_up * g_up * h.source_relay(dest).norm_sqr();
    let snr_relay = ratio(desired, nv.total);
    (
        SnrPair {
            snr_direct,
            snr_relay,
        },
        nv.floored,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combining {
    /// Best of direct and relay branch.
    Selection,
    /// Direct branch only (no cooperation).
    DirectOnly,
}

/// Where each trial's channels come from.
#[derive(Debug, Clone, Copy)]
pub enum ChannelSource<'a, T> {
    Correlated(&'a CorrelationSpec<T>),
    /// Same realization in every trial.
    Fixed(&'a ChannelRealization<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub n_trials: usize,
    pub seed: u64,
    /// Thread count; `None` uses the global pool. Results never depend on it.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub p_out: f64,
    /// Half-width of the 95% normal-approximation interval.
    pub ci_halfwidth: f64,
    pub n_trials: usize,
    pub n_floored: usize,
    pub seed: u64,
}

impl OutageResult {
    fn from_counts(outages: usize, n_trials: usize, n_floored: usize, seed: u64) -> Self {
        let n = n_trials as f64;
        let p = outages as f64 / n;
        Self {
            p_out: p,
            ci_halfwidth: Z_95 * (p * (1.0 - p) / n).sqrt(),
            n_trials,
            n_floored,
            seed,
        }
    }

    /// Interval bounds clipped to `[0, 1]`.
    pub fn ci_bounds(&self) -> (f64, f64) {
        (
            (self.p_out - self.ci_halfwidth).max(0.0),
            (self.p_out + self.ci_halfwidth).min(1.0),
        )
    }
}

/// Estimates `P(SNR < beta)` at `D_dest`; `beta` is linear.
#[allow(clippy::too_many_arguments)]
pub fn estimate_outage<T: Real>(
    dest: usize,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    channels: ChannelSource<'_, T>,
    sigma2: &NoisePowers<T>,
    beta: T,
    combining: Combining,
    mc: MonteCarlo,
) -> Result<OutageResult> {
    let k = topo.num_pairs();
    if mc.n_trials == 0 {
        return Err(Error::invalid("outage", "n_trials must be at least 1"));
    }
    if !(beta > T::zero()) {
        return Err(Error::invalid(
            "outage",
            format!("threshold must be positive, got {beta}"),
        ));
    }
    if dest >= k || alloc.num_sources() != k {
        return Err(Error::invalid(
            "outage",
            "destination or power vector inconsistent with topology",
        ));
    }
    sigma2.validate(k)?;
    match channels {
        ChannelSource::Correlated(spec) if spec.num_pairs() != k => {
            return Err(Error::invalid(
                "outage",
                "correlation spec pair count differs from topology",
            ))
        }
        ChannelSource::Fixed(h) if h.num_pairs() != k => {
            return Err(Error::invalid(
                "outage",
                "channel realization pair count differs from topology",
            ))
        }
        _ => {}
    }

    let blocks = stream::map_blocks(
        mc.n_trials,
        mc.seed,
        mc.workers,
        |rng, range| -> Result<(usize, usize)> {
            let mut outages = 0;
            let mut floored = 0;
            for _ in range {
                let drawn;
                let h = match channels {
                    ChannelSource::Correlated(spec) => {
                        drawn = sample_channels(spec, rng);
                        &drawn
                    }
                    ChannelSource::Fixed(h) => h,
                };
                let af = amplification_factor(alloc, topo, h, sigma2.relay)?;
                let (snr, f) = snr_pair(dest, topo, alloc, h, af, sigma2);
                floored += f;
                let received = match combining {
                    Combining::Selection => snr.selected().1,
                    Combining::DirectOnly => snr.snr_direct,
                };
                outages += usize::from(received < beta);
            }
            Ok((outages, floored))
        },
    );
    let (outages, floored) = blocks
        .into_iter()
        .try_fold((0, 0), |(o, f), b| b.map(|(bo, bf)| (o + bo, f + bf)))?;
    Ok(OutageResult::from_counts(
        outages,
        mc.n_trials,
        floored,
        mc.seed,
    ))
}
