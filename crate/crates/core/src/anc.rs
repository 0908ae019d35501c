//! Signal model of one (K+1)-slot cycle and the analog network coding residual.
//!
//! Slot `i` (`0..K`): source `S_i` transmits `x_i = sqrt(P_{S_i}) s_i` and every
//! destination plus the relay receive it:
//!
//! ```text
//! Y_{S_i D_j} = d_{S_i D_j}^(-a/2) h_{S_i D_j} x_i + n_{D_j}
//! Y_{S_i R}   = d_{S_i R}^(-a/2)   h_{S_i R}   x_i + n_R
//! ```
//!
//! Slot `K`: the relay forwards `X_R = A_f sum_i Y_{S_i R}` and destination `j`
//! receives `Y_{R D_j} = d_{R D_j}^(-a/2) h_{R D_j} X_R + n_{D_j}`.
//!
//! Destination `j` then subtracts every overheard slot scaled by
//! `c_ij = A_f g_{R D_j} g_{S_i R} / g_{S_i D_j}` (with `g = d^(-a/2) h`), which
//! removes `x_i` from the relayed signal and leaves
//!
//! ```text
//! Y~_{R D_j} = A_f g_{R D_j} Y_{S_j R}                      desired
//!            + n_{D_j}                                      background
//!            + sum_{i != j} (A_f g_{R D_j} n_{R,i} - c_ij n_{D_j,i})   residual
//! ```
//!
//! Substituting the slot equations directly gives the residual coefficient
//! `A_f d_{S_i D_j}^(a/2) h_{R D_j} h_{S_i R} / (d_{R D_j}^(a/2) d_{S_i R}^(a/2) h_{S_i D_j})`,
//! i.e. exactly `c_ij`. Noise draws in different slots are independent, so the
//! residual variance is
//!
//! ```text
//! sigma_{D_j}^2 + (K-1) sigma_R^2 |A_f g_{R D_j}|^2 + sigma_{D_j}^2 sum_{i != j} |c_ij|^2
//! ```
//!
//! Squares of complex gains are squared magnitudes throughout.

use std::cmp::Ordering;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{complex_normal, ChannelRealization};
use crate::error::{Error, Result};
use crate::power::{amplification_factor, NoisePowers, PowerAllocation};
use crate::scalar::Real;
use crate::topology::NetworkTopology;

/// `|h_{S_i D_j}|^2` below this value is raised to it inside the cancellation
/// coefficient.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Noise samples for one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotNoise<T> {
    num_pairs: usize,
    /// `(K+1)×K`, slot-major: `dest[slot * K + j]`.
    dest: Vec<Complex<T>>,
    /// One relay sample per source slot.
    relay: Vec<Complex<T>>,
}

impl<T: Real> SlotNoise<T> {
    pub fn zeros(num_pairs: usize) -> Self {
        Self {
            num_pairs,
            dest: vec![czero(); (num_pairs + 1) * num_pairs],
            relay: vec![czero(); num_pairs],
        }
    }

    pub fn from_parts(
        num_pairs: usize,
        dest: Vec<Complex<T>>,
        relay: Vec<Complex<T>>,
    ) -> Result<Self> {
        if dest.len() != (num_pairs + 1) * num_pairs || relay.len() != num_pairs {
            return Err(Error::invalid(
                "slot noise",
                "dimensions inconsistent with num_pairs",
            ));
        }
        Ok(Self {
            num_pairs,
            dest,
            relay,
        })
    }

    /// Draws CN(0, sigma^2) samples for every receiver and slot.
    pub fn sample<R: Rng + ?Sized>(num_pairs: usize, sigma2: &NoisePowers<T>, rng: &mut R) -> Self {
        let mut n = Self::zeros(num_pairs);
        n.resample(sigma2, rng);
        n
    }

    /// Redraws in place. Order: destination samples slot by slot, then relay.
    pub fn resample<R: Rng + ?Sized>(&mut self, sigma2: &NoisePowers<T>, rng: &mut R) {
        let k = self.num_pairs;
        let dest_sd: Vec<T> = sigma2.dest.iter().map(|s| s.sqrt()).collect();
        for (idx, n) in self.dest.iter_mut().enumerate() {
            *n = complex_normal::<T, R>(rng) * dest_sd[idx % k];
        }
        let relay_sd = sigma2.relay.sqrt();
        for n in &mut self.relay {
            *n = complex_normal::<T, R>(rng) * relay_sd;
        }
    }

    /// Noise at `D_j` during `slot` (`slot == K` is the relay slot).
    pub fn dest(&self, slot: usize, j: usize) -> Complex<T> {
        self.dest[slot * self.num_pairs + j]
    }

    /// Noise at the relay during source slot `slot`.
    pub fn relay(&self, slot: usize) -> Complex<T> {
        self.relay[slot]
    }
}

/// Every received signal of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSignals<T> {
    num_pairs: usize,
    /// Row-major K×K, `(i, j)` is `Y_{S_i D_j}`.
    pub y_dest: Vec<Complex<T>>,
    pub y_relay: Vec<Complex<T>>,
    pub x_relay: Complex<T>,
    pub y_relay_dest: Vec<Complex<T>>,
}

impl<T: Real> SlotSignals<T> {
    pub fn zeros(num_pairs: usize) -> Self {
        Self {
            num_pairs,
            y_dest: vec![czero(); num_pairs * num_pairs],
            y_relay: vec![czero(); num_pairs],
            x_relay: czero(),
            y_relay_dest: vec![czero(); num_pairs],
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    /// `Y_{S_i D_j}`.
    pub fn source_dest(&self, source: usize, dest: usize) -> Complex<T> {
        self.y_dest[source * self.num_pairs + dest]
    }

    /// Recomputes every signal in place; dimensions must already match.
    pub fn update(
        &mut self,
        topo: &NetworkTopology<T>,
        alloc: &PowerAllocation<T>,
        h: &ChannelRealization<T>,
        relay_gain: T,
        symbols: &[Complex<T>],
        noise: &SlotNoise<T>,
    ) {
        let k = self.num_pairs;
        let mut relay_sum = czero();
        for i in 0..k {
            let x = symbols[i] * alloc.source(i).sqrt();
            for j in 0..k {
                self.y_dest[i * k + j] =
                    h.source_dest(i, j) * x * topo.source_dest_gain(i, j) + noise.dest(i, j);
            }
            self.y_relay[i] = h.source_relay(i) * x * topo.source_relay_gain(i) + noise.relay(i);
            relay_sum = relay_sum + self.y_relay[i];
        }
        self.x_relay = relay_sum * relay_gain;
        for j in 0..k {
            self.y_relay_dest[j] =
                h.relay_dest(j) * self.x_relay * topo.relay_dest_gain(j) + noise.dest(k, j);
        }
    }
}

fn check_dims<T: Real>(
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
) -> Result<usize> {
    let k = topo.num_pairs();
    if alloc.num_sources() != k || h.num_pairs() != k {
        return Err(Error::invalid(
            "cycle inputs",
            format!(
                "pair counts disagree (topology {k}, power {}, channels {})",
                alloc.num_sources(),
                h.num_pairs()
            ),
        ));
    }
    Ok(k)
}

/// Runs one full cycle: K source slots followed by the relay slot.
///
/// `symbols` are unit-power; source `i` transmits `sqrt(P_{S_i}) symbols[i]`.
pub fn simulate_cycle<T: Real>(
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
    symbols: &[Complex<T>],
    noise: &SlotNoise<T>,
) -> Result<SlotSignals<T>> {
    let k = check_dims(topo, alloc, h)?;
    if symbols.len() != k || noise.num_pairs != k {
        return Err(Error::invalid(
            "cycle inputs",
            "symbol or noise dimensions inconsistent",
        ));
    }
    let mut s = SlotSignals::zeros(k);
    s.update(topo, alloc, h, relay_gain, symbols, noise);
    Ok(s)
}

/// Applies the denominator floor to a cross-link coefficient.
fn floor_cross_link<T: Real>(h: Complex<T>) -> (Complex<T>, bool) {
    let floor = T::lit(DENOMINATOR_FLOOR);
    let p = h.norm_sqr();
    if p >= floor {
        (h, false)
    } else if p > T::zero() {
        (h * (floor / p).sqrt(), true)
    } else {
        (Complex::new(floor.sqrt(), T::zero()), true)
    }
}

/// Cancellation coefficient from the three channels of one `(source, dest)` pair.
fn coefficient<T: Real>(
    topo: &NetworkTopology<T>,
    source: usize,
    dest: usize,
    relay_gain: T,
    [h_sd, h_sr, h_rd]: [Complex<T>; 3],
) -> (Complex<T>, bool) {
    let (h_sd, floored) = floor_cross_link(h_sd);
    let relay_path =
        h_rd * h_sr * (relay_gain * topo.relay_dest_gain(dest) * topo.source_relay_gain(source));
    (
        relay_path / (h_sd * topo.source_dest_gain(source, dest)),
        floored,
    )
}

/// Scale applied by `D_dest` to the overheard slot of `S_source` before
/// subtracting it from the relayed signal. The flag reports a floor hit.
pub fn cancellation_coefficient<T: Real>(
    dest: usize,
    source: usize,
    topo: &NetworkTopology<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
) -> (Complex<T>, bool) {
    let triple = [
        h.source_dest(source, dest),
        h.source_relay(source),
        h.relay_dest(dest),
    ];
    coefficient(topo, source, dest, relay_gain, triple)
}

fn check_pair(k: usize, dest: usize, source: usize) -> Result<()> {
    if dest >= k || source >= k || dest == source {
        return Err(Error::invalid(
            "reconstruction",
            format!("(dest {dest}, undesired source {source}) is not a foreign pair for K = {k}"),
        ));
    }
    Ok(())
}

/// Relayed signal at `D_dest` after cancelling the overheard slot of one
/// undesired source.
pub fn reconstruct<T: Real>(
    dest: usize,
    source: usize,
    signals: &SlotSignals<T>,
    topo: &NetworkTopology<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
) -> Result<Complex<T>> {
    check_pair(topo.num_pairs(), dest, source)?;
    let (c, _) = cancellation_coefficient(dest, source, topo, h, relay_gain);
    Ok(signals.y_relay_dest[dest] - c * signals.source_dest(source, dest))
}

/// Relayed signal at `D_dest` after cancelling every undesired source. For two
/// pairs this equals [`reconstruct`] with the single foreign source.
pub fn reconstruct_all<T: Real>(
    dest: usize,
    signals: &SlotSignals<T>,
    topo: &NetworkTopology<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
) -> Complex<T> {
    (0..topo.num_pairs())
        .filter(|i| *i != dest)
        .fold(signals.y_relay_dest[dest], |acc, i| {
            let (c, _) = cancellation_coefficient(dest, i, topo, h, relay_gain);
            acc - c * signals.source_dest(i, dest)
        })
}

/// The three parts of the reconstructed relay copy at one destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDecomposition<T> {
    /// `A_f g_{R D_j} Y_{S_j R}`.
    pub desired: Complex<T>,
    /// Destination noise of the relay slot.
    pub background: Complex<T>,
    /// Forwarded relay noise of the foreign slots, scaled overheard noise, and
    /// any signal left over when the denominator floor made cancellation inexact.
    pub anc_residual: Complex<T>,
}

impl<T: Real> NoiseDecomposition<T> {
    pub fn total(&self) -> Complex<T> {
        self.desired + self.background + self.anc_residual
    }
}

/// Splits [`reconstruct_all`] at `dest` into its three components, using the
/// raw symbols and noise draws of the cycle.
#[allow(clippy::too_many_arguments)]
pub fn decompose<T: Real>(
    dest: usize,
    signals: &SlotSignals<T>,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
    symbols: &[Complex<T>],
    noise: &SlotNoise<T>,
) -> Result<NoiseDecomposition<T>> {
    let k = check_dims(topo, alloc, h)?;
    if dest >= k {
        return Err(Error::invalid(
            "decomposition",
            format!("destination {dest} out of range"),
        ));
    }
    let forward = h.relay_dest(dest) * (relay_gain * topo.relay_dest_gain(dest));
    let desired = forward * signals.y_relay[dest];
    let background = noise.dest(k, dest);
    let anc_residual = (0..k).filter(|i| *i != dest).fold(czero(), |acc, i| {
        let (c, _) = cancellation_coefficient(dest, i, topo, h, relay_gain);
        let x = symbols[i] * alloc.source(i).sqrt();
        let relay_path = forward * h.source_relay(i) * topo.source_relay_gain(i);
        let direct_path = c * h.source_dest(i, dest) * topo.source_dest_gain(i, dest);
        acc + forward * noise.relay(i) - c * noise.dest(i, dest) + (relay_path - direct_path) * x
    });
    Ok(NoiseDecomposition {
        desired,
        background,
        anc_residual,
    })
}

/// Closed-form residual noise variance at one destination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseVariance<T> {
    /// `sigma_{D_j}^2 + sigma_R^2 relay_term + sigma_{D_j}^2 anc_term`.
    pub total: T,
    /// `(K-1) |A_f g_{R D_j}|^2`, the forwarded relay-noise factor.
    pub relay_term: T,
    /// `sum_{i != j} |c_ij|^2`, the imperfect-cancellation factor.
    pub anc_term: T,
    /// Number of cross links whose magnitude hit the denominator floor.
    pub floored: usize,
}

/// Variance of everything except the desired component at `D_dest`.
///
/// Per-source terms use the channel draws of the `(i, dest)` triple.
pub fn noise_variance<T: Real>(
    dest: usize,
    topo: &NetworkTopology<T>,
    h: &ChannelRealization<T>,
    relay_gain: T,
    sigma2: &NoisePowers<T>,
) -> NoiseVariance<T> {
    let k = topo.num_pairs();
    let forward = h.relay_dest(dest).norm_sqr() * (relay_gain * topo.relay_dest_gain(dest)).powi(2);
    let relay_term = T::from_usize(k - 1).unwrap() * forward;
    let mut anc_term = T::zero();
    let mut floored = 0;
    for i in (0..k).filter(|i| *i != dest) {
        let (c, hit) = coefficient(topo, i, dest, relay_gain, h.triple(i, dest));
        anc_term = anc_term + c.norm_sqr();
        floored += usize::from(hit);
    }
    let sd = sigma2.dest[dest];
    NoiseVariance {
        total: sd + sigma2.relay * relay_term + sd * anc_term,
        relay_term,
        anc_term,
        floored,
    }
}

/// Robust summary of a heavy-tailed ensemble.
///
/// The imperfect-cancellation term scales with `1/|h_{S_i D_j}|^2`, whose mean
/// does not exist under Rayleigh fading, so plain averages do not converge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Median,
    /// Mean after dropping `floor(p n)` samples from each tail, `0 <= p < 0.5`.
    TrimmedMean(f64),
}

impl Statistic {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Statistic::TrimmedMean(p) if !(0.0..0.5).contains(&p) => Err(Error::invalid(
                "statistic",
                format!("trim fraction must lie in [0, 0.5), got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Evaluates the statistic; sorts `values` in place.
    pub fn apply<T: Real>(&self, values: &mut [T]) -> Result<T> {
        self.validate()?;
        if values.is_empty() {
            return Err(Error::invalid("statistic", "empty sample"));
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let n = values.len();
        Ok(match *self {
            Statistic::Median if n % 2 == 1 => values[n / 2],
            Statistic::Median => (values[n / 2 - 1] + values[n / 2]) * T::lit(0.5),
            Statistic::TrimmedMean(p) => {
                let cut = (p * n as f64).floor() as usize;
                let kept = &values[cut..n - cut];
                kept.iter().copied().sum::<T>() / T::from_usize(kept.len()).unwrap()
            }
        })
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Median => write!(f, "median"),
            Statistic::TrimmedMean(p) => write!(f, "trimmed_mean({p})"),
        }
    }
}

/// A statistic of the closed-form variance over a channel ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSummary<T> {
    pub value: T,
    /// Same statistic of the forwarded relay-noise factor.
    pub relay_term: T,
    /// Same statistic of the imperfect-cancellation factor.
    pub anc_term: T,
    pub n_floored: usize,
}

/// Evaluates [`noise_variance`] at `dest` for every realization (recomputing
/// the relay gain each time) and summarizes with `statistic`.
pub fn variance_statistic<T: Real>(
    ensemble: &[ChannelRealization<T>],
    dest: usize,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    sigma2: &NoisePowers<T>,
    statistic: Statistic,
) -> Result<VarianceSummary<T>> {
    statistic.validate()?;
    if ensemble.is_empty() {
        return Err(Error::invalid(
            "ensemble",
            "at least one realization is required",
        ));
    }
    if dest >= topo.num_pairs() {
        return Err(Error::invalid(
            "ensemble",
            format!("destination {dest} out of range"),
        ));
    }
    sigma2.validate(topo.num_pairs())?;
    let evals = ensemble
        .par_iter()
        .map(|h| {
            let af = amplification_factor(alloc, topo, h, sigma2.relay)?;
            Ok(noise_variance(dest, topo, h, af, sigma2))
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&NoiseVariance<T>) -> T| {
        let mut v: Vec<T> = evals.iter().map(f).collect();
        statistic.apply(&mut v)
    };
    Ok(VarianceSummary {
        value: column(|e| e.total)?,
        relay_term: column(|e| e.relay_term)?,
        anc_term: column(|e| e.anc_term)?,
        n_floored: evals.iter().map(|e| e.floored).sum(),
    })
}
