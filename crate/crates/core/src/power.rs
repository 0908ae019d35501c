//! Total-power split between sources and relay, and the relay gain.

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::topology::NetworkTopology;

/// Source `i` transmits `psi[i] * p_total`; the relay gets what is left.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation<T> {
    p_total: T,
    psi: Vec<T>,
    p_source: Vec<T>,
    p_relay: T,
}

/// Splits `p_total` according to the fractions `psi`.
///
/// `sum(psi) == 1` leaves nothing for the relay (non-cooperative operation).
pub fn allocate<T: Real>(p_total: T, psi: &[T]) -> Result<PowerAllocation<T>> {
    if !(p_total > T::zero()) || !p_total.is_finite() {
        return Err(Error::invalid(
            "power allocation",
            format!("p_total must be positive, got {p_total}"),
        ));
    }
    if psi.is_empty() {
        return Err(Error::invalid(
            "power allocation",
            "psi must have one entry per source",
        ));
    }
    if let Some((i, f)) = psi
        .iter()
        .enumerate()
        .find(|(_, f)| !(**f > T::zero() && **f <= T::one()))
    {
        return Err(Error::invalid(
            "power allocation",
            format!("psi[{i}] = {f} is outside (0, 1]"),
        ));
    }
    let sum: T = psi.iter().copied().sum();
    // a few ulps of slack so that e.g. [0.1; 10] counts as a full split
    let slack = T::epsilon() * T::from_usize(4 * psi.len()).unwrap();
    if sum > T::one() + slack {
        return Err(Error::invalid(
            "power allocation",
            format!("psi sums to {sum}, which exceeds 1"),
        ));
    }
    let p_source: Vec<T> = psi.iter().map(|f| *f * p_total).collect();
    let p_relay = ((T::one() - sum) * p_total).max(T::zero());
    Ok(PowerAllocation {
        p_total,
        psi: psi.to_vec(),
        p_source,
        p_relay,
    })
}

impl<T: Real> PowerAllocation<T> {
    pub fn p_total(&self) -> T {
        self.p_total
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn p_source(&self) -> &[T] {
        &self.p_source
    }

    pub fn source(&self, i: usize) -> T {
        self.p_source[i]
    }

    pub fn p_relay(&self) -> T {
        self.p_relay
    }

    pub fn num_sources(&self) -> usize {
        self.psi.len()
    }
}

/// Additive noise power at every receiver (linear units).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePowers<T> {
    pub dest: Vec<T>,
    pub relay: T,
}

/// Boltzmann-limited noise density at room temperature, dBm/Hz.
pub const THERMAL_DENSITY_DBM_HZ: f64 = -174.0;

/// Noise power in watts of a receiver with the given bandwidth and noise
/// density: `10^((density_dbm_hz - 30) / 10) * bandwidth_hz`.
pub fn thermal_noise_power(bandwidth_hz: f64, density_dbm_hz: f64) -> f64 {
    10f64.powf((density_dbm_hz - 30.0) / 10.0) * bandwidth_hz
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl<T: Real> NoisePowers<T> {
    /// Same noise power `sigma2` at every node.
    pub fn uniform(num_pairs: usize, sigma2: T) -> Self {
        Self {
            dest: vec![sigma2; num_pairs],
            relay: sigma2,
        }
    }

    pub fn validate(&self, num_pairs: usize) -> Result<()> {
        if self.dest.len() != num_pairs {
            return Err(Error::invalid(
                "noise powers",
                format!(
                    "{} destination entries for {num_pairs} pairs",
                    self.dest.len()
                ),
            ));
        }
        let ok = |v: &T| *v >= T::zero() && v.is_finite();
        if !self.dest.iter().all(ok) || !ok(&self.relay) {
            return Err(Error::invalid(
                "noise powers",
                "noise powers must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Relay gain that makes the forwarded sum of all received source slots carry
/// exactly `p_relay` on average:
///
/// `A_f = sqrt(P_R / (sum_m P_{S_m} |h_{S_m R}|^2 d_{S_m R}^(-alpha) + K sigma_R^2))`
pub fn amplification_factor<T: Real>(
    alloc: &PowerAllocation<T>,
    topo: &NetworkTopology<T>,
    h: &ChannelRealization<T>,
    sigma2_relay: T,
) -> Result<T> {
    let k = topo.num_pairs();
    if alloc.num_sources() != k || h.num_pairs() != k {
        return Err(Error::invalid(
            "amplification factor",
            "inconsistent pair counts",
        ));
    }
    if !(sigma2_relay >= T::zero()) {
        return Err(Error::Domain(format!(
            "relay noise power must be non-negative, got {sigma2_relay}"
        )));
    }
    let received: T = (0..k)
        .map(|m| {
            alloc.source(m)
                * h.source_relay(m).norm_sqr()
                * topo.source_relay(m).powf(-topo.alpha())
        })
        .sum();
    let denom = received + T::from_usize(k).unwrap() * sigma2_relay;
    if !(denom > T::zero()) {
        return Err(Error::Domain(
            "amplification factor denominator is zero".into(),
        ));
    }
    Ok((alloc.p_relay() / denom).sqrt())
}
