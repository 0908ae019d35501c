//! Brute-force estimators used to check the closed forms.
//!
//! Each one replays full cycles through [`simulate_cycle`](crate::anc::simulate_cycle)
//! style updates with a fixed channel realization and fresh noise per draw.

use num_complex::Complex;
use rand::Rng;

use crate::anc::{decompose, reconstruct_all, SlotNoise, SlotSignals};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::power::{amplification_factor, NoisePowers, PowerAllocation};
use crate::scalar::Real;
use crate::stream;
use crate::topology::NetworkTopology;

/// Smallest draw count accepted by the variance oracles.
pub const MIN_NOISE_DRAWS: usize = 10_000;

/// Shifted sums for a complex sample variance; shifting by the first sample
/// keeps a constant sequence at exactly zero variance.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    shift: Option<Complex<f64>>,
    n: usize,
    sum: Complex<f64>,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, z: Complex<f64>) {
        let shift = *self.shift.get_or_insert(z);
        let d = z - shift;
        self.n += 1;
        self.sum += d;
        self.sum_sq += d.norm_sqr();
    }

    fn merge(mut self, other: Moments) -> Moments {
        let Some(s_other) = other.shift else {
            return self;
        };
        let Some(s) = self.shift else { return other };
        // re-center the other block on our shift
        let delta = s_other - s;
        let n = other.n as f64;
        self.sum_sq += other.sum_sq + 2.0 * (other.sum * delta.conj()).re + n * delta.norm_sqr();
        self.sum += other.sum + delta * n;
        self.n += other.n;
        self
    }

    /// `E|z - E z|^2` with divisor `n - 1`.
    fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum.norm_sqr() / n) / (n - 1.0)).max(0.0)
    }
}

fn check(topo_k: usize, h: &ChannelRealization<impl Real>, dest: usize, n: usize) -> Result<()> {
    if h.num_pairs() != topo_k || dest >= topo_k {
        return Err(Error::invalid(
            "oracle",
            "destination or channels inconsistent with topology",
        ));
    }
    if n < MIN_NOISE_DRAWS {
        return Err(Error::invalid(
            "oracle",
            format!("at least {MIN_NOISE_DRAWS} noise draws are required, got {n}"),
        ));
    }
    Ok(())
}

fn ones<T: Real>(k: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::one(), T::zero()); k]
}

/// Sample variance of `reconstruct_all - desired component` at `D_dest` over
/// `n_noise_draws` independent noise vectors, with channels and symbols
/// (`s = 1`) held fixed.
#[allow(clippy::too_many_arguments)]
pub fn residual_variance_oracle<T: Real>(
    dest: usize,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    sigma2: &NoisePowers<T>,
    n_noise_draws: usize,
    seed: u64,
) -> Result<T> {
    let k = topo.num_pairs();
    check(k, h, dest, n_noise_draws)?;
    sigma2.validate(k)?;
    let af = amplification_factor(alloc, topo, h, sigma2.relay)?;
    let symbols = ones::<T>(k);
    let forward = h.relay_dest(dest) * (af * topo.relay_dest_gain(dest));
    let blocks = stream::map_blocks(n_noise_draws, seed, None, |rng, range| {
        let mut noise = SlotNoise::zeros(k);
        let mut signals = SlotSignals::zeros(k);
        let mut m = Moments::default();
        for _ in range {
            noise.resample(sigma2, rng);
            signals.update(topo, alloc, h, af, &symbols, &noise);
            let r = reconstruct_all(dest, &signals, topo, h, af) - forward * signals.y_relay[dest];
            m.push(Complex::new(r.re.as_f64(), r.im.as_f64()));
        }
        m
    });
    let total = blocks.into_iter().fold(Moments::default(), Moments::merge);
    Ok(T::lit(total.variance()))
}

/// Relay-branch SNR measured on simulated cycles: power of the noiseless
/// desired component over the sample residual variance.
#[allow(clippy::too_many_arguments)]
pub fn relay_snr_oracle<T: Real>(
    dest: usize,
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    sigma2: &NoisePowers<T>,
    n_noise_draws: usize,
    seed: u64,
) -> Result<T> {
    let k = topo.num_pairs();
    check(k, h, dest, n_noise_draws)?;
    let af = amplification_factor(alloc, topo, h, sigma2.relay)?;
    let symbols = ones::<T>(k);
    let quiet = SlotNoise::zeros(k);
    let mut signals = SlotSignals::zeros(k);
    signals.update(topo, alloc, h, af, &symbols, &quiet);
    let desired = decompose(dest, &signals, topo, alloc, h, af, &symbols, &quiet)?.desired;
    let residual = residual_variance_oracle(dest, topo, alloc, h, sigma2, n_noise_draws, seed)?;
    Ok(desired.norm_sqr() / residual)
}

/// Sample mean of `|X_R|^2` with random unit-modulus symbols and fresh relay
/// noise per draw.
pub fn relay_power_oracle<T: Real>(
    topo: &NetworkTopology<T>,
    alloc: &PowerAllocation<T>,
    h: &ChannelRealization<T>,
    sigma2: &NoisePowers<T>,
    n_draws: usize,
    seed: u64,
) -> Result<T> {
    let k = topo.num_pairs();
    check(k, h, 0, n_draws)?;
    sigma2.validate(k)?;
    let af = amplification_factor(alloc, topo, h, sigma2.relay)?;
    let sums = stream::map_blocks(n_draws, seed, None, |rng, range| {
        let mut noise = SlotNoise::zeros(k);
        let mut signals = SlotSignals::zeros(k);
        let mut symbols = ones::<T>(k);
        let mut acc = 0.0_f64;
        for _ in range {
            for s in &mut symbols {
                let phase = T::lit(rng.random::<f64>()) * T::TAU();
                *s = Complex::from_polar(T::one(), phase);
            }
            noise.resample(sigma2, rng);
            signals.update(topo, alloc, h, af, &symbols, &noise);
            acc += signals.x_relay.norm_sqr().as_f64();
        }
        acc
    });
    Ok(T::lit(sums.into_iter().sum::<f64>() / n_draws as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::allocate;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let zs: Vec<Complex<f64>> = (0..1000)
            .map(|i| c((i as f64 * 0.37).sin() + 5.0, (i as f64).cos()))
            .collect();
        let mut whole = Moments::default();
        zs.iter().for_each(|z| whole.push(*z));
        let mut a = Moments::default();
        let mut b = Moments::default();
        zs[..300].iter().for_each(|z| a.push(*z));
        zs[300..].iter().for_each(|z| b.push(*z));
        let merged = a.merge(b);
        assert!((merged.variance() - whole.variance()).abs() < 1e-12 * whole.variance());
        assert_eq!(Moments::default().merge(whole).n, 1000);
    }

    #[test]
    fn noiseless_residual_is_zero() {
        let topo = NetworkTopology::symmetric(2, 400.0, 200.0, 223.6, 4.0).unwrap();
        let alloc = allocate(2.0, &[0.375, 0.375]).unwrap();
        let h = ChannelRealization::new(
            2,
            vec![c(0.3, 0.2), c(-0.5, 0.9), c(1.1, -0.4), c(0.2, 0.6)],
            vec![c(0.8, 0.1), c(-0.7, 0.3)],
            vec![c(0.4, -0.4), c(1.0, 0.2)],
        )
        .unwrap();
        let v = residual_variance_oracle(
            0,
            &topo,
            &alloc,
            &h,
            &NoisePowers::uniform(2, 0.0),
            10_000,
            1,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn too_few_draws_rejected() {
        let topo = NetworkTopology::symmetric(2, 1.0, 1.0, 1.0, 4.0).unwrap();
        let alloc = allocate(2.0, &[0.375, 0.375]).unwrap();
        let h = ChannelRealization::constant(2, c(1.0, 0.0));
        assert!(residual_variance_oracle(
            0,
            &topo,
            &alloc,
            &h,
            &NoisePowers::uniform(2, 1.0),
            100,
            1
        )
        .is_err());
    }
}
