#![allow(dead_code)]

use ancsim_core::power::thermal_noise_power;
use ancsim_core::{
    allocate, ChannelRealization, Complex, NetworkTopology, NoisePowers, PowerAllocation,
};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C = Complex<f64>;

/// -174 dBm/Hz over 22 MHz.
pub fn sigma2() -> f64 {
    thermal_noise_power(22e6, -174.0)
}

pub fn reference_noise(k: usize) -> NoisePowers<f64> {
    NoisePowers::uniform(k, sigma2())
}

/// Two pairs, alpha = 4, P_tot = 2, psi = 3/8 each.
pub fn reference_setup(
    direct: f64,
    cross: f64,
    relay: f64,
) -> (NetworkTopology<f64>, PowerAllocation<f64>) {
    (
        NetworkTopology::symmetric(2, direct, cross, relay, 4.0).unwrap(),
        allocate(2.0, &[0.375, 0.375]).unwrap(),
    )
}

pub fn cn<R: Rng>(rng: &mut R) -> C {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent CN(0, 1) coefficients on every link.
pub fn random_realization<R: Rng>(k: usize, rng: &mut R) -> ChannelRealization<f64> {
    let sd = (0..k * k).map(|_| cn(rng)).collect();
    let sr = (0..k).map(|_| cn(rng)).collect();
    let rd = (0..k).map(|_| cn(rng)).collect();
    ChannelRealization::new(k, sd, sr, rd).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
