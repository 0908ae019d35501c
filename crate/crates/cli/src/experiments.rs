//! Sweep and oracle runners. Each returns typed rows; [`write_csv`] renders them.

use std::io::Write;

use ancsim_core::channel::sample_channels;
use ancsim_core::stream::derive_seed;
use ancsim_core::{
    allocate, amplification_factor, build_symmetric_sweep, estimate_outage, noise_variance,
    residual_variance_oracle, sample_ensemble, variance_statistic, ChannelRealization64,
    ChannelSource, Combining, CorrelationSpec64, MonteCarlo, NetworkTopology64, NoisePowers64,
    PowerAllocation64,
};
use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CombiningMode, Config, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub distance_ref: f64,
    pub rho: String,
    pub statistic_value: f64,
    pub second_term: f64,
    pub third_term: f64,
    pub n_floored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRow {
    pub distance_ref: f64,
    pub rho: String,
    pub p_out: f64,
    pub ci_halfwidth: f64,
    pub n_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub realization: usize,
    pub seed: u64,
    pub closed_form: f64,
    pub empirical: f64,
    pub rel_error: f64,
    pub pass: bool,
}

pub fn write_csv<W: Write, R: Serialize>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Scenario {
    pub fn spec(&self, num_pairs: usize) -> Result<CorrelationSpec64> {
        let spec = match self {
            Scenario::Uniform(rho) => CorrelationSpec64::uniform(*rho, num_pairs),
            Scenario::Custom(m) => CorrelationSpec64::from_matrices(num_pairs, m),
        };
        spec.with_context(|| format!("correlation scenario {}", self.label()))
    }
}

fn setup(cfg: &Config) -> Result<(Vec<NetworkTopology64>, PowerAllocation64)> {
    let topos = build_symmetric_sweep(&cfg.sweep).context("topology")?;
    let alloc = allocate(cfg.p_total, &cfg.psi).context("power")?;
    Ok((topos, alloc))
}

/// Reference distance of a sweep point: the cross link `S_2 -> D_1`.
fn distance_ref(topo: &NetworkTopology64) -> f64 {
    if topo.num_pairs() > 1 {
        topo.source_dest(1, 0)
    } else {
        topo.source_dest(0, 0)
    }
}

/// One row per (scenario, sweep point). The ensemble of each scenario is drawn
/// once from `seed` and reused at every point.
pub fn run_variance_sweep(cfg: &Config) -> Result<Vec<VarianceRow>> {
    let (topos, alloc) = setup(cfg)?;
    let v = &cfg.variance;
    let mut rows = Vec::with_capacity(topos.len() * cfg.scenarios.len());
    for scenario in &cfg.scenarios {
        let spec = scenario.spec(cfg.sweep.num_pairs)?;
        log::info!(
            "variance sweep: rho = {}, {} draws",
            scenario.label(),
            v.n_draws
        );
        let ensemble = sample_ensemble(&spec, v.n_draws, cfg.seed, cfg.workers);
        for topo in &topos {
            let s = variance_statistic(&ensemble, v.dest, topo, &alloc, &cfg.noise, v.statistic)?;
            rows.push(VarianceRow {
                distance_ref: distance_ref(topo),
                rho: scenario.label(),
                statistic_value: s.value,
                second_term: cfg.noise.relay * s.relay_term,
                third_term: cfg.noise.dest[v.dest] * s.anc_term,
                n_floored: s.n_floored,
            });
        }
    }
    Ok(rows)
}

/// One row per (scenario, sweep point); every point uses the same seed.
pub fn run_outage_sweep(cfg: &Config) -> Result<Vec<OutageRow>> {
    let (topos, alloc) = setup(cfg)?;
    let o = &cfg.outage;
    let combining = match o.combining {
        CombiningMode::Selection => Combining::Selection,
        CombiningMode::DirectOnly => Combining::DirectOnly,
    };
    let mc = MonteCarlo {
        n_trials: o.n_trials,
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let mut rows = Vec::with_capacity(topos.len() * cfg.scenarios.len());
    for scenario in &cfg.scenarios {
        let spec = scenario.spec(cfg.sweep.num_pairs)?;
        log::info!(
            "outage sweep: rho = {}, {} trials",
            scenario.label(),
            o.n_trials
        );
        for topo in &topos {
            let r = estimate_outage(
                o.dest,
                topo,
                &alloc,
                ChannelSource::Correlated(&spec),
                &cfg.noise,
                o.beta,
                combining,
                mc,
            )?;
            rows.push(OutageRow {
                distance_ref: distance_ref(topo),
                rho: scenario.label(),
                p_out: r.p_out,
                ci_halfwidth: r.ci_halfwidth,
                n_trials: r.n_trials,
                seed: r.seed,
            });
        }
    }
    Ok(rows)
}

/// Closed-form residual variance used by [`run_oracle_check_with`].
pub type ClosedForm =
    dyn Fn(usize, &NetworkTopology64, &ChannelRealization64, f64, &NoisePowers64) -> f64 + Sync;

pub fn closed_form_variance(
    dest: usize,
    topo: &NetworkTopology64,
    h: &ChannelRealization64,
    af: f64,
    sigma2: &NoisePowers64,
) -> f64 {
    noise_variance(dest, topo, h, af, sigma2).total
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub all_pass: bool,
}

/// Compares the closed form with the brute-force residual variance on
/// `n_realizations` channel draws of the first correlation scenario.
pub fn run_oracle_check(cfg: &Config) -> Result<OracleReport> {
    run_oracle_check_with(cfg, &closed_form_variance)
}

pub fn run_oracle_check_with(cfg: &Config, closed: &ClosedForm) -> Result<OracleReport> {
    let (topos, alloc) = setup(cfg)?;
    let q = &cfg.oracle;
    let topo = &topos[q.point];
    let scenario = &cfg.scenarios[0];
    let spec = scenario.spec(cfg.sweep.num_pairs)?;
    log::info!(
        "oracle check: {} realizations x {} noise draws at d_ref = {}",
        q.n_realizations,
        q.n_noise_draws,
        distance_ref(topo)
    );
    let mut rows = Vec::with_capacity(q.n_realizations);
    for r in 0..q.n_realizations {
        let seed = derive_seed(cfg.seed, r as u64);
        let h = sample_channels(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        let af = amplification_factor(&alloc, topo, &h, cfg.noise.relay)?;
        let closed_form = closed(q.dest, topo, &h, af, &cfg.noise);
        let empirical = residual_variance_oracle(
            q.dest,
            topo,
            &alloc,
            &h,
            &cfg.noise,
            q.n_noise_draws,
            derive_seed(seed, 1),
        )?;
        let rel_error = if closed_form == empirical {
            0.0
        } else {
            ((empirical - closed_form) / closed_form).abs()
        };
        let pass = rel_error <= q.tolerance;
        if !pass {
            let coeffs: Vec<String> = h
                .coefficients()
                .map(|c| format!("{}{:+}i", c.re, c.im))
                .collect();
            log::error!(
                "realization {r} failed: seed {seed}, closed form {closed_form:e}, empirical {empirical:e}, \
                 relative error {rel_error:.4}, channels [{}]",
                coeffs.join(", ")
            );
        }
        rows.push(OracleRow {
            realization: r,
            seed,
            closed_form,
            empirical,
            rel_error,
            pass,
        });
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(OracleReport { rows, all_pass })
}
