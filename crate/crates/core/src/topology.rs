//! Network geometry: K source/destination pairs sharing one relay.
//!
//! Distances are given directly rather than derived from coordinates. A sweep
//! is a set of index-aligned distance vectors, one entry per network instance.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Amplitude-domain pathloss `d^(-alpha/2)`.
///
/// The power-domain attenuation is the square of the returned value.
pub fn amplitude_attenuation<T: Real>(d: T, alpha: T) -> Result<T> {
    if !(d > T::zero()) || !d.is_finite() {
        return Err(Error::Domain(format!(
            "distance must be positive and finite, got {d}"
        )));
    }
    if !(alpha >= T::zero()) {
        return Err(Error::Domain(format!(
            "pathloss exponent must be non-negative, got {alpha}"
        )));
    }
    Ok(d.powf(-alpha / T::lit(2.0)))
}

/// Geometry of a network with `num_pairs` source/destination pairs and one relay.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology<T> {
    num_pairs: usize,
    /// Row-major K×K, entry `(i, j)` is the distance from `S_i` to `D_j`.
    d_source_dest: Vec<T>,
    d_source_relay: Vec<T>,
    d_relay_dest: Vec<T>,
    alpha: T,
}

impl<T: Real> NetworkTopology<T> {
    /// Builds a topology from explicit distances (meters).
    ///
    /// `d_source_dest` is row-major K×K with rows indexed by source.
    pub fn new(
        num_pairs: usize,
        d_source_dest: Vec<T>,
        d_source_relay: Vec<T>,
        d_relay_dest: Vec<T>,
        alpha: T,
    ) -> Result<Self> {
        if num_pairs == 0 {
            return Err(Error::invalid("topology", "num_pairs must be at least 1"));
        }
        if d_source_dest.len() != num_pairs * num_pairs {
            return Err(Error::invalid(
                "topology",
                format!(
                    "source-destination matrix has {} entries, expected {}",
                    d_source_dest.len(),
                    num_pairs * num_pairs
                ),
            ));
        }
        if d_source_relay.len() != num_pairs || d_relay_dest.len() != num_pairs {
            return Err(Error::invalid(
                "topology",
                format!(
                    "relay distance vectors have lengths {} and {}, expected {num_pairs}",
                    d_source_relay.len(),
                    d_relay_dest.len()
                ),
            ));
        }
        let all = d_source_dest
            .iter()
            .chain(&d_source_relay)
            .chain(&d_relay_dest);
        if let Some(bad) = all
            .into_iter()
            .find(|d| !(**d > T::zero()) || !d.is_finite())
        {
            return Err(Error::invalid(
                "topology",
                format!("distances must be positive and finite, got {bad}"),
            ));
        }
        if !(alpha >= T::lit(2.0)) || !alpha.is_finite() {
            return Err(Error::invalid(
                "topology",
                format!("pathloss exponent must be at least 2, got {alpha}"),
            ));
        }
        Ok(Self {
            num_pairs,
            d_source_dest,
            d_source_relay,
            d_relay_dest,
            alpha,
        })
    }

    /// Symmetric layout: every direct link, every cross link and every relay
    /// link share one distance each.
    pub fn symmetric(num_pairs: usize, direct: T, cross: T, relay: T, alpha: T) -> Result<Self> {
        let k = num_pairs;
        let d_source_dest = (0..k * k)
            .map(|idx| if idx / k == idx % k { direct } else { cross })
            .collect();
        Self::new(k, d_source_dest, vec![relay; k], vec![relay; k], alpha)
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn source_dest(&self, source: usize, dest: usize) -> T {
        self.d_source_dest[source * self.num_pairs + dest]
    }

    pub fn source_relay(&self, source: usize) -> T {
        self.d_source_relay[source]
    }

    pub fn relay_dest(&self, dest: usize) -> T {
        self.d_relay_dest[dest]
    }

    /// `d_{S_i D_j}^(-alpha/2)`.
    pub fn source_dest_gain(&self, source: usize, dest: usize) -> T {
        self.attenuate(self.source_dest(source, dest))
    }

    /// `d_{S_i R}^(-alpha/2)`.
    pub fn source_relay_gain(&self, source: usize) -> T {
        self.attenuate(self.source_relay(source))
    }

    /// `d_{R D_j}^(-alpha/2)`.
    pub fn relay_dest_gain(&self, dest: usize) -> T {
        self.attenuate(self.relay_dest(dest))
    }

    // Distances are validated positive at construction.
    fn attenuate(&self, d: T) -> T {
        d.powf(-self.alpha / T::lit(2.0))
    }
}

/// Index-aligned distance vectors describing a symmetric co-sweep.
///
/// Entry `n` of each vector belongs to the `n`-th topology: `direct` is
/// `d_{S_i D_i}`, `cross` is `d_{S_i D_j}` for `i != j`, and `relay` is used
/// for every source-relay and relay-destination link.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<T> {
    pub num_pairs: usize,
    pub alpha: T,
    pub direct: Vec<T>,
    pub cross: Vec<T>,
    pub relay: Vec<T>,
}

/// `steps` evenly spaced points from `start` to `end` inclusive.
pub fn linspace<T: Real>(start: T, end: T, steps: usize) -> Vec<T> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let last = T::from_usize(steps - 1).unwrap();
            (0..steps)
                .map(|n| {
                    if n == steps - 1 {
                        end
                    } else {
                        start + (end - start) * T::from_usize(n).unwrap() / last
                    }
                })
                .collect()
        }
    }
}

impl<T: Real> SweepConfig<T> {
    /// Linear co-sweep between the endpoints of each distance range.
    pub fn linear(
        num_pairs: usize,
        alpha: T,
        direct: (T, T),
        cross: (T, T),
        relay: (T, T),
        steps: usize,
    ) -> Self {
        Self {
            num_pairs,
            alpha,
            direct: linspace(direct.0, direct.1, steps),
            cross: linspace(cross.0, cross.1, steps),
            relay: linspace(relay.0, relay.1, steps),
        }
    }

    /// The two-pair reference layout: direct 400-3700 m, cross 200-3500 m,
    /// relay links 223.60-2546.6 m, pathloss exponent 4.
    pub fn reference(steps: usize) -> Self {
        Self::linear(
            2,
            T::lit(4.0),
            (T::lit(400.0), T::lit(3700.0)),
            (T::lit(200.0), T::lit(3500.0)),
            (T::lit(223.60), T::lit(2546.6)),
            steps,
        )
    }

    pub fn len(&self) -> usize {
        self.cross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cross.is_empty()
    }
}

/// Expands a sweep into one topology per index.
pub fn build_symmetric_sweep<T: Real>(config: &SweepConfig<T>) -> Result<Vec<NetworkTopology<T>>> {
    let n = config.cross.len();
    if config.direct.len() != n || config.relay.len() != n {
        return Err(Error::invalid(
            "sweep",
            format!(
                "distance vectors must have equal length (direct {}, cross {}, relay {})",
                config.direct.len(),
                n,
                config.relay.len()
            ),
        ));
    }
    (0..n)
        .map(|idx| {
            NetworkTopology::symmetric(
                config.num_pairs,
                config.direct[idx],
                config.cross[idx],
                config.relay[idx],
                config.alpha,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn attenuation_values() {
        assert_eq!(amplitude_attenuation(1.0_f64, 4.0).unwrap(), 1.0);
        assert_relative_eq!(
            amplitude_attenuation(100.0_f64, 4.0).unwrap(),
            1e-4,
            max_relative = 1e-15
        );
        // 1 / 223.6^2 = 1 / 49996.96
        assert_relative_eq!(
            amplitude_attenuation(223.60_f64, 4.0).unwrap(),
            2.000_121_607_393_729_7e-5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            amplitude_attenuation(100.0_f32, 4.0).unwrap(),
            1e-4,
            max_relative = 1e-6
        );
    }

    #[test]
    fn attenuation_rejects_bad_distance() {
        assert!(matches!(
            amplitude_attenuation(0.0_f64, 4.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            amplitude_attenuation(-3.0_f64, 4.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            amplitude_attenuation(f64::NAN, 4.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn topology_validation() {
        assert!(NetworkTopology::<f64>::symmetric(2, 400.0, 200.0, 223.6, 4.0).is_ok());
        assert!(NetworkTopology::<f64>::symmetric(0, 1.0, 1.0, 1.0, 4.0).is_err());
        assert!(NetworkTopology::<f64>::symmetric(2, 1.0, 0.0, 1.0, 4.0).is_err());
        assert!(NetworkTopology::<f64>::symmetric(2, 1.0, 1.0, 1.0, 1.5).is_err());
        assert!(
            NetworkTopology::<f64>::new(2, vec![1.0; 3], vec![1.0; 2], vec![1.0; 2], 4.0).is_err()
        );
        assert!(
            NetworkTopology::<f64>::new(2, vec![1.0; 4], vec![1.0; 3], vec![1.0; 2], 4.0).is_err()
        );
    }

    #[test]
    fn symmetric_layout_indexing() {
        let t = NetworkTopology::<f64>::symmetric(3, 10.0, 20.0, 5.0, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.source_dest(i, j), if i == j { 10.0 } else { 20.0 });
            }
            assert_eq!(t.source_relay(i), 5.0);
            assert_eq!(t.relay_dest(i), 5.0);
        }
        assert_relative_eq!(t.source_dest_gain(0, 1), 0.05);
    }

    #[test]
    fn reference_sweep_first_point() {
        let sweep = build_symmetric_sweep(&SweepConfig::<f64>::reference(34)).unwrap();
        let t = &sweep[0];
        assert_eq!(t.source_dest(1, 0), 200.0);
        assert_eq!(t.source_dest(0, 0), 400.0);
        assert_eq!(t.source_relay(0), 223.60);
        assert_eq!(t.relay_dest(0), 223.60);
        let last = sweep.last().unwrap();
        assert_eq!(last.source_dest(1, 0), 3500.0);
        assert_eq!(last.relay_dest(0), 2546.6);
        // 100 m spacing of the reference cross distance
        assert_relative_eq!(sweep[7].source_dest(1, 0), 900.0, max_relative = 1e-12);
    }

    #[test]
    fn single_point_sweep() {
        let cfg = SweepConfig {
            num_pairs: 2,
            alpha: 4.0_f64,
            direct: vec![1000.0],
            cross: vec![1000.0],
            relay: vec![1000.0],
        };
        let sweep = build_symmetric_sweep(&cfg).unwrap();
        assert_eq!(sweep.len(), 1);
        let t = &sweep[0];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(t.source_dest(i, j), 1000.0);
            }
            assert_eq!(t.source_relay(i), 1000.0);
            assert_eq!(t.relay_dest(i), 1000.0);
        }
    }

    #[test]
    fn ten_step_cross_sweep() {
        let cfg = SweepConfig::<f64>::reference(10);
        let sweep = build_symmetric_sweep(&cfg).unwrap();
        assert_eq!(sweep.len(), 10);
        let got: Vec<f64> = sweep.iter().map(|t| t.source_dest(1, 0)).collect();
        // 200 + n * 3300 / 9
        for (n, d) in got.iter().enumerate() {
            assert_relative_eq!(*d, 200.0 + n as f64 * 3300.0 / 9.0, max_relative = 1e-12);
        }
        assert_relative_eq!(got[1], 566.666_666_666_666_7, max_relative = 1e-12);
        assert_eq!(got[9], 3500.0);
    }

    #[test]
    fn mismatched_sweep_vectors() {
        let cfg = SweepConfig {
            num_pairs: 2,
            alpha: 4.0_f64,
            direct: vec![1.0, 2.0],
            cross: vec![1.0, 2.0],
            relay: vec![1.0],
        };
        assert!(matches!(
            build_symmetric_sweep(&cfg),
            Err(Error::Invalid { .. })
        ));
    }

    proptest! {
        #[test]
        fn attenuation_decreasing_in_distance(d in 0.01_f64..1e4, step in 1e-3_f64..1e3, alpha in 0.1_f64..8.0) {
            let a = amplitude_attenuation(d, alpha).unwrap();
            let b = amplitude_attenuation(d + step, alpha).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn attenuation_decreasing_in_exponent(d in 1.01_f64..1e4, alpha in 0.0_f64..8.0, step in 1e-2_f64..2.0) {
            let a = amplitude_attenuation(d, alpha).unwrap();
            let b = amplitude_attenuation(d, alpha + step).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn attenuation_power_consistency(d in 0.01_f64..1e4, alpha in 0.0_f64..8.0) {
            let a = amplitude_attenuation(d, alpha).unwrap();
            let p = d.powf(-alpha);
            prop_assert!(((a * a - p) / p).abs() < 1e-14);
        }

        #[test]
        fn sweep_elements_valid(steps in 1_usize..50) {
            let sweep = build_symmetric_sweep(&SweepConfig::<f64>::reference(steps)).unwrap();
            prop_assert_eq!(sweep.len(), steps);
            for t in &sweep {
                prop_assert_eq!(t.num_pairs(), 2);
                prop_assert!(t.source_dest(0, 1) > 0.0 && t.source_relay(1) > 0.0);
            }
        }
    }
}
