//! TOML experiment configuration.
//!
//! ```toml
//! schema_version = 1
//! mode = "outage_sweep"      # variance_sweep | outage_sweep | oracle_check
//! seed = 1
//!
//! [topology]
//! num_pairs = 2
//! alpha = 4.0
//! steps = 34                 # with steps: [start, end]; without: explicit points
//! direct = [400.0, 3700.0]
//! cross = [200.0, 3500.0]
//! relay = [223.6, 2546.6]
//!
//! [power]
//! p_total = 2.0
//! psi = [0.375, 0.375]
//!
//! [noise]
//! model = "thermal"          # or model = "fixed" with dest = [..] and relay = ..
//! bandwidth_hz = 22e6
//! density_dbm_hz = -174.0
//!
//! [correlation]
//! rho = [0.0, 0.3, 0.6, 0.9]
//! ```
//!
//! Decibel quantities are converted to linear units here and nowhere else.

use std::fmt;
use std::path::{Path, PathBuf};

use ancsim_core::power::{db_to_linear, thermal_noise_power, THERMAL_DENSITY_DBM_HZ};
use ancsim_core::{Gamma, NoisePowers, Statistic, SweepConfig};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {reason}")]
    Field { field: &'static str, reason: String },
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    VarianceSweep,
    OutageSweep,
    OracleCheck,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::VarianceSweep => "variance_sweep",
            Mode::OutageSweep => "outage_sweep",
            Mode::OracleCheck => "oracle_check",
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    mode: Mode,
    #[serde(default = "default_seed")]
    seed: u64,
    workers: Option<usize>,
    topology: RawTopology,
    power: RawPower,
    #[serde(default)]
    noise: RawNoise,
    correlation: RawCorrelation,
    #[serde(default)]
    variance: RawVariance,
    #[serde(default)]
    outage: RawOutage,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    output: RawOutput,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    num_pairs: usize,
    alpha: f64,
    steps: Option<usize>,
    direct: Vec<f64>,
    cross: Vec<f64>,
    relay: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    p_total: f64,
    psi: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
enum RawNoise {
    Thermal {
        #[serde(default = "default_bandwidth")]
        bandwidth_hz: f64,
        #[serde(default = "default_density")]
        density_dbm_hz: f64,
    },
    Fixed {
        dest: Vec<f64>,
        relay: f64,
    },
}

fn default_bandwidth() -> f64 {
    22e6
}

fn default_density() -> f64 {
    THERMAL_DENSITY_DBM_HZ
}

impl Default for RawNoise {
    fn default() -> Self {
        RawNoise::Thermal {
            bandwidth_hz: default_bandwidth(),
            density_dbm_hz: default_density(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrelation {
    #[serde(default)]
    rho: Vec<f64>,
    #[serde(default)]
    matrix: Vec<RawMatrix>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    source: usize,
    dest: usize,
    gamma: [[f64; 3]; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawVariance {
    n_draws: usize,
    statistic: String,
    trim: f64,
    dest: usize,
}

impl Default for RawVariance {
    fn default() -> Self {
        Self {
            n_draws: 100_000,
            statistic: "median".into(),
            trim: 0.01,
            dest: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutage {
    beta_db: f64,
    n_trials: usize,
    dest: usize,
    combining: String,
}

impl Default for RawOutage {
    fn default() -> Self {
        Self {
            beta_db: 0.0,
            n_trials: 100_000,
            dest: 0,
            combining: "selection".into(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOracle {
    n_realizations: usize,
    n_noise_draws: usize,
    tolerance: f64,
    point: usize,
    dest: usize,
}

impl Default for RawOracle {
    fn default() -> Self {
        Self {
            n_realizations: 20,
            n_noise_draws: 1_000_000,
            tolerance: 0.02,
            point: 0,
            dest: 0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
}

/// One channel-correlation scenario of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Every off-diagonal entry equals `rho`.
    Uniform(f64),
    /// Explicit matrices for every `(source, dest)` pair.
    Custom(Vec<((usize, usize), Gamma<f64>)>),
}

impl Scenario {
    /// Value written to the `rho` CSV column.
    pub fn label(&self) -> String {
        match self {
            Scenario::Uniform(r) => format!("{r}"),
            Scenario::Custom(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombiningMode {
    Selection,
    DirectOnly,
}

#[derive(Debug, Clone)]
pub struct VarianceSettings {
    pub n_draws: usize,
    pub statistic: Statistic,
    pub dest: usize,
}

#[derive(Debug, Clone)]
pub struct OutageSettings {
    /// Linear threshold.
    pub beta: f64,
    pub n_trials: usize,
    pub dest: usize,
    pub combining: CombiningMode,
}

#[derive(Debug, Clone)]
pub struct OracleSettings {
    pub n_realizations: usize,
    pub n_noise_draws: usize,
    pub tolerance: f64,
    pub point: usize,
    pub dest: usize,
}

/// Validated configuration, linear units throughout.
#[derive(Debug, Clone)]
pub struct Config {
    pub mode: Mode,
    pub seed: u64,
    pub workers: Option<usize>,
    pub sweep: SweepConfig<f64>,
    pub p_total: f64,
    pub psi: Vec<f64>,
    pub noise: NoisePowers<f64>,
    pub scenarios: Vec<Scenario>,
    pub variance: VarianceSettings,
    pub outage: OutageSettings,
    pub oracle: OracleSettings,
    pub output: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.parse()
    }
}

impl std::str::FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.validate()
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field(name, format!("must be positive and finite, got {v}")))
    }
}

fn at_least_one(name: &'static str, v: usize) -> Result<usize, ConfigError> {
    if v == 0 {
        Err(field(name, "must be at least 1"))
    } else {
        Ok(v)
    }
}

impl RawConfig {
    fn validate(self) -> Result<Config, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.workers == Some(0) {
            return Err(field("workers", "must be at least 1"));
        }
        let t = self.topology;
        let k = at_least_one("topology.num_pairs", t.num_pairs)?;
        if !(t.alpha >= 2.0 && t.alpha.is_finite()) {
            return Err(field(
                "topology.alpha",
                format!("must be at least 2, got {}", t.alpha),
            ));
        }
        let sweep = match t.steps {
            Some(steps) => {
                let steps = at_least_one("topology.steps", steps)?;
                let ends = |name: &'static str, v: &[f64]| -> Result<(f64, f64), ConfigError> {
                    match v {
                        [a, b] => Ok((positive(name, *a)?, positive(name, *b)?)),
                        _ => Err(field(name, "with steps set, give [start, end]")),
                    }
                };
                SweepConfig::linear(
                    k,
                    t.alpha,
                    ends("topology.direct", &t.direct)?,
                    ends("topology.cross", &t.cross)?,
                    ends("topology.relay", &t.relay)?,
                    steps,
                )
            }
            None => {
                for (name, v) in [
                    ("topology.direct", &t.direct),
                    ("topology.cross", &t.cross),
                    ("topology.relay", &t.relay),
                ] {
                    if v.is_empty() {
                        return Err(field(name, "needs at least one point"));
                    }
                    v.iter().try_for_each(|d| positive(name, *d).map(drop))?;
                }
                if t.direct.len() != t.cross.len() || t.relay.len() != t.cross.len() {
                    return Err(field(
                        "topology",
                        "direct, cross and relay must have equal length",
                    ));
                }
                SweepConfig {
                    num_pairs: k,
                    alpha: t.alpha,
                    direct: t.direct,
                    cross: t.cross,
                    relay: t.relay,
                }
            }
        };

        let p_total = positive("power.p_total", self.power.p_total)?;
        if self.power.psi.len() != k {
            return Err(field(
                "power.psi",
                format!("needs {k} entries, got {}", self.power.psi.len()),
            ));
        }
        if self.power.psi.iter().any(|f| !(*f > 0.0 && *f <= 1.0))
            || self.power.psi.iter().sum::<f64>() > 1.0 + 1e-12
        {
            return Err(field(
                "power.psi",
                "entries must lie in (0, 1] and sum to at most 1",
            ));
        }

        let noise = match self.noise {
            RawNoise::Thermal {
                bandwidth_hz,
                density_dbm_hz,
            } => {
                let bw = positive("noise.bandwidth_hz", bandwidth_hz)?;
                if !density_dbm_hz.is_finite() {
                    return Err(field("noise.density_dbm_hz", "must be finite"));
                }
                NoisePowers::uniform(k, thermal_noise_power(bw, density_dbm_hz))
            }
            RawNoise::Fixed { dest, relay } => {
                if dest.len() != k {
                    return Err(field(
                        "noise.dest",
                        format!("needs {k} entries, got {}", dest.len()),
                    ));
                }
                if dest
                    .iter()
                    .chain([&relay])
                    .any(|v| !(*v >= 0.0 && v.is_finite()))
                {
                    return Err(field("noise", "powers must be finite and non-negative"));
                }
                NoisePowers { dest, relay }
            }
        };

        let c = self.correlation;
        let mut scenarios: Vec<Scenario> = c.rho.iter().map(|r| Scenario::Uniform(*r)).collect();
        if c.rho.iter().any(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(field("correlation.rho", "entries must lie in [-1, 1]"));
        }
        if !c.matrix.is_empty() {
            if c.matrix
                .iter()
                .any(|m| m.source >= k || m.dest >= k || m.source == m.dest)
            {
                return Err(field(
                    "correlation.matrix",
                    "source and dest must be distinct pair indices",
                ));
            }
            scenarios.push(Scenario::Custom(
                c.matrix
                    .into_iter()
                    .map(|m| ((m.source, m.dest), m.gamma))
                    .collect(),
            ));
        }
        if scenarios.is_empty() {
            return Err(field("correlation", "give a rho list or explicit matrices"));
        }

        let v = self.variance;
        let statistic = match v.statistic.as_str() {
            "median" => Statistic::Median,
            "trimmed_mean" => Statistic::TrimmedMean(v.trim),
            other => {
                return Err(field(
                    "variance.statistic",
                    format!("unknown statistic {other:?}"),
                ))
            }
        };
        statistic
            .validate()
            .map_err(|e| field("variance.trim", e.to_string()))?;
        if v.dest >= k {
            return Err(field("variance.dest", format!("must be below {k}")));
        }

        let o = self.outage;
        if !o.beta_db.is_finite() {
            return Err(field("outage.beta_db", "must be finite"));
        }
        let combining = match o.combining.as_str() {
            "selection" => CombiningMode::Selection,
            "direct_only" => CombiningMode::DirectOnly,
            other => {
                return Err(field(
                    "outage.combining",
                    format!("unknown combining {other:?}"),
                ))
            }
        };
        if o.dest >= k {
            return Err(field("outage.dest", format!("must be below {k}")));
        }

        let q = self.oracle;
        if q.n_noise_draws < ancsim_core::outage::oracle::MIN_NOISE_DRAWS {
            return Err(field(
                "oracle.n_noise_draws",
                format!(
                    "must be at least {}",
                    ancsim_core::outage::oracle::MIN_NOISE_DRAWS
                ),
            ));
        }
        if q.tolerance.is_nan() || q.tolerance < 0.0 {
            return Err(field("oracle.tolerance", "must be non-negative"));
        }
        if q.point >= sweep.len() {
            return Err(field(
                "oracle.point",
                format!("sweep has {} points", sweep.len()),
            ));
        }
        if q.dest >= k {
            return Err(field("oracle.dest", format!("must be below {k}")));
        }

        Ok(Config {
            mode: self.mode,
            seed: self.seed,
            workers: self.workers,
            sweep,
            p_total,
            psi: self.power.psi,
            noise,
            scenarios,
            variance: VarianceSettings {
                n_draws: at_least_one("variance.n_draws", v.n_draws)?,
                statistic,
                dest: v.dest,
            },
            outage: OutageSettings {
                beta: db_to_linear(o.beta_db),
                n_trials: at_least_one("outage.n_trials", o.n_trials)?,
                dest: o.dest,
                combining,
            },
            oracle: OracleSettings {
                n_realizations: at_least_one("oracle.n_realizations", q.n_realizations)?,
                n_noise_draws: q.n_noise_draws,
                tolerance: q.tolerance,
                point: q.point,
                dest: q.dest,
            },
            output: self.output.path,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
mode = "variance_sweep"

[topology]
num_pairs = 2
alpha = 4.0
steps = 34
direct = [400.0, 3700.0]
cross = [200.0, 3500.0]
relay = [223.6, 2546.6]

[power]
p_total = 2.0
psi = [0.375, 0.375]

[correlation]
rho = [0.0, 0.9]
"#;

    fn parse(text: &str) -> Result<Config, ConfigError> {
        text.parse()
    }

    fn field_of(text: &str) -> &'static str {
        match parse(text) {
            Err(ConfigError::Field { field, .. }) => field,
            other => panic!("expected a field error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.mode, Mode::VarianceSweep);
        assert_eq!(c.sweep.len(), 34);
        assert_eq!(c.sweep.cross[7], 900.0);
        assert!((c.noise.relay - 8.758e-14).abs() < 1e-16);
        assert_eq!(c.outage.beta, 1.0);
        assert_eq!(
            c.scenarios,
            vec![Scenario::Uniform(0.0), Scenario::Uniform(0.9)]
        );
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn decibels_convert_at_load() {
        let c = parse(&format!("{BASE}\n[outage]\nbeta_db = 10.0\n")).unwrap();
        assert!((c.outage.beta - 10.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_points_and_fixed_noise() {
        let text = BASE
            .replace("steps = 34\n", "")
            .replace("[400.0, 3700.0]", "[400.0, 500.0, 600.0]")
            .replace("[200.0, 3500.0]", "[200.0, 300.0, 400.0]")
            .replace("[223.6, 2546.6]", "[223.6, 316.2, 412.3]")
            + "\n[noise]\nmodel = \"fixed\"\ndest = [1e-13, 2e-13]\nrelay = 3e-13\n";
        let c = parse(&text).unwrap();
        assert_eq!(c.sweep.direct, vec![400.0, 500.0, 600.0]);
        assert_eq!(c.noise.dest, vec![1e-13, 2e-13]);
    }

    #[test]
    fn matrices_form_one_scenario() {
        let text = BASE.replace("rho = [0.0, 0.9]", "")
            + r#"
[[correlation.matrix]]
source = 0
dest = 1
gamma = [[1.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 1.0]]
[[correlation.matrix]]
source = 1
dest = 0
gamma = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
"#;
        let c = parse(&text).unwrap();
        assert_eq!(c.scenarios.len(), 1);
        assert_eq!(c.scenarios[0].label(), "custom");
    }

    #[test]
    fn field_errors_name_the_field() {
        assert_eq!(
            field_of(&BASE.replace("schema_version = 1", "schema_version = 2")),
            "schema_version"
        );
        assert_eq!(
            field_of(&BASE.replace("alpha = 4.0", "alpha = 1.5")),
            "topology.alpha"
        );
        assert_eq!(
            field_of(&BASE.replace("[0.375, 0.375]", "[0.6, 0.6]")),
            "power.psi"
        );
        assert_eq!(
            field_of(&BASE.replace("[0.375, 0.375]", "[0.375]")),
            "power.psi"
        );
        assert_eq!(
            field_of(&BASE.replace("[400.0, 3700.0]", "[400.0]")),
            "topology.direct"
        );
        assert_eq!(
            field_of(&BASE.replace("p_total = 2.0", "p_total = -1.0")),
            "power.p_total"
        );
        assert_eq!(
            field_of(&BASE.replace("rho = [0.0, 0.9]", "rho = []")),
            "correlation"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[variance]\nstatistic = \"mean\"\n")),
            "variance.statistic"
        );
        assert_eq!(
            field_of(&format!(
                "{BASE}\n[variance]\nstatistic = \"trimmed_mean\"\ntrim = 0.7\n"
            )),
            "variance.trim"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[oracle]\nn_noise_draws = 10\n")),
            "oracle.n_noise_draws"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[outage]\nn_trials = 0\n")),
            "outage.n_trials"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[outage]\ncombining = \"mrc\"\n")),
            "outage.combining"
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            parse(&format!("{BASE}\nbogus = 1\n")),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            parse(&BASE.replace("variance_sweep", "nope")),
            Err(ConfigError::Parse(_))
        ));
    }
}
