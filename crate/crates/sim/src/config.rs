//! Experiment configuration and its `key = value` file format.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Keys not present keep their defaults; unknown keys are rejected.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gansched_core::gan::GanConfig;
use gansched_core::scheduler::XiSchedule;
use gansched_core::specfun::QuadratureSpec;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Where the per-cell success probabilities come from during the online loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaSource {
    /// Tail probabilities of GAN synthetic sets.
    Gan,
    /// Closed-form conditional probabilities.
    Oracle,
}

impl FromStr for AlphaSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gan" => Ok(AlphaSource::Gan),
            "oracle" => Ok(AlphaSource::Oracle),
            _ => Err(format!("expected `gan` or `oracle`, found `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Speed of each actuator in m/s.
    pub velocities: Vec<f64>,
    pub carrier_hz: f64,
    /// Spacing between instants in seconds.
    pub instant_interval_s: f64,
    /// Instants per slot, `T0`.
    pub num_instants: usize,
    /// Per-actuator deadline `T_k`.
    pub deadlines: Vec<usize>,
    /// Simultaneous transmissions per instant, `S`.
    pub max_simultaneous: usize,
    /// Slots per frame, `M`.
    pub slots: usize,
    /// Frame budget, `N`.
    pub frames: usize,
    pub snr_db: Vec<f64>,
    pub payload_bytes: Vec<f64>,
    pub bandwidth_hz: f64,
    pub transmission_duration_s: f64,
    pub quality_boundaries: Vec<f64>,
    /// Operating point of `online`, `oracle`, `table1` and `fig1`.
    pub online_snr_db: f64,
    pub online_payload_bytes: f64,
    /// 1-based actuator index reported by `table1`, `fig1`, `fig2`, `fig3`.
    pub report_actuator: usize,
    pub table1_instants: Vec<usize>,
    pub xi: XiSchedule,
    /// Stop once no policy entry moves by more than this; 0 disables.
    pub stop_tolerance: f64,
    pub alpha_source: AlphaSource,
    pub gan: GanConfig,
    /// GAN-predicted outages below this are reported as the floor.
    pub prediction_floor: f64,
    /// Synthetic draws used for the per-cell KS distance.
    pub ks_synthetic: usize,
    pub fig1_epochs: Vec<usize>,
    pub fig1_samples: Vec<usize>,
    pub fig1_instant: usize,
    pub fig1_quality: usize,
    pub fig1_synthetic: usize,
    pub fig1_grid: usize,
    pub quadrature: QuadratureSpec,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            velocities: vec![5.0, 10.0],
            carrier_hz: 2.625e9,
            instant_interval_s: 1e-3,
            num_instants: 3,
            deadlines: vec![3, 3],
            max_simultaneous: 2,
            slots: 5000,
            frames: 20,
            snr_db: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            payload_bytes: vec![20.0, 250.0],
            bandwidth_hz: 10e6,
            transmission_duration_s: 1e-3,
            quality_boundaries: vec![1.0],
            online_snr_db: 20.0,
            online_payload_bytes: 20.0,
            report_actuator: 2,
            table1_instants: vec![1, 2, 3, 500],
            xi: XiSchedule::default(),
            stop_tolerance: 0.0,
            alpha_source: AlphaSource::Gan,
            gan: GanConfig::default(),
            prediction_floor: 1e-5,
            ks_synthetic: 100_000,
            fig1_epochs: vec![50, 100, 500],
            fig1_samples: vec![1_000, 10_000],
            fig1_instant: 1,
            fig1_quality: 0,
            fig1_synthetic: 100_000,
            fig1_grid: 200,
            quadrature: QuadratureSpec::default(),
            seed: 1,
        }
    }
}

/// Recognised keys, in the order they are documented.
pub const KEYS: &[&str] = &[
    "velocities",
    "carrier_hz",
    "instant_interval_s",
    "num_instants",
    "deadlines",
    "max_simultaneous",
    "slots",
    "frames",
    "snr_db",
    "payload_bytes",
    "bandwidth_hz",
    "transmission_duration_s",
    "quality_boundaries",
    "online_snr_db",
    "online_payload_bytes",
    "report_actuator",
    "table1_instants",
    "xi_law",
    "xi0",
    "xi_rate",
    "stop_tolerance",
    "alpha_source",
    "gan_epochs",
    "gan_critic_steps",
    "gan_batch_size",
    "gan_noise_dim",
    "gan_generator_hidden",
    "gan_discriminator_hidden",
    "gan_step_size",
    "gan_beta1",
    "gan_beta2",
    "gan_leaky_slope",
    "normalization_cap",
    "synthetic_count",
    "prediction_floor",
    "ks_synthetic",
    "fig1_epochs",
    "fig1_samples",
    "fig1_instant",
    "fig1_quality",
    "fig1_synthetic",
    "fig1_grid",
    "quad_abs_tol",
    "quad_rel_tol",
    "quad_max_subdivisions",
    "seed",
];

fn scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        line,
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    let items = value
        .split(',')
        .map(|v| scalar(line, key, v.trim()))
        .collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::Value { line, key: key.to_string(), message: "empty list".into() });
    }
    Ok(items)
}

#[derive(Default)]
struct XiKeys {
    law: Option<String>,
    xi0: Option<f64>,
    rate: Option<f64>,
}

#[derive(Default)]
struct QuadKeys {
    abs: Option<f64>,
    rel: Option<f64>,
    max: Option<usize>,
}

/// Parses configuration text.
pub fn parse_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut c = ExperimentConfig::default();
    let mut xi = XiKeys::default();
    let mut quad = QuadKeys::default();
    let mut deadlines_set = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        }
        match key {
            "velocities" => c.velocities = list(line, key, value)?,
            "carrier_hz" => c.carrier_hz = scalar(line, key, value)?,
            "instant_interval_s" => c.instant_interval_s = scalar(line, key, value)?,
            "num_instants" => c.num_instants = scalar(line, key, value)?,
            "deadlines" => {
                c.deadlines = list(line, key, value)?;
                deadlines_set = true;
            }
            "max_simultaneous" => c.max_simultaneous = scalar(line, key, value)?,
            "slots" => c.slots = scalar(line, key, value)?,
            "frames" => c.frames = scalar(line, key, value)?,
            "snr_db" => c.snr_db = list(line, key, value)?,
            "payload_bytes" => c.payload_bytes = list(line, key, value)?,
            "bandwidth_hz" => c.bandwidth_hz = scalar(line, key, value)?,
            "transmission_duration_s" => c.transmission_duration_s = scalar(line, key, value)?,
            "quality_boundaries" => c.quality_boundaries = list(line, key, value)?,
            "online_snr_db" => c.online_snr_db = scalar(line, key, value)?,
            "online_payload_bytes" => c.online_payload_bytes = scalar(line, key, value)?,
            "report_actuator" => c.report_actuator = scalar(line, key, value)?,
            "table1_instants" => c.table1_instants = list(line, key, value)?,
            "xi_law" => xi.law = Some(value.to_string()),
            "xi0" => xi.xi0 = Some(scalar(line, key, value)?),
            "xi_rate" => xi.rate = Some(scalar(line, key, value)?),
            "stop_tolerance" => c.stop_tolerance = scalar(line, key, value)?,
            "alpha_source" => c.alpha_source = scalar(line, key, value)?,
            "gan_epochs" => c.gan.epochs = scalar(line, key, value)?,
            "gan_critic_steps" => c.gan.critic_steps = scalar(line, key, value)?,
            "gan_batch_size" => c.gan.batch_size = scalar(line, key, value)?,
            "gan_noise_dim" => c.gan.noise_dim = scalar(line, key, value)?,
            "gan_generator_hidden" => c.gan.generator_hidden = scalar(line, key, value)?,
            "gan_discriminator_hidden" => c.gan.discriminator_hidden = scalar(line, key, value)?,
            "gan_step_size" => c.gan.step_size = scalar(line, key, value)?,
            "gan_beta1" => c.gan.beta1 = scalar(line, key, value)?,
            "gan_beta2" => c.gan.beta2 = scalar(line, key, value)?,
            "gan_leaky_slope" => c.gan.leaky_slope = scalar(line, key, value)?,
            "normalization_cap" => c.gan.normalization_cap = scalar(line, key, value)?,
            "synthetic_count" => c.gan.synthetic_count = scalar(line, key, value)?,
            "prediction_floor" => c.prediction_floor = scalar(line, key, value)?,
            "ks_synthetic" => c.ks_synthetic = scalar(line, key, value)?,
            "fig1_epochs" => c.fig1_epochs = list(line, key, value)?,
            "fig1_samples" => c.fig1_samples = list(line, key, value)?,
            "fig1_instant" => c.fig1_instant = scalar(line, key, value)?,
            "fig1_quality" => c.fig1_quality = scalar(line, key, value)?,
            "fig1_synthetic" => c.fig1_synthetic = scalar(line, key, value)?,
            "fig1_grid" => c.fig1_grid = scalar(line, key, value)?,
            "quad_abs_tol" => quad.abs = Some(scalar(line, key, value)?),
            "quad_rel_tol" => quad.rel = Some(scalar(line, key, value)?),
            "quad_max_subdivisions" => quad.max = Some(scalar(line, key, value)?),
            "seed" => c.seed = scalar(line, key, value)?,
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
    }
    if !deadlines_set {
        c.deadlines = vec![c.num_instants; c.velocities.len()];
    }
    c.xi = match xi.law.as_deref().unwrap_or("harmonic") {
        "harmonic" => XiSchedule::harmonic(xi.xi0.unwrap_or(0.5)),
        "exponential" => XiSchedule::exponential(xi.xi0.unwrap_or(0.5), xi.rate.unwrap_or(0.9)),
        other => return Err(ConfigError::Invalid(format!("unknown xi_law `{other}`"))),
    }
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let d = QuadratureSpec::default();
    c.quadrature = QuadratureSpec::new(
        quad.abs.unwrap_or(d.abs_tol()),
        quad.rel.unwrap_or(d.rel_tol()),
        quad.max.unwrap_or(d.max_subdivisions()),
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    c.validate()?;
    Ok(c)
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_str(&text)
}

impl ExperimentConfig {
    pub fn num_actuators(&self) -> usize {
        self.velocities.len()
    }

    /// Spectral efficiency for a payload in bytes.
    pub fn eta(&self, payload_bytes: f64) -> f64 {
        gansched_core::channel::spectral_efficiency(
            8.0 * payload_bytes,
            self.bandwidth_hz,
            self.transmission_duration_s,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.velocities.is_empty() {
            return bad("at least one actuator velocity is required");
        }
        if self.deadlines.len() != self.velocities.len() {
            return bad("deadlines must list one entry per velocity");
        }
        if self.num_instants == 0 || self.deadlines.iter().any(|&d| d == 0 || d > self.num_instants) {
            return bad("deadlines must lie in 1..=num_instants");
        }
        if self.max_simultaneous == 0 || self.slots == 0 || self.frames == 0 {
            return bad("max_simultaneous, slots and frames must be positive");
        }
        if self.snr_db.is_empty() || self.payload_bytes.is_empty() {
            return bad("snr_db and payload_bytes need at least one value");
        }
        if self.payload_bytes.iter().chain([&self.online_payload_bytes]).any(|&p| !(p > 0.0)) {
            return bad("payloads must be positive");
        }
        if !(self.bandwidth_hz > 0.0 && self.transmission_duration_s > 0.0 && self.carrier_hz > 0.0) {
            return bad("bandwidth, duration and carrier must be positive");
        }
        if self.report_actuator == 0 || self.report_actuator > self.velocities.len() {
            return bad("report_actuator must name an actuator (1-based)");
        }
        if self.table1_instants.contains(&0) {
            return bad("table1_instants must be at least 1");
        }
        if !(self.stop_tolerance >= 0.0) {
            return bad("stop_tolerance must be nonnegative");
        }
        if !(self.prediction_floor >= 0.0) || self.ks_synthetic == 0 {
            return bad("prediction_floor must be nonnegative and ks_synthetic positive");
        }
        if self.fig1_instant == 0 || self.fig1_instant > self.num_instants {
            return bad("fig1_instant must lie in 1..=num_instants");
        }
        if self.fig1_quality > self.quality_boundaries.len() {
            return bad("fig1_quality must name a quality level");
        }
        if self.fig1_synthetic == 0 || self.fig1_grid < 2 {
            return bad("fig1_synthetic must be positive and fig1_grid at least 2");
        }
        gansched_core::channel::QualityScheme::new(self.quality_boundaries.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.gan.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
