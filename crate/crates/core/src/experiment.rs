//! JSON experiment configs and the commands that turn them into CSV/JSON
//! files.
//!
//! Every output embeds the resolved config and carries no timestamp, so a
//! rerun with the same config and seed reproduces the files byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::bounds::{self, BoundKind, BoundReport, BoundsError};
use crate::channels::{Channel, ChannelError, ChannelKind};
use crate::coding::spanning::{build_spanning_scheme_with, SpanningParams};
use crate::coding::zoom::build_zoom_scheme;
use crate::coding::CodingError;
use crate::entropy::{self, EntropyError, EntropyGridSpec};
use crate::harness::{
    capacity_sweep, evaluate_detailed, CopyEstimator, DirectQuantizer, Estimator, SpanningEstimator, TrialOutcome,
    ZoomEstimator,
};
use crate::rng::child_seed;
use crate::systems::{catalog, SystemError, SystemModel};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl ExperimentError {
    /// Process exit code: 2 for config errors, 3 for invariant violations,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Invariant(_) => 3,
            _ => 1,
        }
    }
}

impl From<CodingError> for ExperimentError {
    fn from(e: CodingError) -> Self {
        if e.is_invariant_violation() {
            ExperimentError::Invariant(e.to_string())
        } else {
            ExperimentError::Runtime(e.to_string())
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

impl From<SystemError> for ExperimentError {
    fn from(e: SystemError) -> Self {
        config_err(e)
    }
}

impl From<ChannelError> for ExperimentError {
    fn from(e: ChannelError) -> Self {
        config_err(e)
    }
}

impl From<BoundsError> for ExperimentError {
    fn from(e: BoundsError) -> Self {
        ExperimentError::Runtime(e.to_string())
    }
}

impl From<EntropyError> for ExperimentError {
    fn from(e: EntropyError) -> Self {
        match e {
            EntropyError::InvalidGrid(_) | EntropyError::NoisySystem | EntropyError::DeterministicSystem => config_err(e),
            other => ExperimentError::Runtime(other.to_string()),
        }
    }
}

impl From<csv::Error> for ExperimentError {
    fn from(e: csv::Error) -> Self {
        ExperimentError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<SystemModel, ExperimentError> {
        Ok(catalog(&self.name, &self.params)?)
    }
}

fn default_alphabet() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Noiseless {
        #[serde(default = "default_alphabet")]
        alphabet: usize,
    },
    Bsc {
        p: f64,
    },
    Erasure {
        #[serde(default = "default_alphabet")]
        alphabet: usize,
        p: f64,
    },
    General {
        matrix: Vec<Vec<f64>>,
    },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<Channel, ExperimentError> {
        Ok(match self {
            ChannelSpec::Noiseless { alphabet } => Channel::noiseless(*alphabet)?,
            ChannelSpec::Bsc { p } => Channel::bsc(*p)?,
            ChannelSpec::Erasure { alphabet, p } => Channel::erasure(*alphabet, *p)?,
            ChannelSpec::General { matrix } => Channel::general(matrix.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    Copy,
    DirectQuantizer {
        /// Defaults to the channel input alphabet size.
        #[serde(default)]
        levels: Option<usize>,
        #[serde(default)]
        low: Option<f64>,
        #[serde(default)]
        high: Option<f64>,
    },
    Zoom {
        rates: Vec<u32>,
        #[serde(default)]
        initial_halfwidth: Option<Vec<f64>>,
    },
    Spanning {
        max_block: usize,
        #[serde(default)]
        uses_per_step: Option<usize>,
        #[serde(default)]
        sample_size: Option<usize>,
        #[serde(default)]
        continuity_samples: Option<usize>,
        #[serde(default)]
        error_trials: Option<usize>,
    },
}

impl SchemeSpec {
    /// Builds the estimator for `system` over `channel` at accuracy
    /// `epsilon`.
    pub fn build(
        &self,
        system: &SystemModel,
        channel: &Channel,
        epsilon: f64,
        seed: u64,
    ) -> Result<Box<dyn Estimator>, CodingError> {
        Ok(match self {
            SchemeSpec::Copy => Box::new(CopyEstimator),
            SchemeSpec::DirectQuantizer { levels, low, high } => Box::new(DirectQuantizer {
                levels: levels.unwrap_or(channel.input_size()),
                low: low.unwrap_or(0.0),
                high: high.unwrap_or(1.0),
            }),
            SchemeSpec::Zoom {
                rates,
                initial_halfwidth,
            } => {
                let eigenvalues = diagonal_eigenvalues(system)?;
                let p = match channel.kind() {
                    ChannelKind::Erasure { p } => p,
                    _ => return Err(CodingError::InvalidArgument("zoom scheme needs an erasure channel".into())),
                };
                let halfwidth = initial_halfwidth.clone().unwrap_or_else(|| vec![1.0; eigenvalues.len()]);
                let scheme = build_zoom_scheme(&eigenvalues, rates, p, &halfwidth)?;
                scheme.check_compatible(system, channel)?;
                Box::new(ZoomEstimator(scheme))
            }
            SchemeSpec::Spanning {
                max_block,
                uses_per_step,
                sample_size,
                continuity_samples,
                error_trials,
            } => {
                let d = SpanningParams::default();
                let params = SpanningParams {
                    uses_per_step: uses_per_step.unwrap_or(d.uses_per_step),
                    sample_size: sample_size.unwrap_or(d.sample_size),
                    continuity_samples: continuity_samples.unwrap_or(d.continuity_samples),
                    error_trials: error_trials.unwrap_or(d.error_trials),
                };
                Box::new(SpanningEstimator(build_spanning_scheme_with(
                    system, epsilon, channel, *max_block, seed, &params,
                )?))
            }
        })
    }
}

fn diagonal_eigenvalues(system: &SystemModel) -> Result<Vec<f64>, CodingError> {
    let n = system.state_dim;
    let m = system
        .linear_matrix()
        .ok_or_else(|| CodingError::InvalidArgument("zoom scheme needs a linear system".into()))?;
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[i * n + j] == 0.0));
    if !diagonal {
        return Err(CodingError::InvalidArgument("zoom scheme needs a diagonal system matrix".into()));
    }
    Ok((0..n).map(|i| m[i * n + i]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyEstimator {
    Topological,
    Katok,
    Fibered,
    Growth,
}

fn default_noise_paths() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    /// Defaults to `topological` for deterministic systems and `fibered`
    /// for noisy ones.
    #[serde(default)]
    pub estimator: Option<EntropyEstimator>,
    #[serde(default = "default_noise_paths")]
    pub noise_paths: usize,
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub horizon: usize,
}

/// A real eigenvalue or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EigenSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl EigenSpec {
    fn value(&self) -> Complex64 {
        match self {
            EigenSpec::Real(r) => Complex64::new(*r, 0.0),
            EigenSpec::Complex([re, im]) => Complex64::new(*re, *im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Gaussian { variance: f64 },
    Uniform { low: f64, high: f64 },
}

impl DensitySpec {
    fn norm(&self) -> Result<f64, ExperimentError> {
        const NODES: usize = 20_001;
        match *self {
            DensitySpec::Gaussian { variance } if variance > 0.0 => {
                let s = variance.sqrt();
                let pdf = move |x: &[f64]| bounds::standard_normal_pdf(&[x[0] / s]) / s;
                Ok(bounds::density_norm(pdf, 1, &[(-12.0 * s, 12.0 * s)], NODES)?)
            }
            DensitySpec::Uniform { low, high } if high > low => {
                let h = 1.0 / (high - low);
                Ok(bounds::density_norm(|_: &[f64]| h, 1, &[(low, high)], NODES)?)
            }
            _ => Err(config_err("density parameters must describe a proper density")),
        }
    }
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_quadrature() -> usize {
    bounds::DEFAULT_QUADRATURE_POINTS
}

fn default_k2() -> f64 {
    bounds::K2_SCALAR
}

fn default_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaSweep {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundRequest {
    /// Linear entropy; eigenvalues default to those of the linear system.
    Ha {
        #[serde(default)]
        eigenvalues: Option<Vec<EigenSpec>>,
        #[serde(default)]
        multiplicities: Option<Vec<u32>>,
    },
    ZoomUpper {
        #[serde(default)]
        eigenvalues: Option<Vec<EigenSpec>>,
    },
    ArRd {
        a: Vec<f64>,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
        #[serde(default)]
        theta: Option<f64>,
        #[serde(default)]
        sweep: Option<ThetaSweep>,
        #[serde(default = "default_quadrature")]
        quadrature_points: usize,
    },
    /// Entropy rate and dimension default to the configured additive system.
    ShannonLb {
        epsilon: f64,
        #[serde(default)]
        entropy_rate_bits: Option<f64>,
        #[serde(default)]
        dim: Option<usize>,
    },
    GlUpper {
        epsilon: f64,
        #[serde(default)]
        density: Option<DensitySpec>,
        #[serde(default)]
        norm: Option<f64>,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_k2")]
        k2: f64,
    },
    GlLower {
        epsilon: f64,
        #[serde(default)]
        density: Option<DensitySpec>,
        #[serde(default)]
        norm: Option<f64>,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_k2")]
        k2: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    /// Sorted by nondecreasing capacity.
    pub channels: Vec<ChannelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub scheme: Option<SchemeSpec>,
    #[serde(default)]
    pub entropy_grid: Option<EntropyGridSpec>,
    #[serde(default)]
    pub entropy: Option<EntropySpec>,
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default)]
    pub bounds: Vec<BoundRequest>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Write per-step traces of every trial.
    #[serde(default)]
    pub traces: bool,
}

impl ExperimentConfig {
    /// Parses a JSON config; errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies overrides: an explicit seed beats `ESTENT_SEED`-style
    /// environment values, which beat the file.
    pub fn resolve(
        mut self,
        seed_flag: Option<u64>,
        seed_env: Option<&str>,
        output_dir: Option<PathBuf>,
    ) -> Result<Self, ExperimentError> {
        if let Some(s) = seed_flag {
            self.seed = Some(s);
        } else if let Some(text) = seed_env {
            let s = text
                .trim()
                .parse::<u64>()
                .map_err(|_| config_err(format!("ESTENT_SEED must be an unsigned integer, got `{text}`")))?;
            self.seed = Some(s);
        }
        if self.seed.is_none() {
            return Err(config_err("missing `seed` (set it in the config, ESTENT_SEED or --seed)"));
        }
        if let Some(dir) = output_dir {
            self.output_dir = Some(dir);
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(PathBuf::from("."));
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn system(&self) -> Result<SystemModel, ExperimentError> {
        self.system
            .as_ref()
            .ok_or_else(|| config_err("missing `system`"))?
            .build()
    }

    fn channel(&self) -> Result<Channel, ExperimentError> {
        self.channel
            .as_ref()
            .ok_or_else(|| config_err("missing `channel`"))?
            .build()
    }

    fn scheme(&self) -> Result<&SchemeSpec, ExperimentError> {
        self.scheme.as_ref().ok_or_else(|| config_err("missing `scheme`"))
    }

    fn objective(&self) -> Result<&ObjectiveSpec, ExperimentError> {
        let o = self.objective.as_ref().ok_or_else(|| config_err("missing `objective`"))?;
        if !(o.epsilon > 0.0) || o.trials == 0 || o.horizon < 2 {
            return Err(config_err("objective needs epsilon > 0, trials >= 1 and horizon >= 2"));
        }
        Ok(o)
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn prepare(config: &ExperimentConfig) -> Result<PathBuf, ExperimentError> {
    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Runs the configured entropy estimator; writes `entropy_counts.csv` and
/// `entropy_summary.json`.
pub fn cmd_entropy(config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    let system = config.system()?;
    let mut resolved = config.clone();
    let grid = resolved.entropy_grid.get_or_insert_with(EntropyGridSpec::default).clone();
    let spec = resolved.entropy.get_or_insert(EntropySpec {
        estimator: None,
        noise_paths: default_noise_paths(),
    });
    let kind = *spec.estimator.get_or_insert(if system.is_noisy() {
        EntropyEstimator::Fibered
    } else {
        EntropyEstimator::Topological
    });
    let paths = spec.noise_paths;
    let seed = config.seed();
    let estimate = match kind {
        EntropyEstimator::Topological => entropy::estimate_topological_entropy(&system, &grid, seed)?,
        EntropyEstimator::Katok => entropy::estimate_katok_metric_entropy(&system, &grid, seed)?,
        EntropyEstimator::Fibered => entropy::estimate_fibered_entropy(&system, &grid, paths, seed)?,
        EntropyEstimator::Growth => entropy::entropy_growth_curve(&system, &grid, seed)?,
    };
    let dir = prepare(config)?;
    let csv_path = dir.join("entropy_counts.csv");
    estimate.write_csv(fs::File::create(&csv_path)?)?;
    let json_path = dir.join("entropy_summary.json");
    write_json(&json_path, &json!({ "config": resolved, "summary": estimate.summary() }))?;
    Ok(vec![csv_path, json_path])
}

fn eigen_list(spec: &Option<Vec<EigenSpec>>, config: &ExperimentConfig) -> Result<Vec<Complex64>, ExperimentError> {
    if let Some(list) = spec {
        return Ok(list.iter().map(EigenSpec::value).collect());
    }
    let system = config.system()?;
    let n = system.state_dim;
    let m = system
        .linear_matrix()
        .ok_or_else(|| config_err("eigenvalues missing and the system is not linear"))?;
    let matrix = DMatrix::from_row_slice(n, n, m);
    Ok(matrix.complex_eigenvalues().iter().copied().collect())
}

fn gl_norm(density: &Option<DensitySpec>, norm: Option<f64>) -> Result<f64, ExperimentError> {
    match (norm, density) {
        (Some(v), _) => Ok(v),
        (None, Some(d)) => d.norm(),
        (None, None) => Err(config_err("gl bounds need `norm` or `density`")),
    }
}

/// Evaluates the requested bounds; writes `bounds.json` and, for `ar_rd`
/// requests with a `sweep`, `ar_rd_curve.csv`.
pub fn cmd_bounds(config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    if config.bounds.is_empty() {
        return Err(config_err("`bounds` must list at least one request"));
    }
    let dir = prepare(config)?;
    let mut written = Vec::new();
    let mut reports: Vec<BoundReport> = Vec::new();
    let mut curve: Vec<u8> = Vec::new();
    let mut curve_header_done = false;
    for request in &config.bounds {
        match request {
            BoundRequest::Ha {
                eigenvalues,
                multiplicities,
            } => {
                let eig = eigen_list(eigenvalues, config)?;
                let mult = multiplicities.clone().unwrap_or_else(|| vec![1; eig.len()]);
                reports.push(bounds::linear_entropy_report(&eig, &mult).map_err(config_err)?);
            }
            BoundRequest::ZoomUpper { eigenvalues } => {
                reports.push(bounds::zoom_capacity_upper_report(&eigen_list(eigenvalues, config)?));
            }
            BoundRequest::ArRd {
                a,
                sigma2,
                theta,
                sweep,
                quadrature_points,
            } => {
                if theta.is_none() && sweep.is_none() {
                    return Err(config_err("ar_rd needs `theta` or `sweep`"));
                }
                if let Some(t) = theta {
                    reports.push(
                        bounds::ar_rate_distortion_report(a, *sigma2, *t, *quadrature_points).map_err(config_err)?,
                    );
                }
                if let Some(s) = sweep {
                    if !(s.low > 0.0 && s.high >= s.low) || s.count == 0 {
                        return Err(config_err("ar_rd sweep needs 0 < low <= high and count >= 1"));
                    }
                    let thetas = bounds::log_grid(s.low, s.high, s.count);
                    let mut buf = Vec::new();
                    bounds::ar_rate_distortion_curve(a, *sigma2, &thetas, *quadrature_points, &mut buf)
                        .map_err(config_err)?;
                    // later sweeps append rows under the first header
                    let text = String::from_utf8_lossy(&buf).into_owned();
                    let body = if curve_header_done {
                        text.split_once('\n').map(|x| x.1.to_string()).unwrap_or_default()
                    } else {
                        text
                    };
                    curve_header_done = true;
                    curve.extend_from_slice(body.as_bytes());
                }
            }
            BoundRequest::ShannonLb {
                epsilon,
                entropy_rate_bits,
                dim,
            } => {
                let (h, n) = match (entropy_rate_bits, dim) {
                    (Some(h), Some(n)) => (*h, *n),
                    _ => {
                        let system = config.system()?;
                        let h = match entropy_rate_bits {
                            Some(h) => *h,
                            None => bounds::conditional_entropy_rate(&system).map_err(config_err)?,
                        };
                        (h, dim.unwrap_or(system.noise_dim))
                    }
                };
                reports.push(bounds::shannon_lower_bound_report(h, n, *epsilon).map_err(config_err)?);
            }
            BoundRequest::GlUpper {
                epsilon,
                density,
                norm,
                dim,
                k2,
            } => {
                let v = gl_norm(density, *norm)?;
                reports.push(bounds::gl_report(BoundKind::GlUpper, v, *dim, *epsilon, *k2).map_err(config_err)?);
            }
            BoundRequest::GlLower {
                epsilon,
                density,
                norm,
                dim,
                k2,
            } => {
                let v = gl_norm(density, *norm)?;
                reports.push(bounds::gl_report(BoundKind::GlLower, v, *dim, *epsilon, *k2).map_err(config_err)?);
            }
        }
    }
    let json_path = dir.join("bounds.json");
    write_json(&json_path, &json!({ "config": config, "reports": reports }))?;
    written.push(json_path);
    if curve_header_done {
        let csv_path = dir.join("ar_rd_curve.csv");
        fs::write(&csv_path, curve)?;
        written.push(csv_path);
    }
    Ok(written)
}

fn write_traces(path: &Path, outcomes: &[TrialOutcome]) -> Result<(), ExperimentError> {
    let dim = outcomes
        .iter()
        .find_map(|o| o.states.as_ref().and_then(|s| s.first().map(Vec::len)))
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    let mut header = vec!["trial".to_string(), "t".to_string(), "error".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    header.extend((0..dim).map(|d| format!("xhat{d}")));
    header.push("log2_halfwidth".into());
    header.push("symbols".into());
    w.write_record(&header)?;
    for (trial, o) in outcomes.iter().enumerate() {
        for (t, err) in o.errors.iter().enumerate() {
            let mut row = vec![trial.to_string(), t.to_string(), err.to_string()];
            for series in [&o.states, &o.estimates] {
                match series.as_ref().and_then(|s| s.get(t)) {
                    Some(v) => row.extend(v.iter().map(f64::to_string)),
                    None => row.extend(std::iter::repeat_n(String::new(), dim)),
                }
            }
            row.push(
                o.log2_halfwidth
                    .as_ref()
                    .and_then(|h| h.get(t))
                    .map(f64::to_string)
                    .unwrap_or_default(),
            );
            row.push(
                o.symbols
                    .as_ref()
                    .and_then(|s| s.get(t))
                    .map(|s| s.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
                    .unwrap_or_default(),
            );
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Builds the scheme, evaluates the objectives and writes
/// `objective_report.json` (and `traces.csv` when `traces` is set).
pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    let system = config.system()?;
    let channel = config.channel()?;
    let objective = config.objective()?;
    let seed = config.seed();
    let scheme = config.scheme()?.build(&system, &channel, objective.epsilon, child_seed(seed, 0))?;
    let (report, outcomes) = evaluate_detailed(
        &system,
        &channel,
        scheme.as_ref(),
        objective.epsilon,
        objective.trials,
        objective.horizon,
        child_seed(seed, 1),
    )?;
    let dir = prepare(config)?;
    let json_path = dir.join("objective_report.json");
    write_json(
        &json_path,
        &json!({
            "config": config,
            "channel_capacity": channel.capacity()?,
            "report": report,
        }),
    )?;
    let mut written = vec![json_path];
    if config.traces {
        let path = dir.join("traces.csv");
        write_traces(&path, &outcomes)?;
        written.push(path);
    }
    Ok(written)
}

/// Runs a capacity sweep; writes `sweep.csv` (`capacity` is `inf` when no
/// swept channel passes) and `sweep.json`.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    let system = config.system()?;
    let objective = config.objective()?;
    let sweep = config.sweep.as_ref().ok_or_else(|| config_err("missing `sweep`"))?;
    if sweep.epsilons.is_empty() || sweep.channels.is_empty() {
        return Err(config_err("sweep needs at least one epsilon and one channel"));
    }
    let channels: Vec<Channel> = sweep.channels.iter().map(ChannelSpec::build).collect::<Result<_, _>>()?;
    let caps: Vec<f64> = channels.iter().map(Channel::capacity).collect::<Result<_, _>>()?;
    if caps.windows(2).any(|w| w[1] < w[0]) {
        return Err(config_err("sweep channels must be sorted by nondecreasing capacity"));
    }
    let scheme = config.scheme()?;
    let seed = config.seed();
    let rows = capacity_sweep(
        &system,
        |ch, eps| scheme.build(&system, ch, eps, child_seed(seed, 0)),
        &channels,
        &sweep.epsilons,
        objective.trials,
        objective.horizon,
        child_seed(seed, 1),
    )?;
    let dir = prepare(config)?;
    let csv_path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(fs::File::create(&csv_path)?);
    w.write_record(["epsilon", "capacity", "channel_index", "e2_pass_fraction"])?;
    for r in &rows {
        w.write_record([
            r.epsilon.to_string(),
            r.capacity.map_or("inf".to_string(), |c| c.to_string()),
            r.channel_index.map(|i| i.to_string()).unwrap_or_default(),
            r.e2_pass_fraction.map(|f| f.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    drop(w);
    let json_path = dir.join("sweep.json");
    write_json(&json_path, &json!({ "config": config, "capacities": caps, "rows": rows }))?;
    Ok(vec![csv_path, json_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = ExperimentConfig::from_json_str("{\n  \"seed\": 1,\n  \"sede\": 2\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn seed_precedence() {
        let c = ExperimentConfig::from_json_str(r#"{"seed": 1}"#).unwrap();
        assert_eq!(c.clone().resolve(None, None, None).unwrap().seed, Some(1));
        assert_eq!(c.clone().resolve(None, Some("5"), None).unwrap().seed, Some(5));
        assert_eq!(c.clone().resolve(Some(9), Some("5"), None).unwrap().seed, Some(9));
        assert!(c.resolve(None, Some("x"), None).is_err());
        let none = ExperimentConfig::from_json_str("{}").unwrap();
        assert_eq!(none.resolve(None, None, None).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn bracket_violation_exits_with_three() {
        let e = ExperimentError::from(CodingError::BracketViolation { mode: 0, step: 4 });
        assert_eq!(e.exit_code(), 3);
        assert_eq!(ExperimentError::from(CodingError::BudgetExceeded { max_block: 3 }).exit_code(), 1);
    }

    #[test]
    fn bounds_ha_value() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_json_str(r#"{"seed": 1, "bounds": [{"kind": "ha", "eigenvalues": [2, 0.5]}]}"#)
            .unwrap()
            .resolve(None, None, Some(dir.path().to_path_buf()))
            .unwrap();
        cmd_bounds(&c).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
        assert_eq!(v["reports"][0]["value_bits"], json!(1.0));
        assert_eq!(v["config"]["seed"], json!(1));
    }

    #[test]
    fn ha_from_linear_system() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig::from_json_str(
            r#"{"seed": 1, "system": {"name": "linear", "params": {"A": [[2, 0], [0, 0.5]]}},
                "bounds": [{"kind": "ha"}, {"kind": "zoom_upper"}]}"#,
        )
        .unwrap()
        .resolve(None, None, Some(dir.path().to_path_buf()))
        .unwrap();
        cmd_bounds(&c).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
        assert!((v["reports"][0]["value_bits"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((v["reports"][1]["value_bits"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_norms_from_config() {
        let n = DensitySpec::Gaussian { variance: 1.0 }.norm().unwrap();
        assert!((n - 6.0 * 3f64.sqrt() * std::f64::consts::PI).abs() < 1e-6);
        let u = DensitySpec::Uniform { low: 0.0, high: 2.0 }.norm().unwrap();
        assert!((u - 4.0).abs() < 1e-9);
    }
}
