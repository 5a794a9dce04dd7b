//! Discrete-time systems `x_{t+1} = f(x_t, w_t)` and trajectory generation.
//!
//! State spaces are `R^N` or the `N`-torus `[0,1)^N`, both with the sup
//! metric (circle distance per coordinate on the torus). Noise draws have
//! `noise_dim` coordinates and enter additively on the first `noise_dim`
//! state coordinates for every catalog system that has noise.

use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};

pub type State = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown system `{0}` (expected one of doubling, cat_map, rotation_noise, linear, ar_gaussian, additive_nonlinear)")]
    UnknownSystem(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("noise path has {got} draws but {needed} are required")]
    NoisePathTooShort { needed: usize, got: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn invalid(name: &str, reason: impl Into<String>) -> SystemError {
    SystemError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Euclidean,
    /// Coordinates wrap into `[0, 1)`.
    Torus,
}

/// Law of each noise coordinate (coordinates are i.i.d.).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Gaussian { variance: f64 },
    /// Uniform on `[-width/2, width/2)`.
    Uniform { width: f64 },
    Finite { support: Vec<f64>, pmf: Vec<f64> },
}

impl NoiseKind {
    fn validate(&self) -> Result<(), SystemError> {
        match self {
            NoiseKind::None => Ok(()),
            NoiseKind::Gaussian { variance } if !(*variance > 0.0 && variance.is_finite()) => {
                Err(invalid("noise.variance", "must be positive and finite"))
            }
            NoiseKind::Uniform { width } if !(*width > 0.0 && width.is_finite()) => {
                Err(invalid("noise.width", "must be positive and finite"))
            }
            NoiseKind::Finite { support, pmf } => {
                if support.is_empty() || support.len() != pmf.len() {
                    return Err(invalid("noise.pmf", "support and pmf must be nonempty and of equal length"));
                }
                if pmf.iter().any(|p| !(*p >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(invalid("noise.pmf", "must be nonnegative and sum to 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Initial law `pi_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    UniformTorus,
    UniformBox { low: f64, high: f64 },
    Gaussian { variance: f64 },
    Point { value: Vec<f64> },
}

/// The map `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum Dynamics {
    /// `2x mod 1`.
    Doubling,
    /// `(x, y) -> (2x + y, x + y) mod 1`.
    CatMap,
    /// `x + alpha + w mod 1`, coordinatewise.
    Rotation { alpha: f64 },
    /// `A x + w`, `A` row-major.
    Linear { matrix: Vec<f64> },
    /// `gain * tanh(x) + w`, coordinatewise.
    Tanh { gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub name: String,
    pub dynamics: Dynamics,
    pub state_dim: usize,
    /// Zero when `noise` is [`NoiseKind::None`].
    pub noise_dim: usize,
    pub noise: NoiseKind,
    pub initial: InitialLaw,
    pub space: Space,
}

/// Maps `x` into `[0, 1)`; `rem_euclid` can round tiny negatives up to 1.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Circle distance between two points of `[0, 1)`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

impl SystemModel {
    pub fn new(
        name: impl Into<String>,
        dynamics: Dynamics,
        state_dim: usize,
        noise: NoiseKind,
        noise_dim: usize,
        initial: InitialLaw,
        space: Space,
    ) -> Result<Self, SystemError> {
        if state_dim == 0 {
            return Err(invalid("state_dim", "must be positive"));
        }
        noise.validate()?;
        let noise_dim = if noise == NoiseKind::None { 0 } else { noise_dim };
        if noise_dim > state_dim {
            return Err(invalid("noise_dim", "cannot exceed state dimension"));
        }
        match &dynamics {
            Dynamics::Linear { matrix } if matrix.len() != state_dim * state_dim => {
                return Err(invalid("A", "matrix must be square with the state dimension"));
            }
            Dynamics::CatMap if state_dim != 2 => {
                return Err(invalid("state_dim", "cat map is two-dimensional"));
            }
            Dynamics::Doubling if state_dim != 1 => {
                return Err(invalid("state_dim", "doubling map is one-dimensional"));
            }
            _ => {}
        }
        match &initial {
            InitialLaw::Point { value } if value.len() != state_dim => {
                return Err(invalid("initial.value", "length must equal the state dimension"));
            }
            InitialLaw::UniformBox { low, high } if !(low < high) => {
                return Err(invalid("initial", "low must be below high"));
            }
            InitialLaw::Gaussian { variance } if !(*variance > 0.0) => {
                return Err(invalid("initial.variance", "must be positive"));
            }
            InitialLaw::UniformTorus if space != Space::Torus => {
                return Err(invalid("initial", "uniform_torus requires a torus system"));
            }
            _ => {}
        }
        Ok(Self {
            name: name.into(),
            dynamics,
            state_dim,
            noise_dim,
            noise,
            initial,
            space,
        })
    }

    pub fn is_noisy(&self) -> bool {
        self.noise != NoiseKind::None
    }

    /// `f(x, w)` written into `out`. `w` is ignored for noise-free systems.
    pub fn step_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.state_dim;
        match &self.dynamics {
            Dynamics::Doubling => out[0] = 2.0 * x[0],
            Dynamics::CatMap => {
                out[0] = 2.0 * x[0] + x[1];
                out[1] = x[0] + x[1];
            }
            Dynamics::Rotation { alpha } => {
                for i in 0..n {
                    out[i] = x[i] + alpha;
                }
            }
            Dynamics::Linear { matrix } => {
                for i in 0..n {
                    let row = &matrix[i * n..(i + 1) * n];
                    out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Dynamics::Tanh { gain } => {
                for i in 0..n {
                    out[i] = gain * x[i].tanh();
                }
            }
        }
        for (o, wi) in out.iter_mut().zip(w.iter()).take(self.noise_dim) {
            *o += wi;
        }
        if self.space == Space::Torus {
            for o in out.iter_mut() {
                *o = wrap_unit(*o);
            }
        }
    }

    pub fn step(&self, x: &[f64], w: &[f64]) -> State {
        let mut out = vec![0.0; self.state_dim];
        self.step_into(x, w, &mut out);
        out
    }

    pub fn sample_noise(&self, rng: &mut SimRng) -> Vec<f64> {
        (0..self.noise_dim).map(|_| self.sample_noise_coordinate(rng)).collect()
    }

    fn sample_noise_coordinate(&self, rng: &mut SimRng) -> f64 {
        match &self.noise {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian { variance } => {
                Normal::new(0.0, variance.sqrt()).expect("validated variance").sample(rng)
            }
            NoiseKind::Uniform { width } => width * (rng.random::<f64>() - 0.5),
            NoiseKind::Finite { support, pmf } => {
                let idx = WeightedIndex::new(pmf).expect("validated pmf").sample(rng);
                support[idx]
            }
        }
    }

    /// One noise path of `len` draws.
    pub fn sample_noise_path(&self, len: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
        (0..len).map(|_| self.sample_noise(rng)).collect()
    }

    pub fn sample_initial(&self, rng: &mut SimRng) -> State {
        let n = self.state_dim;
        match &self.initial {
            InitialLaw::UniformTorus => (0..n).map(|_| rng.random::<f64>()).collect(),
            InitialLaw::UniformBox { low, high } => {
                let x: State = (0..n).map(|_| low + (high - low) * rng.random::<f64>()).collect();
                self.normalize(x)
            }
            InitialLaw::Gaussian { variance } => {
                let normal = Normal::new(0.0, variance.sqrt()).expect("validated variance");
                let x: State = (0..n).map(|_| normal.sample(rng)).collect();
                self.normalize(x)
            }
            InitialLaw::Point { value } => self.normalize(value.clone()),
        }
    }

    fn normalize(&self, mut x: State) -> State {
        if self.space == Space::Torus {
            x.iter_mut().for_each(|v| *v = wrap_unit(*v));
        }
        x
    }

    /// Sup metric (coordinatewise circle distance on the torus).
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.space {
            Space::Euclidean => x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs())),
            Space::Torus => x.iter().zip(y).fold(0.0, |m, (a, b)| m.max(circle_distance(*a, *b))),
        }
    }

    /// Row-major matrix of a linear system.
    pub fn linear_matrix(&self) -> Option<&[f64]> {
        match &self.dynamics {
            Dynamics::Linear { matrix } => Some(matrix),
            _ => None,
        }
    }

    /// True when `f(x, w) = g(x) + w` with the noise on every coordinate
    /// it touches (all noisy catalog systems are of this form).
    pub fn is_additive(&self) -> bool {
        self.is_noisy()
    }

    /// Iterates `f` from `x` for `steps` steps, returning the `steps + 1`
    /// visited states. Noise draws come from `noise_path` (ignored when the
    /// system is deterministic).
    pub fn orbit(&self, x: &[f64], steps: usize, noise_path: &[Vec<f64>]) -> Result<Vec<State>, SystemError> {
        if self.is_noisy() && noise_path.len() < steps {
            return Err(SystemError::NoisePathTooShort {
                needed: steps,
                got: noise_path.len(),
            });
        }
        let mut out = Vec::with_capacity(steps + 1);
        out.push(x.to_vec());
        for t in 0..steps {
            let w: &[f64] = if self.is_noisy() { &noise_path[t] } else { &[] };
            let next = self.step(&out[t], w);
            out.push(next);
        }
        Ok(out)
    }
}

/// A finite path `x_0, ..., x_{T-1}` with optional estimates and the noise
/// draws that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBlock {
    pub states: Vec<State>,
    pub estimates: Option<Vec<State>>,
    /// `w_0, ..., w_{T-2}`.
    pub noise_draws: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl TrajectoryBlock {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Checks `states[t+1] == f(states[t], noise_draws[t])` bit-for-bit.
    pub fn replays_exactly(&self, system: &SystemModel) -> bool {
        let Some(draws) = &self.noise_draws else {
            return false;
        };
        draws.len() + 1 == self.states.len()
            && self
                .states
                .windows(2)
                .zip(draws)
                .all(|(pair, w)| system.step(&pair[0], w) == pair[1])
    }

    /// Per-step estimation error `d(x_t, xhat_t)`.
    pub fn errors(&self, system: &SystemModel) -> Option<Vec<f64>> {
        let est = self.estimates.as_ref()?;
        Some(self.states.iter().zip(est).map(|(x, e)| system.distance(x, e)).collect())
    }
}

/// Simulates `horizon` states starting from a draw of `pi_0`.
pub fn simulate(system: &SystemModel, horizon: usize, seed: u64) -> Result<TrajectoryBlock, SystemError> {
    if horizon == 0 {
        return Err(SystemError::EmptyHorizon);
    }
    let mut rng = rng_from_seed(seed);
    let x0 = system.sample_initial(&mut rng);
    simulate_from(system, x0, horizon, seed, &mut rng)
}

/// Simulates `horizon` states from a given initial state, drawing noise
/// from `rng`.
pub fn simulate_from(
    system: &SystemModel,
    x0: State,
    horizon: usize,
    seed: u64,
    rng: &mut SimRng,
) -> Result<TrajectoryBlock, SystemError> {
    if horizon == 0 {
        return Err(SystemError::EmptyHorizon);
    }
    if x0.len() != system.state_dim {
        return Err(SystemError::DimensionMismatch {
            expected: system.state_dim,
            got: x0.len(),
        });
    }
    let mut states = Vec::with_capacity(horizon);
    let mut draws = Vec::with_capacity(horizon - 1);
    states.push(x0);
    for t in 1..horizon {
        let w = system.sample_noise(rng);
        let next = system.step(&states[t - 1], &w);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SystemError::NonFinite { step: t });
        }
        states.push(next);
        draws.push(w);
    }
    Ok(TrajectoryBlock {
        states,
        estimates: None,
        noise_draws: Some(draws),
        seed,
    })
}

/// Fibered Bowen distance: `max_{0 <= i < n} d(x_i, y_i)` for the two orbits
/// driven by the same noise path.
pub fn orbit_distance(
    system: &SystemModel,
    x: &[f64],
    y: &[f64],
    n: usize,
    noise_path: &[Vec<f64>],
) -> Result<f64, SystemError> {
    if n == 0 {
        return Err(SystemError::EmptyHorizon);
    }
    if system.is_noisy() && noise_path.len() < n - 1 {
        return Err(SystemError::NoisePathTooShort {
            needed: n - 1,
            got: noise_path.len(),
        });
    }
    let mut a = x.to_vec();
    let mut b = y.to_vec();
    let mut scratch = vec![0.0; system.state_dim];
    let mut best = system.distance(&a, &b);
    for i in 0..n - 1 {
        let w: &[f64] = if system.is_noisy() { &noise_path[i] } else { &[] };
        system.step_into(&a, w, &mut scratch);
        std::mem::swap(&mut a, &mut scratch);
        system.step_into(&b, w, &mut scratch);
        std::mem::swap(&mut b, &mut scratch);
        best = best.max(system.distance(&a, &b));
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

fn param<'a>(params: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    params.get(key)
}

fn param_f64(params: &Map<String, Value>, key: &str, default: Option<f64>) -> Result<f64, SystemError> {
    match param(params, key) {
        Some(v) => v.as_f64().ok_or_else(|| invalid(key, "expected a number")),
        None => default.ok_or_else(|| invalid(key, "missing")),
    }
}

fn param_usize(params: &Map<String, Value>, key: &str, default: usize) -> Result<usize, SystemError> {
    match param(params, key) {
        Some(v) => v
            .as_u64()
            .filter(|n| *n > 0)
            .map(|n| n as usize)
            .ok_or_else(|| invalid(key, "expected a positive integer")),
        None => Ok(default),
    }
}

fn param_typed<T: for<'de> Deserialize<'de>>(
    params: &Map<String, Value>,
    key: &str,
    default: T,
) -> Result<T, SystemError> {
    match param(params, key) {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(key, e.to_string())),
        None => Ok(default),
    }
}

/// Golden-ratio rotation number, used when `rotation_noise` gets no `alpha`.
pub const DEFAULT_ROTATION: f64 = 0.618_033_988_749_894_9;

/// Builds a catalog system.
///
/// | name | map | params |
/// |---|---|---|
/// | `doubling` | `2x mod 1` | `initial` |
/// | `cat_map` | `(2x+y, x+y) mod 1` | `initial` |
/// | `rotation_noise` | `x + alpha + w mod 1` | `alpha` (0), `dim` (1), `noise` (uniform width 1), `initial` |
/// | `linear` | `A x + w` | `A`, `noise` (none), `initial` (uniform box [-1,1]) |
/// | `ar_gaussian` | companion form of `x_t = -sum a_k x_{t-k} + w_t` | `a`, `sigma2`, `initial` |
/// | `additive_nonlinear` | `gain tanh(x) + w` | `gain` (2), `dim` (1), `noise` (gaussian 1), `initial` |
pub fn catalog(name: &str, params: &Map<String, Value>) -> Result<SystemModel, SystemError> {
    let torus_init = InitialLaw::UniformTorus;
    let box_init = InitialLaw::UniformBox { low: -1.0, high: 1.0 };
    match name {
        "doubling" => SystemModel::new(
            name,
            Dynamics::Doubling,
            1,
            NoiseKind::None,
            0,
            param_typed(params, "initial", torus_init)?,
            Space::Torus,
        ),
        "cat_map" => SystemModel::new(
            name,
            Dynamics::CatMap,
            2,
            NoiseKind::None,
            0,
            param_typed(params, "initial", torus_init)?,
            Space::Torus,
        ),
        "rotation_noise" => {
            let dim = param_usize(params, "dim", 1)?;
            SystemModel::new(
                name,
                Dynamics::Rotation {
                    alpha: param_f64(params, "alpha", Some(0.0))?,
                },
                dim,
                param_typed(params, "noise", NoiseKind::Uniform { width: 1.0 })?,
                dim,
                param_typed(params, "initial", torus_init)?,
                Space::Torus,
            )
        }
        "linear" => {
            let rows: Vec<Vec<f64>> = param_typed(params, "A", Vec::new())?;
            let dim = rows.len();
            if dim == 0 || rows.iter().any(|r| r.len() != dim) {
                return Err(invalid("A", "expected a nonempty square matrix"));
            }
            SystemModel::new(
                name,
                Dynamics::Linear {
                    matrix: rows.concat(),
                },
                dim,
                param_typed(params, "noise", NoiseKind::None)?,
                dim,
                param_typed(params, "initial", box_init)?,
                Space::Euclidean,
            )
        }
        "ar_gaussian" => {
            let coeffs: Vec<f64> = param_typed(params, "a", Vec::new())?;
            if coeffs.is_empty() {
                return Err(invalid("a", "expected at least one coefficient"));
            }
            let sigma2 = param_f64(params, "sigma2", Some(1.0))?;
            SystemModel::new(
                name,
                Dynamics::Linear {
                    matrix: companion_matrix(&coeffs),
                },
                coeffs.len(),
                NoiseKind::Gaussian { variance: sigma2 },
                1,
                param_typed(params, "initial", box_init)?,
                Space::Euclidean,
            )
        }
        "additive_nonlinear" => {
            let dim = param_usize(params, "dim", 1)?;
            SystemModel::new(
                name,
                Dynamics::Tanh {
                    gain: param_f64(params, "gain", Some(2.0))?,
                },
                dim,
                param_typed(params, "noise", NoiseKind::Gaussian { variance: 1.0 })?,
                dim,
                param_typed(params, "initial", box_init)?,
                Space::Euclidean,
            )
        }
        other => Err(SystemError::UnknownSystem(other.to_string())),
    }
}

/// Companion matrix (row-major) of `z^m + a_1 z^{m-1} + ... + a_m`, i.e. the
/// state-transition matrix of `x_t = -sum_k a_k x_{t-k}` on
/// `(x_t, ..., x_{t-m+1})`.
pub fn companion_matrix(coeffs: &[f64]) -> Vec<f64> {
    let m = coeffs.len();
    let mut a = vec![0.0; m * m];
    for (k, c) in coeffs.iter().enumerate() {
        a[k] = -c;
    }
    for i in 1..m {
        a[i * m + i - 1] = 1.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn params(v: Value) -> Map<String, Value> {
        v.as_object().cloned().unwrap_or_default()
    }

    #[test]
    fn doubling_from_point() {
        let sys = catalog("doubling", &params(json!({"initial": {"kind": "point", "value": [0.1]}}))).unwrap();
        assert_eq!(sys.state_dim, 1);
        assert!(!sys.is_noisy());
        let block = simulate(&sys, 4, 0).unwrap();
        let xs: Vec<f64> = block.states.iter().map(|s| s[0]).collect();
        assert_eq!(xs, vec![0.1, 0.2, 0.4, 0.8]);
    }

    #[test]
    fn zero_noise_rotation_is_constant() {
        let sys = catalog(
            "rotation_noise",
            &params(json!({"noise": {"kind": "finite", "support": [0.0], "pmf": [1.0]}})),
        )
        .unwrap();
        let block = simulate(&sys, 50, 9).unwrap();
        assert!(block.states.iter().all(|s| s == &block.states[0]));
    }

    #[test]
    fn linear_scalar_replays_recorded_noise() {
        let sys = catalog(
            "linear",
            &params(json!({"A": [[2.0]], "noise": {"kind": "gaussian", "variance": 1.0}})),
        )
        .unwrap();
        let block = simulate(&sys, 40, 17).unwrap();
        let draws = block.noise_draws.as_ref().unwrap();
        assert_eq!(draws.len(), 39);
        // independent replay of x_{t+1} = 2 x_t + w_t
        for t in 0..39 {
            assert_eq!(block.states[t + 1][0], 2.0 * block.states[t][0] + draws[t][0]);
        }
        assert!(block.replays_exactly(&sys));
    }

    #[test]
    fn simulate_is_deterministic() {
        let sys = catalog("additive_nonlinear", &Map::new()).unwrap();
        assert_eq!(simulate(&sys, 100, 5).unwrap(), simulate(&sys, 100, 5).unwrap());
        assert_ne!(simulate(&sys, 100, 5).unwrap(), simulate(&sys, 100, 6).unwrap());
    }

    #[test]
    fn overflow_is_reported() {
        let sys = catalog("linear", &params(json!({"A": [[1e200]]}))).unwrap();
        assert!(matches!(simulate(&sys, 10, 1), Err(SystemError::NonFinite { .. })));
    }

    #[test]
    fn ar_companion_root() {
        let sys = catalog("ar_gaussian", &params(json!({"a": [-2.0], "sigma2": 1.0}))).unwrap();
        assert_eq!(sys.linear_matrix().unwrap(), &[2.0]);
        assert_eq!(sys.noise_dim, 1);
        // order two: z^2 - 3z + 2 = (z - 1)(z - 2)
        let sys = catalog("ar_gaussian", &params(json!({"a": [-3.0, 2.0]}))).unwrap();
        let a = nalgebra::DMatrix::from_row_slice(2, 2, sys.linear_matrix().unwrap());
        let mut eig: Vec<f64> = a.complex_eigenvalues().iter().map(|z| z.re).collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 1.0).abs() < 1e-12 && (eig[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(catalog("henon", &Map::new()), Err(SystemError::UnknownSystem(_))));
        assert!(catalog("linear", &params(json!({"A": [[1.0, 2.0]]}))).is_err());
        assert!(catalog("ar_gaussian", &Map::new()).is_err());
        assert!(catalog("doubling", &params(json!({"initial": {"kind": "point", "value": [0.1, 0.2]}}))).is_err());
    }

    #[test]
    fn orbit_distance_cases() {
        let sys = catalog("doubling", &Map::new()).unwrap();
        assert_eq!(orbit_distance(&sys, &[0.3], &[0.7], 1, &[]).unwrap(), sys.distance(&[0.3], &[0.7]));
        let d = orbit_distance(&sys, &[0.0], &[0.01], 5, &[]).unwrap();
        assert!((d - 0.16).abs() < 1e-15);
        assert_eq!(orbit_distance(&sys, &[0.42], &[0.42], 9, &[]).unwrap(), 0.0);

        let noisy = catalog("rotation_noise", &Map::new()).unwrap();
        assert!(matches!(
            orbit_distance(&noisy, &[0.1], &[0.2], 4, &[vec![0.1]]),
            Err(SystemError::NoisePathTooShort { .. })
        ));
    }

    #[test]
    fn wrap_stays_in_unit_interval() {
        assert_eq!(wrap_unit(-1e-20), 0.0);
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }
}
