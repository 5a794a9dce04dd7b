//! Pipelined spanning-set scheme for deterministic torus systems over a
//! discrete memoryless channel.
//!
//! Time is cut into blocks `[tau_j, tau_{j+1})` with `tau_0 = 0` and
//! `tau_{j+1} = tau_j + j + 1`. During block `j` the coder sends the index
//! of the element of `S_{j+1}` closest (in the Bowen metric over `j + 1`
//! steps) to the orbit starting at `x_{tau_{j+1}} = f^{j+1}(x_{tau_j})`.
//! At `tau_{j+1}` the estimator decodes the block and emits
//! `y, f(y), ..., f^{j+1}(y)` over `[tau_{j+1}, tau_{j+2})`. The first
//! `j + 1` estimates are within `delta` of the state and the last one is
//! within `epsilon` by the choice of `delta`.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::block_code::{build_block_code_with, BlockCode};
use super::CodingError;
use crate::channels::Channel;
use crate::entropy::{greedy_cover, OrbitBundle};
use crate::rng::{child_rng, child_seed};
use crate::systems::{wrap_unit, Space, State, SystemModel, TrajectoryBlock};

/// Perturbations in the continuity test reach this multiple of `delta`,
/// leaving room for states that sit between sample points.
const CONTINUITY_SLACK: f64 = 1.25;
const DELTA_FLOOR: f64 = 1e-12;
/// Covers use a radius just under `delta` so grid spacings that divide
/// `delta` exactly do not tie under rounding.
const COVER_SHRINK: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpanningParams {
    /// Channel uses per time step.
    pub uses_per_step: usize,
    /// Grid points used to build the spanning sets.
    pub sample_size: usize,
    /// Point pairs in the continuity test.
    pub continuity_samples: usize,
    /// Monte Carlo transmissions per block code.
    pub error_trials: usize,
}

impl Default for SpanningParams {
    fn default() -> Self {
        Self {
            uses_per_step: 1,
            sample_size: 20_000,
            continuity_samples: 4096,
            error_trials: 200,
        }
    }
}

/// `tau_j = j (j + 1) / 2`.
pub fn sampling_time(j: usize) -> usize {
    j * (j + 1) / 2
}

#[derive(Debug, Clone)]
pub struct SpanningScheme {
    pub system: SystemModel,
    pub channel: Channel,
    pub epsilon: f64,
    pub delta: f64,
    pub params: SpanningParams,
    pub max_block: usize,
    /// `spanning_sets[k]`: initial points of `S_k` (orbits of length `k`);
    /// entry 0 is empty.
    pub spanning_sets: Vec<Vec<State>>,
    /// `log2` of the message budget for `S_k` (`k` steps of channel uses).
    pub budget_bits: Vec<f64>,
    /// `S_k` holds more than half the sample, so it no longer resolves the
    /// state space.
    pub saturated: Vec<bool>,
    /// `tau_0, ..., tau_{max_block + 2}`.
    pub sampling_times: Vec<usize>,
    pub start_block: usize,
    /// `codes[k]` carries indices of `S_k`; present for `k > start_block`.
    pub codes: Vec<Option<BlockCode>>,
    /// Orbits of the elements of each `S_k`, `k` states each, flattened.
    center_orbits: Vec<Vec<f64>>,
}

impl SpanningScheme {
    /// First time step at which estimates carry decoded information.
    pub fn lock_on(&self) -> usize {
        sampling_time(self.start_block + 1)
    }

    /// Supported horizons.
    pub fn horizon_range(&self) -> Range<usize> {
        sampling_time(self.start_block + 2)..sampling_time(self.max_block + 2) + 1
    }

    /// `|S_k| <= M_k` and `S_k` is not saturated.
    pub fn block_valid(&self, k: usize) -> bool {
        let size = self.spanning_sets[k].len() as f64;
        !self.saturated[k] && size.log2() <= self.budget_bits[k] + 1e-12
    }

    /// Sizes `|S_k|` for `k = 1..=max_block + 1`.
    pub fn set_sizes(&self) -> Vec<usize> {
        self.spanning_sets.iter().skip(1).map(Vec::len).collect()
    }

    /// Index of the element of `S_k` closest to the length-`k` orbit of `z`.
    pub fn nearest(&self, k: usize, z: &[f64]) -> (usize, f64) {
        let dim = self.system.state_dim;
        let orbit = deterministic_orbit(&self.system, z, k);
        let flat = &self.center_orbits[k];
        let stride = k * dim;
        let mut best = (0usize, f64::INFINITY);
        for (m, center) in flat.chunks_exact(stride).enumerate() {
            let mut d = 0.0f64;
            for (a, b) in center.iter().zip(&orbit) {
                d = d.max(self.system.distance(std::slice::from_ref(a), std::slice::from_ref(b)));
                if d >= best.1 {
                    break;
                }
            }
            if d < best.1 {
                best = (m, d);
            }
        }
        best
    }

    /// Largest Bowen distance from a sample point to its nearest element of
    /// `S_k`, evaluated on `points`.
    pub fn coverage_radius(&self, k: usize, points: &[State]) -> f64 {
        points.iter().map(|p| self.nearest(k, p).1).fold(0.0, f64::max)
    }
}

/// `k` states `z, f(z), ..., f^{k-1}(z)` flattened.
fn deterministic_orbit(system: &SystemModel, z: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k * z.len());
    let mut cur = z.to_vec();
    let mut next = vec![0.0; z.len()];
    for t in 0..k {
        out.extend_from_slice(&cur);
        if t + 1 < k {
            system.step_into(&cur, &[], &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    out
}

/// Regular grid of about `count` cell centers on the torus.
pub fn torus_grid(dim: usize, count: usize) -> Vec<State> {
    let side = ((count as f64).powf(1.0 / dim as f64).round() as usize).max(1);
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let c = idx % side;
                    idx /= side;
                    (c as f64 + 0.5) / side as f64
                })
                .collect()
        })
        .collect()
}

/// Largest `delta = epsilon / 2^k` such that every tested pair with
/// `d(x, y) < 1.25 delta` has `d(f x, f y) < epsilon`.
pub fn find_delta(system: &SystemModel, epsilon: f64, samples: usize, seed: u64) -> Result<f64, CodingError> {
    let dim = system.state_dim;
    let mut rng = child_rng(seed, 0);
    let bases: Vec<State> = (0..samples).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let offsets: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect();
    let corners: Vec<Vec<f64>> = (0..1usize << dim.min(8))
        .map(|bits| (0..dim).map(|d| if bits >> d & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect();
    let mut delta = epsilon / 2.0;
    while delta > DELTA_FLOOR {
        let reach = CONTINUITY_SLACK * delta * (1.0 - 1e-9);
        let passes = bases.iter().enumerate().all(|(i, x)| {
            let fx = system.step(x, &[]);
            let all_offsets = std::iter::once(&offsets[i]).chain(corners.iter());
            all_offsets.into_iter().all(|o| {
                let y: State = x.iter().zip(o).map(|(a, s)| wrap_unit(a + s * reach)).collect();
                system.distance(&fx, &system.step(&y, &[])) < epsilon
            })
        });
        if passes {
            return Ok(delta);
        }
        delta /= 2.0;
    }
    Err(CodingError::NoContractionMargin(DELTA_FLOOR))
}

/// Builds the scheme with default [`SpanningParams`].
pub fn build_spanning_scheme(
    system: &SystemModel,
    epsilon: f64,
    channel: &Channel,
    max_block: usize,
    seed: u64,
) -> Result<SpanningScheme, CodingError> {
    build_spanning_scheme_with(system, epsilon, channel, max_block, seed, &SpanningParams::default())
}

pub fn build_spanning_scheme_with(
    system: &SystemModel,
    epsilon: f64,
    channel: &Channel,
    max_block: usize,
    seed: u64,
    params: &SpanningParams,
) -> Result<SpanningScheme, CodingError> {
    if system.is_noisy() || system.space != Space::Torus {
        return Err(CodingError::InvalidArgument(
            "spanning scheme needs a deterministic system on the torus".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(CodingError::InvalidArgument("epsilon must lie in (0, 0.5)".into()));
    }
    if max_block == 0 || params.uses_per_step == 0 || params.sample_size < 2 {
        return Err(CodingError::InvalidArgument(
            "max_block, uses_per_step and sample_size must be positive".into(),
        ));
    }
    let delta = find_delta(system, epsilon, params.continuity_samples.max(1), child_seed(seed, 0))?;
    let capacity = channel.capacity()?;

    let top = max_block + 1;
    let sample = torus_grid(system.state_dim, params.sample_size);
    let bundle = OrbitBundle::from_points(system, &sample, top, None)?;
    let covers: Vec<Vec<usize>> = {
        use rayon::prelude::*;
        (1..=top)
            .into_par_iter()
            .map(|k| greedy_cover(&bundle, 0..k, delta * COVER_SHRINK).centers)
            .collect()
    };
    let mut spanning_sets = vec![Vec::new()];
    let mut center_orbits = vec![Vec::new()];
    let mut saturated = vec![false];
    let mut budget_bits = vec![0.0];
    for (i, centers) in covers.into_iter().enumerate() {
        let k = i + 1;
        let set: Vec<State> = centers.iter().map(|c| sample[*c].clone()).collect();
        center_orbits.push(set.iter().flat_map(|p| deterministic_orbit(system, p, k)).collect());
        saturated.push(2 * set.len() > sample.len());
        budget_bits.push((k * params.uses_per_step) as f64 * capacity);
        spanning_sets.push(set);
    }
    let mut scheme = SpanningScheme {
        system: system.clone(),
        channel: channel.clone(),
        epsilon,
        delta,
        params: params.clone(),
        max_block,
        spanning_sets,
        budget_bits,
        saturated,
        sampling_times: (0..=max_block + 2).map(sampling_time).collect(),
        start_block: 0,
        codes: Vec::new(),
        center_orbits,
    };
    let mut start = None;
    for k in (1..=top).rev() {
        if !scheme.block_valid(k) {
            break;
        }
        start = Some(k);
    }
    let start = match start {
        Some(n) if n <= max_block => n,
        _ => return Err(CodingError::BudgetExceeded { max_block }),
    };
    scheme.start_block = start;
    let mut codes: Vec<Option<BlockCode>> = vec![None; top + 1];
    for (k, slot) in codes.iter_mut().enumerate().skip(start + 1) {
        *slot = Some(build_block_code_with(
            channel,
            scheme.spanning_sets[k].len(),
            k * params.uses_per_step,
            child_seed(seed, 1 + k as u64),
            params.error_trials,
        )?);
    }
    scheme.codes = codes;
    Ok(scheme)
}

/// Outcome of one run of the scheme.
#[derive(Debug, Clone)]
pub struct SpanningRun {
    pub trajectory: TrajectoryBlock,
    /// `d(x_t, xhat_t)`.
    pub errors: Vec<f64>,
    pub lock_on: usize,
    /// Latest channel-output time index read by the estimator before it
    /// emitted the estimate at `t`.
    pub info_horizon: Vec<Option<usize>>,
    /// Channel inputs and outputs per time step.
    pub sent: Vec<Vec<usize>>,
    pub received: Vec<Vec<usize>>,
    /// `(block j, sent index, decoded index)` for every decoded block.
    pub decoded_blocks: Vec<(usize, usize, usize)>,
}

impl SpanningRun {
    pub fn block_error_count(&self) -> usize {
        self.decoded_blocks.iter().filter(|(_, s, d)| s != d).count()
    }
}

/// Estimator side: reads channel outputs only through [`Estimator::receive`].
struct Estimator<'a> {
    scheme: &'a SpanningScheme,
    outputs: Vec<Vec<usize>>,
    current: Option<(usize, State)>,
    info: Option<usize>,
}

impl Estimator<'_> {
    fn receive(&mut self, symbols: Vec<usize>) {
        self.outputs.push(symbols);
    }

    /// Estimate at `t`, decoding block `j` when `t = tau_{j+1}`.
    fn estimate(&mut self, t: usize, block: usize, decoded: &mut Option<usize>) -> State {
        let scheme = self.scheme;
        let dim = scheme.system.state_dim;
        let start = scheme.sampling_times[block];
        if t == start && block > scheme.start_block {
            let j = block - 1;
            let from = scheme.sampling_times[j];
            let word: Vec<usize> = self.outputs[from..start].iter().flatten().copied().collect();
            let k = j + 1;
            let code = scheme.codes[k].as_ref().expect("code exists past the start block");
            let m = code.decode(&word);
            *decoded = Some(m);
            self.current = Some((t, scheme.spanning_sets[k][m].clone()));
            self.info = Some(start - 1);
        }
        match &mut self.current {
            Some((at, y)) if *at == t => y.clone(),
            Some((at, y)) => {
                *y = scheme.system.step(y, &[]);
                *at = t;
                y.clone()
            }
            None => vec![0.0; dim],
        }
    }
}

/// Runs the scheme over `channel` (which must share the scheme channel's
/// input alphabet) from a uniform initial state.
pub fn run_spanning_scheme(
    scheme: &SpanningScheme,
    channel: &Channel,
    horizon: usize,
    seed: u64,
) -> Result<SpanningRun, CodingError> {
    let range = scheme.horizon_range();
    if !range.contains(&horizon) {
        return Err(CodingError::HorizonOutOfRange {
            horizon,
            min: range.start,
            max: range.end - 1,
        });
    }
    if channel.input_size() != scheme.channel.input_size() {
        return Err(CodingError::InvalidArgument(
            "run channel must share the scheme channel's input alphabet".into(),
        ));
    }
    let system = &scheme.system;
    let mut init_rng = child_rng(seed, 0);
    let mut channel_rng = child_rng(seed, 1);
    let x0 = system.sample_initial(&mut init_rng);
    let states = deterministic_orbit(system, &x0, horizon);
    let dim = system.state_dim;
    let state_at = |t: usize| &states[t * dim..(t + 1) * dim];

    let mut estimator = Estimator {
        scheme,
        outputs: Vec::with_capacity(horizon),
        current: None,
        info: None,
    };
    let u = scheme.params.uses_per_step;
    let mut sent = Vec::with_capacity(horizon);
    let mut estimates = Vec::with_capacity(horizon);
    let mut info_horizon = Vec::with_capacity(horizon);
    let mut decoded_blocks = Vec::new();
    let mut block = 0usize;
    let mut codeword: Vec<usize> = Vec::new();
    let mut message = 0usize;
    for t in 0..horizon {
        if t == scheme.sampling_times[block + 1] {
            block += 1;
        }
        let mut decoded = None;
        estimates.push(estimator.estimate(t, block, &mut decoded));
        info_horizon.push(estimator.info);
        if let Some(m) = decoded {
            decoded_blocks.push((block - 1, message, m));
        }
        // coder: choose this block's message at its first step
        if t == scheme.sampling_times[block] {
            let k = block + 1;
            if block >= scheme.start_block && k < scheme.codes.len() {
                let z_time = scheme.sampling_times[k];
                let z = if z_time < horizon {
                    state_at(z_time).to_vec()
                } else {
                    deterministic_orbit(system, state_at(t), k + 1)[k * dim..].to_vec()
                };
                message = scheme.nearest(k, &z).0;
                codeword = scheme.codes[k].as_ref().expect("code exists").encode(message).to_vec();
            } else {
                message = 0;
                codeword = vec![0; k * u];
            }
        }
        let offset = (t - scheme.sampling_times[block]) * u;
        let inputs = codeword[offset..offset + u].to_vec();
        let outputs: Vec<usize> = inputs.iter().map(|x| channel.sample_output(*x, &mut channel_rng)).collect();
        estimator.receive(outputs.clone());
        sent.push(inputs);
    }
    let received = estimator.outputs;
    let state_rows: Vec<State> = states.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    let errors = state_rows.iter().zip(&estimates).map(|(x, e)| system.distance(x, e)).collect();
    Ok(SpanningRun {
        trajectory: TrajectoryBlock {
            states: state_rows,
            estimates: Some(estimates),
            noise_draws: Some(vec![Vec::new(); horizon - 1]),
            seed,
        },
        errors,
        lock_on: scheme.lock_on(),
        info_horizon,
        sent,
        received,
        decoded_blocks,
    })
}
