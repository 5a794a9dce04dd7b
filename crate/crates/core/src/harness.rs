//! Monte Carlo evaluation of the three estimation objectives and capacity
//! sweeps.
//!
//! The objectives are checked on finite-horizon proxies. The tail window is
//! the final 20% of the horizon. Sup error after `tail_start` stands in for
//! eventual error (E1), sup error over the tail window for the asymptotic
//! almost-sure error (E2), and the mean squared error over the tail window
//! for the asymptotic mean-squared error (E3).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::coding::spanning::{run_spanning_scheme, SpanningScheme};
use crate::coding::zoom::{run_zoom_scheme, ZoomScheme};
use crate::coding::CodingError;
use crate::rng::{child_rng, child_seed};
use crate::systems::{simulate, State, SystemModel};

/// Fraction of trials that must pass for a capacity to count in a sweep.
pub const SWEEP_PASS_FRACTION: f64 = 0.95;

/// One trial of a coder/estimator pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `d(x_t, xhat_t)` for `t` in `0..horizon`.
    pub errors: Vec<f64>,
    /// States and estimates, when they are finite and recorded.
    pub states: Option<Vec<State>>,
    pub estimates: Option<Vec<State>>,
    /// Channel inputs per step.
    pub symbols: Option<Vec<Vec<usize>>>,
    /// `log2` of the largest zoom half-width per step.
    pub log2_halfwidth: Option<Vec<f64>>,
}

/// A coder/estimator pair that can be run on independent trials.
pub trait Estimator: Sync {
    fn name(&self) -> &str;

    /// Time from which the scheme guarantees its accuracy, if it reports one.
    fn lock_on(&self) -> Option<usize> {
        None
    }

    /// Shortest supported horizon.
    fn min_horizon(&self) -> usize {
        1
    }

    fn run_trial(
        &self,
        system: &SystemModel,
        channel: &Channel,
        horizon: usize,
        seed: u64,
    ) -> Result<TrialOutcome, CodingError>;
}

/// Spanning-set scheme; the system is the one it was built for.
pub struct SpanningEstimator(pub SpanningScheme);

impl Estimator for SpanningEstimator {
    fn name(&self) -> &str {
        "spanning"
    }

    fn lock_on(&self) -> Option<usize> {
        Some(self.0.lock_on())
    }

    fn min_horizon(&self) -> usize {
        self.0.horizon_range().start
    }

    fn run_trial(&self, _: &SystemModel, channel: &Channel, horizon: usize, seed: u64) -> Result<TrialOutcome, CodingError> {
        let run = run_spanning_scheme(&self.0, channel, horizon, seed)?;
        Ok(TrialOutcome {
            errors: run.errors,
            states: Some(run.trajectory.states),
            estimates: run.trajectory.estimates,
            symbols: Some(run.sent),
            log2_halfwidth: None,
        })
    }
}

pub struct ZoomEstimator(pub ZoomScheme);

impl Estimator for ZoomEstimator {
    fn name(&self) -> &str {
        "zoom"
    }

    fn run_trial(
        &self,
        system: &SystemModel,
        channel: &Channel,
        horizon: usize,
        seed: u64,
    ) -> Result<TrialOutcome, CodingError> {
        let run = run_zoom_scheme(&self.0, system, channel, horizon, seed)?;
        let widest = (0..horizon)
            .map(|t| run.log2_halfwidth.iter().map(|h| h[t]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let symbols = (0..horizon.saturating_sub(1))
            .map(|t| run.symbols.iter().map(|s| s[t] as usize).collect())
            .collect();
        let (states, estimates) = match run.trajectory {
            Some(traj) => (Some(traj.states), traj.estimates),
            None => (None, None),
        };
        Ok(TrialOutcome {
            errors: run.errors,
            states,
            estimates,
            symbols: Some(symbols),
            log2_halfwidth: Some(widest),
        })
    }
}

/// Sends the exact state; needs a noiseless channel and stands for an
/// unlimited alphabet.
pub struct CopyEstimator;

impl Estimator for CopyEstimator {
    fn name(&self) -> &str {
        "copy"
    }

    fn lock_on(&self) -> Option<usize> {
        Some(0)
    }

    fn run_trial(
        &self,
        system: &SystemModel,
        channel: &Channel,
        horizon: usize,
        seed: u64,
    ) -> Result<TrialOutcome, CodingError> {
        if !channel.is_noiseless() {
            return Err(CodingError::InvalidArgument("copy scheme needs a noiseless channel".into()));
        }
        let traj = simulate(system, horizon, seed)?;
        Ok(TrialOutcome {
            errors: vec![0.0; horizon],
            estimates: Some(traj.states.clone()),
            states: Some(traj.states),
            symbols: None,
            log2_halfwidth: None,
        })
    }
}

/// Zero-delay uniform quantizer: each step every coordinate is quantized
/// to one of `levels` cells of `[low, high)` and the cell index is sent as
/// base-`|M|` digits, one channel use per digit. When a digit arrives
/// erased or outside the input alphabet the estimator predicts
/// `f(xhat_{t-1}, 0)` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectQuantizer {
    pub levels: usize,
    pub low: f64,
    pub high: f64,
}

impl DirectQuantizer {
    /// Channel uses per step for a `dim`-dimensional state.
    pub fn uses_per_step(&self, alphabet: usize, dim: usize) -> usize {
        digits(self.levels, alphabet) * dim
    }
}

fn digits(levels: usize, alphabet: usize) -> usize {
    let mut n = 1usize;
    let mut span = alphabet;
    while span < levels {
        span = span.saturating_mul(alphabet);
        n += 1;
    }
    n
}

impl Estimator for DirectQuantizer {
    fn name(&self) -> &str {
        "direct_quantizer"
    }

    fn lock_on(&self) -> Option<usize> {
        Some(0)
    }

    fn run_trial(
        &self,
        system: &SystemModel,
        channel: &Channel,
        horizon: usize,
        seed: u64,
    ) -> Result<TrialOutcome, CodingError> {
        if self.levels == 0 || !(self.high > self.low) {
            return Err(CodingError::InvalidArgument("direct quantizer needs levels >= 1 and high > low".into()));
        }
        let alphabet = channel.input_size();
        let per_coord = digits(self.levels, alphabet);
        let traj = simulate(system, horizon, child_seed(seed, 0))?;
        let mut rng = child_rng(seed, 1);
        let width = (self.high - self.low) / self.levels as f64;
        let zero_noise = vec![0.0; system.noise_dim];
        let mut estimates: Vec<State> = Vec::with_capacity(horizon);
        let mut symbols = Vec::with_capacity(horizon);
        for x in &traj.states {
            let mut sent = Vec::with_capacity(per_coord * x.len());
            let mut decoded = Vec::with_capacity(x.len());
            let mut intact = true;
            for v in x {
                let cell = (((v - self.low) / width).floor().max(0.0) as usize).min(self.levels - 1);
                let mut rest = cell;
                let mut value = 0usize;
                let mut scale = 1usize;
                for _ in 0..per_coord {
                    let digit = rest % alphabet;
                    rest /= alphabet;
                    sent.push(digit);
                    let out = channel.sample_output(digit, &mut rng);
                    if out >= alphabet {
                        intact = false;
                    }
                    value += out.min(alphabet - 1) * scale;
                    scale = scale.saturating_mul(alphabet);
                }
                decoded.push(self.low + (value.min(self.levels - 1) as f64 + 0.5) * width);
            }
            let estimate = match (intact, estimates.last()) {
                (true, _) => decoded,
                (false, Some(prev)) => system.step(prev, &zero_noise),
                (false, None) => vec![0.5 * (self.low + self.high); x.len()],
            };
            estimates.push(estimate);
            symbols.push(sent);
        }
        let errors = traj.states.iter().zip(&estimates).map(|(x, e)| system.distance(x, e)).collect();
        Ok(TrialOutcome {
            errors,
            states: Some(traj.states),
            estimates: Some(estimates),
            symbols: Some(symbols),
            log2_halfwidth: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub scheme: String,
    pub epsilon: f64,
    pub trials: usize,
    pub horizon: usize,
    pub tail_start: usize,
    pub window_start: usize,
    pub e1_pass_fraction: f64,
    pub e2_pass_fraction: f64,
    pub e3_tail_mse: f64,
    pub per_trial_max_tail_error: Vec<f64>,
}

/// First step of the final-20% tail window.
pub fn tail_window_start(horizon: usize) -> usize {
    horizon - (horizon / 5).max(1)
}

/// Runs `trials` independent trials (trial `i` uses seed
/// `child_seed(master_seed, i)`) and aggregates the objective proxies.
pub fn evaluate(
    system: &SystemModel,
    channel: &Channel,
    scheme: &dyn Estimator,
    epsilon: f64,
    trials: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<ObjectiveReport, CodingError> {
    evaluate_detailed(system, channel, scheme, epsilon, trials, horizon, master_seed).map(|(r, _)| r)
}

/// [`evaluate`] that also returns every trial outcome, in trial order.
pub fn evaluate_detailed(
    system: &SystemModel,
    channel: &Channel,
    scheme: &dyn Estimator,
    epsilon: f64,
    trials: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<(ObjectiveReport, Vec<TrialOutcome>), CodingError> {
    if trials == 0 {
        return Err(CodingError::InvalidArgument("trials must be at least 1".into()));
    }
    if !(epsilon > 0.0) {
        return Err(CodingError::InvalidArgument("epsilon must be positive".into()));
    }
    if horizon < scheme.min_horizon().max(2) {
        return Err(CodingError::HorizonOutOfRange {
            horizon,
            min: scheme.min_horizon().max(2),
            max: usize::MAX,
        });
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| scheme.run_trial(system, channel, horizon, child_seed(master_seed, i as u64)))
        .collect::<Result<_, _>>()?;
    let window_start = tail_window_start(horizon);
    let tail_start = scheme.lock_on().map_or(window_start, |l| l.min(window_start));
    let report = aggregate(scheme.name(), &outcomes, epsilon, horizon, tail_start, window_start);
    Ok((report, outcomes))
}

fn aggregate(
    name: &str,
    outcomes: &[TrialOutcome],
    epsilon: f64,
    horizon: usize,
    tail_start: usize,
    window_start: usize,
) -> ObjectiveReport {
    let sup = |e: &[f64]| e.iter().copied().fold(0.0f64, f64::max);
    let trials = outcomes.len();
    let mut e1 = 0usize;
    let mut e2 = 0usize;
    let mut mse = 0.0;
    let mut per_trial = Vec::with_capacity(trials);
    for o in outcomes {
        let window = &o.errors[window_start..];
        let window_max = sup(window);
        if sup(&o.errors[tail_start..]) <= epsilon {
            e1 += 1;
        }
        if window_max <= epsilon {
            e2 += 1;
        }
        mse += window.iter().map(|e| e * e).sum::<f64>() / window.len() as f64;
        per_trial.push(window_max);
    }
    ObjectiveReport {
        scheme: name.to_string(),
        epsilon,
        trials,
        horizon,
        tail_start,
        window_start,
        e1_pass_fraction: e1 as f64 / trials as f64,
        e2_pass_fraction: e2 as f64 / trials as f64,
        e3_tail_mse: mse / trials as f64,
        per_trial_max_tail_error: per_trial,
    }
}

/// One row of a capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Smallest swept capacity whose scheme reaches the pass fraction on
    /// the tail-window objective; `None` stands for +inf.
    pub capacity: Option<f64>,
    pub channel_index: Option<usize>,
    pub e2_pass_fraction: Option<f64>,
}

/// Scans `channels` (sorted by nondecreasing capacity) for each `epsilon`
/// in order of decreasing `epsilon`, starting each scan at the previous
/// threshold. `build` makes the scheme for a channel and accuracy; build
/// failures other than invariant violations count as a failed capacity.
#[allow(clippy::too_many_arguments)]
pub fn capacity_sweep<F>(
    system: &SystemModel,
    build: F,
    channels: &[Channel],
    epsilons: &[f64],
    trials: usize,
    horizon: usize,
    master_seed: u64,
) -> Result<Vec<SweepRow>, CodingError>
where
    F: Fn(&Channel, f64) -> Result<Box<dyn Estimator>, CodingError>,
{
    let capacities: Vec<f64> = channels.iter().map(Channel::capacity).collect::<Result<_, _>>()?;
    if capacities.windows(2).any(|w| w[1] < w[0]) {
        return Err(CodingError::InvalidArgument("channels must be sorted by nondecreasing capacity".into()));
    }
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|a, b| epsilons[*b].total_cmp(&epsilons[*a]));
    let mut rows = vec![None; epsilons.len()];
    let mut start = 0usize;
    for (pos, &e_idx) in order.iter().enumerate() {
        let epsilon = epsilons[e_idx];
        let mut found = None;
        for (c_idx, channel) in channels.iter().enumerate().skip(start) {
            let scheme = match build(channel, epsilon) {
                Ok(s) => s,
                Err(e) if e.is_invariant_violation() => return Err(e),
                Err(_) => continue,
            };
            let seed = child_seed(master_seed, (pos * channels.len() + c_idx) as u64);
            let report = match evaluate(system, channel, scheme.as_ref(), epsilon, trials, horizon, seed) {
                Ok(r) => r,
                Err(e) if e.is_invariant_violation() => return Err(e),
                Err(_) => continue,
            };
            if report.e2_pass_fraction >= SWEEP_PASS_FRACTION {
                found = Some((c_idx, report.e2_pass_fraction));
                break;
            }
        }
        rows[e_idx] = Some(match found {
            Some((c_idx, frac)) => {
                start = c_idx;
                SweepRow {
                    epsilon,
                    capacity: Some(capacities[c_idx]),
                    channel_index: Some(c_idx),
                    e2_pass_fraction: Some(frac),
                }
            }
            None => {
                start = channels.len();
                SweepRow {
                    epsilon,
                    capacity: None,
                    channel_index: None,
                    e2_pass_fraction: None,
                }
            }
        });
    }
    Ok(rows.into_iter().map(|r| r.expect("every epsilon scanned")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::zoom::build_zoom_scheme;
    use crate::systems::catalog;
    use serde_json::json;

    fn doubling() -> SystemModel {
        catalog("doubling", &serde_json::Map::new()).unwrap()
    }

    fn scalar_linear(lambda: f64) -> SystemModel {
        catalog("linear", json!({ "A": [[lambda]] }).as_object().unwrap()).unwrap()
    }

    #[test]
    fn copy_scheme_is_perfect() {
        let ch = Channel::noiseless(2).unwrap();
        let r = evaluate(&doubling(), &ch, &CopyEstimator, 0.01, 10, 100, 1).unwrap();
        assert_eq!(r.e1_pass_fraction, 1.0);
        assert_eq!(r.e3_tail_mse, 0.0);
        assert_eq!(r.tail_start, 0);
        assert_eq!(r.window_start, 80);
    }

    #[test]
    fn zoom_objectives() {
        let ch = Channel::erasure(2, 0.2).unwrap();
        let good = ZoomEstimator(build_zoom_scheme(&[2.0], &[6], 0.2, &[1.0]).unwrap());
        let r = evaluate(&scalar_linear(2.0), &ch, &good, 1e-3, 20, 400, 3).unwrap();
        assert_eq!(r.e2_pass_fraction, 1.0);
        let bad = ZoomEstimator(build_zoom_scheme(&[2.0], &[1], 0.2, &[1.0]).unwrap());
        let r = evaluate(&scalar_linear(2.0), &ch, &bad, 1e-3, 20, 400, 3).unwrap();
        assert!(r.e2_pass_fraction <= 0.05);
        assert!(r.e1_pass_fraction <= r.e2_pass_fraction);
    }

    #[test]
    fn report_does_not_depend_on_thread_count() {
        let ch = Channel::bsc(0.1).unwrap();
        let q = DirectQuantizer {
            levels: 16,
            low: 0.0,
            high: 1.0,
        };
        let a = evaluate(&doubling(), &ch, &q, 0.05, 16, 50, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| evaluate(&doubling(), &ch, &q, 0.05, 16, 50, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn direct_quantizer_noiseless_error_is_half_cell() {
        let ch = Channel::noiseless(4).unwrap();
        let q = DirectQuantizer {
            levels: 64,
            low: 0.0,
            high: 1.0,
        };
        assert_eq!(q.uses_per_step(4, 1), 3);
        let r = evaluate(&doubling(), &ch, &q, 1.0 / 128.0 + 1e-12, 5, 40, 2).unwrap();
        assert_eq!(r.e1_pass_fraction, 1.0);
    }

    #[test]
    fn sweep_erasure_threshold_for_zoom() {
        let ps = [0.95, 0.9, 0.85, 0.8, 0.7, 0.5];
        let channels: Vec<Channel> = ps.iter().map(|p| Channel::erasure(2, *p).unwrap()).collect();
        let build = |ch: &Channel, _eps: f64| -> Result<Box<dyn Estimator>, CodingError> {
            let p = match ch.kind() {
                crate::channels::ChannelKind::Erasure { p } => p,
                _ => unreachable!(),
            };
            Ok(Box::new(ZoomEstimator(build_zoom_scheme(&[2.0], &[6], p, &[1.0])?)))
        };
        let rows = capacity_sweep(&scalar_linear(2.0), build, &channels, &[1e-2, 1e-3], 20, 1500, 4).unwrap();
        for row in &rows {
            let c = row.capacity.expect("finite threshold");
            // R (1 - p) > log2 2 needs p < 5/6, i.e. capacity 1 - p > 1/6 per use
            assert!(c > 1.0 / 6.0, "{rows:?}");
        }
        assert!(rows[1].capacity >= rows[0].capacity);
    }

    #[test]
    fn sweep_reports_infinity_when_nothing_passes() {
        let noisy = catalog("rotation_noise", &serde_json::Map::new()).unwrap();
        let channels: Vec<Channel> = [2usize, 4, 8].iter().map(|m| Channel::noiseless(*m).unwrap()).collect();
        let build = |ch: &Channel, _eps: f64| -> Result<Box<dyn Estimator>, CodingError> {
            Ok(Box::new(DirectQuantizer {
                levels: ch.input_size(),
                low: 0.0,
                high: 1.0,
            }))
        };
        let rows = capacity_sweep(&noisy, build, &channels, &[0.3, 0.01], 10, 50, 1).unwrap();
        assert_eq!(rows[0].capacity, Some(1.0));
        assert_eq!(rows[1].capacity, None);
    }
}
