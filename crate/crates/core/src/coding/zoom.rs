//! Adaptive uniform ("zoom") quantizer for noise-free diagonal linear systems
//! over an erasure channel.
//!
//! Each mode `i` has a center `c` and half-width `Delta`, known to both
//! sides. Per step the coder sends the index of the `2^R_i`-cell uniform
//! partition of `[c - Delta, c + Delta]` containing `x^i_t`; the whole
//! index is erased or delivered atomically. On delivery both sides move to
//! `c <- lambda * midpoint`, `Delta <- |lambda| 2^-R Delta`; on erasure
//! `c <- lambda c`, `Delta <- |lambda| Delta`. The coder learns the outcome
//! through feedback.
//!
//! Unstable modes grow like `|lambda|^t`, which leaves the `f64` range within
//! a few hundred steps, so the run is carried in normalised innovation
//! coordinates: `u = (x - c) / Delta` in `[-1, 1]` and `log2 Delta`. The
//! recursion is the same, `u <- sign(lambda) 2^R (u - m)` on delivery
//! (`m` the normalised midpoint) and `u <- sign(lambda) u` on erasure, and
//! the estimation error is `|u| Delta` exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CodingError;
use crate::channels::{Channel, ChannelKind};
use crate::rng::child_rng;
use crate::systems::{SystemModel, TrajectoryBlock};

/// Slack for `|u| <= 1` against rounding in the normalised update.
const BRACKET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomScheme {
    pub eigenvalues: Vec<f64>,
    /// Bits per step for each mode.
    pub rates: Vec<u32>,
    pub erasure_p: f64,
    pub initial_halfwidth: Vec<f64>,
    pub center: Vec<f64>,
    pub log2_halfwidth: Vec<f64>,
}

/// `kappa(r) = p |lambda|^r + (1 - p) |lambda|^r 2^{-r R}`.
pub fn kappa(lambda_abs: f64, rate: u32, p: f64, r: f64) -> f64 {
    lambda_abs.powf(r) * (p + (1.0 - p) * (-(r * f64::from(rate))).exp2())
}

/// Minimum of [`kappa`] over `r` in `(0, 8]` by golden-section search
/// (`kappa` is log-convex in `r`). Returns `(kappa_min, r_star)`.
pub fn stability_margin(lambda_abs: f64, rate: u32, p: f64) -> (f64, f64) {
    const TOL: f64 = 1e-8;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |r: f64| kappa(lambda_abs, rate, p, r);
    let (mut a, mut b) = (0.0f64, 8.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let r = (0.5 * (a + b)).max(f64::MIN_POSITIVE);
    (f(r), r)
}

/// Builds a zoom scheme with centers at the origin.
pub fn build_zoom_scheme(
    eigenvalues: &[f64],
    rates: &[u32],
    erasure_p: f64,
    initial_halfwidth: &[f64],
) -> Result<ZoomScheme, CodingError> {
    let n = eigenvalues.len();
    if n == 0 || rates.len() != n || initial_halfwidth.len() != n {
        return Err(CodingError::InvalidArgument(
            "eigenvalues, rates and initial_halfwidth must be nonempty and of equal length".into(),
        ));
    }
    if rates.contains(&0) {
        return Err(CodingError::InvalidArgument("rates must be positive".into()));
    }
    if initial_halfwidth.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(CodingError::InvalidArgument("initial half-widths must be positive".into()));
    }
    if !(0.0..1.0).contains(&erasure_p) {
        return Err(CodingError::InvalidArgument("erasure probability must lie in [0, 1)".into()));
    }
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(CodingError::InvalidArgument("eigenvalues must be finite".into()));
    }
    Ok(ZoomScheme {
        eigenvalues: eigenvalues.to_vec(),
        rates: rates.to_vec(),
        erasure_p,
        initial_halfwidth: initial_halfwidth.to_vec(),
        center: vec![0.0; n],
        log2_halfwidth: initial_halfwidth.iter().map(|h| h.log2()).collect(),
    })
}

impl ZoomScheme {
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `kappa_min < 1` for mode `i`.
    pub fn mode_contracts(&self, i: usize) -> bool {
        stability_margin(self.eigenvalues[i].abs(), self.rates[i], self.erasure_p).0 < 1.0
    }

    /// Every mode contracts in the `r`-th moment for some `r > 0`.
    pub fn is_stable(&self) -> bool {
        (0..self.modes()).all(|i| self.mode_contracts(i))
    }

    /// Bits per time step sent by the coder.
    pub fn bits_per_step(&self) -> u32 {
        self.rates.iter().sum()
    }

    /// Checks that `system` is the noise-free diagonal linear system with
    /// this scheme's eigenvalues, and that `channel` is an erasure channel
    /// with the scheme's erasure probability.
    pub fn check_compatible(&self, system: &SystemModel, channel: &Channel) -> Result<(), CodingError> {
        let n = self.modes();
        let matrix = system
            .linear_matrix()
            .ok_or_else(|| CodingError::InvalidArgument("zoom scheme needs a linear system".into()))?;
        if system.is_noisy() || system.state_dim != n {
            return Err(CodingError::InvalidArgument(
                "zoom scheme needs a noise-free linear system with one coordinate per mode".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { self.eigenvalues[i] } else { 0.0 };
                if matrix[i * n + j] != expected {
                    return Err(CodingError::InvalidArgument(
                        "system matrix must be diagonal with the scheme's eigenvalues".into(),
                    ));
                }
            }
        }
        match channel.kind() {
            ChannelKind::Erasure { p } if (p - self.erasure_p).abs() < 1e-12 => Ok(()),
            _ => Err(CodingError::InvalidArgument(format!(
                "zoom scheme needs an erasure channel with p = {}",
                self.erasure_p
            ))),
        }
    }
}

/// Per-step record of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomStep {
    pub t: usize,
    pub mode: usize,
    /// `|x_t - xhat_t|`.
    pub error: f64,
    /// `log2 Delta_t`.
    pub log2_halfwidth: f64,
    /// Cell index sent at step `t`.
    pub symbol: u64,
    pub erased: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoomRun {
    /// `errors[t]`: sup over modes of `|x^i_t - xhat^i_t|`.
    pub errors: Vec<f64>,
    /// `log2_halfwidth[i][t]` for `t` in `0..=horizon`.
    pub log2_halfwidth: Vec<Vec<f64>>,
    /// `erased[i][t]`.
    pub erased: Vec<Vec<bool>>,
    pub symbols: Vec<Vec<u64>>,
    /// Absolute-coordinate states and estimates, present while every value
    /// is finite over the horizon.
    pub trajectory: Option<TrajectoryBlock>,
}

impl ZoomRun {
    /// `max_i Delta^i` after the last step.
    pub fn final_halfwidth(&self) -> f64 {
        self.log2_halfwidth
            .iter()
            .map(|h| h.last().copied().unwrap_or(f64::NEG_INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
            .exp2()
    }

    pub fn records(&self) -> Vec<ZoomStep> {
        let modes = self.erased.len();
        let mut out = Vec::with_capacity(self.errors.len() * modes);
        for t in 0..self.errors.len() {
            for i in 0..modes {
                out.push(ZoomStep {
                    t,
                    mode: i,
                    error: self.errors[t],
                    log2_halfwidth: self.log2_halfwidth[i][t],
                    symbol: self.symbols[i][t],
                    erased: self.erased[i][t],
                });
            }
        }
        out
    }
}

/// Runs the scheme from a fresh state (`scheme` is the initial
/// configuration and is not mutated). The initial state is drawn uniformly
/// from `[-h_i, h_i]` per mode, so the bracketing precondition holds.
pub fn run_zoom_scheme(
    scheme: &ZoomScheme,
    system: &SystemModel,
    channel: &Channel,
    horizon: usize,
    seed: u64,
) -> Result<ZoomRun, CodingError> {
    scheme.check_compatible(system, channel)?;
    if horizon == 0 {
        return Err(CodingError::HorizonOutOfRange {
            horizon,
            min: 1,
            max: usize::MAX,
        });
    }
    let n = scheme.modes();
    let mut init_rng = child_rng(seed, 0);
    let mut channel_rng = child_rng(seed, 1);
    let x0: Vec<f64> = scheme
        .initial_halfwidth
        .iter()
        .zip(&scheme.center)
        .map(|(h, c)| c + h * (2.0 * init_rng.random::<f64>() - 1.0))
        .collect();

    let mut u: Vec<f64> = (0..n)
        .map(|i| (x0[i] - scheme.center[i]) / scheme.initial_halfwidth[i])
        .collect();
    let mut log_delta = scheme.log2_halfwidth.clone();
    let mut errors = Vec::with_capacity(horizon);
    let mut halfwidths: Vec<Vec<f64>> = (0..n).map(|i| vec![log_delta[i]]).collect();
    let mut erased: Vec<Vec<bool>> = vec![Vec::with_capacity(horizon); n];
    let mut symbols: Vec<Vec<u64>> = vec![Vec::with_capacity(horizon); n];

    // absolute-coordinate shadow, dropped once anything overflows
    let mut states = vec![x0.clone()];
    let mut estimates = vec![scheme.center.clone()];
    let mut centers = scheme.center.clone();
    let mut x = x0;
    let mut finite = true;

    for t in 0..horizon {
        let mut err = 0.0f64;
        for i in 0..n {
            if u[i].abs() > 1.0 + BRACKET_SLACK {
                return Err(CodingError::BracketViolation { mode: i, step: t });
            }
            err = err.max(u[i].abs() * log_delta[i].exp2());
        }
        errors.push(err);
        if t + 1 == horizon {
            break;
        }
        for i in 0..n {
            let lambda = scheme.eigenvalues[i];
            let levels = 1u64 << scheme.rates[i].min(62);
            let cell = (((u[i] + 1.0) * 0.5 * levels as f64).floor().max(0.0) as u64).min(levels - 1);
            let midpoint = -1.0 + (2 * cell + 1) as f64 / levels as f64;
            // the R_i symbols of a mode are erased together by one draw
            let lost = channel.sample_output(0, &mut channel_rng) == channel.input_size();
            let sign = if lambda < 0.0 { -1.0 } else { 1.0 };
            let delta = log_delta[i].exp2();
            if lost {
                u[i] *= sign;
                centers[i] *= lambda;
                log_delta[i] += lambda.abs().log2();
            } else {
                u[i] = sign * (u[i] - midpoint) * levels as f64;
                centers[i] = lambda * (centers[i] + midpoint * delta);
                log_delta[i] += lambda.abs().log2() - f64::from(scheme.rates[i]);
            }
            x[i] *= lambda;
            erased[i].push(lost);
            symbols[i].push(cell);
            halfwidths[i].push(log_delta[i]);
        }
        if finite {
            finite = x.iter().chain(&centers).all(|v| v.is_finite());
            if finite {
                states.push(x.clone());
                estimates.push(centers.clone());
            }
        }
    }
    let trajectory = finite.then(|| TrajectoryBlock {
        states,
        estimates: Some(estimates),
        noise_draws: Some(vec![Vec::new(); horizon - 1]),
        seed,
    });
    Ok(ZoomRun {
        errors,
        log2_halfwidth: halfwidths,
        erased,
        symbols,
        trajectory,
    })
}
