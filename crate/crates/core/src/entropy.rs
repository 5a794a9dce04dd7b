//! Separated/spanning set counting under Bowen metrics and entropy-rate
//! estimation.
//!
//! Counting works on a finite sample of initial points. The greedy scan keeps
//! a point iff its orbit is more than `epsilon` away (Bowen metric over the
//! time window `offset..n`) from every previously kept orbit. The kept set is
//! maximal separated and therefore also spanning, so one scan serves both
//! counts.
//!
//! Rates are in bits per time step. The per-`epsilon` rate is the least
//! squares slope of `log2 count` against `n` over the upper half of the
//! horizons whose count is resolved by the sample, i.e. at most
//! `saturation_fraction * sample_size`. Beyond that the greedy count is
//! limited by the sample rather than by the dynamics.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::io::Write;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{child_rng, child_seed, rng_from_seed};
use crate::systems::{circle_distance, Space, State, SystemError, SystemModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error("invalid entropy grid: {0}")]
    InvalidGrid(String),
    #[error("offset {offset} must be smaller than the horizon {n}")]
    OffsetTooLarge { offset: usize, n: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("no points to count")]
    EmptyPoints,
    #[error("system is noisy; use the fibered or trajectory-space estimators")]
    NoisySystem,
    #[error("system is deterministic; use the topological or Katok estimators")]
    DeterministicSystem,
    #[error("a noise path must be supplied exactly when the system is noisy")]
    NoisePathMismatch,
    #[error("no epsilon in the grid has enough resolved horizons to fit a rate")]
    NoResolvedScale,
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Grid of scales and horizons for an entropy estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyGridSpec {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Strictly increasing.
    pub horizons: Vec<usize>,
    pub offset: usize,
    pub sample_size: usize,
    /// Katok discard fraction `delta`.
    pub discard_fraction: f64,
    /// Counts above `saturation_fraction * sample_size` are excluded from
    /// rate fits.
    pub saturation_fraction: f64,
}

impl Default for EntropyGridSpec {
    fn default() -> Self {
        Self {
            epsilons: (1..=7).map(|k| 0.5f64.powi(k)).collect(),
            horizons: (1..=14).collect(),
            offset: 0,
            sample_size: 20_000,
            discard_fraction: 0.05,
            saturation_fraction: 0.1,
        }
    }
}

impl EntropyGridSpec {
    pub fn validate(&self) -> Result<(), EntropyError> {
        let bad = |m: &str| Err(EntropyError::InvalidGrid(m.to_string()));
        if self.epsilons.is_empty() || self.horizons.is_empty() {
            return bad("epsilons and horizons must be nonempty");
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return bad("epsilons must be positive");
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be strictly decreasing");
        }
        if self.horizons[0] == 0 || self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return bad("horizons must be positive and strictly increasing");
        }
        if self.offset >= self.horizons[0] {
            return Err(EntropyError::OffsetTooLarge {
                offset: self.offset,
                n: self.horizons[0],
            });
        }
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.discard_fraction) {
            return bad("discard_fraction must lie in [0, 1)");
        }
        if !(self.saturation_fraction > 0.0 && self.saturation_fraction <= 1.0) {
            return bad("saturation_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    fn max_horizon(&self) -> usize {
        *self.horizons.last().expect("validated nonempty")
    }

    fn saturation_limit(&self) -> f64 {
        self.saturation_fraction * self.sample_size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Topological,
    KatokMetric,
    Fibered,
    /// Trajectory-space counting of a noisy system.
    Trajectory,
}

impl EstimateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimateKind::Topological => "topological",
            EstimateKind::KatokMetric => "katok_metric",
            EstimateKind::Fibered => "fibered",
            EstimateKind::Trajectory => "trajectory",
        }
    }
}

/// Least-squares line through `(n, log2 count)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 for a two-point fit).
    pub slope_stderr: f64,
    /// Root mean square residual.
    pub rms_residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub kind: EstimateKind,
    pub grid: EntropyGridSpec,
    /// `counts[i][j]` for `epsilons[i]`, `horizons[j]`.
    pub counts: Vec<Vec<usize>>,
    /// `log2(counts) / n`.
    pub rates: Vec<Vec<f64>>,
    /// Fitted growth rate per epsilon; `None` when fewer than
    /// [`MIN_FIT_POINTS`] horizons (or a third of the grid) are resolved.
    pub fits: Vec<Option<RateFit>>,
    /// Fitted rate at the smallest epsilon that has a fit.
    pub extrapolated_rate: f64,
    /// Per noise path extrapolated rates (fibered estimates only).
    pub path_rates: Option<Vec<f64>>,
}

impl EntropyEstimate {
    pub fn per_epsilon_rate(&self) -> Vec<Option<f64>> {
        self.fits.iter().map(|f| f.map(|f| f.slope)).collect()
    }

    /// `(epsilon, rate)` pairs for the epsilons that have a fit.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.grid
            .epsilons
            .iter()
            .zip(&self.fits)
            .filter_map(|(e, f)| f.map(|f| (*e, f.slope)))
            .collect()
    }

    /// Spread (population standard deviation) of the per-path rates.
    pub fn path_spread(&self) -> Option<f64> {
        let rates = self.path_rates.as_ref()?;
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        Some((rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rates.len() as f64).sqrt())
    }

    /// CSV with columns `kind,epsilon,n,count,rate`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            kind: &'a str,
            epsilon: f64,
            n: usize,
            count: usize,
            rate: f64,
        }
        let mut w = csv::Writer::from_writer(out);
        for (i, eps) in self.grid.epsilons.iter().enumerate() {
            for (j, n) in self.grid.horizons.iter().enumerate() {
                w.serialize(Row {
                    kind: self.kind.as_str(),
                    epsilon: *eps,
                    n: *n,
                    count: self.counts[i][j],
                    rate: self.rates[i][j],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> EntropySummary {
        EntropySummary {
            kind: self.kind,
            epsilons: self.grid.epsilons.clone(),
            per_epsilon_rate: self.per_epsilon_rate(),
            fit_residuals: self.fits.iter().map(|f| f.map(|f| f.rms_residual)).collect(),
            fit_stderr: self.fits.iter().map(|f| f.map(|f| f.slope_stderr)).collect(),
            extrapolated_rate: self.extrapolated_rate,
            path_rates: self.path_rates.clone(),
            path_spread: self.path_spread(),
        }
    }
}

/// JSON-facing digest of an [`EntropyEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub kind: EstimateKind,
    pub epsilons: Vec<f64>,
    pub per_epsilon_rate: Vec<Option<f64>>,
    pub fit_residuals: Vec<Option<f64>>,
    pub fit_stderr: Vec<Option<f64>>,
    pub extrapolated_rate: f64,
    pub path_rates: Option<Vec<f64>>,
    pub path_spread: Option<f64>,
}

// ---------------------------------------------------------------------------
// Orbit storage and the greedy scan
// ---------------------------------------------------------------------------

/// Orbits of a point sample, `len` states each, stored contiguously.
#[derive(Debug, Clone)]
pub(crate) struct OrbitBundle {
    dim: usize,
    len: usize,
    space: Space,
    data: Vec<f64>,
}

impl OrbitBundle {
    /// Orbits of `points` under `system`; all driven by `noise_path` when
    /// the system is noisy.
    pub(crate) fn from_points(
        system: &SystemModel,
        points: &[State],
        len: usize,
        noise_path: Option<&[Vec<f64>]>,
    ) -> Result<Self, EntropyError> {
        let dim = system.state_dim;
        let path: &[Vec<f64>] = noise_path.unwrap_or(&[]);
        if system.is_noisy() && path.len() + 1 < len {
            return Err(SystemError::NoisePathTooShort {
                needed: len - 1,
                got: path.len(),
            }
            .into());
        }
        let mut data = Vec::with_capacity(points.len() * len * dim);
        let mut cur = vec![0.0; dim];
        let mut next = vec![0.0; dim];
        for p in points {
            if p.len() != dim {
                return Err(SystemError::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                }
                .into());
            }
            cur.copy_from_slice(p);
            data.extend_from_slice(&cur);
            for t in 0..len.saturating_sub(1) {
                let w: &[f64] = if system.is_noisy() { &path[t] } else { &[] };
                system.step_into(&cur, w, &mut next);
                std::mem::swap(&mut cur, &mut next);
                data.extend_from_slice(&cur);
            }
        }
        Ok(Self {
            dim,
            len,
            space: system.space,
            data,
        })
    }

    /// Independent trajectories: each point gets its own initial draw and
    /// noise path.
    pub(crate) fn from_trajectories(system: &SystemModel, count: usize, len: usize, seed: u64) -> Self {
        let dim = system.state_dim;
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::with_capacity(count * len * dim);
        let mut next = vec![0.0; dim];
        for _ in 0..count {
            let mut cur = system.sample_initial(&mut rng);
            data.extend_from_slice(&cur);
            for _ in 1..len {
                let w = system.sample_noise(&mut rng);
                system.step_into(&cur, &w, &mut next);
                std::mem::swap(&mut cur, &mut next);
                data.extend_from_slice(&cur);
            }
        }
        Self {
            dim,
            len,
            space: system.space,
            data,
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.data.len() / (self.dim * self.len).max(1)
    }

    #[inline]
    fn state(&self, p: usize, t: usize) -> &[f64] {
        let start = (p * self.len + t) * self.dim;
        &self.data[start..start + self.dim]
    }

    #[inline]
    fn coord_distance(&self, a: f64, b: f64) -> f64 {
        match self.space {
            Space::Euclidean => (a - b).abs(),
            Space::Torus => circle_distance(a, b),
        }
    }

    /// Bowen distance over `window`.
    pub(crate) fn bowen(&self, p: usize, q: usize, window: Range<usize>) -> f64 {
        let mut best = 0.0f64;
        for t in window {
            for (a, b) in self.state(p, t).iter().zip(self.state(q, t)) {
                best = best.max(self.coord_distance(*a, *b));
            }
        }
        best
    }

    /// `bowen(p, q, window) <= eps`, with early exit.
    #[inline]
    fn within(&self, p: usize, q: usize, window: Range<usize>, eps: f64) -> bool {
        for t in window {
            for (a, b) in self.state(p, t).iter().zip(self.state(q, t)) {
                if self.coord_distance(*a, *b) > eps {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Default)]
struct MixHasher(u64);

impl Hasher for MixHasher {
    fn finish(&self) -> u64 {
        crate::rng::splitmix64(self.0)
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(*b);
        }
    }
    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

type CellMap = HashMap<u64, Vec<u32>, BuildHasherDefault<MixHasher>>;

/// Maximal greedy separated set, with each point assigned to the first kept
/// point (lowest keep order) within `eps`.
#[derive(Debug, Clone)]
pub(crate) struct GreedyCover {
    pub(crate) centers: Vec<usize>,
    /// Index into `centers` for every point.
    pub(crate) assignment: Vec<usize>,
}

impl GreedyCover {
    pub(crate) fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.centers.len()];
        for a in &self.assignment {
            sizes[*a] += 1;
        }
        sizes
    }
}

const MAX_KEY_COORDS: usize = 4;

/// Spatial hash over a few coordinates taken at the two ends of the window.
/// Orbits within `eps` in the Bowen metric are within `eps` at both ends, so
/// they land in neighbouring cells.
struct CellIndex {
    coords: Vec<(usize, usize)>,
    torus_cells: usize,
    side: f64,
    torus: bool,
}

impl CellIndex {
    fn new(bundle: &OrbitBundle, window: &Range<usize>, eps: f64) -> Self {
        let last = window.end - 1;
        let mut coords: Vec<(usize, usize)> = (0..bundle.dim).map(|d| (last, d)).collect();
        if last != window.start {
            coords.extend((0..bundle.dim).map(|d| (window.start, d)));
        }
        coords.truncate(MAX_KEY_COORDS);
        let side = eps * (1.0 + 1e-6);
        let torus = bundle.space == Space::Torus;
        let torus_cells = if torus { (1.0 / side).floor().max(1.0) as usize } else { 0 };
        Self {
            coords,
            torus_cells,
            side,
            torus,
        }
    }

    #[inline]
    fn cell(&self, v: f64) -> i64 {
        if self.torus {
            if self.torus_cells < 3 {
                0
            } else {
                ((v * self.torus_cells as f64) as i64).min(self.torus_cells as i64 - 1)
            }
        } else {
            (v / self.side).floor() as i64
        }
    }

    fn base(&self, bundle: &OrbitBundle, p: usize) -> [i64; MAX_KEY_COORDS] {
        let mut key = [0i64; MAX_KEY_COORDS];
        for (slot, (t, d)) in self.coords.iter().enumerate() {
            key[slot] = self.cell(bundle.state(p, *t)[*d]);
        }
        key
    }

    fn pack(key: &[i64; MAX_KEY_COORDS]) -> u64 {
        key.iter()
            .fold(0u64, |h, c| h.wrapping_mul(0x100_0000_01B3).wrapping_add(*c as u64) ^ (h >> 29))
    }

    /// Packed keys of the `3^k` neighbouring cells (deduplicated).
    fn neighbours(&self, base: &[i64; MAX_KEY_COORDS], out: &mut Vec<u64>) {
        out.clear();
        let k = self.coords.len();
        let total = 3usize.pow(k as u32);
        for code in 0..total {
            let mut key = *base;
            let mut c = code;
            for slot in key.iter_mut().take(k) {
                let delta = (c % 3) as i64 - 1;
                c /= 3;
                *slot = self.shift(*slot, delta);
            }
            out.push(Self::pack(&key));
        }
        out.sort_unstable();
        out.dedup();
    }

    #[inline]
    fn shift(&self, cell: i64, delta: i64) -> i64 {
        if self.torus {
            if self.torus_cells < 3 {
                0
            } else {
                (cell + delta).rem_euclid(self.torus_cells as i64)
            }
        } else {
            cell + delta
        }
    }
}

/// Greedy scan over all points of `bundle` in index order.
pub(crate) fn greedy_cover(bundle: &OrbitBundle, window: Range<usize>, eps: f64) -> GreedyCover {
    let n_points = bundle.count();
    let index = CellIndex::new(bundle, &window, eps);
    let mut cells: CellMap = HashMap::default();
    let mut centers: Vec<usize> = Vec::new();
    let mut assignment = vec![0usize; n_points];
    let mut neigh = Vec::with_capacity(81);
    for p in 0..n_points {
        let base = index.base(bundle, p);
        index.neighbours(&base, &mut neigh);
        let mut owner: Option<u32> = None;
        for key in &neigh {
            if let Some(list) = cells.get(key) {
                for &slot in list {
                    if owner.is_some_and(|o| o <= slot) {
                        continue;
                    }
                    if bundle.within(p, centers[slot as usize], window.clone(), eps) {
                        owner = Some(slot);
                    }
                }
            }
        }
        match owner {
            Some(slot) => assignment[p] = slot as usize,
            None => {
                let slot = centers.len();
                centers.push(p);
                assignment[p] = slot;
                cells.entry(CellIndex::pack(&base)).or_default().push(slot as u32);
            }
        }
    }
    GreedyCover { centers, assignment }
}

/// Cover size after discarding up to `budget` points, smallest clusters
/// (singletons first) removed first. Never drops below one cover element.
pub(crate) fn discarded_cover_size(cover: &GreedyCover, budget: usize) -> usize {
    let mut sizes = cover.cluster_sizes();
    sizes.sort_unstable();
    let mut used = 0usize;
    let mut removed = 0usize;
    for s in &sizes {
        if removed + 1 >= sizes.len() || used + s > budget {
            break;
        }
        used += s;
        removed += 1;
    }
    sizes.len() - removed
}

// ---------------------------------------------------------------------------
// Public counting operations
// ---------------------------------------------------------------------------

fn check_count_args(
    system: &SystemModel,
    points: &[State],
    n: usize,
    epsilon: f64,
    offset: usize,
    noise_path: Option<&[Vec<f64>]>,
) -> Result<(), EntropyError> {
    if points.is_empty() {
        return Err(EntropyError::EmptyPoints);
    }
    if !(epsilon > 0.0) {
        return Err(EntropyError::NonPositiveEpsilon(epsilon));
    }
    if offset >= n {
        return Err(EntropyError::OffsetTooLarge { offset, n });
    }
    if system.is_noisy() != noise_path.is_some() {
        return Err(EntropyError::NoisePathMismatch);
    }
    Ok(())
}

/// Indices (into `points`) of the greedy maximal `(n, epsilon; offset)`
/// separated subset.
pub fn separated_subset(
    system: &SystemModel,
    points: &[State],
    n: usize,
    epsilon: f64,
    offset: usize,
    noise_path: Option<&[Vec<f64>]>,
) -> Result<Vec<usize>, EntropyError> {
    check_count_args(system, points, n, epsilon, offset, noise_path)?;
    let bundle = OrbitBundle::from_points(system, points, n, noise_path)?;
    Ok(greedy_cover(&bundle, offset..n, epsilon).centers)
}

/// Cardinality of the greedy maximal `(n, epsilon; offset)`-separated subset
/// of `points`, scanned in input order. Orbits at distance exactly
/// `epsilon` are not separated.
pub fn count_separated(
    system: &SystemModel,
    points: &[State],
    n: usize,
    epsilon: f64,
    offset: usize,
    noise_path: Option<&[Vec<f64>]>,
) -> Result<usize, EntropyError> {
    separated_subset(system, points, n, epsilon, offset, noise_path).map(|s| s.len())
}

/// Size of a greedy `(n, epsilon)`-spanning subset of `points`. This is the
/// same scan as [`count_separated`]: a maximal separated set spans.
pub fn count_spanning(
    system: &SystemModel,
    points: &[State],
    n: usize,
    epsilon: f64,
    noise_path: Option<&[Vec<f64>]>,
) -> Result<usize, EntropyError> {
    check_count_args(system, points, n, epsilon, 0, noise_path)?;
    let bundle = OrbitBundle::from_points(system, points, n, noise_path)?;
    let cover = greedy_cover(&bundle, 0..n, epsilon);
    debug_assert!((0..bundle.count())
        .all(|p| bundle.bowen(p, cover.centers[cover.assignment[p]], 0..n) <= epsilon));
    Ok(cover.centers.len())
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Least-squares slope of `log2 count` against `n`.
pub fn fit_rate(horizons: &[usize], counts: &[usize]) -> Option<RateFit> {
    let m = horizons.len();
    if m < 2 || counts.len() != m {
        return None;
    }
    let xs: Vec<f64> = horizons.iter().map(|n| *n as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (*c as f64).log2()).collect();
    let mx = xs.iter().sum::<f64>() / m as f64;
    let my = ys.iter().sum::<f64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = if m > 2 { (sse / (m - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Some(RateFit {
        slope,
        intercept,
        slope_stderr,
        rms_residual: (sse / m as f64).sqrt(),
        points: m,
    })
}

/// Fewest resolved horizons a per-epsilon fit may use.
pub const MIN_FIT_POINTS: usize = 3;

/// Fit over the upper half (at least [`MIN_FIT_POINTS`]) of the resolved
/// horizons. A row needs at least a third of the horizon grid resolved, so
/// the fit window stays clear of the short-horizon transient.
fn fit_row(grid: &EntropyGridSpec, row: &[usize]) -> Option<RateFit> {
    let limit = grid.saturation_limit();
    let resolved: Vec<(usize, usize)> = grid
        .horizons
        .iter()
        .zip(row)
        .filter(|(_, c)| **c as f64 <= limit)
        .map(|(n, c)| (*n, *c))
        .collect();
    if resolved.len() < MIN_FIT_POINTS.max(grid.horizons.len().div_ceil(3)) {
        return None;
    }
    let take = resolved.len().div_ceil(2).max(MIN_FIT_POINTS);
    let tail = &resolved[resolved.len() - take..];
    let ns: Vec<usize> = tail.iter().map(|(n, _)| *n).collect();
    let cs: Vec<usize> = tail.iter().map(|(_, c)| *c).collect();
    fit_rate(&ns, &cs)
}

fn rates_table(grid: &EntropyGridSpec, counts: &[Vec<usize>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&grid.horizons)
                .map(|(c, n)| (*c as f64).log2() / *n as f64)
                .collect()
        })
        .collect()
}

fn extrapolate(fits: &[Option<RateFit>]) -> Result<f64, EntropyError> {
    fits.iter()
        .rev()
        .find_map(|f| f.map(|f| f.slope))
        .ok_or(EntropyError::NoResolvedScale)
}

/// Fills the `(epsilon, n)` count table for one orbit bundle.
fn count_table(bundle: &OrbitBundle, grid: &EntropyGridSpec, discard: usize) -> Vec<Vec<usize>> {
    let cells: Vec<(usize, usize)> = (0..grid.epsilons.len())
        .flat_map(|i| (0..grid.horizons.len()).map(move |j| (i, j)))
        .collect();
    let flat: Vec<usize> = cells
        .par_iter()
        .map(|&(i, j)| {
            let cover = greedy_cover(bundle, grid.offset..grid.horizons[j], grid.epsilons[i]);
            if discard == 0 {
                cover.centers.len()
            } else {
                discarded_cover_size(&cover, discard)
            }
        })
        .collect();
    flat.chunks(grid.horizons.len()).map(|c| c.to_vec()).collect()
}

fn assemble(kind: EstimateKind, grid: &EntropyGridSpec, counts: Vec<Vec<usize>>) -> Result<EntropyEstimate, EntropyError> {
    let rates = rates_table(grid, &counts);
    let fits: Vec<Option<RateFit>> = counts.iter().map(|row| fit_row(grid, row)).collect();
    let extrapolated_rate = extrapolate(&fits)?;
    Ok(EntropyEstimate {
        kind,
        grid: grid.clone(),
        counts,
        rates,
        fits,
        extrapolated_rate,
        path_rates: None,
    })
}

/// Initial-point sample: uniform on the torus, `pi_0` draws otherwise.
pub fn sample_points(system: &SystemModel, count: usize, seed: u64, uniform_on_torus: bool) -> Vec<State> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            if uniform_on_torus && system.space == Space::Torus {
                (0..system.state_dim).map(|_| rng.random::<f64>()).collect()
            } else {
                system.sample_initial(&mut rng)
            }
        })
        .collect()
}

/// Topological entropy estimate of a deterministic system from greedy
/// separated-set counts over the grid.
pub fn estimate_topological_entropy(
    system: &SystemModel,
    grid: &EntropyGridSpec,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    grid.validate()?;
    if system.is_noisy() {
        return Err(EntropyError::NoisySystem);
    }
    let points = sample_points(system, grid.sample_size, seed, true);
    estimate_topological_from_points(system, grid, &points)
}

/// As [`estimate_topological_entropy`] on a caller-supplied sample.
pub fn estimate_topological_from_points(
    system: &SystemModel,
    grid: &EntropyGridSpec,
    points: &[State],
) -> Result<EntropyEstimate, EntropyError> {
    grid.validate()?;
    if system.is_noisy() {
        return Err(EntropyError::NoisySystem);
    }
    if points.is_empty() {
        return Err(EntropyError::EmptyPoints);
    }
    let mut grid = grid.clone();
    grid.sample_size = points.len();
    let bundle = OrbitBundle::from_points(system, points, grid.max_horizon(), None)?;
    let counts = count_table(&bundle, &grid, 0);
    assemble(EstimateKind::Topological, &grid, counts)
}

/// Katok-style metric entropy: greedy covers of a `pi_0` sample with the
/// hardest-to-cover `floor(delta * sample_size)` points discarded.
pub fn estimate_katok_metric_entropy(
    system: &SystemModel,
    grid: &EntropyGridSpec,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    grid.validate()?;
    if system.is_noisy() {
        return Err(EntropyError::NoisySystem);
    }
    let points = sample_points(system, grid.sample_size, seed, false);
    let bundle = OrbitBundle::from_points(system, &points, grid.max_horizon(), None)?;
    let discard = (grid.discard_fraction * grid.sample_size as f64).floor() as usize;
    let counts = count_table(&bundle, grid, discard);
    assemble(EstimateKind::KatokMetric, grid, counts)
}

/// Fibered entropy of a noisy system: for each of `n_noise_paths` noise
/// paths, spanning counts of one `pi_0` sample under the Bowen metric with
/// every orbit driven by that path, Katok discard applied. Rates are
/// averaged over paths; `counts` holds the per-cell lower median.
pub fn estimate_fibered_entropy(
    system: &SystemModel,
    grid: &EntropyGridSpec,
    n_noise_paths: usize,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    grid.validate()?;
    if !system.is_noisy() {
        return Err(EntropyError::DeterministicSystem);
    }
    if n_noise_paths == 0 {
        return Err(EntropyError::InvalidGrid("n_noise_paths must be at least 1".into()));
    }
    let points = sample_points(system, grid.sample_size, child_seed(seed, 0), false);
    let discard = (grid.discard_fraction * grid.sample_size as f64).floor() as usize;
    let len = grid.max_horizon();
    let per_path: Vec<EntropyEstimate> = (0..n_noise_paths)
        .map(|k| {
            let mut rng = child_rng(seed, k as u64 + 1);
            let path = system.sample_noise_path(len.saturating_sub(1), &mut rng);
            let bundle = OrbitBundle::from_points(system, &points, len, Some(&path))?;
            assemble(EstimateKind::Fibered, grid, count_table(&bundle, grid, discard))
        })
        .collect::<Result<_, _>>()?;

    let n_eps = grid.epsilons.len();
    let n_h = grid.horizons.len();
    let paths = per_path.len() as f64;
    let counts: Vec<Vec<usize>> = (0..n_eps)
        .map(|i| {
            (0..n_h)
                .map(|j| {
                    let mut v: Vec<usize> = per_path.iter().map(|e| e.counts[i][j]).collect();
                    v.sort_unstable();
                    v[(v.len() - 1) / 2]
                })
                .collect()
        })
        .collect();
    let rates: Vec<Vec<f64>> = (0..n_eps)
        .map(|i| (0..n_h).map(|j| per_path.iter().map(|e| e.rates[i][j]).sum::<f64>() / paths).collect())
        .collect();
    let fits: Vec<Option<RateFit>> = (0..n_eps)
        .map(|i| {
            let row: Vec<RateFit> = per_path.iter().filter_map(|e| e.fits[i]).collect();
            if row.len() < per_path.len() {
                return None;
            }
            let k = row.len() as f64;
            Some(RateFit {
                slope: row.iter().map(|f| f.slope).sum::<f64>() / k,
                intercept: row.iter().map(|f| f.intercept).sum::<f64>() / k,
                slope_stderr: row.iter().map(|f| f.slope_stderr).sum::<f64>() / k,
                rms_residual: row.iter().map(|f| f.rms_residual).sum::<f64>() / k,
                points: row.iter().map(|f| f.points).min().unwrap_or(0),
            })
        })
        .collect();
    let path_rates: Vec<f64> = per_path.iter().map(|e| e.extrapolated_rate).collect();
    Ok(EntropyEstimate {
        kind: EstimateKind::Fibered,
        grid: grid.clone(),
        counts,
        rates,
        fits,
        extrapolated_rate: path_rates.iter().sum::<f64>() / paths,
        path_rates: Some(path_rates),
    })
}

/// Trajectory-space growth curve of a noisy system: `sample_size`
/// trajectories with independent initial states and noise, counted under
/// the sup-over-prefix metric. Returns the full estimate; use
/// [`EntropyEstimate::curve`] for the `epsilon -> rate` table.
pub fn entropy_growth_curve(
    system: &SystemModel,
    grid: &EntropyGridSpec,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    grid.validate()?;
    if !system.is_noisy() {
        return Err(EntropyError::DeterministicSystem);
    }
    let bundle = OrbitBundle::from_trajectories(system, grid.sample_size, grid.max_horizon(), seed);
    let counts = count_table(&bundle, grid, 0);
    assemble(EstimateKind::Trajectory, grid, counts)
}
