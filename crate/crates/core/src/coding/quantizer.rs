//! Memoryless scalar quantizers: uniform over a sample range, with an
//! optional Lloyd refinement.

use serde::{Deserialize, Serialize};

use super::CodingError;

/// Relative distortion change at which Lloyd iteration stops.
pub const LLOYD_TOLERANCE: f64 = 1e-8;
pub const LLOYD_MAX_ITER: usize = 200_000;

/// Range covered by the uniform quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RangeRule {
    /// Between two sample percentiles (in percent).
    Percentile { low: f64, high: f64 },
    /// Sample minimum to sample maximum.
    Full,
}

impl Default for RangeRule {
    fn default() -> Self {
        RangeRule::Percentile { low: 1.0, high: 99.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorylessQuantizer {
    pub level_count: usize,
    /// `level_count + 1` sorted cell edges; values outside the outer edges
    /// fall in the end cells.
    pub boundaries: Vec<f64>,
    pub reproduction_points: Vec<f64>,
    /// Mean squared error on the construction sample.
    pub measured_distortion: f64,
}

impl MemorylessQuantizer {
    /// Cell index of `x`.
    pub fn quantize(&self, x: f64) -> usize {
        let inner = &self.boundaries[1..self.level_count];
        inner.partition_point(|b| *b <= x)
    }

    pub fn reproduce(&self, x: f64) -> f64 {
        self.reproduction_points[self.quantize(x)]
    }

    /// Mean squared error over `sample`.
    pub fn distortion(&self, sample: &[f64]) -> f64 {
        sample.iter().map(|x| (x - self.reproduce(*x)).powi(2)).sum::<f64>() / sample.len() as f64
    }

    /// Lloyd iteration on `sample`: alternate centroid and midpoint-boundary
    /// updates until the relative distortion change drops below
    /// [`LLOYD_TOLERANCE`] or `max_iter` passes. Cells left empty keep
    /// their midpoint. Returns the number of passes.
    pub fn lloyd_refine(&mut self, sample: &[f64], max_iter: usize) -> usize {
        let n = self.level_count;
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mut sum, mut sum_sq) = (vec![0.0; sorted.len() + 1], vec![0.0; sorted.len() + 1]);
        for (i, x) in sorted.iter().enumerate() {
            sum[i + 1] = sum[i] + x;
            sum_sq[i + 1] = sum_sq[i] + x * x;
        }
        self.boundaries[0] = sorted[0].min(self.boundaries[0]);
        self.boundaries[n] = sorted[sorted.len() - 1].max(self.boundaries[n]);

        let total = sorted.len() as f64;
        let mut cuts = vec![0usize; n + 1];
        let mut previous = f64::INFINITY;
        let mut iterations = 0;
        while iterations < max_iter {
            iterations += 1;
            cuts[n] = sorted.len();
            for k in 1..n {
                cuts[k] = sorted.partition_point(|x| *x < self.boundaries[k]);
            }
            let mut distortion = 0.0;
            for k in 0..n {
                let (a, b) = (cuts[k], cuts[k + 1]);
                let count = (b - a) as f64;
                let c = if b > a {
                    (sum[b] - sum[a]) / count
                } else {
                    0.5 * (self.boundaries[k] + self.boundaries[k + 1])
                };
                self.reproduction_points[k] = c;
                distortion += (sum_sq[b] - sum_sq[a]) - 2.0 * c * (sum[b] - sum[a]) + c * c * count;
            }
            let distortion = (distortion / total).max(0.0);
            self.measured_distortion = distortion;
            let change = (previous - distortion).abs();
            if change <= LLOYD_TOLERANCE * distortion.max(f64::MIN_POSITIVE) {
                break;
            }
            previous = distortion;
            for k in 1..n {
                self.boundaries[k] = 0.5 * (self.reproduction_points[k - 1] + self.reproduction_points[k]);
            }
        }
        iterations
    }
}

/// Uniform `level_count`-cell quantizer over the 1st to 99th percentile
/// range of `sample`, reproduction points at cell midpoints.
pub fn build_memoryless_quantizer(sample: &[f64], level_count: usize) -> Result<MemorylessQuantizer, CodingError> {
    build_memoryless_quantizer_with(sample, level_count, RangeRule::default())
}

pub fn build_memoryless_quantizer_with(
    sample: &[f64],
    level_count: usize,
    range: RangeRule,
) -> Result<MemorylessQuantizer, CodingError> {
    if level_count == 0 {
        return Err(CodingError::InvalidArgument("level_count must be positive".into()));
    }
    if sample.len() < 10 * level_count {
        return Err(CodingError::InvalidArgument(format!(
            "sample of {} points is smaller than 10 x {level_count} levels",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(CodingError::InvalidArgument("sample contains non-finite values".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match range {
        RangeRule::Full => (sorted[0], sorted[sorted.len() - 1]),
        RangeRule::Percentile { low, high } => {
            if !(0.0..=100.0).contains(&low) || !(0.0..=100.0).contains(&high) || low >= high {
                return Err(CodingError::InvalidArgument("percentiles must satisfy 0 <= low < high <= 100".into()));
            }
            (percentile(&sorted, low), percentile(&sorted, high))
        }
    };
    if !(hi > lo) {
        return Err(CodingError::DegenerateSample("sample range is zero".into()));
    }
    let width = (hi - lo) / level_count as f64;
    let mut boundaries: Vec<f64> = (0..=level_count).map(|k| lo + k as f64 * width).collect();
    boundaries[level_count] = hi;
    let reproduction_points = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut q = MemorylessQuantizer {
        level_count,
        boundaries,
        reproduction_points,
        measured_distortion: 0.0,
    };
    q.measured_distortion = q.distortion(sample);
    Ok(q)
}

/// Histogram bins used to estimate the point density of a companded
/// quantizer.
pub const COMPANDER_BINS: usize = 128;

/// Companded `level_count`-cell quantizer: cell edges are equally spaced in
/// the cumulative of `hist^{1/3}`, where `hist` is a [`COMPANDER_BINS`]-bin
/// histogram of the sample over its full range. Reproduction points sit at
/// cell midpoints. A good starting partition for [`MemorylessQuantizer::lloyd_refine`]
/// at high level counts, where Lloyd started from uniform cells stalls.
pub fn build_companded_quantizer(sample: &[f64], level_count: usize) -> Result<MemorylessQuantizer, CodingError> {
    build_companded_quantizer_with(sample, level_count, COMPANDER_BINS)
}

/// [`build_companded_quantizer`] with `bins` histogram bins.
pub fn build_companded_quantizer_with(
    sample: &[f64],
    level_count: usize,
    bins: usize,
) -> Result<MemorylessQuantizer, CodingError> {
    if bins == 0 {
        return Err(CodingError::InvalidArgument("bins must be positive".into()));
    }
    let uniform = build_memoryless_quantizer_with(sample, level_count, RangeRule::Full)?;
    let (lo, hi) = (uniform.boundaries[0], uniform.boundaries[level_count]);
    let bin_width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in sample {
        let b = (((x - lo) / bin_width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut cumulative = vec![0.0; bins + 1];
    for (b, c) in counts.iter().enumerate() {
        cumulative[b + 1] = cumulative[b] + (*c as f64).cbrt();
    }
    let total = cumulative[bins];
    let mut boundaries = Vec::with_capacity(level_count + 1);
    boundaries.push(lo);
    for k in 1..level_count {
        let target = total * k as f64 / level_count as f64;
        let b = cumulative.partition_point(|c| *c < target).clamp(1, bins) - 1;
        let frac = (target - cumulative[b]) / (cumulative[b + 1] - cumulative[b]);
        boundaries.push(lo + (b as f64 + frac.clamp(0.0, 1.0)) * bin_width);
    }
    boundaries.push(hi);
    let reproduction_points = boundaries.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut q = MemorylessQuantizer {
        level_count,
        boundaries,
        reproduction_points,
        measured_distortion: 0.0,
    };
    q.measured_distortion = q.distortion(sample);
    Ok(q)
}

/// Linear-interpolated percentile of a sorted sample.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn uniform_sample(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..len).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn uniform_source_matches_cell_width_formula() {
        let sample = uniform_sample(200_000, 1);
        for n in [4usize, 16, 64] {
            let q = build_memoryless_quantizer_with(&sample, n, RangeRule::Full).unwrap();
            let scaled = q.measured_distortion * (n * n) as f64;
            assert!((scaled - 1.0 / 12.0).abs() < 0.002, "n={n}: {scaled}");
        }
    }

    #[test]
    fn single_level_lloyd_gives_variance() {
        let sample = uniform_sample(1000, 2);
        let mut q = build_memoryless_quantizer(&sample, 1).unwrap();
        q.lloyd_refine(&sample, 10);
        let mean = sample.iter().sum::<f64>() / 1000.0;
        let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 1000.0;
        assert!((q.measured_distortion - var).abs() < 1e-12);
        assert!((q.reproduction_points[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn lloyd_does_not_increase_distortion() {
        let mut rng = rng_from_seed(3);
        let sample: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut q = build_memoryless_quantizer(&sample, 16).unwrap();
        let before = q.measured_distortion;
        q.lloyd_refine(&sample, LLOYD_MAX_ITER);
        assert!(q.measured_distortion <= before);
        assert!((q.distortion(&sample) - q.measured_distortion).abs() < 1e-9);
        for k in 0..16 {
            assert!(q.boundaries[k] < q.boundaries[k + 1]);
            let r = q.reproduction_points[k];
            assert!(q.boundaries[k] <= r && r <= q.boundaries[k + 1]);
        }
    }

    #[test]
    fn companded_cells_follow_cube_root_density() {
        let sample = uniform_sample(100_000, 5);
        let q = build_companded_quantizer(&sample, 16).unwrap();
        for k in 0..16 {
            assert!((q.boundaries[k + 1] - q.boundaries[k] - 1.0 / 16.0).abs() < 0.01, "cell {k}");
        }
        let mut rng = rng_from_seed(6);
        let normal: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q = build_companded_quantizer(&normal, 64).unwrap();
        let centre = q.quantize(0.0);
        let width = |k: usize| q.boundaries[k + 1] - q.boundaries[k];
        // cube-root density ratio between x = 0 and x = 2 is e^{2/3}
        let outer = q.quantize(2.0);
        assert!((width(outer) / width(centre) - (2.0f64 / 3.0).exp()).abs() < 0.3);
    }

    #[test]
    fn rejects_small_or_degenerate_samples() {
        assert!(build_memoryless_quantizer(&[0.5; 50], 8).is_err());
        assert!(matches!(
            build_memoryless_quantizer(&[0.5; 100], 2),
            Err(CodingError::DegenerateSample(_))
        ));
        assert!(build_memoryless_quantizer(&[0.5; 100], 0).is_err());
    }

    #[test]
    fn quantize_maps_into_cells() {
        let sample = uniform_sample(1000, 4);
        let q = build_memoryless_quantizer_with(&sample, 10, RangeRule::Full).unwrap();
        assert_eq!(q.quantize(-5.0), 0);
        assert_eq!(q.quantize(5.0), 9);
        let k = q.quantize(0.55);
        assert!(q.boundaries[k] <= 0.55 && 0.55 < q.boundaries[k + 1]);
    }

    #[test]
    fn percentile_interpolates() {
        let sorted: Vec<f64> = (0..101).map(f64::from).collect();
        assert_eq!(percentile(&sorted, 1.0), 1.0);
        assert_eq!(percentile(&sorted, 99.0), 99.0);
        assert_eq!(percentile(&sorted, 50.5), 50.5);
    }
}
