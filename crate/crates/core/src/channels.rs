//! Memoryless channels and their capacity.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("transition matrix is not row-stochastic: {0}")]
    NotStochastic(String),
    #[error("symbol {symbol} at position {position} is outside the input alphabet of size {alphabet}")]
    OutOfAlphabet {
        symbol: usize,
        position: usize,
        alphabet: usize,
    },
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("Blahut-Arimoto did not converge within {0} iterations")]
    NotConverged(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelKind {
    Noiseless,
    Bsc { p: f64 },
    Erasure { p: f64 },
    General,
}

/// Memoryless channel `P(q' | q)` from `{0..|M|}` to `{0..|M'|}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kind: ChannelKind,
    input_size: usize,
    output_size: usize,
    transition: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

impl Channel {
    pub fn noiseless(alphabet: usize) -> Result<Self, ChannelError> {
        if alphabet == 0 {
            return Err(ChannelError::InvalidParameter("alphabet must be positive".into()));
        }
        let transition = (0..alphabet)
            .map(|q| (0..alphabet).map(|r| if q == r { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::build(ChannelKind::Noiseless, transition)
    }

    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        check_probability(p, true)?;
        Self::build(ChannelKind::Bsc { p }, vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Erasure channel on `alphabet` inputs; output `alphabet` is the
    /// erasure symbol.
    pub fn erasure(alphabet: usize, p: f64) -> Result<Self, ChannelError> {
        check_probability(p, true)?;
        if alphabet == 0 {
            return Err(ChannelError::InvalidParameter("alphabet must be positive".into()));
        }
        let transition = (0..alphabet)
            .map(|q| {
                let mut row = vec![0.0; alphabet + 1];
                row[q] = 1.0 - p;
                row[alphabet] += p;
                row
            })
            .collect();
        Self::build(ChannelKind::Erasure { p }, transition)
    }

    pub fn general(transition: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        Self::build(ChannelKind::General, transition)
    }

    fn build(kind: ChannelKind, transition: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let input_size = transition.len();
        let output_size = transition.first().map_or(0, Vec::len);
        if input_size == 0 || output_size == 0 {
            return Err(ChannelError::NotStochastic("empty matrix".into()));
        }
        for (q, row) in transition.iter().enumerate() {
            if row.len() != output_size {
                return Err(ChannelError::NotStochastic(format!("row {q} has length {}", row.len())));
            }
            if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(ChannelError::NotStochastic(format!("row {q} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(ChannelError::NotStochastic(format!("row {q} sums to {sum}")));
            }
        }
        let cumulative = transition
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|v| {
                        acc += v;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            kind,
            input_size,
            output_size,
            transition,
            cumulative,
        })
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// Erasure symbol of an erasure channel.
    pub fn erasure_symbol(&self) -> Option<usize> {
        matches!(self.kind, ChannelKind::Erasure { .. }).then_some(self.input_size)
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == ChannelKind::Noiseless
    }

    /// One channel use.
    pub fn sample_output(&self, input: usize, rng: &mut SimRng) -> usize {
        if self.kind == ChannelKind::Noiseless {
            return input;
        }
        let u: f64 = rng.random();
        let row = &self.cumulative[input];
        row.iter().position(|c| u < *c).unwrap_or_else(|| {
            // u landed in the rounding gap above the last partial sum
            self.transition[input].iter().rposition(|v| *v > 0.0).unwrap_or(0)
        })
    }

    fn check_inputs(&self, inputs: &[usize]) -> Result<(), ChannelError> {
        match inputs.iter().position(|q| *q >= self.input_size) {
            Some(position) => Err(ChannelError::OutOfAlphabet {
                symbol: inputs[position],
                position,
                alphabet: self.input_size,
            }),
            None => Ok(()),
        }
    }

    /// Sends `inputs` through the channel with i.i.d. per-symbol draws.
    pub fn transmit(&self, inputs: &[usize], seed: u64) -> Result<ChannelTrace, ChannelError> {
        let mut rng = rng_from_seed(seed);
        let outputs = self.transmit_with(inputs, &mut rng)?;
        Ok(ChannelTrace {
            inputs: inputs.to_vec(),
            outputs,
            seed,
        })
    }

    /// As [`Channel::transmit`] drawing from a caller-owned generator.
    pub fn transmit_with(&self, inputs: &[usize], rng: &mut SimRng) -> Result<Vec<usize>, ChannelError> {
        self.check_inputs(inputs)?;
        Ok(inputs.iter().map(|q| self.sample_output(*q, rng)).collect())
    }

    /// Outputs only; one codeword over `codeword.len()` channel uses.
    pub fn block_transmit(&self, codeword: &[usize], seed: u64) -> Result<Vec<usize>, ChannelError> {
        self.transmit(codeword, seed).map(|t| t.outputs)
    }

    /// Capacity in bits per channel use.
    pub fn capacity(&self) -> Result<f64, ChannelError> {
        match self.kind {
            ChannelKind::Noiseless => Ok((self.input_size as f64).log2()),
            ChannelKind::Erasure { p } => Ok((1.0 - p) * (self.input_size as f64).log2()),
            ChannelKind::Bsc { p } => Ok(1.0 - binary_entropy(p)),
            ChannelKind::General => blahut_arimoto(&self.transition, BA_TOLERANCE, BA_MAX_ITER).map(|r| r.capacity),
        }
    }
}

fn check_probability(p: f64, closed: bool) -> Result<(), ChannelError> {
    let ok = if closed { (0.0..=1.0).contains(&p) } else { (0.0..1.0).contains(&p) };
    if ok {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(format!("probability {p} out of range")))
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub seed: u64,
}

pub const BA_TOLERANCE: f64 = 1e-9;
pub const BA_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BlahutArimoto {
    pub capacity: f64,
    pub input_distribution: Vec<f64>,
    pub iterations: usize,
}

/// Blahut–Arimoto iteration from the uniform input law. Stops when two
/// successive capacity iterates differ by less than `tolerance` bits.
pub fn blahut_arimoto(transition: &[Vec<f64>], tolerance: f64, max_iter: usize) -> Result<BlahutArimoto, ChannelError> {
    let m = transition.len();
    if m == 0 {
        return Err(ChannelError::NotStochastic("empty matrix".into()));
    }
    let k = transition[0].len();
    let mut r = vec![1.0 / m as f64; m];
    let mut previous = f64::NEG_INFINITY;
    let mut d = vec![0.0; m];
    for iteration in 1..=max_iter {
        let q: Vec<f64> = (0..k).map(|y| (0..m).map(|x| r[x] * transition[x][y]).sum()).collect();
        for x in 0..m {
            d[x] = transition[x]
                .iter()
                .zip(&q)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, qy)| p * (p / qy).log2())
                .sum();
        }
        let z: f64 = r.iter().zip(&d).map(|(ri, di)| ri * di.exp2()).sum();
        let capacity = z.log2();
        for x in 0..m {
            r[x] *= d[x].exp2() / z;
        }
        if (capacity - previous).abs() < tolerance {
            return Ok(BlahutArimoto {
                capacity: capacity.max(0.0),
                input_distribution: r,
                iterations: iteration,
            });
        }
        previous = capacity;
    }
    Err(ChannelError::NotConverged(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_echoes() {
        let ch = Channel::noiseless(4).unwrap();
        let inputs = vec![0, 3, 2, 1, 1];
        assert_eq!(ch.transmit(&inputs, 1).unwrap().outputs, inputs);
        assert_eq!(ch.block_transmit(&[], 1).unwrap(), Vec::<usize>::new());
        assert_eq!(ch.capacity().unwrap(), 2.0);
    }

    #[test]
    fn full_erasure() {
        let ch = Channel::erasure(2, 1.0).unwrap();
        let out = ch.block_transmit(&[0, 1, 1, 0, 1], 3).unwrap();
        assert!(out.iter().all(|o| *o == 2));
        assert_eq!(ch.erasure_symbol(), Some(2));
    }

    #[test]
    fn erasure_frequency() {
        // binomial(1e5, 0.2): sd = 126.5; [0.19, 0.21] is ~7.9 sd wide per side
        let ch = Channel::erasure(2, 0.2).unwrap();
        let inputs: Vec<usize> = (0..100_000).map(|i| i % 2).collect();
        let out = ch.block_transmit(&inputs, 42).unwrap();
        let freq = out.iter().filter(|o| **o == 2).count() as f64 / 1e5;
        assert!((0.19..=0.21).contains(&freq), "{freq}");
        assert!(out.iter().zip(&inputs).all(|(o, i)| *o == 2 || o == i));
    }

    #[test]
    fn bsc_half_flips_half() {
        let ch = Channel::bsc(0.5).unwrap();
        let inputs = vec![0usize; 20_000];
        let flips = ch.block_transmit(&inputs, 8).unwrap().iter().filter(|o| **o == 1).count();
        // sd = 70.7
        assert!((9_500..=10_500).contains(&flips), "{flips}");
    }

    #[test]
    fn closed_form_capacities() {
        assert!((Channel::erasure(2, 0.25).unwrap().capacity().unwrap() - 0.75).abs() < 1e-15);
        let c = Channel::bsc(0.11).unwrap().capacity().unwrap();
        assert!((c - 0.500_084_041_835_472).abs() < 1e-12, "{c}");
        assert!((c - 0.5002).abs() < 1e-3);
        assert!((Channel::erasure(4, 0.5).unwrap().capacity().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blahut_arimoto_matches_closed_forms() {
        for p in [0.0, 0.05, 0.11, 0.3, 0.5] {
            let bsc = Channel::bsc(p).unwrap();
            let ba = blahut_arimoto(bsc.transition(), BA_TOLERANCE, BA_MAX_ITER).unwrap();
            assert!((ba.capacity - bsc.capacity().unwrap()).abs() < 1e-6, "bsc {p}");
            let er = Channel::erasure(2, p).unwrap();
            let ba = blahut_arimoto(er.transition(), BA_TOLERANCE, BA_MAX_ITER).unwrap();
            assert!((ba.capacity - er.capacity().unwrap()).abs() < 1e-6, "erasure {p}");
        }
        // Z-channel: C = log2(1 + (1-p) p^{p/(1-p)})
        let p: f64 = 0.3;
        let z = Channel::general(vec![vec![1.0, 0.0], vec![p, 1.0 - p]]).unwrap();
        let expected = (1.0 + (1.0 - p) * p.powf(p / (1.0 - p))).log2();
        assert!((z.capacity().unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_matrices_and_symbols() {
        assert!(matches!(
            Channel::general(vec![vec![0.5, 0.6]]),
            Err(ChannelError::NotStochastic(_))
        ));
        assert!(Channel::general(vec![vec![1.5, -0.5]]).is_err());
        assert!(Channel::bsc(1.2).is_err());
        let ch = Channel::bsc(0.1).unwrap();
        assert!(matches!(ch.transmit(&[0, 2], 0), Err(ChannelError::OutOfAlphabet { position: 1, .. })));
    }

    #[test]
    fn bsc_capacity_nonincreasing_on_half_interval() {
        let caps: Vec<f64> = (0..=50).map(|i| Channel::bsc(i as f64 / 100.0).unwrap().capacity().unwrap()).collect();
        assert!(caps.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(caps.iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn memoryless_pairs_factorize() {
        // chi-square independence test on consecutive outputs, constant input
        let ch = Channel::general(vec![vec![0.5, 0.3, 0.2]]).unwrap();
        let out = ch.block_transmit(&vec![0; 100_001], 77).unwrap();
        let mut joint = [[0f64; 3]; 3];
        for w in out.windows(2) {
            joint[w[0]][w[1]] += 1.0;
        }
        let total: f64 = joint.iter().flatten().sum();
        let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<f64> = (0..3).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
        let mut chi2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let e = rows[i] * cols[j] / total;
                chi2 += (joint[i][j] - e).powi(2) / e;
            }
        }
        // 4 degrees of freedom; 99.9% quantile is 18.47
        assert!(chi2 < 18.47, "{chi2}");
    }
}
