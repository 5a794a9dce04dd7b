//! Random block codes over a memoryless channel.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CodingError;
use crate::channels::{Channel, ChannelKind};
use crate::rng::{child_rng, SimRng};

/// Monte Carlo transmissions used to measure the error rate.
pub const DEFAULT_ERROR_TRIALS: usize = 10_000;

/// Largest codeword space sampled without replacement by index.
const INDEX_SAMPLING_LIMIT: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeRule {
    Ml,
    MinHamming,
}

#[derive(Debug, Clone)]
pub struct BlockCode {
    pub message_count: usize,
    pub block_length: usize,
    pub codewords: Vec<Vec<usize>>,
    pub decode_rule: DecodeRule,
    pub empirical_error_rate: f64,
    /// `log2(message_count) / block_length` bits per channel use.
    pub rate: f64,
    /// The rate is not below the channel capacity.
    pub above_capacity: bool,
    log_likelihood: Vec<Vec<f64>>,
    exact: Option<HashMap<Vec<usize>, usize>>,
}

impl BlockCode {
    pub fn encode(&self, message: usize) -> &[usize] {
        &self.codewords[message]
    }

    /// Most likely message given the received word (ties go to the lowest
    /// index). Noiseless channels decode by table lookup. Symbols outside
    /// the channel's output alphabet carry no information.
    pub fn decode(&self, received: &[usize]) -> usize {
        if self.message_count == 1 {
            return 0;
        }
        if let Some(table) = &self.exact {
            return table.get(received).copied().unwrap_or(0);
        }
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (m, word) in self.codewords.iter().enumerate() {
            let mut score = 0.0;
            for (x, y) in word.iter().zip(received) {
                score += self.log_likelihood[*x].get(*y).copied().unwrap_or(0.0);
                if score < best_score {
                    break;
                }
            }
            if score > best_score {
                best_score = score;
                best = m;
            }
        }
        best
    }

    /// Fraction of `trials` random messages decoded incorrectly.
    pub fn measure_error_rate(&self, channel: &Channel, trials: usize, rng: &mut SimRng) -> f64 {
        if trials == 0 || self.message_count == 1 {
            return 0.0;
        }
        let mut errors = 0usize;
        let mut received = vec![0usize; self.block_length];
        for _ in 0..trials {
            let m = rng.random_range(0..self.message_count);
            for (r, x) in received.iter_mut().zip(&self.codewords[m]) {
                *r = channel.sample_output(*x, rng);
            }
            if self.decode(&received) != m {
                errors += 1;
            }
        }
        errors as f64 / trials as f64
    }
}

/// Random codebook of `message_count` distinct words of length
/// `block_length`, ML decoding, error rate measured over
/// [`DEFAULT_ERROR_TRIALS`] transmissions.
pub fn build_block_code(
    channel: &Channel,
    message_count: usize,
    block_length: usize,
    seed: u64,
) -> Result<BlockCode, CodingError> {
    build_block_code_with(channel, message_count, block_length, seed, DEFAULT_ERROR_TRIALS)
}

pub fn build_block_code_with(
    channel: &Channel,
    message_count: usize,
    block_length: usize,
    seed: u64,
    error_trials: usize,
) -> Result<BlockCode, CodingError> {
    if message_count == 0 || block_length == 0 {
        return Err(CodingError::InvalidArgument(
            "message_count and block_length must be positive".into(),
        ));
    }
    let alphabet = channel.input_size();
    let space = (alphabet as u64).checked_pow(block_length.try_into().unwrap_or(u32::MAX));
    if let Some(space) = space {
        if message_count as u64 > space {
            return Err(CodingError::TooManyMessages {
                message_count,
                alphabet,
                block_length,
            });
        }
    }
    let mut rng = child_rng(seed, 0);
    let codewords = draw_codewords(alphabet, message_count, block_length, space, &mut rng);

    let rate = (message_count as f64).log2() / block_length as f64;
    let capacity = channel.capacity()?;
    let decode_rule = if matches!(channel.kind(), ChannelKind::Bsc { .. }) {
        DecodeRule::MinHamming
    } else {
        DecodeRule::Ml
    };
    let log_likelihood = channel
        .transition()
        .iter()
        .map(|row| row.iter().map(|p| if *p > 0.0 { p.ln() } else { f64::NEG_INFINITY }).collect())
        .collect();
    let exact = channel.is_noiseless().then(|| {
        codewords
            .iter()
            .enumerate()
            .map(|(m, w)| (w.clone(), m))
            .collect::<HashMap<_, _>>()
    });
    let mut code = BlockCode {
        message_count,
        block_length,
        codewords,
        decode_rule,
        empirical_error_rate: 0.0,
        rate,
        above_capacity: message_count > 1 && rate >= capacity,
        log_likelihood,
        exact,
    };
    if !channel.is_noiseless() {
        let mut mc = child_rng(seed, 1);
        code.empirical_error_rate = code.measure_error_rate(channel, error_trials, &mut mc);
    }
    Ok(code)
}

fn draw_codewords(
    alphabet: usize,
    count: usize,
    length: usize,
    space: Option<u64>,
    rng: &mut SimRng,
) -> Vec<Vec<usize>> {
    match space {
        Some(space) if space <= INDEX_SAMPLING_LIMIT && (count as u64) * 4 >= space => {
            rand::seq::index::sample(rng, space as usize, count)
                .into_iter()
                .map(|idx| {
                    let mut v = idx as u64;
                    (0..length)
                        .map(|_| {
                            let d = (v % alphabet as u64) as usize;
                            v /= alphabet as u64;
                            d
                        })
                        .collect()
                })
                .collect()
        }
        _ => {
            let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(count);
            let mut words = Vec::with_capacity(count);
            while words.len() < count {
                let w: Vec<usize> = (0..length).map(|_| rng.random_range(0..alphabet)).collect();
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        }
    }
}
