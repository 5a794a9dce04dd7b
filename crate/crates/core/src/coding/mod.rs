//! Coder/estimator schemes.
//!
//! - [`block_code`]: random block codes with maximum-likelihood decoding.
//! - [`spanning`]: pipelined spanning-set scheme for deterministic systems
//!   over a discrete memoryless channel.
//! - [`zoom`]: adaptive uniform quantizer for noise-free linear systems over
//!   an erasure channel.
//! - [`quantizer`]: memoryless uniform and Lloyd quantizers.

pub mod block_code;
pub mod quantizer;
pub mod spanning;
pub mod zoom;

use thiserror::Error;

use crate::channels::ChannelError;
use crate::entropy::EntropyError;
use crate::systems::SystemError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodingError {
    #[error("{message_count} messages do not fit in {alphabet}^{block_length} codewords")]
    TooManyMessages {
        message_count: usize,
        alphabet: usize,
        block_length: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no contraction margin delta found above {0:e}")]
    NoContractionMargin(f64),
    #[error("spanning sets exceed the message budget for every block up to {max_block}")]
    BudgetExceeded { max_block: usize },
    #[error("horizon {horizon} is outside the supported range {min}..={max}")]
    HorizonOutOfRange { horizon: usize, min: usize, max: usize },
    #[error("state escaped the zoom interval of mode {mode} at step {step}")]
    BracketViolation { mode: usize, step: usize },
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

impl CodingError {
    /// Violations of an online invariant (as opposed to bad inputs).
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, CodingError::BracketViolation { .. })
    }
}
