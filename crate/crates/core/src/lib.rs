//! Numerical toolkit for state estimation of dynamical systems over noisy
//! channels.
//!
//! The crate is organised around the quantities that bound the channel
//! capacity needed to track a system:
//!
//! - [`systems`]: discrete-time systems `x_{t+1} = f(x_t, w_t)`, a catalog of
//!   standard examples and seeded trajectory generation.
//! - [`entropy`]: separated/spanning set counting under Bowen metrics and the
//!   entropy-rate estimators built on it.
//! - [`channels`]: memoryless channel simulation and capacity.
//! - [`coding`]: block codes, the spanning-set scheme, the erasure zoom
//!   quantizer and memoryless high-rate quantizers.
//! - [`bounds`]: closed-form and quadrature capacity/rate bounds.
//! - [`harness`]: Monte Carlo evaluation of the estimation objectives and
//!   capacity sweeps.
//! - [`experiment`]: JSON experiment configs and the file-producing commands
//!   behind the `estent` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod channels;
pub mod coding;
pub mod entropy;
pub mod experiment;
pub mod harness;
pub mod rng;
pub mod systems;

pub use channels::{Channel, ChannelKind};
pub use systems::{SystemModel, TrajectoryBlock};
