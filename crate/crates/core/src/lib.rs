//! A desk-scale laboratory for the mean-field theory of large closed queueing
//! networks.
//!
//! In a network of M FIFO servers and N = qM customers, where each served
//! customer moves to a uniformly random server, the Poisson Hypothesis says
//! that as M → ∞ the flow into any node becomes a constant-rate Poisson flow
//! and the node behaves as a single server driven by that flow. This crate
//! makes each ingredient of that statement executable:
//!
//! - [`dists`]: service laws, residual laws, hazards, grid densities.
//! - [`rods`]: hard-rod conflict resolution and the exact `n!` hit-counting
//!   identities that make the output rate a mixture of convolutions.
//! - [`queue_sim`]: exact event-driven simulation of the single server with
//!   inhomogeneous Poisson input and of the closed network, Poisson-flow
//!   tests and coupled monotone runs.
//! - [`nmp`]: particle integration of the non-linear Markov process (the
//!   mean-field limit) with conservation and relaxation diagnostics.
//! - [`selfavg`]: the self-averaging convolution equation `f(x) = [f ∗ q_x](x)`,
//!   its warm-up closed form, renewal limits, the Monte Carlo kernel and the
//!   Markov-walk visit probability.
//!
//! All randomness flows through [`rng::stream`], so every result is
//! reproducible from a single master seed.

pub mod dists;
pub mod error;
pub mod nmp;
pub mod queue_sim;
pub mod rng;
pub mod rods;
pub mod selfavg;
pub mod stats;

pub use error::{Error, Result};
