//! Latent-action adversarial imitation learning.
//!
//! This crate holds everything that does not touch the outside world: a small
//! reverse-mode dense network library with Adam, deterministic toy robot
//! environments with scripted experts, a conditional action autoencoder, the
//! state/latent-action discriminator, a soft actor-critic generator, the
//! training loop tying them together (GAIL baseline, task-agnostic and
//! task-aware latent variants), and exact discrete divergence oracles.
//!
//! It is `no_std` and only needs `alloc`. File formats, the command line and
//! reporting live in the companion `lapal` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod codec;
pub mod config;
pub mod env;
mod error;
pub mod gaussian;
pub mod gradcheck;
pub mod math;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod rng;
pub mod sac;
pub mod train;

pub use error::{Error, Result};
