//! Deep clustering of multi-view data with arbitrarily missing views.
//!
//! The pipeline has two phases. View-specific autoencoders are pre-trained
//! on zero-filled inputs with a masked reconstruction loss and a kNN-graph
//! Laplacian penalty on the codes. The encoders are then fine-tuned against
//! a self-paced kmeans objective with fixed centers, alternating encoder
//! updates with closed-form updates of the assignments, the sample weights
//! and the age parameter.
//!
//! Data convention: every matrix stores one sample per row. A view with
//! `m_v` features over `n` samples is an `n x m_v` [`Matrix`], and codes for
//! a batch are `batch x k`.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! seed sweeps live in the companion `cdimc` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod finetune;
pub mod graph;
pub mod kmeans;
pub mod matrix;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod pretrain;

pub use error::{Error, Result};
pub use matrix::Matrix;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Builds the crate RNG for `seed` on a given `stream`, so independent stages
/// seeded from one user seed never share a sequence.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
