// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams.
//!
//! Every trial gets its own ChaCha stream per purpose, derived only from the
//! base seed, the trial index and the purpose tag. Results therefore do not
//! depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Target = 0,
    Estimator = 1,
    Optimizer = 2,
    ControlNoise = 3,
    Perturbation = 4,
    Init = 5,
}

/// Stream for `(seed, trial, purpose)`.
pub fn stream(seed: u64, trial: usize, purpose: Purpose) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 8) | purpose as u64);
    rng
}

pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
