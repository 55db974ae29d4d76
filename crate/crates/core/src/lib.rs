// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! In situ quantum gate optimization.
//!
//! Controls for a piecewise-constant Hamiltonian are tuned by simultaneous
//! perturbation stochastic approximation (SPSA) using only noisy fidelity
//! samples, the way a closed-loop experiment would. The crate also provides
//! the baselines it is measured against (Nelder-Mead on the same noisy
//! samples, and model-based gradient ascent under a mis-specified drift) and a
//! multi-trial harness that aggregates median/interquartile convergence curves
//! and fits power-law exponents to them.
//!
//! Trials run in parallel through rayon when the `parallel` feature (on by
//! default) is enabled; without it the harness falls back to a sequential
//! loop with identical results.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod quantum;
pub mod rng;

pub use error::{Error, Result};
