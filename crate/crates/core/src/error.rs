// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {n_qubits} qubit(s) (at most 2 supported)")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty segment list")]
    EmptySegments,

    #[error("fidelity {value} exceeds 1 beyond roundoff")]
    FidelityOutOfRange { value: f64 },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot take log of non-positive median {value} at iteration {iteration}")]
    LogDomain { iteration: u64, value: f64 },

    #[error("fit range [{k_lo}, {k_hi}] holds {found} grid points, at least {required} required")]
    TooFewPoints {
        k_lo: u64,
        k_hi: u64,
        found: usize,
        required: usize,
    },

    #[error("traces have mismatched iteration grids")]
    MismatchedGrids,

    #[error("no traces to aggregate")]
    NoTraces,

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
