// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! SPSA ("ACRONYM"), the Nelder-Mead baseline, and model-based gradient
//! ascent, all producing [`OptimizerTrace`]s with call accounting.
//!
//! Every optimizer maximizes the estimated fidelity. The fidelity logged in a
//! trace comes from a separate exact oracle (`truth`) that the optimizer never
//! consults and that does not increment any estimator counter.

mod ex_situ;
mod nelder_mead;
mod spsa;

pub use ex_situ::{ex_situ_gradient, ExSituConfig};
pub use nelder_mead::{nelder_mead, NelderMeadConfig};
pub use spsa::{rademacher, run_spsa, spsa_gradient, SpsaState, SpsaStep};

use serde::{Deserialize, Serialize};

use crate::estimators::Shots;
use crate::problems::ControlVector;
use crate::{Error, Result};

/// Exact fidelity used for analysis only.
pub type Truth<'a> = &'a (dyn Fn(&ControlVector) -> Result<f64> + Sync);

/// SPSA gain sequences `α_k = a/(k+1)^s` (step) and `β_k = b/(k+1)^t`
/// (perturbation size).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSchedule {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
}

impl GainSchedule {
    /// `s = 0.602, t = 0.101`, the common practical choice.
    pub const fn set_a() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            s: 0.602,
            t: 0.101,
        }
    }

    /// Asymptotically optimal `s = 1, t = 1/6`.
    pub const fn set_b() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            s: 1.0,
            t: 1.0 / 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("schedule.a", self.a),
            ("schedule.b", self.b),
            ("schedule.s", self.s),
            ("schedule.t", self.t),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// `(α_k, β_k)`.
    pub fn gains(&self, k: u64) -> (f64, f64) {
        let base = (k + 1) as f64;
        (self.a / base.powf(self.s), self.b / base.powf(self.t))
    }
}

impl Default for GainSchedule {
    fn default() -> Self {
        Self::set_b()
    }
}

/// When an optimizer stops: an iteration budget, a step tolerance, or both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<u64>,
}

impl StoppingRule {
    pub fn budget(max_iterations: u64) -> Self {
        Self {
            tolerance: None,
            max_iterations: Some(max_iterations),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = Some(tolerance);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_none() && self.max_iterations.is_none() {
            return Err(Error::InvalidParameter {
                name: "stopping",
                reason: "set a tolerance, an iteration budget, or both".into(),
            });
        }
        if let Some(eps) = self.tolerance {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "tolerance",
                    reason: format!("must be finite and positive, got {eps}"),
                });
            }
        }
        Ok(())
    }

    fn exhausted(&self, k: u64) -> bool {
        self.max_iterations.is_some_and(|m| k >= m)
    }
}

/// Which iterations get a trace record. Iteration 0 and the final iteration
/// are always recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationGrid {
    Every,
    /// `round(10^(j / per_decade))` for `j = 0, 1, ...`, deduplicated.
    LogSpaced {
        per_decade: u32,
    },
}

impl Default for IterationGrid {
    fn default() -> Self {
        IterationGrid::LogSpaced { per_decade: 50 }
    }
}

impl IterationGrid {
    pub fn contains(&self, k: u64) -> bool {
        match *self {
            IterationGrid::Every => true,
            IterationGrid::LogSpaced { per_decade } => {
                if k <= 1 {
                    return true;
                }
                let per_decade = per_decade.max(1) as f64;
                let j = (per_decade * (k as f64).log10()).round();
                [j - 1.0, j, j + 1.0]
                    .iter()
                    .any(|&j| j >= 0.0 && 10f64.powf(j / per_decade).round() as u64 == k)
            }
        }
    }

    /// All grid iterations in `0..=k_max`, including `k_max`.
    pub fn points(&self, k_max: u64) -> Vec<u64> {
        let mut out: Vec<u64> = match *self {
            IterationGrid::Every => (0..=k_max).collect(),
            IterationGrid::LogSpaced { per_decade } => {
                let per_decade = per_decade.max(1) as f64;
                let mut pts = vec![0];
                let mut j = 0.0;
                loop {
                    let k = 10f64.powf(j / per_decade).round() as u64;
                    if k > k_max {
                        break;
                    }
                    if pts.last() != Some(&k) {
                        pts.push(k);
                    }
                    j += 1.0;
                }
                pts
            }
        };
        if out.last() != Some(&k_max) {
            out.push(k_max);
        }
        out
    }
}

/// State of an optimizer after `iteration` iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub controls: ControlVector,
    /// Exact fidelity of `controls` (analysis only).
    pub fidelity: f64,
    /// Objective value the optimizer itself holds for `controls`, if any
    /// (best-vertex estimate for Nelder-Mead, model fidelity for ex situ).
    pub believed: Option<f64>,
    /// Cumulative estimator calls `M_cum`.
    pub calls: u64,
    /// Cumulative experiments `N * M_cum`, when `N` is finite.
    pub experiments: Option<u64>,
}

impl TraceRecord {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Tolerance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    pub shots: Shots,
    /// Iterations actually performed.
    pub iterations: u64,
    /// Estimator calls consumed, including any setup evaluations.
    pub calls: u64,
    /// Nelder-Mead simplex restarts after degeneration.
    pub restarts: u32,
}

impl OptimizerTrace {
    /// Average estimator calls per iteration, `M`.
    pub fn mean_calls_per_iteration(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.calls as f64 / self.iterations as f64)
    }

    pub fn last(&self) -> &TraceRecord {
        self.records
            .last()
            .expect("traces hold at least one record")
    }

    pub fn final_infidelity(&self) -> f64 {
        self.last().infidelity()
    }

    pub fn iterations_grid(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.iteration).collect()
    }

    /// Record at exactly `iteration`, if present.
    pub fn at(&self, iteration: u64) -> Option<&TraceRecord> {
        self.records
            .binary_search_by_key(&iteration, |r| r.iteration)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Pads an early-stopped trace onto `grid` up to `k_max` by holding the
    /// final state: a stopped optimizer keeps its controls and spends no
    /// further calls. An off-grid final record is dropped once padded; the
    /// remaining records are left untouched.
    pub fn hold_to(&mut self, grid: &IterationGrid, k_max: u64) {
        let last = self.last().clone();
        if last.iteration >= k_max {
            return;
        }
        let points = grid.points(k_max);
        if points.binary_search(&last.iteration).is_err() {
            self.records.pop();
        }
        for k in points {
            if k > last.iteration {
                self.records.push(TraceRecord {
                    iteration: k,
                    ..last.clone()
                });
            }
        }
    }
}

/// Collects records on a grid, computing the exact fidelity lazily.
pub(crate) struct Recorder<'a> {
    grid: IterationGrid,
    truth: Truth<'a>,
    shots: Shots,
    records: Vec<TraceRecord>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(grid: IterationGrid, truth: Truth<'a>, shots: Shots) -> Self {
        Self {
            grid,
            truth,
            shots,
            records: Vec::new(),
        }
    }

    /// Records when `force` is set or `k` lies on the grid.
    pub(crate) fn observe(
        &mut self,
        k: u64,
        controls: &ControlVector,
        believed: Option<f64>,
        calls: u64,
        force: bool,
    ) -> Result<()> {
        if self.records.last().is_some_and(|r| r.iteration == k) {
            return Ok(());
        }
        if !(force || self.grid.contains(k)) {
            return Ok(());
        }
        let fidelity = (self.truth)(controls)?;
        self.records.push(TraceRecord {
            iteration: k,
            controls: controls.clone(),
            fidelity,
            believed,
            calls,
            experiments: self.shots.finite().map(|n| n * calls),
        });
        Ok(())
    }

    pub(crate) fn finish(
        self,
        termination: Termination,
        iterations: u64,
        calls: u64,
        restarts: u32,
    ) -> OptimizerTrace {
        OptimizerTrace {
            records: self.records,
            termination,
            shots: self.shots,
            iterations,
            calls,
            restarts,
        }
    }
}
