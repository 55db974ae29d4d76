// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Simultaneous perturbation stochastic approximation on estimated fidelity.
//!
//! Each iteration draws a Rademacher direction `Δ` (fair ±1 per component),
//! spends exactly two estimator calls at `c ± β_k Δ`, forms
//!
//! ```text
//! g_k = [f̂(c + β_k Δ) − f̂(c − β_k Δ)] / (2 β_k) · Δ
//! ```
//!
//! and ascends `c_{k+1} = c_k + α_k g_k`. The call cost per iteration is
//! independent of the control dimension.

use rand::Rng;

use super::{GainSchedule, IterationGrid, Recorder, StoppingRule, Termination, Truth};
use crate::estimators::FidelityEstimator;
use crate::problems::ControlVector;
use crate::rng::SimRng;
use crate::{Error, Result};

use super::OptimizerTrace;

/// Fair ±1 coin per component.
pub fn rademacher<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    (0..p)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Two-sided simultaneous-perturbation gradient estimate along `direction`.
pub fn spsa_gradient<E: FidelityEstimator + ?Sized>(
    estimator: &mut E,
    controls: &ControlVector,
    beta: f64,
    direction: &[f64],
) -> Result<Vec<f64>> {
    if direction.len() != controls.len() {
        return Err(Error::DimensionMismatch {
            expected: controls.len(),
            found: direction.len(),
        });
    }
    let plus = estimator.estimate(&controls.offset(beta, direction))?;
    let minus = estimator.estimate(&controls.offset(-beta, direction))?;
    let slope = (plus - minus) / (2.0 * beta);
    Ok(direction.iter().map(|d| slope * d).collect())
}

/// Outcome of one SPSA iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsaStep {
    pub gradient: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `‖c_{k+1} − c_k‖`.
    pub step_norm: f64,
}

/// Current iterate `c_k`, iteration index `k`, and the stream for `Δ_k`.
#[derive(Clone, Debug)]
pub struct SpsaState {
    controls: ControlVector,
    iteration: u64,
    rng: SimRng,
}

impl SpsaState {
    pub fn new(init: ControlVector, rng: SimRng) -> Self {
        Self {
            controls: init,
            iteration: 0,
            rng,
        }
    }

    pub fn controls(&self) -> &ControlVector {
        &self.controls
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Advances `c_k → c_{k+1}` using exactly two estimator calls.
    pub fn step<E: FidelityEstimator + ?Sized>(
        &mut self,
        estimator: &mut E,
        schedule: &GainSchedule,
    ) -> Result<SpsaStep> {
        if estimator.control_dim() != self.controls.len() {
            return Err(Error::DimensionMismatch {
                expected: estimator.control_dim(),
                found: self.controls.len(),
            });
        }
        let (alpha, beta) = schedule.gains(self.iteration);
        let direction = rademacher(self.controls.len(), &mut self.rng);
        let gradient = spsa_gradient(estimator, &self.controls, beta, &direction)?;
        let next = self.controls.offset(alpha, &gradient);
        let step_norm = next.distance(&self.controls);
        self.controls = next;
        self.iteration += 1;
        Ok(SpsaStep {
            gradient,
            alpha,
            beta,
            step_norm,
        })
    }
}

/// Runs SPSA from `init` until the step norm drops to the tolerance or the
/// budget is spent, recording exact fidelity on `grid`.
pub fn run_spsa<E: FidelityEstimator + ?Sized>(
    truth: Truth<'_>,
    estimator: &mut E,
    schedule: &GainSchedule,
    init: ControlVector,
    stop: &StoppingRule,
    grid: IterationGrid,
    rng: SimRng,
) -> Result<OptimizerTrace> {
    schedule.validate()?;
    stop.validate()?;
    let start_calls = estimator.calls();
    let mut recorder = Recorder::new(grid, truth, estimator.shots());
    let mut state = SpsaState::new(init, rng);
    recorder.observe(0, state.controls(), None, 0, true)?;
    let termination = loop {
        if stop.exhausted(state.iteration()) {
            break Termination::Budget;
        }
        let step = state.step(estimator, schedule)?;
        let calls = estimator.calls() - start_calls;
        let converged = stop.tolerance.is_some_and(|eps| step.step_norm <= eps);
        recorder.observe(state.iteration(), state.controls(), None, calls, converged)?;
        if converged {
            break Termination::Tolerance;
        }
    };
    let calls = estimator.calls() - start_calls;
    recorder.observe(state.iteration(), state.controls(), None, calls, true)?;
    Ok(recorder.finish(termination, state.iteration(), calls, 0))
}
