// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Open-loop baseline: gradient ascent on a model's exact fidelity, then
//! scored against the real system.
//!
//! No experiments are spent, so traces report zero calls. Whatever the model
//! gets wrong shows up as an infidelity floor in the recorded (true) fidelity.

use serde::{Deserialize, Serialize};

use super::{IterationGrid, OptimizerTrace, Recorder, StoppingRule, Termination};
use crate::estimators::Shots;
use crate::problems::{ControlProblem, ControlVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExSituConfig {
    /// Trial step along the gradient at the start of every iteration.
    pub step: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Halvings tried before a step is abandoned and the run declared
    /// converged.
    pub max_halvings: u32,
}

impl Default for ExSituConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            fd_step: 1e-6,
            max_halvings: 60,
        }
    }
}

impl ExSituConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("exsitu.step", self.step), ("exsitu.fd_step", self.fd_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

fn model_gradient(
    model: &dyn ControlProblem,
    controls: &ControlVector,
    h: f64,
) -> Result<Vec<f64>> {
    let mut probe = controls.clone();
    let mut grad = Vec::with_capacity(controls.len());
    for j in 0..controls.len() {
        let x = controls.as_slice()[j];
        probe.as_mut_slice()[j] = x + h;
        let plus = model.true_fidelity(&probe)?;
        probe.as_mut_slice()[j] = x - h;
        let minus = model.true_fidelity(&probe)?;
        probe.as_mut_slice()[j] = x;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Maximizes `model`'s fidelity with backtracking gradient ascent and records
/// the fidelity `truth` assigns to each iterate.
///
/// Each iteration tries `config.step` first and halves it until the model
/// fidelity improves.
pub fn ex_situ_gradient(
    model: &dyn ControlProblem,
    truth: &dyn ControlProblem,
    config: &ExSituConfig,
    init: ControlVector,
    stop: &StoppingRule,
    grid: IterationGrid,
) -> Result<OptimizerTrace> {
    config.validate()?;
    stop.validate()?;
    let p = model.control_dim();
    if truth.control_dim() != p || init.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: if init.len() != p {
                init.len()
            } else {
                truth.control_dim()
            },
        });
    }
    let score = |c: &ControlVector| truth.true_fidelity(c);
    let mut recorder = Recorder::new(grid, &score, Shots::Exact);
    let mut controls = init;
    let mut believed = model.true_fidelity(&controls)?;
    let mut k = 0u64;
    recorder.observe(0, &controls, Some(believed), 0, true)?;

    let termination = loop {
        if stop.exhausted(k) {
            break Termination::Budget;
        }
        let grad = model_gradient(model, &controls, config.fd_step)?;
        let mut accepted = None;
        let mut step = config.step;
        for _ in 0..=config.max_halvings {
            let candidate = controls.offset(step, &grad);
            let value = model.true_fidelity(&candidate)?;
            if value > believed {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            break Termination::Tolerance;
        };
        let moved = next.distance(&controls);
        controls = next;
        believed = value;
        k += 1;
        let converged = stop.tolerance.is_some_and(|eps| moved <= eps);
        recorder.observe(k, &controls, Some(believed), 0, converged)?;
        if converged {
            break Termination::Tolerance;
        }
    };
    recorder.observe(k, &controls, Some(believed), 0, true)?;
    Ok(recorder.finish(termination, k, 0, 0))
}
