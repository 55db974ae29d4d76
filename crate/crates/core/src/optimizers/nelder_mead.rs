// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Nelder-Mead downhill simplex on the estimated infidelity `1 − f̂`.
//!
//! Vertex values are estimated once when a vertex is created and then kept,
//! as a closed-loop experiment would. Under shot noise a lucky low estimate
//! can therefore anchor the simplex.

use serde::{Deserialize, Serialize};

use super::{IterationGrid, OptimizerTrace, Recorder, StoppingRule, Termination, Truth};
use crate::estimators::FidelityEstimator;
use crate::problems::ControlVector;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Relative offset of a nonzero coordinate in the initial simplex.
    pub nonzero_delta: f64,
    /// Absolute offset used when the coordinate is zero.
    pub zero_delta: f64,
    /// Simplex diameter (relative to `max(1, ‖best‖)`) below which the
    /// simplex counts as degenerate and is rebuilt around the best vertex.
    pub degenerate_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            nonzero_delta: 0.05,
            zero_delta: 0.00025,
            degenerate_tol: 1e-12,
        }
    }
}

impl NelderMeadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.reflection.is_nan() || self.reflection <= 0.0 {
            return bad("reflection", "must be positive");
        }
        if self.expansion.is_nan() || self.expansion <= self.reflection {
            return bad("expansion", "must exceed the reflection coefficient");
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return bad("contraction", "must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if !(self.nonzero_delta > 0.0 && self.zero_delta > 0.0) {
            return bad("initial simplex", "offsets must be positive");
        }
        if self.degenerate_tol.is_nan() || self.degenerate_tol < 0.0 {
            return bad("degenerate_tol", "must be non-negative");
        }
        Ok(())
    }
}

struct Simplex {
    points: Vec<Vec<f64>>,
    /// Estimated infidelity per vertex.
    values: Vec<f64>,
}

impl Simplex {
    fn order(&mut self) {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| self.values[i].total_cmp(&self.values[j]));
        self.points = idx.iter().map(|&i| self.points[i].clone()).collect();
        self.values = idx.iter().map(|&i| self.values[i]).collect();
    }

    /// Largest distance of any vertex from the best one (max-norm).
    fn spread(&self) -> f64 {
        let best = &self.points[0];
        self.points[1..]
            .iter()
            .flat_map(|p| p.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    fn is_degenerate(&self, tol: f64) -> bool {
        let scale = self.points[0].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.spread() <= tol * scale || self.values.iter().any(|v| !v.is_finite())
    }
}

fn initial_points(center: &[f64], config: &NelderMeadConfig) -> Vec<Vec<f64>> {
    let mut points = vec![center.to_vec()];
    for k in 0..center.len() {
        let mut y = center.to_vec();
        y[k] = if y[k] != 0.0 {
            (1.0 + config.nonzero_delta) * y[k]
        } else {
            config.zero_delta
        };
        points.push(y);
    }
    points
}

/// `(1 + t) x̄ − t x_worst`.
fn along(centroid: &[f64], worst: &[f64], t: f64) -> Vec<f64> {
    centroid
        .iter()
        .zip(worst)
        .map(|(c, w)| (1.0 + t) * c - t * w)
        .collect()
}

fn infidelity<E: FidelityEstimator + ?Sized>(estimator: &mut E, x: &[f64]) -> Result<f64> {
    Ok(1.0 - estimator.estimate(&ControlVector::new(x.to_vec())?)?)
}

fn build<E: FidelityEstimator + ?Sized>(
    estimator: &mut E,
    center: &[f64],
    config: &NelderMeadConfig,
) -> Result<Simplex> {
    let points = initial_points(center, config);
    let values = points
        .iter()
        .map(|x| infidelity(estimator, x))
        .collect::<Result<Vec<_>>>()?;
    let mut simplex = Simplex { points, values };
    simplex.order();
    Ok(simplex)
}

/// Nelder-Mead maximizing the estimated fidelity. Calls spent on the initial
/// simplex (and on any rebuild after degeneration) count toward `M_cum`.
pub fn nelder_mead<E: FidelityEstimator + ?Sized>(
    truth: Truth<'_>,
    estimator: &mut E,
    init: ControlVector,
    config: &NelderMeadConfig,
    stop: &StoppingRule,
    grid: IterationGrid,
) -> Result<OptimizerTrace> {
    config.validate()?;
    stop.validate()?;
    let n = init.len();
    if n == 0 || estimator.control_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: estimator.control_dim(),
            found: n,
        });
    }
    let start_calls = estimator.calls();
    let calls = |e: &E| e.calls() - start_calls;
    let mut recorder = Recorder::new(grid, truth, estimator.shots());
    let mut simplex = build(estimator, init.as_slice(), config)?;
    let mut restarts = 0u32;
    let mut k = 0u64;

    let best = |s: &Simplex| ControlVector::new(s.points[0].clone());
    recorder.observe(
        0,
        &best(&simplex)?,
        Some(1.0 - simplex.values[0]),
        calls(estimator),
        true,
    )?;

    let (rho, chi, psi, sigma) = (
        config.reflection,
        config.expansion,
        config.contraction,
        config.shrink,
    );
    let termination = loop {
        if stop.exhausted(k) {
            break Termination::Budget;
        }
        if stop.tolerance.is_some_and(|eps| simplex.spread() <= eps) {
            break Termination::Tolerance;
        }

        let worst = simplex.points[n].clone();
        let mut centroid = vec![0.0; n];
        for p in &simplex.points[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }

        let xr = along(&centroid, &worst, rho);
        let fxr = infidelity(estimator, &xr)?;
        let mut shrink = false;
        if fxr < simplex.values[0] {
            let xe = along(&centroid, &worst, rho * chi);
            let fxe = infidelity(estimator, &xe)?;
            if fxe < fxr {
                simplex.points[n] = xe;
                simplex.values[n] = fxe;
            } else {
                simplex.points[n] = xr;
                simplex.values[n] = fxr;
            }
        } else if fxr < simplex.values[n - 1] {
            simplex.points[n] = xr;
            simplex.values[n] = fxr;
        } else if fxr < simplex.values[n] {
            let xc = along(&centroid, &worst, psi * rho);
            let fxc = infidelity(estimator, &xc)?;
            if fxc <= fxr {
                simplex.points[n] = xc;
                simplex.values[n] = fxc;
            } else {
                shrink = true;
            }
        } else {
            let xcc = along(&centroid, &worst, -psi);
            let fxcc = infidelity(estimator, &xcc)?;
            if fxcc < simplex.values[n] {
                simplex.points[n] = xcc;
                simplex.values[n] = fxcc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let anchor = simplex.points[0].clone();
            for j in 1..=n {
                let moved: Vec<f64> = anchor
                    .iter()
                    .zip(&simplex.points[j])
                    .map(|(a, x)| a + sigma * (x - a))
                    .collect();
                simplex.values[j] = infidelity(estimator, &moved)?;
                simplex.points[j] = moved;
            }
        }
        simplex.order();

        if simplex.is_degenerate(config.degenerate_tol) && stop.tolerance.is_none() {
            log::debug!("simplex degenerate at iteration {}, rebuilding", k + 1);
            simplex = build(estimator, &simplex.points[0].clone(), config)?;
            restarts += 1;
        }

        k += 1;
        recorder.observe(
            k,
            &best(&simplex)?,
            Some(1.0 - simplex.values[0]),
            calls(estimator),
            false,
        )?;
    };
    let total = calls(estimator);
    recorder.observe(
        k,
        &best(&simplex)?,
        Some(1.0 - simplex.values[0]),
        total,
        true,
    )?;
    Ok(recorder.finish(termination, k, total, restarts))
}
