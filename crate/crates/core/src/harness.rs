// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Multi-trial runs, median/quartile aggregation, power-law fits and shot
//! sweeps.
//!
//! Trial `i` draws everything it needs (target, drift error, initial point,
//! shot noise, control noise, SPSA directions) from streams keyed by
//! `(seed, i)`, so a run is reproducible regardless of worker count.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::estimators::{
    uniform_controls, BinomialEstimator, ControlNoise, ControlNoiseConfig, ExactEstimator,
    FidelityEstimator, Shots,
};
use crate::optimizers::{
    ex_situ_gradient, nelder_mead, run_spsa, ExSituConfig, GainSchedule, IterationGrid,
    NelderMeadConfig, OptimizerTrace, StoppingRule,
};
use crate::problems::{
    random_drift_perturbation, CnotProblem, ControlProblem, ControlVector, SingleQubitProblem,
};
use crate::quantum::{cnot, haar_random_unitary, pauli, Axis, Unitary};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Values below this are raised to it before taking logs in a fit.
pub const INFIDELITY_FLOOR: f64 = 1e-15;

/// Fewest grid points a power-law fit accepts.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRule {
    /// A fresh Haar-random gate per trial.
    Haar,
    Identity,
    /// Pauli X (single qubit only).
    X,
    /// CNOT with qubit 0 as control (two qubits only).
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QubitSpec {
    pub omega0: f64,
    pub segments: usize,
    pub dt: f64,
    pub target: TargetRule,
    /// Spectral norm of the drift error `ΔH` separating the real system
    /// from the nominal model. Zero means the model is exact.
    pub model_error: f64,
}

impl Default for QubitSpec {
    fn default() -> Self {
        Self {
            omega0: SingleQubitProblem::DEFAULT_OMEGA0,
            segments: SingleQubitProblem::DEFAULT_SEGMENTS,
            dt: SingleQubitProblem::DEFAULT_DT,
            target: TargetRule::Haar,
            model_error: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CnotSpec {
    pub delta1: f64,
    pub delta2: f64,
    pub exchange: f64,
    pub segments: usize,
    pub dt: f64,
    pub target: TargetRule,
    pub model_error: f64,
}

impl Default for CnotSpec {
    fn default() -> Self {
        Self {
            delta1: CnotProblem::DEFAULT_DELTA1,
            delta2: CnotProblem::DEFAULT_DELTA2,
            exchange: CnotProblem::DEFAULT_EXCHANGE,
            segments: CnotProblem::DEFAULT_SEGMENTS,
            dt: CnotProblem::DEFAULT_DT,
            target: TargetRule::Cnot,
            model_error: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Qubit(QubitSpec),
    Cnot(CnotSpec),
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Qubit(QubitSpec::default())
    }
}

impl ProblemSpec {
    pub fn target(&self) -> TargetRule {
        match self {
            ProblemSpec::Qubit(q) => q.target,
            ProblemSpec::Cnot(c) => c.target,
        }
    }

    pub fn model_error(&self) -> f64 {
        match self {
            ProblemSpec::Qubit(q) => q.model_error,
            ProblemSpec::Cnot(c) => c.model_error,
        }
    }

    fn system_dim(&self) -> usize {
        match self {
            ProblemSpec::Qubit(_) => 2,
            ProblemSpec::Cnot(_) => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    /// SPSA on estimated fidelity.
    #[default]
    Acronym,
    #[serde(rename = "nm")]
    NelderMead(NelderMeadConfig),
    #[serde(rename = "exsitu")]
    ExSitu(ExSituConfig),
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerSpec::Acronym => "acronym",
            OptimizerSpec::NelderMead(_) => "nm",
            OptimizerSpec::ExSitu(_) => "exsitu",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    pub shots: Shots,
    /// Standard deviation of Gaussian control noise; zero disables it.
    pub sigma: f64,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            shots: Shots::Finite(1000),
            sigma: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRule {
    #[default]
    Zero,
    /// Uniform in `[-1, 1]^p`, drawn per trial.
    Uniform,
}

/// Iteration range for power-law fits. Unset ends default to skipping the
/// first decade (`k_lo = 10`) and running to `k_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitRange {
    pub k_lo: Option<u64>,
    pub k_hi: Option<u64>,
}

impl FitRange {
    pub fn resolve(&self, k_max: u64) -> (u64, u64) {
        (self.k_lo.unwrap_or(10), self.k_hi.unwrap_or(k_max))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub estimator: EstimatorSpec,
    pub schedule: GainSchedule,
    pub init: InitRule,
    /// Iteration budget `k_max`.
    pub iterations: u64,
    /// Optional early-stop tolerance on the step size.
    pub tolerance: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub grid: IterationGrid,
    pub fit: FitRange,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            optimizer: OptimizerSpec::default(),
            estimator: EstimatorSpec::default(),
            schedule: GainSchedule::default(),
            init: InitRule::default(),
            iterations: 10_000,
            tolerance: None,
            trials: 20,
            seed: 0,
            grid: IterationGrid::default(),
            fit: FitRange::default(),
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "at least one trial required"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "at least one iteration required"));
        }
        let model_error = self.problem.model_error();
        if !(model_error.is_finite() && model_error >= 0.0) {
            return Err(invalid(
                "problem.model_error",
                format!("must be finite and non-negative, got {model_error}"),
            ));
        }
        match (self.problem, self.problem.target()) {
            (ProblemSpec::Qubit(_), TargetRule::Cnot) => {
                return Err(invalid(
                    "problem.target",
                    "cnot needs the two-qubit problem",
                ))
            }
            (ProblemSpec::Cnot(_), TargetRule::X) => {
                return Err(invalid(
                    "problem.target",
                    "x needs the single-qubit problem",
                ))
            }
            _ => {}
        }
        let sigma = self.estimator.sigma;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid(
                "estimator.sigma",
                format!("must be finite and non-negative, got {sigma}"),
            ));
        }
        self.schedule.validate()?;
        self.stopping().validate()?;
        match &self.optimizer {
            OptimizerSpec::Acronym => {}
            OptimizerSpec::NelderMead(nm) => nm.validate()?,
            OptimizerSpec::ExSitu(ex) => ex.validate()?,
        }
        let (k_lo, k_hi) = self.fit.resolve(self.iterations);
        if k_lo == 0 || k_lo >= k_hi {
            return Err(invalid(
                "fit",
                format!("need 1 <= k_lo < k_hi, got [{k_lo}, {k_hi}]"),
            ));
        }
        Ok(())
    }

    pub fn stopping(&self) -> StoppingRule {
        StoppingRule {
            tolerance: self.tolerance,
            max_iterations: Some(self.iterations),
        }
    }
}

/// Everything a single trial runs against.
#[derive(Clone, Debug)]
pub struct Trial {
    pub index: usize,
    /// The system the estimator samples and the trace is scored on.
    pub system: Arc<dyn ControlProblem>,
    /// Nominal model (without the drift error) used by ex situ optimization.
    pub model: Arc<dyn ControlProblem>,
    pub init: ControlVector,
}

fn fixed_target(rule: TargetRule, d: usize) -> Result<Unitary> {
    match rule {
        TargetRule::Identity => Ok(Unitary::identity(d)),
        TargetRule::X => Unitary::new(pauli(Axis::X, 0, 1)?.into_matrix()),
        TargetRule::Cnot => Ok(cnot()),
        TargetRule::Haar => unreachable!("Haar targets are drawn per trial"),
    }
}

/// Builds trial `index`: its target, real system, nominal model and start.
pub fn build_trial(config: &ExperimentConfig, index: usize) -> Result<Trial> {
    let d = config.problem.system_dim();
    let target = match config.problem.target() {
        TargetRule::Haar => {
            haar_random_unitary(d, &mut stream(config.seed, index, Purpose::Target))?
        }
        rule => fixed_target(rule, d)?,
    };
    let model_error = config.problem.model_error();
    let delta = if model_error > 0.0 {
        let mut rng = stream(config.seed, index, Purpose::Perturbation);
        Some(random_drift_perturbation(d, model_error, &mut rng)?)
    } else {
        None
    };
    let (system, model): (Arc<dyn ControlProblem>, Arc<dyn ControlProblem>) = match config.problem {
        ProblemSpec::Qubit(q) => {
            let nominal = SingleQubitProblem::new(q.omega0, q.segments, q.dt, target)?;
            match &delta {
                Some(delta) => (Arc::new(nominal.perturbed(delta)?), Arc::new(nominal)),
                None => {
                    let nominal = Arc::new(nominal);
                    (nominal.clone(), nominal)
                }
            }
        }
        ProblemSpec::Cnot(c) => {
            let nominal =
                CnotProblem::new(c.delta1, c.delta2, c.exchange, c.segments, c.dt, target)?;
            match &delta {
                Some(delta) => (Arc::new(nominal.perturbed(delta)?), Arc::new(nominal)),
                None => {
                    let nominal = Arc::new(nominal);
                    (nominal.clone(), nominal)
                }
            }
        }
    };
    let p = system.control_dim();
    let init = match config.init {
        InitRule::Zero => ControlVector::zeros(p),
        InitRule::Uniform => uniform_controls(p, &mut stream(config.seed, index, Purpose::Init)),
    };
    Ok(Trial {
        index,
        system,
        model,
        init,
    })
}

fn estimator_for(config: &ExperimentConfig, trial: &Trial) -> Result<Box<dyn FidelityEstimator>> {
    let base: Box<dyn FidelityEstimator> = match config.estimator.shots {
        Shots::Exact => Box::new(ExactEstimator::new(trial.system.clone())),
        Shots::Finite(n) => Box::new(BinomialEstimator::new(
            trial.system.clone(),
            n,
            stream(config.seed, trial.index, Purpose::Estimator),
        )?),
    };
    if config.estimator.sigma > 0.0 {
        let noise = ControlNoiseConfig {
            sigma: config.estimator.sigma,
        };
        let rng = stream(config.seed, trial.index, Purpose::ControlNoise);
        Ok(Box::new(ControlNoise::new(base, noise, rng)?))
    } else {
        Ok(base)
    }
}

/// Runs one trial to `k_max`, padding an early stop onto the full grid.
pub fn run_trial(config: &ExperimentConfig, index: usize) -> Result<OptimizerTrace> {
    let trial = build_trial(config, index)?;
    let system = trial.system.clone();
    let truth = move |c: &ControlVector| system.true_fidelity(c);
    let stop = config.stopping();
    let mut trace = match &config.optimizer {
        OptimizerSpec::Acronym => {
            let mut estimator = estimator_for(config, &trial)?;
            let rng = stream(config.seed, index, Purpose::Optimizer);
            run_spsa(
                &truth,
                &mut estimator,
                &config.schedule,
                trial.init,
                &stop,
                config.grid,
                rng,
            )?
        }
        OptimizerSpec::NelderMead(nm) => {
            let mut estimator = estimator_for(config, &trial)?;
            nelder_mead(&truth, &mut estimator, trial.init, nm, &stop, config.grid)?
        }
        OptimizerSpec::ExSitu(ex) => ex_situ_gradient(
            trial.model.as_ref(),
            trial.system.as_ref(),
            ex,
            trial.init,
            &stop,
            config.grid,
        )?,
    };
    trace.hold_to(&config.grid, config.iterations);
    Ok(trace)
}

fn first_error(results: Vec<Result<OptimizerTrace>>) -> Result<Vec<OptimizerTrace>> {
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Trial {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Runs every trial in order on the calling thread.
pub fn run_trials_sequential(config: &ExperimentConfig) -> Result<Vec<OptimizerTrace>> {
    config.validate()?;
    first_error((0..config.trials).map(|i| run_trial(config, i)).collect())
}

/// Runs all trials with the default worker count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<OptimizerTrace>> {
    run_trials_with(config, None)
}

/// Runs all trials on `workers` threads (`None`: all available). The output
/// does not depend on the worker count. Without the `parallel` feature the
/// trials always run sequentially.
#[cfg(feature = "parallel")]
pub fn run_trials_with(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<OptimizerTrace>> {
    use rayon::prelude::*;

    if workers == Some(1) {
        return run_trials_sequential(config);
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, i))
            .collect()
    });
    first_error(results)
}

#[cfg(not(feature = "parallel"))]
pub fn run_trials_with(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<OptimizerTrace>> {
    if workers.is_some_and(|w| w > 1) {
        log::warn!("built without the `parallel` feature; running trials sequentially");
    }
    run_trials_sequential(config)
}

/// Median and quartiles across trials at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub iteration: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// Median cumulative experiment count across trials; `None` with exact
    /// estimates.
    pub n_tot: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub points: Vec<SeriesPoint>,
    pub trials: usize,
}

impl AggregateSeries {
    pub fn at(&self, iteration: u64) -> Option<&SeriesPoint> {
        self.points
            .binary_search_by_key(&iteration, |p| p.iteration)
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn last(&self) -> &SeriesPoint {
        self.points.last().expect("series hold at least one point")
    }

    /// Multiplies every median and quartile by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.points {
            p.median *= factor;
            p.q25 *= factor;
            p.q75 *= factor;
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, 0.5)
}

/// Pointwise median and interquartile range of infidelity across traces.
pub fn aggregate(traces: &[OptimizerTrace]) -> Result<AggregateSeries> {
    let first = traces.first().ok_or(Error::NoTraces)?;
    let grid = first.iterations_grid();
    if traces.iter().any(|t| t.iterations_grid() != grid) {
        return Err(Error::MismatchedGrids);
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut column = Vec::with_capacity(traces.len());
    for (i, &iteration) in grid.iter().enumerate() {
        column.clear();
        column.extend(traces.iter().map(|t| t.records[i].infidelity()));
        column.sort_by(f64::total_cmp);
        let median = quantile_sorted(&column, 0.5);
        let q25 = quantile_sorted(&column, 0.25);
        let q75 = quantile_sorted(&column, 0.75);
        let mut experiments: Vec<f64> = traces
            .iter()
            .filter_map(|t| t.records[i].experiments.map(|n| n as f64))
            .collect();
        let n_tot = (experiments.len() == traces.len()).then(|| median_of(&mut experiments));
        points.push(SeriesPoint {
            iteration,
            median,
            q25,
            q75,
            n_tot,
        });
    }
    Ok(AggregateSeries {
        points,
        trials: traces.len(),
    })
}

/// Least-squares line through `(ln k, ln median)`: `median ≈ e^intercept k^beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    /// Natural-log intercept.
    pub intercept: f64,
    pub k_lo: u64,
    pub k_hi: u64,
    pub residual_rms: f64,
    pub points: usize,
    /// Set when some median fell below [`INFIDELITY_FLOOR`] and was raised
    /// to it.
    pub clamped: bool,
}

/// Fits the median over grid points with `k_lo <= k <= k_hi`.
///
/// Medians below [`INFIDELITY_FLOOR`] are clamped and flagged; a median that
/// is zero or negative is a log-domain error.
pub fn fit_exponent(series: &AggregateSeries, k_lo: u64, k_hi: u64) -> Result<PowerLawFit> {
    if k_lo == 0 || k_lo > k_hi {
        return Err(invalid(
            "fit",
            format!("need 1 <= k_lo <= k_hi, got [{k_lo}, {k_hi}]"),
        ));
    }
    let selected: Vec<&SeriesPoint> = series
        .points
        .iter()
        .filter(|p| (k_lo..=k_hi).contains(&p.iteration))
        .collect();
    if selected.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            k_lo,
            k_hi,
            found: selected.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let mut clamped = false;
    let mut xs = Vec::with_capacity(selected.len());
    let mut ys = Vec::with_capacity(selected.len());
    for p in selected {
        if !p.median.is_finite() || p.median <= 0.0 {
            return Err(Error::LogDomain {
                iteration: p.iteration,
                value: p.median,
            });
        }
        if p.median < INFIDELITY_FLOOR {
            clamped = true;
        }
        xs.push((p.iteration as f64).ln());
        ys.push(p.median.max(INFIDELITY_FLOOR).ln());
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let beta = sxy / sxx;
    let intercept = y_mean - beta * x_mean;
    let residual_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - beta * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerLawFit {
        beta,
        intercept,
        k_lo,
        k_hi,
        residual_rms,
        points: xs.len(),
        clamped,
    })
}

/// One row of a shot sweep: the state of the run at `k_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub shots: Shots,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// `N · M_cum` at `k_max` (`2 N k_max` for SPSA).
    pub n_tot: Option<f64>,
}

/// Drops repeated shot counts, keeping first occurrences, and warns.
pub fn dedup_shots(shots: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::with_capacity(shots.len());
    for &n in shots {
        if out.contains(&n) {
            log::warn!("duplicate shot count {n} ignored");
        } else {
            out.push(n);
        }
    }
    out
}

/// Reruns `config` once per shot count, then once with exact estimates as a
/// reference row.
pub fn sweep_shots(
    config: &ExperimentConfig,
    shots: &[u64],
    workers: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if shots.is_empty() {
        return Err(invalid("shots", "empty shot list"));
    }
    if shots.contains(&0) {
        return Err(invalid("shots", "shot counts must be at least 1"));
    }
    let counts = dedup_shots(shots);
    let mut rows = Vec::with_capacity(counts.len() + 1);
    for shots in counts
        .into_iter()
        .map(Shots::Finite)
        .chain(std::iter::once(Shots::Exact))
    {
        let mut cfg = config.clone();
        cfg.estimator.shots = shots;
        let series = aggregate(&run_trials_with(&cfg, workers)?)?;
        let end = series.last();
        rows.push(SweepRow {
            shots,
            median: end.median,
            q25: end.q25,
            q75: end.q75,
            n_tot: end.n_tot,
        });
    }
    Ok(rows)
}
