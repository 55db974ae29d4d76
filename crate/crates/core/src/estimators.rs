// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic fidelity oracles standing in for the experiment.
//!
//! Every estimator counts its invocations. Optimizers only ever see these
//! estimates; the exact fidelity used for analysis is computed separately
//! through [`ControlProblem::true_fidelity`] and never touches a counter.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::problems::{ControlProblem, ControlVector};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Experiments per fidelity estimate. Serialized as an integer, or as the
/// string `"exact"` for the infinite-shot limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ShotsRepr", try_from = "ShotsRepr")]
pub enum Shots {
    /// Infinitely many: the estimate is the exact fidelity.
    Exact,
    Finite(u64),
}

impl Shots {
    pub fn finite(self) -> Option<u64> {
        match self {
            Shots::Exact => None,
            Shots::Finite(n) => Some(n),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl From<Shots> for ShotsRepr {
    fn from(shots: Shots) -> Self {
        match shots {
            Shots::Exact => ShotsRepr::Word("exact".into()),
            Shots::Finite(n) => ShotsRepr::Count(n),
        }
    }
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = String;

    fn try_from(repr: ShotsRepr) -> std::result::Result<Self, String> {
        match repr {
            ShotsRepr::Count(0) => Err("shot count must be at least 1".into()),
            ShotsRepr::Count(n) => Ok(Shots::Finite(n)),
            ShotsRepr::Word(w) if w == "exact" => Ok(Shots::Exact),
            ShotsRepr::Word(w) => Err(format!(
                "expected a positive integer or \"exact\", got {w:?}"
            )),
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("inf"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

/// The objective an optimizer is allowed to query.
pub trait FidelityEstimator: Send {
    /// One (possibly noisy) fidelity estimate; increments the call count.
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64>;

    /// Number of `estimate` invocations so far.
    fn calls(&self) -> u64;

    fn shots(&self) -> Shots;

    fn control_dim(&self) -> usize;
}

impl<E: FidelityEstimator + ?Sized> FidelityEstimator for Box<E> {
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64> {
        (**self).estimate(controls)
    }

    fn calls(&self) -> u64 {
        (**self).calls()
    }

    fn shots(&self) -> Shots {
        (**self).shots()
    }

    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
}

fn check_dim(expected: usize, controls: &ControlVector) -> Result<()> {
    if controls.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: controls.len(),
        });
    }
    Ok(())
}

/// Machine-precision fidelity.
pub struct ExactEstimator {
    problem: Arc<dyn ControlProblem>,
    calls: u64,
}

impl ExactEstimator {
    pub fn new(problem: Arc<dyn ControlProblem>) -> Self {
        Self { problem, calls: 0 }
    }
}

impl FidelityEstimator for ExactEstimator {
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64> {
        self.calls += 1;
        self.problem.true_fidelity(controls)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn shots(&self) -> Shots {
        Shots::Exact
    }

    fn control_dim(&self) -> usize {
        self.problem.control_dim()
    }
}

/// Shot-noise-limited estimate: `N f̂ ~ Bin(N, f)`, drawn in one sample.
pub struct BinomialEstimator {
    problem: Arc<dyn ControlProblem>,
    shots: u64,
    rng: SimRng,
    calls: u64,
}

impl BinomialEstimator {
    pub fn new(problem: Arc<dyn ControlProblem>, shots: u64, rng: SimRng) -> Result<Self> {
        if shots < 1 {
            return Err(Error::InvalidParameter {
                name: "shots",
                reason: "at least one experiment per estimate required".into(),
            });
        }
        Ok(Self {
            problem,
            shots,
            rng,
            calls: 0,
        })
    }
}

impl FidelityEstimator for BinomialEstimator {
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64> {
        self.calls += 1;
        let f = self.problem.true_fidelity(controls)?;
        let dist = Binomial::new(self.shots, f).map_err(|e| Error::InvalidParameter {
            name: "fidelity",
            reason: e.to_string(),
        })?;
        let successes = dist.sample(&mut self.rng);
        Ok(successes as f64 / self.shots as f64)
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn shots(&self) -> Shots {
        Shots::Finite(self.shots)
    }

    fn control_dim(&self) -> usize {
        self.problem.control_dim()
    }
}

/// Independent Gaussian error on every control component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlNoiseConfig {
    /// Standard deviation per component.
    pub sigma: f64,
}

impl Default for ControlNoiseConfig {
    fn default() -> Self {
        Self { sigma: 1e-2 }
    }
}

/// Applies `c + ε`, `ε ~ N(0, σ² I)` fresh per call, before delegating.
pub struct ControlNoise<E> {
    inner: E,
    noise: Option<Normal<f64>>,
    rng: SimRng,
    calls: u64,
}

impl<E: FidelityEstimator> ControlNoise<E> {
    pub fn new(inner: E, config: ControlNoiseConfig, rng: SimRng) -> Result<Self> {
        let sigma = config.sigma;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be finite and non-negative, got {sigma}"),
            });
        }
        let noise = if sigma > 0.0 {
            Some(
                Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter {
                    name: "sigma",
                    reason: e.to_string(),
                })?,
            )
        } else {
            None
        };
        Ok(Self {
            inner,
            noise,
            rng,
            calls: 0,
        })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: FidelityEstimator> FidelityEstimator for ControlNoise<E> {
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64> {
        self.calls += 1;
        match &self.noise {
            None => self.inner.estimate(controls),
            Some(normal) => {
                let jittered: Vec<f64> = controls
                    .as_slice()
                    .iter()
                    .map(|c| c + normal.sample(&mut self.rng))
                    .collect();
                self.inner.estimate(&ControlVector::new(jittered)?)
            }
        }
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn shots(&self) -> Shots {
        self.inner.shots()
    }

    fn control_dim(&self) -> usize {
        self.inner.control_dim()
    }
}

/// Wraps an arbitrary deterministic objective, mainly for testing
/// optimizers against functions with known optima.
pub struct FnEstimator<F> {
    objective: F,
    dim: usize,
    calls: u64,
}

impl<F> FnEstimator<F>
where
    F: FnMut(&[f64]) -> f64 + Send,
{
    pub fn new(dim: usize, objective: F) -> Self {
        Self {
            objective,
            dim,
            calls: 0,
        }
    }
}

impl<F> FidelityEstimator for FnEstimator<F>
where
    F: FnMut(&[f64]) -> f64 + Send,
{
    fn estimate(&mut self, controls: &ControlVector) -> Result<f64> {
        check_dim(self.dim, controls)?;
        self.calls += 1;
        Ok((self.objective)(controls.as_slice()))
    }

    fn calls(&self) -> u64 {
        self.calls
    }

    fn shots(&self) -> Shots {
        Shots::Exact
    }

    fn control_dim(&self) -> usize {
        self.dim
    }
}

/// Uniform random controls in `[-1, 1]^p`.
pub fn uniform_controls<R: Rng + ?Sized>(p: usize, rng: &mut R) -> ControlVector {
    ControlVector::new((0..p).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .expect("uniform draws are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SingleQubitProblem;
    use crate::quantum::{haar_random_unitary, Unitary};
    use crate::rng::from_seed;

    /// Problem whose fidelity at `c_star` is exactly 1, plus `c_star`.
    fn realizable(seed: u64) -> (Arc<dyn ControlProblem>, ControlVector) {
        let mut rng = from_seed(seed);
        let c_star = uniform_controls(10, &mut rng);
        let base = SingleQubitProblem::with_target(Unitary::identity(2)).unwrap();
        let target = base.unitary(&c_star).unwrap();
        (
            Arc::new(SingleQubitProblem::with_target(target).unwrap()),
            c_star,
        )
    }

    fn haar_problem(seed: u64) -> Arc<dyn ControlProblem> {
        let mut rng = from_seed(seed);
        let target = haar_random_unitary(2, &mut rng).unwrap();
        Arc::new(SingleQubitProblem::with_target(target).unwrap())
    }

    /// Finds controls with fidelity close to `level` by bisection along a ray
    /// from a realizable optimum.
    fn controls_at_fidelity(
        problem: &dyn ControlProblem,
        c_star: &ControlVector,
        level: f64,
    ) -> ControlVector {
        let direction = vec![1.0; c_star.len()];
        let (mut lo, mut hi) = (0.0, 0.05);
        while problem
            .true_fidelity(&c_star.offset(hi, &direction))
            .unwrap()
            > level
        {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if problem
                .true_fidelity(&c_star.offset(mid, &direction))
                .unwrap()
                > level
            {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c_star.offset(lo, &direction)
    }

    #[test]
    fn exact_estimator_is_deterministic_and_counts() {
        let (problem, c_star) = realizable(1);
        let mut est = ExactEstimator::new(problem.clone());
        let c = uniform_controls(10, &mut from_seed(2));
        let a = est.estimate(&c).unwrap();
        let b = est.estimate(&c).unwrap();
        assert_eq!(a, b);
        assert!((est.estimate(&c_star).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(est.calls(), 3);
        assert_eq!(est.shots(), Shots::Exact);
    }

    #[test]
    fn binomial_extremes_are_exact() {
        let (problem, c_star) = realizable(3);
        let mut est = BinomialEstimator::new(problem.clone(), 37, from_seed(4)).unwrap();
        for _ in 0..50 {
            // Fidelity is 1 to roundoff here; Bin(N, ~1) = N.
            assert_eq!(est.estimate(&c_star).unwrap(), 1.0);
        }
        let x = crate::quantum::pauli(crate::quantum::Axis::X, 0, 1).unwrap();
        let orthogonal: Arc<dyn ControlProblem> = Arc::new(
            SingleQubitProblem::with_target(Unitary::new(x.into_matrix()).unwrap()).unwrap(),
        );
        let mut est = BinomialEstimator::new(orthogonal, 1000, from_seed(5)).unwrap();
        for _ in 0..50 {
            assert_eq!(est.estimate(&ControlVector::zeros(10)).unwrap(), 0.0);
        }
    }

    #[test]
    fn binomial_rejects_zero_shots() {
        assert!(BinomialEstimator::new(haar_problem(6), 0, from_seed(6)).is_err());
    }

    #[test]
    fn binomial_mean_is_unbiased() {
        let (problem, c_star) = realizable(7);
        let c = controls_at_fidelity(problem.as_ref(), &c_star, 0.7);
        let f = problem.true_fidelity(&c).unwrap();
        assert!((f - 0.7).abs() < 1e-6);
        let shots = 100;
        let draws = 100_000;
        let mut est = BinomialEstimator::new(problem, shots, from_seed(8)).unwrap();
        let mean = (0..draws).map(|_| est.estimate(&c).unwrap()).sum::<f64>() / draws as f64;
        let sigma = (f * (1.0 - f) / shots as f64 / draws as f64).sqrt();
        assert!(
            (mean - f).abs() < 3.0 * sigma,
            "mean {mean}, f {f}, sigma {sigma}"
        );
        assert_eq!(est.calls(), draws);
    }

    #[test]
    fn identical_seeds_reproduce_sequences() {
        let problem = haar_problem(9);
        let c = uniform_controls(10, &mut from_seed(10));
        let run = |seed| {
            let mut est = BinomialEstimator::new(problem.clone(), 1000, from_seed(seed)).unwrap();
            (0..20)
                .map(|_| est.estimate(&c).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn zero_sigma_is_transparent() {
        let problem = haar_problem(13);
        let c = uniform_controls(10, &mut from_seed(14));
        let mut plain = BinomialEstimator::new(problem.clone(), 500, from_seed(15)).unwrap();
        let inner = BinomialEstimator::new(problem, 500, from_seed(15)).unwrap();
        let mut wrapped =
            ControlNoise::new(inner, ControlNoiseConfig { sigma: 0.0 }, from_seed(16)).unwrap();
        for _ in 0..100 {
            assert_eq!(plain.estimate(&c).unwrap(), wrapped.estimate(&c).unwrap());
        }
    }

    #[test]
    fn negative_sigma_rejected() {
        let inner = ExactEstimator::new(haar_problem(17));
        assert!(
            ControlNoise::new(inner, ControlNoiseConfig { sigma: -1.0 }, from_seed(0)).is_err()
        );
    }

    #[test]
    fn wrapper_and_inner_counts_agree() {
        let inner = ExactEstimator::new(haar_problem(18));
        let mut noisy =
            ControlNoise::new(inner, ControlNoiseConfig::default(), from_seed(19)).unwrap();
        let c = ControlVector::zeros(10);
        for _ in 0..25 {
            let f = noisy.estimate(&c).unwrap();
            assert!((0.0..=1.0).contains(&f));
        }
        assert_eq!(noisy.calls(), 25);
        assert_eq!(noisy.inner().calls(), 25);
    }

    #[test]
    fn control_noise_variance_matches_linear_propagation() {
        let problem = haar_problem(20);
        let c = uniform_controls(10, &mut from_seed(21));
        let sigma = 1e-2;
        // Central finite-difference gradient oracle.
        let h = 1e-6;
        let grad_sq: f64 = (0..10)
            .map(|i| {
                let mut e = vec![0.0; 10];
                e[i] = 1.0;
                let g = (problem.true_fidelity(&c.offset(h, &e)).unwrap()
                    - problem.true_fidelity(&c.offset(-h, &e)).unwrap())
                    / (2.0 * h);
                g * g
            })
            .sum();
        let mut noisy = ControlNoise::new(
            ExactEstimator::new(problem),
            ControlNoiseConfig { sigma },
            from_seed(22),
        )
        .unwrap();
        let samples: Vec<f64> = (0..20_000).map(|_| noisy.estimate(&c).unwrap()).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let predicted = sigma * sigma * grad_sq;
        assert!(var > 0.0);
        let ratio = var / predicted;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "var {var}, predicted {predicted}"
        );
    }

    #[test]
    fn control_noise_is_uncorrelated_across_calls() {
        let problem = haar_problem(23);
        let c = uniform_controls(10, &mut from_seed(24));
        let mut noisy = ControlNoise::new(
            ExactEstimator::new(problem),
            ControlNoiseConfig::default(),
            from_seed(25),
        )
        .unwrap();
        let x: Vec<f64> = (0..10_000).map(|_| noisy.estimate(&c).unwrap()).collect();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let lag1 = x
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>();
        let rho = lag1 / var;
        assert!(rho.abs() < 0.03, "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn fn_estimator_checks_dimension() {
        let mut est = FnEstimator::new(3, |c: &[f64]| c.iter().sum());
        assert_eq!(est.estimate(&ControlVector::zeros(3)).unwrap(), 0.0);
        assert!(est.estimate(&ControlVector::zeros(2)).is_err());
        assert_eq!(est.calls(), 1);
    }
}
