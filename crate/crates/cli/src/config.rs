// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Config documents and command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use insitu::estimators::Shots;
use insitu::harness::{CnotSpec, ExperimentConfig, OptimizerSpec, ProblemSpec, QubitSpec};
use insitu::optimizers::{ExSituConfig, GainSchedule, NelderMeadConfig};

/// Top-level keys the CLI owns. Everything else belongs to the experiment.
const OUT_KEY: &str = "out";
const WORKERS_KEY: &str = "workers";

/// A parsed config file: the experiment plus where and how to run it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDocument {
    pub experiment: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        let out = match table.remove(OUT_KEY) {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => bail!("invalid key `{OUT_KEY}`: expected a path string, got {other}"),
        };
        let workers = match table.remove(WORKERS_KEY) {
            None => None,
            Some(toml::Value::Integer(n)) if n >= 1 => Some(n as usize),
            Some(other) => {
                bail!("invalid key `{WORKERS_KEY}`: expected a positive integer, got {other}")
            }
        };
        let experiment = table
            .try_into::<ExperimentConfig>()
            .context("invalid experiment config")?;
        Ok(Self {
            experiment,
            out,
            workers,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        let mut table = toml::Table::try_from(&self.experiment)?;
        if let Some(out) = &self.out {
            table.insert(OUT_KEY.into(), out.display().to_string().into());
        }
        if let Some(workers) = self.workers {
            table.insert(WORKERS_KEY.into(), (workers as i64).into());
        }
        Ok(toml::to_string(&table)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScheduleChoice {
    /// s = 0.602, t = 0.101
    #[value(name = "A", alias = "a")]
    A,
    /// s = 1, t = 1/6
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemChoice {
    Qubit,
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OptimizerChoice {
    Acronym,
    Nm,
    Exsitu,
}

/// Flags shared by every command that runs trials. Each one overrides the
/// matching config value.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML experiment config; built-in defaults when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Standard deviation of Gaussian control noise
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Gain exponents; the a and b multipliers are kept
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleChoice>,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemChoice>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerChoice>,
    /// Output directory; results go to stdout when unset
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
}

impl Overrides {
    /// Loads the config file, if any, applies every flag on top, then
    /// `extra` for command-specific flags, and validates the result.
    pub fn resolve_with(
        &self,
        extra: impl FnOnce(&mut ExperimentConfig),
    ) -> Result<ConfigDocument> {
        let mut doc = match &self.config {
            Some(path) => ConfigDocument::load(path)?,
            None => ConfigDocument::default(),
        };
        self.apply(&mut doc);
        extra(&mut doc.experiment);
        doc.experiment
            .validate()
            .context("invalid experiment config")?;
        Ok(doc)
    }

    fn apply(&self, doc: &mut ConfigDocument) {
        let cfg = &mut doc.experiment;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(iterations) = self.iterations {
            cfg.iterations = iterations;
        }
        if let Some(sigma) = self.sigma {
            cfg.estimator.sigma = sigma;
        }
        if let Some(choice) = self.schedule {
            let exponents = match choice {
                ScheduleChoice::A => GainSchedule::set_a(),
                ScheduleChoice::B => GainSchedule::set_b(),
            };
            cfg.schedule.s = exponents.s;
            cfg.schedule.t = exponents.t;
        }
        if let Some(choice) = self.problem {
            cfg.problem = switch_problem(cfg.problem, choice);
        }
        if let Some(choice) = self.optimizer {
            cfg.optimizer = switch_optimizer(cfg.optimizer, choice);
        }
        if let Some(out) = &self.out {
            doc.out = Some(out.clone());
        }
        if let Some(workers) = self.workers {
            doc.workers = Some(workers as usize);
        }
    }
}

/// Keeps the current settings when the kind already matches; otherwise
/// starts from that kind's defaults, carrying the model error over.
fn switch_problem(current: ProblemSpec, choice: ProblemChoice) -> ProblemSpec {
    let model_error = current.model_error();
    match (current, choice) {
        (ProblemSpec::Qubit(_), ProblemChoice::Qubit)
        | (ProblemSpec::Cnot(_), ProblemChoice::Cnot) => current,
        (_, ProblemChoice::Qubit) => ProblemSpec::Qubit(QubitSpec {
            model_error,
            ..Default::default()
        }),
        (_, ProblemChoice::Cnot) => ProblemSpec::Cnot(CnotSpec {
            model_error,
            ..Default::default()
        }),
    }
}

fn switch_optimizer(current: OptimizerSpec, choice: OptimizerChoice) -> OptimizerSpec {
    match (current, choice) {
        (OptimizerSpec::Acronym, OptimizerChoice::Acronym)
        | (OptimizerSpec::NelderMead(_), OptimizerChoice::Nm)
        | (OptimizerSpec::ExSitu(_), OptimizerChoice::Exsitu) => current,
        (_, OptimizerChoice::Acronym) => OptimizerSpec::Acronym,
        (_, OptimizerChoice::Nm) => OptimizerSpec::NelderMead(NelderMeadConfig::default()),
        (_, OptimizerChoice::Exsitu) => OptimizerSpec::ExSitu(ExSituConfig::default()),
    }
}

/// `exact`/`inf` or a positive shot count.
pub fn parse_shots(s: &str) -> Result<Shots, String> {
    match s.trim() {
        "exact" | "inf" => Ok(Shots::Exact),
        t => match t.parse::<u64>() {
            Ok(0) => Err("shot count must be at least 1".into()),
            Ok(n) => Ok(Shots::Finite(n)),
            Err(_) => Err(format!("expected a shot count or `exact`, got `{t}`")),
        },
    }
}

pub fn parse_count(s: &str) -> Result<u64, String> {
    match s.trim().parse::<u64>() {
        Ok(0) => Err("shot count must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!(
            "expected a positive shot count, got `{}`",
            s.trim()
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use insitu::harness::{FitRange, InitRule, TargetRule};
    use insitu::optimizers::IterationGrid;

    #[test]
    fn defaults_round_trip_through_toml() {
        let doc = ConfigDocument::default();
        let text = doc.to_toml().unwrap();
        assert_eq!(ConfigDocument::parse(&text).unwrap(), doc);
    }

    #[test]
    fn customized_config_round_trips() {
        let doc = ConfigDocument {
            experiment: ExperimentConfig {
                problem: ProblemSpec::Cnot(CnotSpec {
                    model_error: 0.01,
                    target: TargetRule::Haar,
                    ..Default::default()
                }),
                optimizer: OptimizerSpec::NelderMead(NelderMeadConfig {
                    reflection: 1.5,
                    ..Default::default()
                }),
                estimator: insitu::harness::EstimatorSpec {
                    shots: Shots::Exact,
                    sigma: 0.01,
                },
                schedule: GainSchedule::set_a(),
                init: InitRule::Uniform,
                iterations: 123,
                tolerance: Some(1e-9),
                trials: 3,
                seed: 77,
                grid: IterationGrid::Every,
                fit: FitRange {
                    k_lo: Some(5),
                    k_hi: None,
                },
            },
            out: Some("results/x".into()),
            workers: Some(2),
        };
        let text = doc.to_toml().unwrap();
        assert_eq!(ConfigDocument::parse(&text).unwrap(), doc, "{text}");
    }

    #[test]
    fn partial_document_fills_defaults() {
        let doc = ConfigDocument::parse("iterations = 50\n[estimator]\nshots = 100\n").unwrap();
        assert_eq!(doc.experiment.iterations, 50);
        assert_eq!(doc.experiment.estimator.shots, Shots::Finite(100));
        assert_eq!(doc.experiment.trials, ExperimentConfig::default().trials);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ConfigDocument::parse("iteratons = 5\n").unwrap_err();
        assert!(format!("{err:#}").contains("iteratons"), "{err:#}");
        let err = ConfigDocument::parse("[estimator]\nshot = 5\n").unwrap_err();
        assert!(format!("{err:#}").contains("shot"), "{err:#}");
        let err = ConfigDocument::parse("workers = 0\n").unwrap_err();
        assert!(format!("{err:#}").contains("workers"), "{err:#}");
    }

    #[test]
    fn overrides_win_over_the_file() {
        let mut doc = ConfigDocument::parse("iterations = 500\nseed = 3\n").unwrap();
        let flags = Overrides {
            iterations: Some(100),
            schedule: Some(ScheduleChoice::A),
            optimizer: Some(OptimizerChoice::Nm),
            ..Default::default()
        };
        flags.apply(&mut doc);
        assert_eq!(doc.experiment.iterations, 100);
        assert_eq!(doc.experiment.seed, 3);
        assert_eq!(doc.experiment.schedule.s, GainSchedule::set_a().s);
        assert_eq!(doc.experiment.optimizer.name(), "nm");
    }

    #[test]
    fn switching_problem_keeps_model_error() {
        let qubit = ProblemSpec::Qubit(QubitSpec {
            model_error: 0.02,
            ..Default::default()
        });
        let cnot = switch_problem(qubit, ProblemChoice::Cnot);
        assert!(matches!(cnot, ProblemSpec::Cnot(_)));
        assert_eq!(cnot.model_error(), 0.02);
        assert_eq!(switch_problem(qubit, ProblemChoice::Qubit), qubit);
    }

    #[test]
    fn shot_parsing() {
        assert_eq!(parse_shots("exact"), Ok(Shots::Exact));
        assert_eq!(parse_shots("250"), Ok(Shots::Finite(250)));
        assert!(parse_shots("0").is_err());
        assert!(parse_shots("lots").is_err());
        assert!(parse_count("").is_err());
    }
}
