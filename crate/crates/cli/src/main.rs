// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! `insitu`: run in situ control experiments and write their convergence
//! curves.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use insitu::estimators::Shots;
use insitu::harness::{
    aggregate, fit_exponent, run_trials_with, sweep_shots, AggregateSeries, ExperimentConfig,
    FitRange, OptimizerSpec,
};
use insitu::optimizers::NelderMeadConfig;

use config::{parse_count, parse_shots, ConfigDocument, Overrides};
use output::{Document, FitReport, Outputs, RunSummary, SweepSummary};

#[derive(Parser, Debug)]
#[command(
    name = "insitu",
    version,
    about = "In situ quantum gate optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run all trials of one experiment and write its median curve
    Run {
        #[command(flatten)]
        overrides: Overrides,
        /// Shots per estimate, or `exact`
        #[arg(long, value_parser = parse_shots)]
        shots: Option<Shots>,
    },
    /// Repeat an experiment across shot counts, plus an exact reference
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated shot counts
        #[arg(long, required = true, value_delimiter = ',', value_parser = parse_count)]
        shots: Vec<u64>,
    },
    /// Run SPSA and Nelder-Mead on the same trials and write both curves
    Compare {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_parser = parse_shots)]
        shots: Option<Shots>,
    },
    /// Fit a power law to a series file
    Fit {
        /// Series CSV written by `run` or `compare`
        series: PathBuf,
        #[arg(long)]
        k_lo: Option<u64>,
        #[arg(long)]
        k_hi: Option<u64>,
        /// Directory for fit.json; stdout when unset
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved config as TOML
    Config {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_parser = parse_shots)]
        shots: Option<Shots>,
    },
}

fn resolve(overrides: &Overrides, shots: Option<Shots>) -> Result<ConfigDocument> {
    overrides.resolve_with(|cfg| {
        if let Some(shots) = shots {
            cfg.estimator.shots = shots;
        }
    })
}

fn run_series(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<(AggregateSeries, RunSummary)> {
    let traces = run_trials_with(config, workers)?;
    let series = aggregate(&traces)?;
    let (k_lo, k_hi) = config.fit.resolve(config.iterations);
    let fit = fit_exponent(&series, k_lo, k_hi);
    let summary = RunSummary::new(config, &traces, &series, fit);
    Ok((series, summary))
}

fn cmd_run(doc: ConfigDocument) -> Result<()> {
    let config = &doc.experiment;
    let (series, summary) = run_series(config, doc.workers)?;
    let mut outputs = Outputs::default();
    outputs.add("series.csv", output::series_csv(&series, config)?);
    outputs.add(
        "run.json",
        output::json(&Document {
            schema: output::RUN_SCHEMA,
            seed: config.seed,
            config,
            body: summary,
        })?,
    );
    outputs.emit(doc.out.as_deref())
}

fn cmd_sweep(doc: ConfigDocument, shots: &[u64]) -> Result<()> {
    let config = &doc.experiment;
    let rows = sweep_shots(config, shots, doc.workers)?;
    let mut outputs = Outputs::default();
    outputs.add("sweep.csv", output::sweep_csv(&rows, config)?);
    outputs.add(
        "sweep.json",
        output::json(&Document {
            schema: output::SWEEP_SCHEMA,
            seed: config.seed,
            config,
            body: SweepSummary::new(&rows),
        })?,
    );
    outputs.emit(doc.out.as_deref())
}

#[derive(serde::Serialize)]
struct CompareBody {
    acronym: RunSummary,
    nm: RunSummary,
}

fn cmd_compare(doc: ConfigDocument) -> Result<()> {
    let Some(dir) = doc.out.as_deref() else {
        bail!("compare writes several files; set --out or `out` in the config");
    };
    let nm_settings = match doc.experiment.optimizer {
        OptimizerSpec::NelderMead(nm) => nm,
        _ => NelderMeadConfig::default(),
    };
    let mut acronym_cfg = doc.experiment.clone();
    acronym_cfg.optimizer = OptimizerSpec::Acronym;
    let mut nm_cfg = doc.experiment.clone();
    nm_cfg.optimizer = OptimizerSpec::NelderMead(nm_settings);

    let (acronym_series, acronym) = run_series(&acronym_cfg, doc.workers)?;
    let (nm_series, nm) = run_series(&nm_cfg, doc.workers)?;
    let mut outputs = Outputs::default();
    outputs.add(
        "series_acronym.csv",
        output::series_csv(&acronym_series, &acronym_cfg)?,
    );
    outputs.add("series_nm.csv", output::series_csv(&nm_series, &nm_cfg)?);
    outputs.add(
        "compare.json",
        output::json(&Document {
            schema: output::COMPARE_SCHEMA,
            seed: doc.experiment.seed,
            config: &doc.experiment,
            body: CompareBody { acronym, nm },
        })?,
    );
    outputs.emit(Some(dir))
}

fn cmd_fit(
    path: PathBuf,
    k_lo: Option<u64>,
    k_hi: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let loaded = output::read_series(&path)?;
    let k_max = loaded.series.last().iteration;
    let range = loaded
        .config
        .as_ref()
        .map_or(FitRange::default(), |c| c.fit);
    let (default_lo, default_hi) = range.resolve(k_max);
    let (k_lo, k_hi) = (k_lo.unwrap_or(default_lo), k_hi.unwrap_or(default_hi));
    let fit = fit_exponent(&loaded.series, k_lo, k_hi)
        .with_context(|| format!("fitting {}", path.display()))?;
    let mut outputs = Outputs::default();
    outputs.add("fit.json", output::json(&FitReport::new(fit))?);
    outputs.emit(out.as_deref())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { overrides, shots } => cmd_run(resolve(&overrides, shots)?),
        Command::Sweep { overrides, shots } => cmd_sweep(resolve(&overrides, None)?, &shots),
        Command::Compare { overrides, shots } => cmd_compare(resolve(&overrides, shots)?),
        Command::Fit {
            series,
            k_lo,
            k_hi,
            out,
        } => cmd_fit(series, k_lo, k_hi, out),
        Command::Config { overrides, shots } => {
            print!("{}", resolve(&overrides, shots)?.to_toml()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
