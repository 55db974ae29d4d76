// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! File formats. Series and sweeps are CSV behind `#` header lines carrying
//! the schema version and the resolved config; summaries and fits are JSON.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use insitu::estimators::Shots;
use insitu::harness::{AggregateSeries, ExperimentConfig, PowerLawFit, SeriesPoint, SweepRow};
use insitu::optimizers::{OptimizerTrace, Termination};
use serde::{Deserialize, Serialize};

pub const SERIES_SCHEMA: &str = "insitu-series/1";
pub const SWEEP_SCHEMA: &str = "insitu-sweep/1";
pub const RUN_SCHEMA: &str = "insitu-run/1";
pub const COMPARE_SCHEMA: &str = "insitu-compare/1";
pub const FIT_SCHEMA: &str = "insitu-fit/1";

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    iteration: u64,
    median_infidelity: f64,
    q25: f64,
    q75: f64,
    n_tot: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepCsvRow {
    shots: String,
    median_infidelity: f64,
    q25: f64,
    q75: f64,
    n_tot: Option<f64>,
}

fn header(schema: &str, config: &ExperimentConfig) -> Result<String> {
    Ok(format!(
        "# schema: {schema}\n# seed: {}\n# config: {}\n",
        config.seed,
        serde_json::to_string(config)?
    ))
}

fn csv_body<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| anyhow!("{}", e.error()))?;
    Ok(String::from_utf8(bytes)?)
}

pub fn series_csv(series: &AggregateSeries, config: &ExperimentConfig) -> Result<String> {
    let rows = series.points.iter().map(|p| SeriesRow {
        iteration: p.iteration,
        median_infidelity: p.median,
        q25: p.q25,
        q75: p.q75,
        n_tot: p.n_tot,
    });
    Ok(header(SERIES_SCHEMA, config)? + &csv_body(rows)?)
}

pub fn sweep_csv(rows: &[SweepRow], config: &ExperimentConfig) -> Result<String> {
    let rows = rows.iter().map(|r| SweepCsvRow {
        shots: r.shots.to_string(),
        median_infidelity: r.median,
        q25: r.q25,
        q75: r.q75,
        n_tot: r.n_tot,
    });
    Ok(header(SWEEP_SCHEMA, config)? + &csv_body(rows)?)
}

/// A series read back from disk, with its embedded config when present.
#[derive(Debug)]
pub struct LoadedSeries {
    pub series: AggregateSeries,
    pub config: Option<ExperimentConfig>,
}

pub fn parse_series(text: &str) -> Result<LoadedSeries> {
    let mut config = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let line = line.trim_start_matches('#').trim();
        if let Some(schema) = line.strip_prefix("schema:") {
            let schema = schema.trim();
            if schema != SERIES_SCHEMA {
                bail!("unsupported schema `{schema}`, expected `{SERIES_SCHEMA}`");
            }
        } else if let Some(json) = line.strip_prefix("config:") {
            config = Some(serde_json::from_str(json.trim()).context("embedded config")?);
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points: Vec<SeriesPoint> = Vec::new();
    for (line, row) in reader.deserialize::<SeriesRow>().enumerate() {
        let row = row.with_context(|| format!("series row {}", line + 1))?;
        if let Some(prev) = points.last() {
            if row.iteration <= prev.iteration {
                bail!("iterations must increase (row {})", line + 1);
            }
        }
        points.push(SeriesPoint {
            iteration: row.iteration,
            median: row.median_infidelity,
            q25: row.q25,
            q75: row.q75,
            n_tot: row.n_tot,
        });
    }
    if points.is_empty() {
        bail!("series holds no rows");
    }
    let trials = config.as_ref().map_or(0, |c: &ExperimentConfig| c.trials);
    Ok(LoadedSeries {
        series: AggregateSeries { points, trials },
        config,
    })
}

pub fn read_series(path: &Path) -> Result<LoadedSeries> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_series(&text).with_context(|| format!("in series {}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema: &'static str,
    #[serde(flatten)]
    pub fit: PowerLawFit,
}

impl FitReport {
    pub fn new(fit: PowerLawFit) -> Self {
        Self {
            schema: FIT_SCHEMA,
            fit,
        }
    }
}

/// Per-optimizer results for the JSON summaries.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub optimizer: &'static str,
    pub trials: usize,
    #[serde(rename = "final")]
    pub last: SeriesPoint,
    pub stopped_on_budget: usize,
    pub stopped_on_tolerance: usize,
    /// Average estimator calls per iteration, over trials.
    pub calls_per_iteration: Option<f64>,
    pub restarts: u64,
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
}

impl RunSummary {
    pub fn new(
        config: &ExperimentConfig,
        traces: &[OptimizerTrace],
        series: &AggregateSeries,
        fit: Result<PowerLawFit, insitu::Error>,
    ) -> Self {
        let count = |t: Termination| traces.iter().filter(|tr| tr.termination == t).count();
        let rates: Vec<f64> = traces
            .iter()
            .filter_map(OptimizerTrace::mean_calls_per_iteration)
            .collect();
        let calls_per_iteration = (!rates.is_empty() && traces.iter().any(|t| t.calls > 0))
            .then(|| rates.iter().sum::<f64>() / rates.len() as f64);
        let (fit, fit_error) = match fit {
            Ok(fit) => (Some(fit), None),
            Err(e) => {
                log::warn!("{} fit skipped: {e}", config.optimizer.name());
                (None, Some(e.to_string()))
            }
        };
        Self {
            optimizer: config.optimizer.name(),
            trials: traces.len(),
            last: *series.last(),
            stopped_on_budget: count(Termination::Budget),
            stopped_on_tolerance: count(Termination::Tolerance),
            calls_per_iteration,
            restarts: traces.iter().map(|t| u64::from(t.restarts)).sum(),
            fit,
            fit_error,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Document<'a, T: Serialize> {
    pub schema: &'static str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    #[serde(flatten)]
    pub body: T,
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Debug, Serialize)]
pub struct SweepSummary<'a> {
    pub rows: Vec<SweepJsonRow<'a>>,
}

#[derive(Debug, Serialize)]
pub struct SweepJsonRow<'a> {
    pub shots: String,
    #[serde(flatten)]
    pub row: &'a SweepRow,
}

impl<'a> SweepSummary<'a> {
    pub fn new(rows: &'a [SweepRow]) -> Self {
        Self {
            rows: rows
                .iter()
                .map(|row| SweepJsonRow {
                    shots: match row.shots {
                        Shots::Exact => "exact".into(),
                        Shots::Finite(n) => n.to_string(),
                    },
                    row,
                })
                .collect(),
        }
    }
}

/// Files to create, collected before anything touches the disk.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Writes every file into `dir`, or the first one to stdout when there is
    /// no directory.
    pub fn emit(self, dir: Option<&Path>) -> Result<()> {
        match dir {
            Some(dir) => {
                fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
                for (name, contents) in &self.files {
                    let path = dir.join(name);
                    fs::write(&path, contents)
                        .with_context(|| format!("cannot write {}", path.display()))?;
                    log::info!("wrote {}", path.display());
                }
            }
            None => {
                if let Some((_, contents)) = self.files.first() {
                    print!("{contents}");
                }
            }
        }
        Ok(())
    }
}
