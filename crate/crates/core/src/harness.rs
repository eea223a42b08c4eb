//! Monte-Carlo trials, pointwise aggregation and CSV output.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::engines::{run, EngineConfig, RunRecord};
use crate::error::{Error, Result};

/// Error metric for bits-to-threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Trial mean of `‖x_k - x*‖²`.
    Mse,
    /// Trial mean of `‖x_k - x*‖`.
    RmseNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub metric: Metric,
    pub level: f64,
}

/// Trial statistics of one variant, indexed by iteration `k = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub variant: String,
    pub trials: usize,
    pub mse_mean: Vec<f64>,
    pub mse_std: Vec<f64>,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub bits_cum: Vec<u64>,
    /// Privacy ledger value; 1 for variants without a `(0, δ)` guarantee.
    pub delta: Vec<f64>,
    /// Trial mean of `‖y_k - 1 ⊗ mean(x_k)‖²`.
    pub disagreement_mean: Vec<f64>,
    /// Largest `‖mean(y_k) - mean(x_k)‖∞` over all trials and iterations.
    pub max_average_residual: f64,
    /// Saturated DSC coordinates, summed over trials.
    pub saturated: u64,
}

impl AggregateSeries {
    pub fn len(&self) -> usize {
        self.mse_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mse_mean.is_empty()
    }

    pub fn metric(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Mse => &self.mse_mean,
            Metric::RmseNorm => &self.norm_mean,
        }
    }

    /// Reduces finished runs in the order given.
    pub fn from_runs(variant: impl Into<String>, runs: &[RunRecord], delta: Vec<f64>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::config("trials", "must be at least 1"))?;
        let len = first.bits_cum.len();
        let errors: Vec<&[f64]> = runs
            .iter()
            .map(|r| {
                r.trajectory
                    .squared_errors()
                    .ok_or_else(|| Error::Structure("runs must be recorded against a reference".into()))
            })
            .collect::<Result<_>>()?;
        if runs.iter().any(|r| r.bits_cum.len() != len) || delta.len() != len {
            return Err(Error::Structure("trial series lengths differ".into()));
        }
        let n = runs.len() as f64;
        let mut series = AggregateSeries {
            variant: variant.into(),
            trials: runs.len(),
            mse_mean: Vec::with_capacity(len),
            mse_std: Vec::with_capacity(len),
            norm_mean: Vec::with_capacity(len),
            norm_std: Vec::with_capacity(len),
            bits_cum: first.bits_cum.clone(),
            delta,
            disagreement_mean: Vec::with_capacity(len),
            max_average_residual: runs.iter().map(RunRecord::max_average_residual).fold(0.0, f64::max),
            saturated: runs.iter().map(|r| r.saturated).sum(),
        };
        for k in 0..len {
            let (m, s) = mean_std(errors.iter().map(|e| e[k]), n);
            series.mse_mean.push(m);
            series.mse_std.push(s);
            let (m, s) = mean_std(errors.iter().map(|e| e[k].sqrt()), n);
            series.norm_mean.push(m);
            series.norm_std.push(s);
            series
                .disagreement_mean
                .push(runs.iter().map(|r| r.disagreement[k]).sum::<f64>() / n);
        }
        Ok(series)
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `trials` seeds `base_seed + t` of one engine and aggregates them in trial order.
pub fn run_trials(
    name: &str,
    cfg: &EngineConfig,
    trials: usize,
    base_seed: u64,
    reference: &[f64],
    delta: Vec<f64>,
) -> Result<AggregateSeries> {
    let records: Vec<Result<RunRecord>> = (0..trials)
        .into_par_iter()
        .map(|t| run(cfg, base_seed.wrapping_add(t as u64), Some(reference)))
        .collect();
    let mut runs = Vec::with_capacity(trials);
    for (trial, r) in records.into_iter().enumerate() {
        runs.push(r.map_err(|e| Error::Trial {
            variant: name.to_string(),
            trial,
            source: Box::new(e),
        })?);
    }
    AggregateSeries::from_runs(name, &runs, delta)
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub reference: Vec<f64>,
    pub series: Vec<AggregateSeries>,
}

impl Experiment {
    pub fn get(&self, variant: &str) -> Option<&AggregateSeries> {
        self.series.iter().find(|s| s.variant == variant)
    }
}

/// Runs every variant of `cfg` (or only `only`) and aggregates each.
pub fn run_experiment(cfg: &ExperimentConfig, only: Option<&str>) -> Result<Experiment> {
    if let Some(name) = only {
        cfg.variant(name)?;
    }
    let reference = cfg.reference()?;
    let mut series = Vec::new();
    for (name, engine) in cfg.engine_configs()? {
        if only.is_some_and(|o| o != name) {
            continue;
        }
        let delta = match cfg.ledger(&engine.variant)? {
            Some(ledger) => ledger.delta_series,
            None => vec![1.0; cfg.iterations + 1],
        };
        log::info!("running {} trials of `{name}` for {} iterations", cfg.trials, cfg.iterations);
        series.push(run_trials(&name, &engine, cfg.trials, cfg.base_seed, &reference, delta)?);
    }
    Ok(Experiment { reference, series })
}

/// First iteration whose trial-mean metric is at most `level`.
pub fn crossing(series: &AggregateSeries, metric: Metric, level: f64) -> Option<usize> {
    series.metric(metric).iter().position(|&v| v <= level)
}

/// Cumulative bits at [`crossing`], if the level is ever reached.
pub fn bits_to_threshold(series: &AggregateSeries, metric: Metric, level: f64) -> Option<u64> {
    crossing(series, metric, level).map(|k| series.bits_cum[k])
}

pub const CSV_HEADER: &str = "k,variant,mse_mean,mse_std,norm_mean,bits_cum,delta_k";

/// One line of the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub variant: String,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub norm_mean: f64,
    pub bits_cum: u64,
    pub delta_k: f64,
}

/// Ten significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.9e}")
}

/// Renders the CSV, one row per `(variant, k)`.
pub fn to_csv(series: &[AggregateSeries]) -> String {
    let mut out = String::with_capacity(64 * series.iter().map(AggregateSeries::len).sum::<usize>() + 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in series {
        for k in 0..s.len() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{},{},{}",
                s.variant,
                format_float(s.mse_mean[k]),
                format_float(s.mse_std[k]),
                format_float(s.norm_mean[k]),
                s.bits_cum[k],
                format_float(s.delta[k]),
            );
        }
    }
    out
}

pub fn emit_csv(series: &[AggregateSeries], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(series)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Csv {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let line_no = i + 1;
            let bad = |reason: String| Error::Csv { line: line_no, reason };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(bad(format!("expected 7 fields, got {}", fields.len())));
            }
            let float = |j: usize| {
                fields[j]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("field {}: {e}", j + 1)))
            };
            Ok(CsvRow {
                k: fields[0].parse().map_err(|e| bad(format!("field 1: {e}")))?,
                variant: fields[1].to_string(),
                mse_mean: float(2)?,
                mse_std: float(3)?,
                norm_mean: float(4)?,
                bits_cum: fields[5].parse().map_err(|e| bad(format!("field 6: {e}")))?,
                delta_k: float(6)?,
            })
        })
        .collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
