//! Subcommand implementations: build the run, invoke the library, write the
//! output files.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use spinmkt_core::ingest::{load_daily_csv, IngestError};
use spinmkt_core::model::{ModelParams, ParamError};
use spinmkt_core::series::{
    read_series_csv, write_empirical_csv, write_series_csv, SeriesData, SeriesIoError,
};
use spinmkt_core::simulate::{run_simulation, SimError};
use spinmkt_core::sweep::{run_sweep, AnalysisConfig, SweepError, SweepSpec};
use spinmkt_core::tails::{
    acf_abs, ccdf, fit_tail_family, hill_estimate, histogram, label_fits, moments, TailError,
    YScale,
};

use crate::{AnalyzeArgs, CliError, IngestArgs, ModelArgs, SimulateArgs, SweepArgs};

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");
const HIST_BINS: usize = 50;
const ACF_MAX_LAG: usize = 50;

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<TailError> for CliError {
    fn from(e: TailError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(io) => CliError::Io(io.to_string()),
            IngestError::Csv(c) if c.is_io_error() => CliError::Io(c.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SeriesIoError> for CliError {
    fn from(e: SeriesIoError) -> Self {
        match e {
            SeriesIoError::Io(io) => CliError::Io(io.to_string()),
            SeriesIoError::Csv(c) if c.is_io_error() => CliError::Io(c.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Write a file via a sibling temp file and rename, so reruns overwrite
/// atomically.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Validation(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn build_params(rho: f64, model: &ModelArgs) -> Result<ModelParams, CliError> {
    let mut builder = ModelParams::builder(rho)
        .n(model.n)
        .dt(model.dt)
        .sigma_f(model.sigma_f)
        .x0(model.x0)
        .steps(model.steps)
        .burn_in(model.burn_in)
        .seed(model.seed)
        .phi_noise(model.phi_noise.into())
        .boundary(model.boundary.into());
    if let Some(lambda) = model.lambda {
        builder = builder.lambda(lambda);
    }
    if let Some(b) = model.b {
        builder = builder.b(b);
    }
    Ok(builder.build()?)
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let params = build_params(args.rho, &args.model)?;
    let series = run_simulation(&params)?;
    ensure_out_dir(&args.out)?;

    let series_file = match args.format {
        crate::FormatArg::Csv => {
            let mut buf = Vec::new();
            write_series_csv(&mut buf, &series)?;
            write_atomic(&args.out.join("series.csv"), &buf)?;
            "series.csv"
        }
        crate::FormatArg::Json => {
            write_atomic(&args.out.join("series.json"), &to_json_bytes(&series)?)?;
            "series.json"
        }
    };

    let meta = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "simulate",
        "params": params,
        "clamp_events": series.clamp_events,
        "clamp_warning": series.clamp_warning(),
        "series_file": series_file,
        "wall_time_ms": start.elapsed().as_millis() as u64,
    });
    write_atomic(&args.out.join("meta.json"), &to_json_bytes(&meta)?)?;
    if series.clamp_warning() {
        eprintln!(
            "spinmkt: warning: {} boundary interventions over {} steps; the diffusion approximation is strained",
            series.clamp_events, params.steps
        );
    }
    Ok(())
}

/// Resolve the volume floor to subtract before tail analysis.
///
/// `auto` looks for `meta.json` next to the input and uses `b·n/2` from its
/// parameter echo; absent that (empirical data), no floor is removed.
fn resolve_volume_floor(arg: &str, input: &Path) -> Result<f64, CliError> {
    match arg {
        "none" => Ok(0.0),
        "auto" => {
            let meta_path = input
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("meta.json");
            if let Ok(text) = fs::read_to_string(&meta_path) {
                if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
                    let b = value.pointer("/params/b").and_then(|v| v.as_f64());
                    let n = value.pointer("/params/n").and_then(|v| v.as_f64());
                    if let (Some(b), Some(n)) = (b, n) {
                        return Ok(b * n / 2.0);
                    }
                }
            }
            Ok(0.0)
        }
        other => other.parse::<f64>().map_err(|_| {
            CliError::Validation(format!(
                "--volume-floor must be `auto`, `none` or a number (got `{other}`)"
            ))
        }),
    }
}

#[derive(Serialize)]
struct SeriesReport {
    count: usize,
    moments: spinmkt_core::tails::MomentSummary,
    fits: spinmkt_core::tails::TailFits,
    regime: spinmkt_core::tails::RegimeLabel,
    hill: Option<spinmkt_core::tails::HillEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acf_abs: Option<Vec<f64>>,
}

fn analyze_one(
    values: &[f64],
    analysis: &crate::AnalysisArgs,
    with_acf: bool,
) -> Result<SeriesReport, CliError> {
    let fits = fit_tail_family(values, analysis.q_threshold)?;
    let regime = label_fits(&fits, analysis.margin_min);
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let hill = hill_estimate(&mags, analysis.tail_fraction).ok();
    let acf = if with_acf {
        let max_lag = ACF_MAX_LAG.min(values.len().saturating_sub(1) / 10);
        if max_lag >= 1 {
            acf_abs(values, max_lag).ok()
        } else {
            None
        }
    } else {
        None
    };
    Ok(SeriesReport {
        count: values.len(),
        moments: moments(values)?,
        fits,
        regime,
        hill,
        acf_abs: acf,
    })
}

fn write_plot_csv(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
    let mut text = String::with_capacity(points.len() * 24 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for (x, y) in points {
        text.push_str(&format!("{x},{y}\n"));
    }
    write_atomic(path, text.as_bytes())
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let file = fs::File::open(&args.input)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let data: SeriesData = read_series_csv(file)?;
    let returns = data.returns();
    let floor = resolve_volume_floor(&args.volume_floor, &args.input)?;
    let volume: Vec<f64> = data.volume().iter().map(|v| v - floor).collect();

    let ret_report = analyze_one(&returns, &args.analysis, true)?;
    let vol_report = analyze_one(&volume, &args.analysis, false)?;

    ensure_out_dir(&args.out)?;
    let ret_mags: Vec<f64> = returns.iter().map(|v| v.abs()).collect();
    write_plot_csv(&args.out.join("returns_ccdf.csv"), "x,p", &ccdf(&ret_mags)?)?;
    write_plot_csv(
        &args.out.join("returns_hist.csv"),
        "bin_center,density",
        &histogram(&returns, HIST_BINS, YScale::Linear)?,
    )?;
    write_plot_csv(&args.out.join("volume_ccdf.csv"), "x,p", &ccdf(&volume)?)?;
    write_plot_csv(
        &args.out.join("volume_hist.csv"),
        "bin_center,density",
        &histogram(&volume, HIST_BINS, YScale::Linear)?,
    )?;

    let report = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "analyze",
        "input": args.input.display().to_string(),
        "settings": {
            "q_threshold": args.analysis.q_threshold,
            "tail_fraction": args.analysis.tail_fraction,
            "margin_min": args.analysis.margin_min,
            "volume_floor": floor,
            "histogram_bins": HIST_BINS,
            "acf_max_lag": ACF_MAX_LAG,
        },
        "returns": ret_report,
        "volume": vol_report,
    });
    write_atomic(&args.out.join("report.json"), &to_json_bytes(&report)?)?;
    Ok(())
}

pub fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let symbol = args.symbol.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let file = fs::File::open(&args.input)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.input.display())))?;
    let series = load_daily_csv(file, &symbol)?;

    ensure_out_dir(&args.out)?;
    let mut buf = Vec::new();
    write_empirical_csv(&mut buf, &series)?;
    write_atomic(&args.out.join("series.csv"), &buf)?;

    let meta = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "ingest",
        "source": args.input.display().to_string(),
        "symbol": series.symbol,
        "rows": series.len(),
        "first_date": series.dates.first().map(|d| d.to_string()),
        "last_date": series.dates.last().map(|d| d.to_string()),
    });
    write_atomic(&args.out.join("meta.json"), &to_json_bytes(&meta)?)?;
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let start = Instant::now();
    // rho in the base template is a placeholder; every cell overrides it.
    let base = build_params(args.rho.first().copied().unwrap_or(0.0), &args.model)?;
    let spec = SweepSpec {
        rho_grid: args.rho.clone(),
        replicates: args.replicates,
        base,
        workers: args.workers,
        analysis: AnalysisConfig {
            q_threshold: args.analysis.q_threshold,
            tail_fraction: args.analysis.tail_fraction,
            margin_min: args.analysis.margin_min,
        },
    };
    spec.validate()?;
    let result = run_sweep(&spec)?;

    ensure_out_dir(&args.out)?;
    let sweep_doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "sweep",
        "base_params": spec.base,
        "rho_grid": spec.rho_grid,
        "replicates": spec.replicates,
        "analysis": spec.analysis,
        "records": result.records,
        "summaries": result.summaries,
    });
    write_atomic(&args.out.join("sweep.json"), &to_json_bytes(&sweep_doc)?)?;

    let mut buf = Vec::new();
    result
        .write_summary_csv(&mut buf)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&args.out.join("sweep_summary.csv"), &buf)?;

    // timing lives outside the deterministic outputs
    let meta = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": "sweep",
        "workers": args.workers,
        "cells": result.records.len(),
        "wall_time_ms": start.elapsed().as_millis() as u64,
    });
    write_atomic(&args.out.join("meta.json"), &to_json_bytes(&meta)?)?;
    Ok(())
}
