//! Replicated simulations over a grid of conformity values, classified into
//! tail regimes and tabulated — the interaction-strength-to-distribution
//! phase table.
//!
//! Cells are independent jobs on a bounded worker pool. Each cell's seed is
//! a fixed public mix of (master seed, grid index, replicate index), so any
//! cell can be reproduced in isolation and the result is byte-identical
//! regardless of worker count or scheduling. Cell failures are recorded as
//! data; the sweep itself fails only if every cell does.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelParams;
use crate::simulate::run_simulation;
use crate::tails::{classify_tail, hill_estimate, moments, TailClass};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("rho grid must be non-empty")]
    EmptyGrid,
    #[error("rho grid must be ascending without duplicates (position {0})")]
    UnsortedGrid(usize),
    #[error("rho values must be nonnegative and finite (got {0})")]
    BadRho(f64),
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("all {0} cells failed; first error: {1}")]
    AllCellsFailed(usize, String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Classification thresholds applied to every cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub q_threshold: f64,
    pub tail_fraction: f64,
    pub margin_min: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            q_threshold: crate::tails::DEFAULT_Q_THRESHOLD,
            tail_fraction: crate::tails::DEFAULT_TAIL_FRACTION,
            margin_min: crate::tails::DEFAULT_MARGIN_MIN,
        }
    }
}

/// A sweep to run: grid, replication, template parameters (rho and seed are
/// overridden per cell) and the worker bound.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub rho_grid: Vec<f64>,
    pub replicates: u32,
    pub base: ModelParams,
    pub workers: usize,
    pub analysis: AnalysisConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.rho_grid.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        for (i, &rho) in self.rho_grid.iter().enumerate() {
            if !(rho >= 0.0 && rho.is_finite()) {
                return Err(SweepError::BadRho(rho));
            }
            if i > 0 && rho <= self.rho_grid[i - 1] {
                return Err(SweepError::UnsortedGrid(i));
            }
        }
        if self.replicates == 0 {
            return Err(SweepError::NoReplicates);
        }
        if self.workers == 0 {
            return Err(SweepError::NoWorkers);
        }
        Ok(())
    }
}

/// One (rho, replicate) cell: classification results, or the error that
/// killed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub rho: f64,
    pub rho_index: usize,
    pub replicate: u32,
    pub seed: u64,
    pub return_regime: Option<TailClass>,
    pub volume_regime: Option<TailClass>,
    /// Hill tail index of |returns|, reported when the return regime is a
    /// power law.
    pub hill_alpha: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub clamp_events: Option<u64>,
    pub error: Option<String>,
}

/// Per-rho aggregation: majority labels and medians over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSummary {
    pub rho: f64,
    pub majority_return_regime: TailClass,
    pub majority_volume_regime: TailClass,
    pub median_alpha: Option<f64>,
    pub median_kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<CellRecord>,
    pub summaries: Vec<RhoSummary>,
}

impl SweepResult {
    /// Summary table as CSV:
    /// `rho,majority_return_regime,majority_volume_regime,median_alpha,median_kurtosis`.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<(), std::io::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "rho",
            "majority_return_regime",
            "majority_volume_regime",
            "median_alpha",
            "median_kurtosis",
        ])?;
        for s in &self.summaries {
            out.write_record(&[
                format!("{}", s.rho),
                class_name(s.majority_return_regime).to_string(),
                class_name(s.majority_volume_regime).to_string(),
                s.median_alpha.map(|v| format!("{v}")).unwrap_or_default(),
                s.median_kurtosis
                    .map(|v| format!("{v}"))
                    .unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn class_name(c: TailClass) -> &'static str {
    match c {
        TailClass::Gaussian => "gaussian",
        TailClass::Exponential => "exponential",
        TailClass::PowerLaw => "powerlaw",
        TailClass::Indeterminate => "indeterminate",
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-cell seed: two splitmix64 rounds folding in the grid
/// and replicate indices. Public so a single cell can be rerun in isolation.
pub fn cell_seed(master: u64, rho_index: usize, replicate: u32) -> u64 {
    let folded = splitmix64(master ^ (rho_index as u64).wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(folded ^ u64::from(replicate).wrapping_mul(0xe703_7ed1_a0b4_28db))
}

fn run_cell(spec: &SweepSpec, rho_index: usize, replicate: u32) -> CellRecord {
    let rho = spec.rho_grid[rho_index];
    let seed = cell_seed(spec.base.seed, rho_index, replicate);
    let mut params = spec.base.clone();
    params.rho = rho;
    params.seed = seed;

    let mut record = CellRecord {
        rho,
        rho_index,
        replicate,
        seed,
        return_regime: None,
        volume_regime: None,
        hill_alpha: None,
        excess_kurtosis: None,
        clamp_events: None,
        error: None,
    };

    let outcome = (|| -> Result<(), String> {
        let series = run_simulation(&params).map_err(|e| e.to_string())?;
        record.clamp_events = Some(series.clamp_events);
        let a = &spec.analysis;

        let returns = &series.returns;
        let ret_label =
            classify_tail(returns, a.q_threshold, a.margin_min).map_err(|e| e.to_string())?;
        record.return_regime = Some(ret_label.label);

        let fluct = series.volume_fluctuation();
        let vol_label =
            classify_tail(&fluct, a.q_threshold, a.margin_min).map_err(|e| e.to_string())?;
        record.volume_regime = Some(vol_label.label);

        record.excess_kurtosis = Some(moments(returns).map_err(|e| e.to_string())?.excess_kurtosis);

        if ret_label.label == TailClass::PowerLaw {
            let mags: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
            record.hill_alpha = Some(
                hill_estimate(&mags, a.tail_fraction)
                    .map_err(|e| e.to_string())?
                    .alpha,
            );
        }
        Ok(())
    })();

    if let Err(e) = outcome {
        record.error = Some(e);
    }
    record
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Strict majority over replicate labels; anything short of more than half,
/// ties included, is indeterminate.
pub fn majority_label(labels: &[TailClass]) -> TailClass {
    let mut counts = [0usize; 4];
    for &l in labels {
        let idx = match l {
            TailClass::Gaussian => 0,
            TailClass::Exponential => 1,
            TailClass::PowerLaw => 2,
            TailClass::Indeterminate => 3,
        };
        counts[idx] += 1;
    }
    let best = counts.iter().enumerate().max_by_key(|(_, &c)| c).unwrap().0;
    if 2 * counts[best] > labels.len() {
        match best {
            0 => TailClass::Gaussian,
            1 => TailClass::Exponential,
            2 => TailClass::PowerLaw,
            _ => TailClass::Indeterminate,
        }
    } else {
        TailClass::Indeterminate
    }
}

/// Run every (rho, replicate) cell on at most `spec.workers` threads and
/// aggregate per-rho majorities and medians, in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SweepError> {
    spec.validate()?;

    let cells: Vec<(usize, u32)> = (0..spec.rho_grid.len())
        .flat_map(|ri| (0..spec.replicates).map(move |rep| (ri, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    let records: Vec<CellRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(ri, rep)| run_cell(spec, ri, rep))
            .collect()
    });

    if records.iter().all(|r| r.error.is_some()) {
        let first = records[0].error.clone().unwrap_or_default();
        return Err(SweepError::AllCellsFailed(records.len(), first));
    }

    let mut summaries = Vec::with_capacity(spec.rho_grid.len());
    for (ri, &rho) in spec.rho_grid.iter().enumerate() {
        let cells: Vec<&CellRecord> = records.iter().filter(|r| r.rho_index == ri).collect();
        let ret_labels: Vec<TailClass> = cells.iter().filter_map(|c| c.return_regime).collect();
        let vol_labels: Vec<TailClass> = cells.iter().filter_map(|c| c.volume_regime).collect();
        let mut alphas: Vec<f64> = cells.iter().filter_map(|c| c.hill_alpha).collect();
        let mut kurts: Vec<f64> = cells.iter().filter_map(|c| c.excess_kurtosis).collect();
        summaries.push(RhoSummary {
            rho,
            majority_return_regime: majority_label(&ret_labels),
            majority_volume_regime: majority_label(&vol_labels),
            median_alpha: median(&mut alphas),
            median_kurtosis: median(&mut kurts),
        });
    }

    Ok(SweepResult { records, summaries })
}
