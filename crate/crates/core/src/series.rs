//! The shared on-disk series schema: CSV with header `step,x,ln_s,ret,volume`.
//!
//! Simulated runs fill every column (`ret` empty on the first row, since a
//! return needs two prices); empirical data leaves the model-only columns
//! `x` and `ln_s` empty. One schema means the analysis pipeline never cares
//! where a series came from.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{log_returns, EmpiricalSeries};
use crate::simulate::SimulationSeries;

#[derive(Debug, Error)]
pub enum SeriesIoError {
    #[error("expected header `step,x,ln_s,ret,volume`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {problem}")]
    BadRow { line: usize, problem: String },
    #[error("series file has no rows")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

const HEADER: [&str; 5] = ["step", "x", "ln_s", "ret", "volume"];

/// One row of the shared schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub step: u64,
    pub x: Option<f64>,
    pub ln_s: Option<f64>,
    pub ret: Option<f64>,
    pub volume: f64,
}

/// A loaded series file, with the analysis-relevant columns extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub rows: Vec<SeriesRow>,
}

impl SeriesData {
    /// Non-empty return entries, in order.
    pub fn returns(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ret).collect()
    }

    pub fn volume(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.volume).collect()
    }

    /// Attitude column when every row carries one (simulated data).
    pub fn x(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.x).collect()
    }
}

pub fn write_series_csv<W: Write>(w: W, series: &SimulationSeries) -> Result<(), SeriesIoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for j in 0..series.x.len() {
        let ret = if j == 0 {
            String::new()
        } else {
            format!("{}", series.returns[j - 1])
        };
        out.write_record(&[
            j.to_string(),
            format!("{}", series.x[j]),
            format!("{}", series.ln_s[j]),
            ret,
            format!("{}", series.volume[j]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Write an empirical series in the shared schema: `x` and `ln_s` empty,
/// `ret` the close-to-close log returns, `volume` as reported.
pub fn write_empirical_csv<W: Write>(w: W, series: &EmpiricalSeries) -> Result<(), SeriesIoError> {
    let returns = log_returns(series);
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    for j in 0..series.len() {
        let ret = if j == 0 {
            String::new()
        } else {
            format!("{}", returns[j - 1])
        };
        out.write_record(&[
            j.to_string(),
            String::new(),
            String::new(),
            ret,
            format!("{}", series.volume[j]),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_series_csv<R: Read>(r: R) -> Result<SeriesData, SeriesIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields != HEADER {
        return Err(SeriesIoError::BadHeader(fields.join(",")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<SeriesRow>().enumerate() {
        let row = record.map_err(|e| SeriesIoError::BadRow {
            line: i + 2,
            problem: e.to_string(),
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SeriesIoError::Empty);
    }
    Ok(SeriesData { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::load_daily_csv;
    use crate::model::ModelParams;
    use crate::simulate::run_simulation;

    #[test]
    fn simulated_series_round_trips() {
        let p = ModelParams::builder(2.0)
            .steps(50)
            .burn_in(10)
            .seed(1)
            .build()
            .unwrap();
        let s = run_simulation(&p).unwrap();
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();

        let data = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(data.rows.len(), 50);
        assert_eq!(data.returns(), s.returns);
        assert_eq!(data.volume(), s.volume);
        assert_eq!(data.x().unwrap(), s.x);
        assert!(data.rows[0].ret.is_none());
    }

    #[test]
    fn empirical_series_leaves_model_columns_empty() {
        let daily = "date,close,volume\n2001-01-04,100,10\n2001-01-05,110.517,20\n";
        let s = load_daily_csv(daily.as_bytes(), "T").unwrap();
        let mut buf = Vec::new();
        write_empirical_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("step,x,ln_s,ret,volume\n0,,,,10\n"));

        let data = read_series_csv(buf.as_slice()).unwrap();
        assert!(data.x().is_none());
        assert_eq!(data.volume(), vec![10.0, 20.0]);
        let r = data.returns();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.1).abs() < 1e-5);
    }

    #[test]
    fn read_rejects_wrong_schema() {
        assert!(matches!(
            read_series_csv("a,b\n1,2\n".as_bytes()),
            Err(SeriesIoError::BadHeader(_))
        ));
        assert!(matches!(
            read_series_csv("step,x,ln_s,ret,volume\n".as_bytes()),
            Err(SeriesIoError::Empty)
        ));
        assert!(matches!(
            read_series_csv("step,x,ln_s,ret,volume\n0,zz,1,,2\n".as_bytes()),
            Err(SeriesIoError::BadRow { line: 2, .. })
        ));
    }
}
