//! Loading of user-supplied daily close/volume series and the close-to-close
//! log-return transform.
//!
//! Input schema is a UTF-8 CSV with header `date,close,volume`; non-trading
//! days are simply absent rows, and zero-volume days are kept as valid
//! observations.

use std::io::{Read, Write};

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("expected header `date,close,volume`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {problem}")]
    BadRow { line: usize, problem: String },
    #[error("line {line}: dates must be strictly increasing ({prev} then {next})")]
    NonMonotoneDates {
        line: usize,
        prev: NaiveDate,
        next: NaiveDate,
    },
    #[error("need at least 2 rows (got {0})")]
    TooShort(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Validated daily market data: strictly increasing dates, positive closes,
/// nonnegative volumes, all the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSeries {
    pub dates: Vec<NaiveDate>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
    pub symbol: String,
}

impl EmpiricalSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Serialize back to the input schema.
    pub fn to_csv<W: Write>(&self, w: W) -> Result<(), IngestError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["date", "close", "volume"])?;
        for i in 0..self.len() {
            out.write_record(&[
                self.dates[i].to_string(),
                format!("{}", self.close[i]),
                format!("{}", self.volume[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parse and validate a `date,close,volume` CSV. Errors carry the 1-based
/// line number of the offending row (the header is line 1).
pub fn load_daily_csv<R: Read>(source: R, symbol: &str) -> Result<EmpiricalSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields != ["date", "close", "volume"] {
        return Err(IngestError::BadHeader(fields.join(",")));
    }

    let mut dates = Vec::new();
    let mut close = Vec::new();
    let mut volume = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != 3 {
            return Err(IngestError::BadRow {
                line,
                problem: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let date: NaiveDate = record[0].parse().map_err(|e| IngestError::BadRow {
            line,
            problem: format!("bad date `{}`: {e}", &record[0]),
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(IngestError::NonMonotoneDates {
                    line,
                    prev,
                    next: date,
                });
            }
        }
        let c = parse_field(&record[1], "close", line)?;
        if c <= 0.0 {
            return Err(IngestError::BadRow {
                line,
                problem: format!("close must be positive (got {c})"),
            });
        }
        let v = parse_field(&record[2], "volume", line)?;
        if v < 0.0 {
            return Err(IngestError::BadRow {
                line,
                problem: format!("volume must be nonnegative (got {v})"),
            });
        }
        dates.push(date);
        close.push(c);
        volume.push(v);
    }
    if dates.len() < 2 {
        return Err(IngestError::TooShort(dates.len()));
    }
    Ok(EmpiricalSeries {
        dates,
        close,
        volume,
        symbol: symbol.to_string(),
    })
}

fn parse_field(raw: &str, name: &str, line: usize) -> Result<f64, IngestError> {
    if raw.is_empty() {
        return Err(IngestError::BadRow {
            line,
            problem: format!("missing {name}"),
        });
    }
    let v: f64 = raw.parse().map_err(|e| IngestError::BadRow {
        line,
        problem: format!("bad {name} `{raw}`: {e}"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::BadRow {
            line,
            problem: format!("{name} must be finite (got {v})"),
        });
    }
    Ok(v)
}

/// Close-to-close log returns, `r[t] = ln(close[t+1]) - ln(close[t])`;
/// one shorter than the input.
pub fn log_returns(series: &EmpiricalSeries) -> Vec<f64> {
    series
        .close
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect()
}
