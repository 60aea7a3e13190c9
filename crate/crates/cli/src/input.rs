//! Reading input series from disk.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mfspread::series::{
    self, log_returns, normalize, read_price_csv, read_value_column, remove_overnight, resample,
    ReturnSeries, SessionCalendar,
};
use serde::Serialize;

use crate::fail::{CliError, CliResult};
use crate::output::{sha256_hex, FileRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// `timestamp,price` header selects prices, anything else values.
    Auto,
    /// One value per line, used as returns directly.
    Values,
    /// `timestamp,price` CSV converted to log-returns.
    Prices,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Input file: one value per line or a `timestamp,price` CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub format: InputFormat,
    /// Resampling step in seconds for price input.
    #[arg(long)]
    pub tick: Option<u64>,
    /// Return horizon in seconds (a multiple of --tick; defaults to --tick).
    #[arg(long)]
    pub lag: Option<u64>,
    /// Session calendar CSV (`date,open,close`); returns that span two
    /// sessions are dropped.
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    /// Offset of the calendar's local time from UTC in seconds.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub utc_offset: i64,
}

pub struct Loaded {
    pub returns: ReturnSeries,
    pub files: Vec<FileRecord>,
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn record(path: &Path, bytes: &[u8]) -> FileRecord {
    FileRecord {
        path: path.display().to_string(),
        bytes: bytes.len(),
        sha256: sha256_hex(bytes),
    }
}

fn looks_like_prices(bytes: &[u8]) -> bool {
    let first = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let first = String::from_utf8_lossy(first);
    let cols: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    cols == ["timestamp", "price"]
}

impl InputArgs {
    /// Checks flag combinations before anything is read.
    pub fn validate(&self) -> CliResult<()> {
        if self.tick == Some(0) || self.lag == Some(0) {
            return Err(CliError::usage("--tick and --lag must be positive"));
        }
        if let (Some(t), Some(l)) = (self.tick, self.lag) {
            if l % t != 0 {
                return Err(CliError::usage(format!(
                    "--lag {l} must be a multiple of --tick {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(&self) -> CliResult<Loaded> {
        self.validate()?;
        let bytes = read(&self.input)?;
        let mut files = vec![record(&self.input, &bytes)];
        let label = self
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let prices = match self.format {
            InputFormat::Auto => looks_like_prices(&bytes),
            InputFormat::Values => false,
            InputFormat::Prices => true,
        };
        if !prices {
            if self.calendar.is_some() || self.tick.is_some() {
                return Err(CliError::usage(
                    "--tick and --calendar apply to price input only",
                ));
            }
            let values = read_value_column(bytes.as_slice())?.into_values();
            let lag = self.lag.unwrap_or(1);
            let returns = ReturnSeries::from_raw(values, lag, 1, &label)?;
            return Ok(Loaded { returns, files });
        }

        let raw = read_price_csv(bytes.as_slice())?;
        let calendar = match &self.calendar {
            Some(path) => {
                let cal_bytes = read(path)?;
                files.push(record(path, &cal_bytes));
                Some(SessionCalendar::from_csv(cal_bytes.as_slice(), self.utc_offset)?)
            }
            None => None,
        };
        let (grid, tick) = match self.tick {
            Some(t) => (resample(&raw, t, calendar.as_ref())?, t),
            None => {
                if calendar.is_some() {
                    return Err(CliError::usage("--calendar needs --tick"));
                }
                (raw, 1)
            }
        };
        let lag = self.lag.unwrap_or(tick);
        let mut r = log_returns(&grid, lag, tick)?;
        if let Some(cal) = &calendar {
            r = remove_overnight(&r, cal, lag)?;
        }
        let mut returns = normalize(&r.with_meta("label", &label))?;
        returns.lag = lag;
        returns.tick = tick;
        Ok(Loaded { returns, files })
    }
}

/// Plain value file used by `surrogate --kind shuffle`.
pub fn load_values(path: &Path) -> CliResult<(series::TimeSeries, FileRecord)> {
    let bytes = read(path)?;
    let rec = record(path, &bytes);
    Ok((read_value_column(bytes.as_slice())?, rec))
}
