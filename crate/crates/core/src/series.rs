//! Price and return series: tick alignment, log-returns, session handling and
//! normalization.
//!
//! Standard deviations use the population (1/N) convention throughout.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats;

/// A sequence of samples with optional integer timestamps (seconds).
///
/// Public constructors reject empty or non-finite input. The only way to get an
/// empty series is [`remove_overnight`] dropping every sample; downstream
/// operations reject it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<i64>>,
    meta: BTreeMap<String, String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        Ok(Self {
            values,
            timestamps: None,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_timestamps(values: Vec<f64>, timestamps: Vec<i64>) -> Result<Self> {
        check_values(&values)?;
        if timestamps.len() != values.len() {
            return invalid(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                values.len()
            ));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return invalid(format!(
                "timestamps must be strictly increasing ({} then {})",
                w[0], w[1]
            ));
        }
        Ok(Self {
            values,
            timestamps: Some(timestamps),
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn timestamps(&self) -> Option<&[i64]> {
        self.timestamps.as_deref()
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn meta_u64(&self, key: &str) -> Option<u64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return invalid("series must be non-empty");
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return invalid(format!("non-finite value at index {i}"));
    }
    Ok(())
}

/// Centered returns with unit population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    values: Vec<f64>,
    /// Return horizon Δt in seconds.
    pub lag: u64,
    /// Sampling step δt in seconds.
    pub tick: u64,
    pub source_label: String,
}

impl ReturnSeries {
    /// Normalizes `values` and wraps them.
    pub fn from_raw(values: Vec<f64>, lag: u64, tick: u64, source_label: &str) -> Result<Self> {
        let ts = TimeSeries::new(values)?
            .with_meta("lag", lag)
            .with_meta("tick", tick)
            .with_meta("label", source_label);
        normalize(&ts)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Trading sessions as `(open, close)` epoch seconds, closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCalendar {
    sessions: Vec<(i64, i64)>,
}

impl SessionCalendar {
    pub fn new(sessions: Vec<(i64, i64)>) -> Result<Self> {
        for &(open, close) in &sessions {
            if close <= open {
                return invalid(format!("session closes ({close}) before it opens ({open})"));
            }
        }
        if let Some(w) = sessions.windows(2).find(|w| w[1].0 <= w[0].1) {
            return invalid(format!(
                "sessions overlap or are out of order: ({}, {}) then ({}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            ));
        }
        Ok(Self { sessions })
    }

    pub fn sessions(&self) -> &[(i64, i64)] {
        &self.sessions
    }

    /// Index of the session containing `t`.
    pub fn session_of(&self, t: i64) -> Option<usize> {
        let idx = self.sessions.partition_point(|&(open, _)| open <= t);
        if idx == 0 {
            return None;
        }
        let (_, close) = self.sessions[idx - 1];
        (t <= close).then_some(idx - 1)
    }

    /// Parses `date,open,close` rows (`YYYY-MM-DD,HH:MM,HH:MM`). Times are local
    /// wall-clock times; `utc_offset` (seconds east of UTC) converts them to epoch
    /// seconds.
    pub fn from_csv<R: Read>(reader: R, utc_offset: i64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["date", "open", "close"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse(format!(
                "session calendar header must be `date,open,close`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut sessions = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let row = line + 2;
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|e| Error::Parse(format!("line {row}: bad date `{}`: {e}", &record[0])))?;
            let parse_time = |s: &str| {
                NaiveTime::parse_from_str(s, "%H:%M")
                    .map_err(|e| Error::Parse(format!("line {row}: bad time `{s}`: {e}")))
            };
            let open = date.and_time(parse_time(&record[1])?).and_utc().timestamp() - utc_offset;
            let close = date.and_time(parse_time(&record[2])?).and_utc().timestamp() - utc_offset;
            sessions.push((open, close));
        }
        Self::new(sessions)
    }
}

/// Aligns ticks to a uniform grid with last-observation-carried-forward.
///
/// Without a calendar the grid runs from the first tick to the first grid point
/// at or after the last tick. With a calendar, each session that contains at
/// least one tick contributes the grid `open, open + step, ..., <= close`; grid
/// points that precede every tick are skipped.
pub fn resample(
    ticks: &TimeSeries,
    tick_step: u64,
    calendar: Option<&SessionCalendar>,
) -> Result<TimeSeries> {
    let Some(ts) = ticks.timestamps() else {
        return invalid("resampling requires timestamps");
    };
    if tick_step == 0 {
        return invalid("tick step must be positive");
    }
    let step = tick_step as i64;
    let values = ticks.values();
    let first = ts[0];
    let last = *ts.last().expect("non-empty");

    let mut grid = Vec::new();
    match calendar {
        None => {
            let span = last - first;
            let points = (span + step - 1) / step;
            grid.extend((0..=points).map(|k| first + k * step));
        }
        Some(cal) => {
            for &(open, close) in cal.sessions() {
                let lo = ts.partition_point(|&t| t < open);
                let has_tick = lo < ts.len() && ts[lo] <= close;
                if !has_tick {
                    continue;
                }
                let mut t = open;
                while t <= close {
                    if t >= first {
                        grid.push(t);
                    }
                    t += step;
                }
            }
            if grid.is_empty() {
                return Err(Error::NoSessionData);
            }
        }
    }

    let mut out_values = Vec::with_capacity(grid.len());
    let mut j = 0usize;
    for &t in &grid {
        while j + 1 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        out_values.push(values[j]);
    }
    let mut out = TimeSeries::with_timestamps(out_values, grid)?;
    out.meta = ticks.meta.clone();
    Ok(out.with_meta("tick", tick_step))
}

/// `ln p(t + lag) - ln p(t)` for a series sampled every `tick` seconds.
pub fn log_returns(prices: &TimeSeries, lag: u64, tick: u64) -> Result<TimeSeries> {
    if tick == 0 || lag == 0 || lag % tick != 0 {
        return invalid(format!(
            "lag ({lag} s) must be a positive multiple of the tick step ({tick} s)"
        ));
    }
    let k = (lag / tick) as usize;
    let p = prices.values();
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositivePrice { index, value });
    }
    if p.len() <= k {
        return invalid(format!(
            "length ≥ 2 required: {} prices cannot form a return at lag {k} ticks",
            p.len()
        ));
    }
    let logs: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let values: Vec<f64> = logs[k..].iter().zip(&logs).map(|(b, a)| b - a).collect();
    let mut out = match prices.timestamps() {
        Some(ts) => TimeSeries::with_timestamps(values, ts[..p.len() - k].to_vec())?,
        None => TimeSeries::new(values)?,
    };
    out.meta = prices.meta.clone();
    Ok(out.with_meta("lag", lag).with_meta("tick", tick))
}

/// Drops every return whose interval `[t, t + lag]` is not contained in a single
/// session. Surviving samples keep their order and are concatenated.
pub fn remove_overnight(
    returns: &TimeSeries,
    calendar: &SessionCalendar,
    lag: u64,
) -> Result<TimeSeries> {
    let Some(ts) = returns.timestamps() else {
        return invalid("overnight removal requires timestamps");
    };
    let lag = lag as i64;
    let (mut values, mut stamps) = (Vec::new(), Vec::new());
    for (&t, &v) in ts.iter().zip(returns.values()) {
        if let Some(idx) = calendar.session_of(t) {
            if t + lag <= calendar.sessions()[idx].1 {
                values.push(v);
                stamps.push(t);
            }
        }
    }
    Ok(TimeSeries {
        values,
        timestamps: Some(stamps),
        meta: returns.meta.clone(),
    })
}

/// Centers and scales to unit population standard deviation.
pub fn normalize(returns: &TimeSeries) -> Result<ReturnSeries> {
    let v = returns.values();
    if v.len() < 2 {
        return invalid(format!("length ≥ 2 required, got {}", v.len()));
    }
    let m = stats::mean(v);
    let sd = stats::population_variance(v).sqrt();
    let scale = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if sd <= 1e-12 * scale || sd == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let values = v.iter().map(|x| (x - m) / sd).collect();
    Ok(ReturnSeries {
        values,
        lag: returns.meta_u64("lag").unwrap_or(1),
        tick: returns.meta_u64("tick").unwrap_or(1),
        source_label: returns.meta.get("label").cloned().unwrap_or_default(),
    })
}

/// Reads a `timestamp,price` CSV (header required).
pub fn read_price_csv<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "price" {
        return Err(Error::Parse(format!(
            "price file header must be `timestamp,price`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut stamps, mut prices) = (Vec::new(), Vec::new());
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let t: i64 = record[0]
            .parse()
            .map_err(|e| Error::Parse(format!("line {row}: bad timestamp `{}`: {e}", &record[0])))?;
        let p: f64 = record[1]
            .parse()
            .map_err(|e| Error::Parse(format!("line {row}: bad price `{}`: {e}", &record[1])))?;
        stamps.push(t);
        prices.push(p);
    }
    if prices.is_empty() {
        return invalid("length ≥ 2 required, price file has no rows");
    }
    TimeSeries::with_timestamps(prices, stamps)
}

/// Reads one value per line. A single non-numeric first line is treated as a
/// header; blank lines are skipped.
pub fn read_value_column<R: Read>(mut reader: R) -> Result<TimeSeries> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: `{line}`: {e}", i + 1))),
        }
    }
    if values.is_empty() {
        return invalid("length ≥ 2 required, file has no values");
    }
    TimeSeries::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stamped(values: &[f64], stamps: &[i64]) -> TimeSeries {
        TimeSeries::with_timestamps(values.to_vec(), stamps.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new(vec![]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::with_timestamps(vec![1.0, 2.0], vec![3, 3]).is_err());
        assert!(TimeSeries::with_timestamps(vec![1.0, 2.0], vec![3]).is_err());
    }

    #[test]
    fn resample_uniform_is_identity() {
        let ts = stamped(&[1.0, 2.0, 3.0], &[0, 5, 10]);
        let out = resample(&ts, 5, None).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(out.timestamps().unwrap(), &[0, 5, 10]);
    }

    #[test]
    fn resample_carries_last_observation_forward() {
        let ts = stamped(&[1.0, 2.0], &[0, 7]);
        let out = resample(&ts, 5, None).unwrap();
        assert_eq!(out.timestamps().unwrap(), &[0, 5, 10]);
        assert_eq!(out.values(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn resample_outside_sessions_fails() {
        let ts = stamped(&[1.0, 2.0], &[0, 7]);
        let cal = SessionCalendar::new(vec![(100, 200)]).unwrap();
        assert!(matches!(resample(&ts, 5, Some(&cal)), Err(Error::NoSessionData)));
    }

    #[test]
    fn resample_full_feed_point_count() {
        // 902 sessions with 782 points each at a 5 s step.
        let day = 86_400;
        let span = 781 * 5;
        let sessions: Vec<(i64, i64)> = (0..902).map(|d| (d * day, d * day + span)).collect();
        let cal = SessionCalendar::new(sessions.clone()).unwrap();
        let mut stamps = Vec::new();
        for &(open, close) in &sessions {
            let mut t = open;
            while t <= close {
                stamps.push(t);
                t += 5;
            }
        }
        let prices = vec![100.0; stamps.len()];
        let ticks = TimeSeries::with_timestamps(prices, stamps).unwrap();
        let out = resample(&ticks, 5, Some(&cal)).unwrap();
        assert_eq!(out.len(), 705_364);
    }

    #[test]
    fn log_return_examples() {
        let e = std::f64::consts::E;
        let r = log_returns(&TimeSeries::new(vec![1.0, e, e * e]).unwrap(), 5, 5).unwrap();
        assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let r = log_returns(&TimeSeries::new(vec![3.0; 4]).unwrap(), 5, 5).unwrap();
        assert_eq!(r.values(), &[0.0, 0.0, 0.0]);
        let r = log_returns(&TimeSeries::new(vec![2.0, 8.0]).unwrap(), 1, 1).unwrap();
        assert!((r.values()[0] - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_return_length_and_errors() {
        let p = TimeSeries::new((1..=30).map(|i| i as f64).collect()).unwrap();
        assert_eq!(log_returns(&p, 30, 5).unwrap().len(), 24);
        assert!(log_returns(&p, 7, 5).is_err());
        let bad = TimeSeries::new(vec![1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(
            log_returns(&bad, 1, 1),
            Err(Error::NonPositivePrice { index: 1, .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let r = normalize(&TimeSeries::new(vec![1.0, -1.0]).unwrap()).unwrap();
        assert_eq!(r.values(), &[1.0, -1.0]);
        let r = normalize(&TimeSeries::new(vec![3.0, 5.0]).unwrap()).unwrap();
        assert_eq!(r.values(), &[-1.0, 1.0]);
        let e = normalize(&TimeSeries::new(vec![0.1; 3]).unwrap()).unwrap_err();
        assert!(e.to_string().contains("degenerate series"));
        assert!(normalize(&TimeSeries::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn overnight_removal() {
        let cal = SessionCalendar::new(vec![(0, 100), (1000, 1100)]).unwrap();
        let single = stamped(&[1.0, 2.0, 3.0], &[0, 10, 20]);
        let out = remove_overnight(&single, &cal, 10).unwrap();
        assert_eq!(out.values(), single.values());

        let two = stamped(&[1.0, 2.0, 3.0, 4.0], &[80, 95, 1000, 1010]);
        let out = remove_overnight(&two, &cal, 10).unwrap();
        assert_eq!(out.values(), &[1.0, 3.0, 4.0]);
        assert_eq!(out.timestamps().unwrap(), &[80, 1000, 1010]);

        let all = stamped(&[1.0, 2.0], &[95, 1095]);
        let out = remove_overnight(&all, &cal, 10).unwrap();
        assert!(out.is_empty());
        assert!(normalize(&out).is_err());
    }

    #[test]
    fn calendar_parsing_and_validation() {
        let csv = "date,open,close\n2011-07-28,09:30,16:00\n2011-07-29,09:30,16:00\n";
        let cal = SessionCalendar::from_csv(csv.as_bytes(), 0).unwrap();
        let s = cal.sessions();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].1 - s[0].0, 6 * 3600 + 1800);
        assert_eq!(s[1].0 - s[0].0, 86_400);
        let shifted = SessionCalendar::from_csv(csv.as_bytes(), -4 * 3600).unwrap();
        assert_eq!(shifted.sessions()[0].0 - s[0].0, 4 * 3600);
        assert!(SessionCalendar::new(vec![(0, 10), (5, 20)]).is_err());
        assert!(SessionCalendar::from_csv("day,open,close\n".as_bytes(), 0).is_err());
    }

    #[test]
    fn csv_readers() {
        let ts = read_price_csv("timestamp,price\n0,1.5\n5,1.6\n".as_bytes()).unwrap();
        assert_eq!(ts.values(), &[1.5, 1.6]);
        assert!(read_price_csv("time,price\n0,1\n".as_bytes()).is_err());
        let v = read_value_column("value\n1\n\n2.5\n".as_bytes()).unwrap();
        assert_eq!(v.values(), &[1.0, 2.5]);
        assert!(read_value_column("1\nabc\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            prop_assume!(stats::population_variance(&v) > 1e-6);
            let once = normalize(&TimeSeries::new(v).unwrap()).unwrap();
            let m = stats::mean(once.values());
            let sd = stats::population_variance(once.values()).sqrt();
            prop_assert!(m.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
            let twice = normalize(&TimeSeries::new(once.values().to_vec()).unwrap()).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn log_returns_ignore_price_scale(
            p in prop::collection::vec(0.5f64..2.0, 3..50),
            k in prop::sample::select(vec![0.25f64, 2.0, 1024.0]),
        ) {
            // Power-of-two scalings are exact in binary floating point.
            let a = log_returns(&TimeSeries::new(p.clone()).unwrap(), 1, 1).unwrap();
            let scaled: Vec<f64> = p.iter().map(|v| v * k).collect();
            let b = log_returns(&TimeSeries::new(scaled).unwrap(), 1, 1).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-14);
            }
        }

        #[test]
        fn overnight_removal_preserves_order(
            gaps in prop::collection::vec(1i64..40, 2..100),
            lag in 1u64..30,
        ) {
            let mut t = 0;
            let stamps: Vec<i64> = gaps.iter().map(|g| { t += g; t }).collect();
            let values: Vec<f64> = (0..stamps.len()).map(|i| i as f64).collect();
            let cal = SessionCalendar::new(vec![(0, 300), (400, 700), (900, 5000)]).unwrap();
            let out = remove_overnight(&stamped(&values, &stamps), &cal, lag).unwrap();
            prop_assert!(out.values().windows(2).all(|w| w[0] < w[1]));
        }
    }
}
