//! Writes the bundled sample: irregular ticks of a GARCH(1,1) price with
//! q-Gaussian innovations over 40 trading sessions, and the matching session
//! calendar.
//!
//! cargo run --release -p mfspread --example sample_data -- data

use std::fmt::Write as _;
use std::path::PathBuf;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use mfspread::qgen::{self, QGaussianParams};
use mfspread::rng::rng_from_seed;
use rand_distr::{Distribution, Exp};

const SESSIONS: usize = 40;
const UTC_OFFSET: i64 = -5 * 3600;
const OPEN: (u32, u32) = (9, 30);
const CLOSE: (u32, u32) = (16, 0);
const MEAN_GAP: f64 = 45.0;

fn main() {
    let dir: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "data".into()).into();
    std::fs::create_dir_all(&dir).expect("create output directory");

    let mut days = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(2024, 1, 8).unwrap();
    while days.len() < SESSIONS {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d += Duration::days(1);
    }

    let mut calendar = String::from("date,open,close\n");
    for day in &days {
        let _ = writeln!(
            calendar,
            "{},{:02}:{:02},{:02}:{:02}",
            day.format("%Y-%m-%d"),
            OPEN.0,
            OPEN.1,
            CLOSE.0,
            CLOSE.1
        );
    }

    let params = QGaussianParams::new(1.3).unwrap();
    let mut shocks = qgen::sample(&params, 200_000, 2024).unwrap().into_values();
    let sd = mfspread::stats::population_variance(&shocks).sqrt();
    shocks.iter_mut().for_each(|z| *z /= sd);
    let gaps = Exp::new(1.0 / MEAN_GAP).unwrap();
    let mut rng = rng_from_seed(7);
    let (omega, a, b): (f64, f64, f64) = (0.05, 0.08, 0.9);
    let mut var = omega / (1.0 - a - b);
    let mut log_p = 100f64.ln();
    let mut prev = 0.0;
    let mut k = 0;
    let mut prices = String::from("timestamp,price\n");
    for day in &days {
        let at = |(h, m): (u32, u32)| {
            day.and_hms_opt(h, m, 0).unwrap().and_utc().timestamp() - UTC_OFFSET
        };
        let (open, close) = (at(OPEN), at(CLOSE));
        let mut t = open as f64;
        while (t as i64) <= close {
            var = omega + a * prev * prev + b * var;
            let r = var.sqrt() * shocks[k % shocks.len()];
            k += 1;
            prev = r;
            log_p += 2e-4 * r;
            let _ = writeln!(prices, "{},{:.6}", t as i64, log_p.exp());
            t += gaps.sample(&mut rng).max(1.0);
        }
    }

    std::fs::write(dir.join("sample_prices.csv"), prices).expect("write prices");
    std::fs::write(dir.join("sample_calendar.csv"), calendar).expect("write calendar");
}
