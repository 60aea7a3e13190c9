//! Seeded Monte-Carlo ensembles.
//!
//! Member `i` always receives `member_seed(base, i)`, and results are collected
//! in member order, so the outcome does not depend on scheduling or on the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::member_seed;

/// Runs `members` independent jobs in parallel.
pub fn run<T, F>(members: usize, base_seed: u64, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if members == 0 {
        return invalid("ensemble needs at least one member");
    }
    (0..members as u64)
        .into_par_iter()
        .map(|i| job(member_seed(base_seed, i)))
        .collect()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub members: usize,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = crate::stats::mean(values);
        let stderr = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean,
            stderr,
            members: n,
        }
    }

    /// Half-width of the normal-approximation 95% interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.stderr
    }
}

/// Column-wise estimates over equally long member vectors.
pub fn columns(rows: &[Vec<f64>]) -> Result<Vec<Estimate>> {
    let Some(first) = rows.first() else {
        return invalid("no ensemble members");
    };
    if rows.iter().any(|r| r.len() != first.len()) {
        return invalid("ensemble members differ in length");
    }
    Ok((0..first.len())
        .map(|j| Estimate::of(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect())
}
