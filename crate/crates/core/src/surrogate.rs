//! Comparison series: Fourier-filtered Gaussian noise with a prescribed Hurst
//! exponent, phase-randomized copies and shuffles.
//!
//! FFT convention: for a series of length `N` (odd or even) bin `k` carries
//! frequency `min(k, N - k) / N`, so bins `k` and `N - k` always get the same
//! real filter factor and the inverse transform stays real. For even `N` the
//! Nyquist bin `N / 2` is its own mirror. The zero-frequency amplitude is set
//! to 0.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;
use crate::series::TimeSeries;
use crate::stats;

pub const MIN_FILTERED_LENGTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    FourierFiltered,
    Shuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    /// Used by `FourierFiltered` only.
    pub target_h: f64,
    pub length: usize,
    pub seed: u64,
}

impl SurrogateSpec {
    pub fn fourier_filtered(target_h: f64, length: usize, seed: u64) -> Self {
        Self {
            kind: SurrogateKind::FourierFiltered,
            target_h,
            length,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return invalid(format!("length ≥ 2 required, got {}", self.length));
        }
        if !self.target_h.is_finite() {
            return invalid("target H must be finite");
        }
        Ok(())
    }
}

/// Gaussian noise with spectrum `|X(f)|^2 ~ f^{-(2H - 1)}`, normalized to mean 0
/// and variance 1.
pub fn fourier_filtered(spec: &SurrogateSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = spec.length;
    if n < MIN_FILTERED_LENGTH {
        return invalid(format!(
            "length ≥ {MIN_FILTERED_LENGTH} required, got {n}"
        ));
    }
    let h = spec.target_h;
    if !(h > 0.0 && h < 1.5) {
        return invalid(format!("target H {h} outside (0, 1.5)"));
    }
    let mut rng = rng_from_seed(spec.seed);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let exponent = -(2.0 * h - 1.0) / 2.0;
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64 / n as f64;
        *c *= f.powf(exponent);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    TimeSeries::new(standardize(values)?)
        .map(|s| s.with_meta("kind", "fourier_filtered").with_meta("target_h", h))
}

/// Random-phase copy keeping the Fourier amplitudes of `template`, normalized
/// to mean 0 and variance 1.
pub fn phase_randomized(template: &[f64], seed: u64) -> Result<TimeSeries> {
    let n = template.len();
    if n < MIN_FILTERED_LENGTH {
        return invalid(format!(
            "length ≥ {MIN_FILTERED_LENGTH} required, got {n}"
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut buf: Vec<Complex64> = template.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for k in 1..=(n - 1) / 2 {
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let c = Complex64::from_polar(buf[k].norm(), phase);
        buf[k] = c;
        buf[n - k] = c.conj();
    }
    if n % 2 == 0 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        buf[n / 2] = Complex64::new(sign * buf[n / 2].norm(), 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
    TimeSeries::new(standardize(values)?).map(|s| s.with_meta("kind", "phase_randomized"))
}

/// Uniform random permutation (Fisher–Yates).
pub fn shuffle(series: &TimeSeries, seed: u64) -> Result<TimeSeries> {
    if series.len() < 2 {
        return invalid(format!("length ≥ 2 required, got {}", series.len()));
    }
    let mut values = series.values().to_vec();
    values.shuffle(&mut rng_from_seed(seed));
    TimeSeries::new(values).map(|s| s.with_meta("kind", "shuffle"))
}

fn standardize(mut values: Vec<f64>) -> Result<Vec<f64>> {
    let m = stats::mean(&values);
    values.iter_mut().for_each(|v| *v -= m);
    let sd = stats::population_variance(&values).sqrt();
    if !(sd > 0.0) {
        return invalid("surrogate has zero variance");
    }
    values.iter_mut().for_each(|v| *v /= sd);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_variance_and_determinism() {
        for (h, n) in [(0.5, 1000), (0.8, 4097), (1.2, 64)] {
            let spec = SurrogateSpec::fourier_filtered(h, n, 9);
            let a = fourier_filtered(&spec).unwrap();
            let b = fourier_filtered(&spec).unwrap();
            assert_eq!(a.values(), b.values());
            assert_eq!(a.len(), n);
            assert!(stats::mean(a.values()).abs() < 1e-12);
            assert!((stats::population_variance(a.values()) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn flat_filter_is_white() {
        let n = 100_000;
        let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.5, n, 5)).unwrap();
        let v = x.values();
        let rho: f64 = v.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "rho1 = {rho}");
    }

    #[test]
    fn persistent_filter_correlates() {
        let n = 50_000;
        let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.8, n, 6)).unwrap();
        let v = x.values();
        let rho: f64 = v.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        // fGn lag-1 correlation is 2^{2H-1} - 1 = 0.516 at H = 0.8.
        assert!((rho - 0.516).abs() < 0.08, "rho1 = {rho}");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(fourier_filtered(&SurrogateSpec::fourier_filtered(1.5, 100, 0)).is_err());
        assert!(fourier_filtered(&SurrogateSpec::fourier_filtered(0.0, 100, 0)).is_err());
        assert!(fourier_filtered(&SurrogateSpec::fourier_filtered(0.7, 15, 0)).is_err());
        assert!(fourier_filtered(&SurrogateSpec::fourier_filtered(f64::NAN, 100, 0)).is_err());
        let one = TimeSeries::new(vec![1.0]).unwrap();
        assert!(shuffle(&one, 0).is_err());
    }

    #[test]
    fn shuffle_preserves_multiset() {
        let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.7, 999, 1)).unwrap();
        let s = shuffle(&x, 2).unwrap();
        assert_ne!(s.values(), x.values());
        let mut a = x.values().to_vec();
        let mut b = s.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
        assert_eq!(shuffle(&x, 2).unwrap().values(), s.values());
    }

    #[test]
    fn phase_randomization_keeps_amplitudes() {
        let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.9, 512, 3)).unwrap();
        let y = phase_randomized(x.values(), 4).unwrap();
        let amps = |v: &[f64]| {
            let mut buf: Vec<Complex64> = v.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            FftPlanner::new().plan_fft_forward(v.len()).process(&mut buf);
            buf.iter().map(|c| c.norm()).collect::<Vec<_>>()
        };
        let (ax, ay) = (amps(x.values()), amps(y.values()));
        for k in 1..512 {
            assert!((ax[k] - ay[k]).abs() < 1e-9 * ax[k].max(1.0), "bin {k}");
        }
        assert_ne!(x.values(), y.values());
    }
}
