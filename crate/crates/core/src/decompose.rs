//! Splitting the spread `Δh(q)` into a finite-size/linear part (FSE), a
//! fat-tail part (FT) and the nonlinear remainder
//! `Δh_NL = Δh - Δh_FSE - Δh_FT`.
//!
//! The FT part comes either from a calibrated power law `C(β) q^μ` that blends
//! into a saturation level at `q = 15`, or from Monte-Carlo ensembles of
//! q-Gaussian series with the tail exponent of the input. The FSE part comes
//! either from the closed formula
//!
//! ```text
//! Δh_FSE = C1 M^-eta1 xi + C0 M^-eta0 (1 - xi) - C M^-nu (Q - q),   xi = 2 - 2H
//! ```
//!
//! or from ensembles of Fourier-filtered Gaussian surrogates with the Hurst
//! exponent of the input.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, Estimate};
use crate::error::{invalid, Error, Result};
use crate::mfdfa::{fit_hq_mode, mfdfa, FitMode, HurstProfile, MfdfaConfig};
use crate::qgen::{self, QGaussianParams, Regime};
use crate::rng::{member_seed, rng_from_seed};
use crate::series::ReturnSeries;
use crate::spectrum::{self, delta_h_curve};
use crate::stats;
use crate::surrogate::{fourier_filtered, phase_randomized, SurrogateSpec};

pub const MIN_TAIL_SAMPLES: usize = 1000;
pub const MIN_TAIL_POINTS: usize = 50;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_ENSEMBLE: usize = 5;
pub const MIN_FT_LENGTH: usize = 100_000;
pub const DEFAULT_FT_LENGTH: usize = 1_000_000;
/// Upper end of the power-law/saturation blend.
pub const SATURATION_Q: f64 = 15.0;

// ---------------------------------------------------------------------------
// Tail exponent

/// Rank window of the tail fit: the top `fraction` of `|x|` without the
/// `skip_largest` largest order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub fraction: f64,
    pub skip_largest: usize,
}

impl Default for TailWindow {
    fn default() -> Self {
        Self {
            fraction: 0.02,
            skip_largest: 10,
        }
    }
}

impl TailWindow {
    fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return invalid(format!("tail fraction {} outside (0, 1]", self.fraction));
        }
        Ok(())
    }

    /// Last rank (1-based) in the window for `n` samples.
    fn end(&self, n: usize) -> usize {
        (self.fraction * n as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub beta: f64,
    /// Bootstrap 95% percentile interval.
    pub ci: (f64, f64),
    pub points: usize,
}

impl TailFit {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci.1 - self.ci.0)
    }
}

/// CCDF slope of `|x|` over the tail window with a bootstrap interval.
pub fn fit_tail_beta(returns: &ReturnSeries, window: TailWindow, seed: u64) -> Result<TailFit> {
    let magnitudes: Vec<f64> = returns.values().iter().map(|x| x.abs()).collect();
    fit_tail_magnitudes(magnitudes, window, seed)
}

/// Tail fit on already non-negative magnitudes.
pub fn fit_tail_magnitudes(mut mag: Vec<f64>, window: TailWindow, seed: u64) -> Result<TailFit> {
    window.validate()?;
    let n = mag.len();
    if n < MIN_TAIL_SAMPLES {
        return invalid(format!(
            "tail fit needs ≥ {MIN_TAIL_SAMPLES} samples, got {n}"
        ));
    }
    if mag.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return invalid("tail fit needs finite magnitudes");
    }
    let end = window.end(n);
    // Only the top `pool` values can reach the window of a resample, unless
    // fewer than `end` draws land in the pool (handled by a full resample).
    let pool = n.min(2 * end + 64);
    top_descending(&mut mag, pool);
    let top = &mag[..pool];
    let (beta, points) = ccdf_slope(&top[..end], n, window)?;

    let mut betas = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut draw = Vec::with_capacity(pool);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = rng_from_seed(member_seed(seed, b as u64));
        let in_pool = if pool == n {
            n
        } else {
            Binomial::new(n as u64, pool as f64 / n as f64)
                .map_err(|e| Error::InvalidInput(e.to_string()))?
                .sample(&mut rng) as usize
        };
        draw.clear();
        if in_pool >= end {
            draw.extend((0..in_pool).map(|_| top[rng.random_range(0..pool)]));
        } else {
            draw.extend((0..n).map(|_| mag[rng.random_range(0..n)]));
        }
        top_descending(&mut draw, end);
        if let Ok((bb, _)) = ccdf_slope(&draw[..end], n, window) {
            betas.push(bb);
        }
    }
    if betas.len() < BOOTSTRAP_RESAMPLES / 2 {
        return Err(Error::TailTooSparse {
            found: points,
            needed: MIN_TAIL_POINTS,
        });
    }
    betas.sort_by(f64::total_cmp);
    Ok(TailFit {
        beta,
        ci: (quantile(&betas, 0.025), quantile(&betas, 0.975)),
        points,
    })
}

/// Moves the `k` largest values to the front, sorted in descending order.
fn top_descending(v: &mut [f64], k: usize) {
    if k == 0 {
        return;
    }
    if k < v.len() {
        v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    }
    v[..k].sort_unstable_by(|a, b| b.total_cmp(a));
}

/// `-slope` of `ln(k / n)` against `ln x_(k)` over the window ranks.
fn ccdf_slope(sorted_desc: &[f64], n: usize, window: TailWindow) -> Result<(f64, usize)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &x) in sorted_desc.iter().enumerate().skip(window.skip_largest) {
        if x > 0.0 {
            xs.push(x.ln());
            ys.push(((i + 1) as f64 / n as f64).ln());
        }
    }
    if xs.len() < MIN_TAIL_POINTS {
        return Err(Error::TailTooSparse {
            found: xs.len(),
            needed: MIN_TAIL_POINTS,
        });
    }
    let fit = stats::linear_fit(&xs, &ys);
    if !fit.slope.is_finite() {
        return Err(Error::TailTooSparse {
            found: xs.len(),
            needed: MIN_TAIL_POINTS,
        });
    }
    Ok((-fit.slope, xs.len()))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryChoice {
    Auto,
    Symmetric,
    Asymmetric,
}

/// Separate fits of the right (`x > 0`) and left (`x < 0`) tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTest {
    pub right: TailFit,
    pub left: TailFit,
    pub asymmetric: bool,
}

/// Calls the tails asymmetric when the one-sided exponents differ by more than
/// their joint interval half-width.
pub fn detect_symmetry(values: &[f64], window: TailWindow, seed: u64) -> Result<SymmetryTest> {
    let right: Vec<f64> = values.iter().copied().filter(|&x| x > 0.0).collect();
    let left: Vec<f64> = values.iter().filter(|&&x| x < 0.0).map(|x| -x).collect();
    let right = fit_tail_magnitudes(right, window, member_seed(seed, 1))?;
    let left = fit_tail_magnitudes(left, window, member_seed(seed, 2))?;
    let joint = right.half_width().hypot(left.half_width());
    Ok(SymmetryTest {
        right,
        left,
        asymmetric: (right.beta - left.beta).abs() > joint,
    })
}

// ---------------------------------------------------------------------------
// Fat-tail calibration

/// One calibration row; `c` is the absolute coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtRow {
    pub q_tilde: f64,
    pub beta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    pub saturation_q15: f64,
    pub symmetric: bool,
}

impl FtRow {
    fn regime(&self) -> Regime {
        Regime::of_beta(self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtCalibration {
    rows: Vec<FtRow>,
    /// Largest q of the power law in the Gaussian regime.
    pub gaussian_q_max: f64,
    /// Largest q of the power law in the Lévy regime.
    pub levy_q_max: f64,
    pub provenance: String,
}

/// Interpolated `Δh_FT` coefficients for one β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtCoefficients {
    pub c: f64,
    pub mu: f64,
    pub saturation_q15: f64,
    pub power_law_q_max: f64,
}

const BUILTIN_ROWS: [(f64, f64, f64, f64, f64, bool); 16] = [
    (1.05, 39.0, 0.132e-3, 1.06, 9e-3, true),
    (1.2, 9.0, 0.154e-3, 1.06, 9e-3, true),
    (1.4, 4.0, 2.35e-3, 1.02, 8e-2, true),
    (1.6, 2.3, 6.42e-3, 1.05, 1.5e-1, true),
    (1.05, 39.0, 0.251e-3, 1.05, 4e-3, false),
    (1.2, 9.0, 0.422e-3, 0.95, 6e-3, false),
    (1.4, 4.0, 1.46e-3, 1.01, 5e-2, false),
    (1.6, 2.3, 2.76e-3, 1.03, 1.1e-1, false),
    (1.7, 1.86, 2.33e-2, 1.33, 0.52, true),
    (1.8, 1.5, 3.26e-2, 1.33, 0.62, true),
    (1.9, 1.22, 9.12e-2, 1.29, 0.73, true),
    (2.0, 1.0, 19.3e-2, 1.17, 0.85, true),
    (1.7, 1.86, 1.48e-2, 1.21, 0.47, false),
    (1.8, 1.5, 2.26e-2, 1.37, 0.46, false),
    (1.9, 1.22, 4.21e-2, 1.25, 0.44, false),
    (2.0, 1.0, 8.18e-2, 1.16, 0.42, false),
];

impl Default for FtCalibration {
    fn default() -> Self {
        Self::builtin()
    }
}

impl FtCalibration {
    /// Shipped table, fitted on q-Gaussian series of 10^10 points.
    pub fn builtin() -> Self {
        let rows = BUILTIN_ROWS
            .iter()
            .map(|&(q_tilde, beta, c, mu, saturation_q15, symmetric)| FtRow {
                q_tilde,
                beta,
                c,
                mu,
                saturation_q15,
                symmetric,
            })
            .collect();
        Self::new(rows, "built-in (q-Gaussian Monte Carlo, M = 10^10)".into())
            .expect("built-in calibration is valid")
    }

    pub fn new(rows: Vec<FtRow>, provenance: String) -> Result<Self> {
        for r in &rows {
            let finite = [r.q_tilde, r.beta, r.c, r.mu, r.saturation_q15]
                .iter()
                .all(|v| v.is_finite());
            if !finite || r.beta <= 0.0 {
                return invalid(format!("calibration row {r:?} is not finite"));
            }
            if r.c <= 0.0 || r.mu <= 0.0 {
                return invalid(format!("calibration row needs C > 0 and mu > 0: {r:?}"));
            }
        }
        for regime in [Regime::Gaussian, Regime::Levy] {
            if !rows.iter().any(|r| r.regime() == regime) {
                return invalid(format!("calibration has no {regime:?}-regime row"));
            }
        }
        for symmetric in [true, false] {
            for regime in [Regime::Gaussian, Regime::Levy] {
                let betas: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.symmetric == symmetric && r.regime() == regime)
                    .map(|r| r.beta)
                    .collect();
                let up = betas.windows(2).all(|w| w[1] > w[0]);
                let down = betas.windows(2).all(|w| w[1] < w[0]);
                if !(up || down) {
                    return invalid(format!(
                        "calibration betas not monotone in the {regime:?} block (symmetric = {symmetric})"
                    ));
                }
            }
        }
        Ok(Self {
            rows,
            gaussian_q_max: 5.0,
            levy_q_max: 1.0,
            provenance,
        })
    }

    pub fn rows(&self) -> &[FtRow] {
        &self.rows
    }

    /// Reads rows from CSV with header `q_tilde,beta,C,mu,saturation_q15,symmetric`.
    pub fn from_csv<R: Read>(reader: R, provenance: String) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<FtRow>, _>>()
            .map_err(|e| Error::Parse(format!("calibration CSV: {e}")))?;
        Self::new(rows, provenance)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn power_law_q_max(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Gaussian => self.gaussian_q_max,
            Regime::Levy => self.levy_q_max,
        }
    }

    fn sorted_rows(&self, symmetric: bool) -> Vec<FtRow> {
        let mut rows: Vec<FtRow> = self
            .rows
            .iter()
            .copied()
            .filter(|r| r.symmetric == symmetric)
            .collect();
        rows.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        rows
    }

    /// Range of β covered by the rows of one symmetry class.
    pub fn beta_hull(&self, symmetric: bool) -> Option<(f64, f64)> {
        let rows = self.sorted_rows(symmetric);
        Some((rows.first()?.beta, rows.last()?.beta))
    }

    /// `C`, `mu` and saturation at `beta`: linear in `(ln β, ln C)`,
    /// `(ln β, mu)` and `(ln β, ln S)` between neighbouring rows.
    pub fn coefficients(
        &self,
        beta: f64,
        symmetric: bool,
        allow_extrapolation: bool,
    ) -> Result<FtCoefficients> {
        if !(beta > 0.0) || !beta.is_finite() {
            return invalid(format!("beta must be positive and finite, got {beta}"));
        }
        let rows = self.sorted_rows(symmetric);
        let q_max = self.power_law_q_max(Regime::of_beta(beta));
        if let Some(r) = rows.iter().find(|r| r.beta == beta) {
            return Ok(FtCoefficients {
                c: r.c,
                mu: r.mu,
                saturation_q15: r.saturation_q15,
                power_law_q_max: q_max,
            });
        }
        let (lo, hi) = match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => (a.beta, b.beta),
            _ => return invalid(format!("calibration has no rows with symmetric = {symmetric}")),
        };
        if rows.len() < 2 || ((beta < lo || beta > hi) && !allow_extrapolation) {
            return Err(Error::ExtrapolationRefused { beta, lo, hi });
        }
        let i = rows
            .windows(2)
            .position(|w| beta < w[1].beta)
            .unwrap_or(rows.len() - 2);
        let (a, b) = (rows[i], rows[i + 1]);
        let t = (beta.ln() - a.beta.ln()) / (b.beta.ln() - a.beta.ln());
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Ok(FtCoefficients {
            c: lerp(a.c.ln(), b.c.ln()).exp(),
            mu: lerp(a.mu, b.mu),
            saturation_q15: lerp(a.saturation_q15.ln(), b.saturation_q15.ln()).exp(),
            power_law_q_max: q_max,
        })
    }
}

impl FtCoefficients {
    /// `C q^mu` up to the power-law limit, then a straight line to the
    /// saturation value at `q = 15`, constant beyond.
    pub fn evaluate(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return invalid(format!("Δh_FT needs q ≥ 0, got {q}"));
        }
        let q0 = self.power_law_q_max;
        if q <= q0 {
            return Ok(self.c * q.powf(self.mu));
        }
        if q >= SATURATION_Q {
            return Ok(self.saturation_q15);
        }
        let v0 = self.c * q0.powf(self.mu);
        Ok(v0 + (self.saturation_q15 - v0) * (q - q0) / (SATURATION_Q - q0))
    }
}

pub fn delta_h_ft_powerlaw(
    beta: f64,
    q: f64,
    symmetric: bool,
    calibration: &FtCalibration,
    allow_extrapolation: bool,
) -> Result<f64> {
    calibration
        .coefficients(beta, symmetric, allow_extrapolation)?
        .evaluate(q)
}

// ---------------------------------------------------------------------------
// Finite-size formula

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FseParams {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub eta1: f64,
    pub eta0: f64,
    pub nu: f64,
    #[serde(rename = "Q")]
    pub big_q: f64,
}

impl FseParams {
    /// Parses `key = value` lines (`C1`, `C0`, `C`, `eta1`, `eta0`, `nu`, `Q`).
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Parse(format!("FSE parameters: {e}")))?;
        let all = [p.c1, p.c0, p.c, p.eta1, p.eta0, p.nu, p.big_q];
        if all.iter().any(|v| !v.is_finite()) {
            return invalid("FSE parameters must be finite");
        }
        Ok(p)
    }

    pub fn evaluate(&self, hurst: f64, length: usize, q: f64) -> f64 {
        let m = length as f64;
        let xi = 2.0 - 2.0 * hurst;
        self.c1 * m.powf(-self.eta1) * xi + self.c0 * m.powf(-self.eta0) * (1.0 - xi)
            - self.c * m.powf(-self.nu) * (self.big_q - q)
    }
}

pub fn delta_h_fse(params: Option<&FseParams>, hurst: f64, length: usize, q: f64) -> Result<f64> {
    let Some(p) = params else {
        return Err(Error::FseParamsUnset("no parameter file given".into()));
    };
    if !(hurst > 0.0 && hurst < 1.5) {
        return invalid(format!("H = {hurst} outside (0, 1.5)"));
    }
    if length < 100 {
        return invalid(format!("M ≥ 100 required, got {length}"));
    }
    Ok(p.evaluate(hurst, length, q))
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Ensemble estimate of `Δh(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub q: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Member standard deviation, i.e. the scatter of a single series.
    pub sd: f64,
}

impl SpreadEstimate {
    pub fn ci95(&self) -> f64 {
        1.96 * self.stderr
    }
}

/// Runs MFDFA on `members` generated series and averages `Δh(q)`.
pub fn spread_ensemble<G>(
    config: &MfdfaConfig,
    fit_mode: FitMode,
    members: usize,
    seed: u64,
    generate: G,
) -> Result<Vec<SpreadEstimate>>
where
    G: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if members < MIN_ENSEMBLE {
        return invalid(format!("ensemble ≥ {MIN_ENSEMBLE} required, got {members}"));
    }
    let curves = ensemble::run(members, seed, |s| {
        let x = generate(s)?;
        let profile = fit_hq_mode(&mfdfa(&x, config)?, fit_mode)?;
        Ok(delta_h_curve(&profile))
    })?;
    let qs: Vec<f64> = curves[0].iter().map(|p| p.q).collect();
    let rows: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| c.iter().map(|p| p.delta_h).collect())
        .collect();
    Ok(qs
        .into_iter()
        .zip(ensemble::columns(&rows)?)
        .map(|(q, Estimate { mean, stderr, members })| SpreadEstimate {
            q,
            mean,
            stderr,
            sd: stderr * (members as f64).sqrt(),
        })
        .collect())
}

/// `Δh(q)` of q-Gaussian series with tail exponent `beta`.
pub fn delta_h_ft_montecarlo(
    beta: f64,
    symmetric: bool,
    length: usize,
    config: &MfdfaConfig,
    fit_mode: FitMode,
    members: usize,
    seed: u64,
) -> Result<Vec<SpreadEstimate>> {
    if length < MIN_FT_LENGTH {
        return invalid(format!("M ≥ {MIN_FT_LENGTH} required, got {length}"));
    }
    let q_tilde = qgen::qtilde_from_beta(beta)?;
    let params = if symmetric {
        QGaussianParams::new(q_tilde)?
    } else {
        QGaussianParams::asymmetric(q_tilde)?
    };
    spread_ensemble(config, fit_mode, members, seed, |s| {
        Ok(qgen::sample(&params, length, s)?.into_values())
    })
}

/// `Δh(q)` of Fourier-filtered Gaussian series with Hurst exponent `hurst`.
pub fn delta_h_fse_montecarlo(
    hurst: f64,
    length: usize,
    config: &MfdfaConfig,
    fit_mode: FitMode,
    members: usize,
    seed: u64,
) -> Result<Vec<SpreadEstimate>> {
    spread_ensemble(config, fit_mode, members, seed, |s| {
        Ok(fourier_filtered(&SurrogateSpec::fourier_filtered(hurst, length, s))?.into_values())
    })
}

/// Same as [`delta_h_fse_montecarlo`] with phase-randomized copies of `template`.
pub fn delta_h_fse_montecarlo_matched(
    template: &[f64],
    config: &MfdfaConfig,
    fit_mode: FitMode,
    members: usize,
    seed: u64,
) -> Result<Vec<SpreadEstimate>> {
    spread_ensemble(config, fit_mode, members, seed, |s| {
        Ok(phase_randomized(template, s)?.into_values())
    })
}

/// Regenerates calibration rows by Monte Carlo: for every `(q_tilde,
/// symmetric)` pair, `C` and `mu` come from a log-log fit of the ensemble mean
/// `Δh(q)` over the regime's power-law range and the saturation from `q = 15`
/// (or the largest grid q).
pub fn calibrate_ft(
    cases: &[(f64, bool)],
    length: usize,
    config: &MfdfaConfig,
    fit_mode: FitMode,
    members: usize,
    seed: u64,
) -> Result<FtCalibration> {
    let base = FtCalibration::builtin();
    let mut rows = Vec::with_capacity(cases.len());
    for (i, &(q_tilde, symmetric)) in cases.iter().enumerate() {
        let beta = qgen::beta_from_qtilde(q_tilde)?;
        let curve = delta_h_ft_montecarlo(
            beta,
            symmetric,
            length,
            config,
            fit_mode,
            members,
            member_seed(seed, i as u64),
        )?;
        let q_max = base.power_law_q_max(Regime::of_beta(beta));
        let (xs, ys): (Vec<f64>, Vec<f64>) = curve
            .iter()
            .filter(|p| p.q <= q_max + 1e-9 && p.mean > 0.0)
            .map(|p| (p.q.ln(), p.mean.ln()))
            .unzip();
        if xs.len() < 3 {
            return invalid(format!(
                "q_tilde = {q_tilde}: fewer than 3 positive Δh values with q ≤ {q_max}"
            ));
        }
        let fit = stats::linear_fit(&xs, &ys);
        let last = curve.last().expect("non-empty curve");
        let saturation = curve
            .iter()
            .find(|p| (p.q - SATURATION_Q).abs() < 1e-9)
            .unwrap_or(last)
            .mean;
        rows.push(FtRow {
            q_tilde,
            beta,
            c: fit.intercept.exp(),
            mu: fit.slope,
            saturation_q15: saturation,
            symmetric,
        });
    }
    FtCalibration::new(
        rows,
        format!("Monte Carlo: M = {length}, ensemble = {members}, seed = {seed}"),
    )
}

// ---------------------------------------------------------------------------
// Decomposition

/// Spread values in a report are stored on this grid so that sums of the
/// components are exact in binary floating point.
pub const SPREAD_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;
/// Largest spread magnitude that stays exact on [`SPREAD_QUANTUM`].
pub const SPREAD_LIMIT: f64 = 1024.0;

/// Rounds `x` to the nearest multiple of [`SPREAD_QUANTUM`].
pub fn quantize_spread(x: f64) -> Result<f64> {
    if !(x.abs() < SPREAD_LIMIT) {
        return invalid(format!("spread value {x} outside ±{SPREAD_LIMIT}"));
    }
    Ok((x / SPREAD_QUANTUM).round() * SPREAD_QUANTUM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Formula,
    MonteCarlo,
}

/// Which linear structure the FSE surrogates copy from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMatching {
    /// Power-law filter with the input's `h(2)`.
    Hurst,
    /// Phase randomization of the input's own Fourier amplitudes.
    FullSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FseMethod {
    Formula { params: FseParams },
    MonteCarlo { ensemble: usize, matching: SurrogateMatching },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum FtMethod {
    PowerLaw {
        calibration: FtCalibration,
        allow_extrapolation: bool,
    },
    /// `length` defaults to `max(M, 10^6)`.
    MonteCarlo { ensemble: usize, length: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub mfdfa: MfdfaConfig,
    pub fit_mode: FitMode,
    pub fse: FseMethod,
    pub ft: FtMethod,
    pub symmetry: SymmetryChoice,
    /// Supplied tail exponent; fitted from the input when absent.
    pub beta: Option<f64>,
    pub tail_window: TailWindow,
    pub seed: u64,
}

impl DecomposeConfig {
    /// Monte-Carlo FSE (10 members, H-matched) and power-law FT with the
    /// built-in calibration.
    pub fn new(mfdfa: MfdfaConfig) -> Self {
        Self {
            mfdfa,
            fit_mode: FitMode::Full,
            fse: FseMethod::MonteCarlo {
                ensemble: 10,
                matching: SurrogateMatching::Hurst,
            },
            ft: FtMethod::PowerLaw {
                calibration: FtCalibration::builtin(),
                allow_extrapolation: false,
            },
            symmetry: SymmetryChoice::Auto,
            beta: None,
            tail_window: TailWindow::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub q: f64,
    pub delta_h: f64,
    pub delta_h_ci95: f64,
    pub delta_h_fse: f64,
    pub delta_h_fse_ci95: Option<f64>,
    pub delta_h_ft: f64,
    pub delta_h_ft_ci95: Option<f64>,
    /// Unclipped; `delta_h_nl + delta_h_fse + delta_h_ft == delta_h` exactly.
    pub delta_h_nl: f64,
    pub delta_h_nl_clipped: f64,
    /// Scatter of `Δh` between single realizations of the null model.
    pub delta_h_realization_ci95: Option<f64>,
    /// Quadrature sum of the available intervals.
    pub delta_h_nl_ci95: f64,
}

impl DecompositionRow {
    /// Quantizes the three measured spreads and forms the exact residual.
    pub fn new(
        q: f64,
        (delta_h, delta_h_ci95): (f64, f64),
        (delta_h_fse, delta_h_fse_ci95): (f64, Option<f64>),
        (delta_h_ft, delta_h_ft_ci95): (f64, Option<f64>),
    ) -> Result<Self> {
        let delta_h = quantize_spread(delta_h)?;
        let delta_h_fse = quantize_spread(delta_h_fse)?;
        let delta_h_ft = quantize_spread(delta_h_ft)?;
        let delta_h_nl = delta_h - delta_h_fse - delta_h_ft;
        let nl_ci = [Some(delta_h_ci95), delta_h_fse_ci95, delta_h_ft_ci95]
            .into_iter()
            .flatten()
            .fold(0.0f64, f64::hypot);
        Ok(Self {
            q,
            delta_h,
            delta_h_ci95,
            delta_h_fse,
            delta_h_fse_ci95,
            delta_h_ft,
            delta_h_ft_ci95,
            delta_h_nl,
            delta_h_nl_clipped: delta_h_nl.max(0.0),
            delta_h_realization_ci95: None,
            delta_h_nl_ci95: nl_ci,
        })
    }

    /// Adds the single-realization scatter of the null model to the NL interval.
    pub fn with_realization_ci95(mut self, ci: Option<f64>) -> Self {
        self.delta_h_realization_ci95 = ci;
        self.delta_h_nl_ci95 = [
            Some(self.delta_h_ci95),
            self.delta_h_fse_ci95,
            self.delta_h_ft_ci95,
            ci,
        ]
        .into_iter()
        .flatten()
        .fold(0.0f64, f64::hypot);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionInputs {
    pub length: usize,
    pub lag: u64,
    pub tick: u64,
    pub source_label: String,
    pub hurst: f64,
    pub hurst_ci95: f64,
    pub beta: f64,
    /// Absent when β was supplied.
    pub beta_ci: Option<(f64, f64)>,
    pub beta_supplied: bool,
    pub symmetric: bool,
    pub symmetry_choice: SymmetryChoice,
    pub symmetry_test: Option<SymmetryTest>,
    pub fse_matching: Option<SurrogateMatching>,
    pub fse_ensemble: Option<usize>,
    pub ft_ensemble: Option<usize>,
    pub ft_length: Option<usize>,
    pub fse_params: Option<FseParams>,
    pub calibration_provenance: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub rows: Vec<DecompositionRow>,
    pub fse_method: Method,
    pub ft_method: Method,
    pub inputs: DecompositionInputs,
    pub warnings: Vec<String>,
}

impl DecompositionReport {
    pub fn row(&self, q: f64) -> Option<&DecompositionRow> {
        self.rows.iter().find(|r| (r.q - q).abs() < 1e-9)
    }
}

/// Full decomposition of the input's `Δh(q)` at every positive grid q with a
/// mirrored negative q. Also returns the input's fitted profile.
pub fn decompose(
    returns: &ReturnSeries,
    config: &DecomposeConfig,
) -> Result<(DecompositionReport, HurstProfile)> {
    let x = returns.values();
    let m = x.len();
    let mut warnings = Vec::new();
    let profile = fit_hq_mode(&mfdfa(x, &config.mfdfa)?, config.fit_mode)?;
    let observed = delta_h_curve(&profile);
    if observed.is_empty() {
        return invalid("q grid has no ± pairs");
    }
    match spectrum::legendre(&profile) {
        Ok(s) if s.folded => warnings.push("singularity spectrum folds back".to_string()),
        _ => {}
    }
    let hurst = profile.hurst;
    let hurst_ci95 = profile.ci95[profile.index_of(2.0).expect("q = 2 on grid")];

    let (beta, beta_ci) = match config.beta {
        Some(b) => (b, None),
        None => {
            let fit = fit_tail_beta(returns, config.tail_window, member_seed(config.seed, 0))?;
            (fit.beta, Some(fit.ci))
        }
    };
    let symmetry_test = match config.symmetry {
        SymmetryChoice::Auto => Some(detect_symmetry(
            x,
            config.tail_window,
            member_seed(config.seed, 3),
        )?),
        _ => None,
    };
    let symmetric = match config.symmetry {
        SymmetryChoice::Symmetric => true,
        SymmetryChoice::Asymmetric => false,
        SymmetryChoice::Auto => !symmetry_test.expect("auto").asymmetric,
    };

    let mut inputs = DecompositionInputs {
        length: m,
        lag: returns.lag,
        tick: returns.tick,
        source_label: returns.source_label.clone(),
        hurst,
        hurst_ci95,
        beta,
        beta_ci,
        beta_supplied: config.beta.is_some(),
        symmetric,
        symmetry_choice: config.symmetry,
        symmetry_test,
        fse_matching: None,
        fse_ensemble: None,
        ft_ensemble: None,
        ft_length: None,
        fse_params: None,
        calibration_provenance: None,
        seed: config.seed,
    };

    let mut realization: Option<Vec<f64>> = None;
    let fse: Vec<(f64, Option<f64>)> = match &config.fse {
        FseMethod::Formula { params } => {
            inputs.fse_params = Some(*params);
            observed
                .iter()
                .map(|p| delta_h_fse(Some(params), hurst, m, p.q).map(|v| (v, None)))
                .collect::<Result<_>>()?
        }
        FseMethod::MonteCarlo { ensemble, matching } => {
            inputs.fse_matching = Some(*matching);
            inputs.fse_ensemble = Some(*ensemble);
            let seed = member_seed(config.seed, 1);
            let est = match matching {
                SurrogateMatching::Hurst => {
                    if !(hurst > 0.0 && hurst < 1.5) {
                        return invalid(format!(
                            "measured H = {hurst} outside the surrogate range (0, 1.5)"
                        ));
                    }
                    delta_h_fse_montecarlo(hurst, m, &config.mfdfa, config.fit_mode, *ensemble, seed)?
                }
                SurrogateMatching::FullSpectrum => delta_h_fse_montecarlo_matched(
                    x,
                    &config.mfdfa,
                    config.fit_mode,
                    *ensemble,
                    seed,
                )?,
            };
            realization = Some(est.iter().map(|e| 1.96 * e.sd).collect());
            est.iter().map(|e| (e.mean, Some(e.ci95()))).collect()
        }
    };

    let ft: Vec<(f64, Option<f64>)> = match &config.ft {
        FtMethod::PowerLaw {
            calibration,
            allow_extrapolation,
        } => {
            inputs.calibration_provenance = Some(calibration.provenance.clone());
            let coef = calibration.coefficients(beta, symmetric, *allow_extrapolation)?;
            if let Some((lo, hi)) = calibration.beta_hull(symmetric) {
                if beta < lo || beta > hi {
                    warnings.push(format!(
                        "beta = {beta:.3} extrapolated outside the calibrated range [{lo}, {hi}]"
                    ));
                }
            }
            observed
                .iter()
                .map(|p| coef.evaluate(p.q).map(|v| (v, None)))
                .collect::<Result<_>>()?
        }
        FtMethod::MonteCarlo { ensemble, length } => {
            let len = length.unwrap_or(m.max(DEFAULT_FT_LENGTH));
            inputs.ft_ensemble = Some(*ensemble);
            inputs.ft_length = Some(len);
            let est = delta_h_ft_montecarlo(
                beta,
                symmetric,
                len,
                &config.mfdfa,
                config.fit_mode,
                *ensemble,
                member_seed(config.seed, 2),
            )?;
            realization = Some(est.iter().map(|e| 1.96 * e.sd).collect());
            est.iter().map(|e| (e.mean, Some(e.ci95()))).collect()
        }
    };

    let rows = observed
        .iter()
        .zip(fse)
        .zip(ft)
        .enumerate()
        .map(|(i, ((p, fse), ft))| {
            DecompositionRow::new(p.q, (p.delta_h, p.ci95), fse, ft)
                .map(|r| r.with_realization_ci95(realization.as_ref().map(|v| v[i])))
        })
        .collect::<Result<_>>()?;
    let method = |mc: bool| if mc { Method::MonteCarlo } else { Method::Formula };
    Ok((
        DecompositionReport {
            rows,
            fse_method: method(matches!(config.fse, FseMethod::MonteCarlo { .. })),
            ft_method: method(matches!(config.ft, FtMethod::MonteCarlo { .. })),
            inputs,
            warnings,
        },
        profile,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfdfa::q_range;
    use proptest::prelude::*;
    use rand::Rng;

    fn pareto(n: usize, beta: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * u.powf(-1.0 / beta)
            })
            .collect()
    }

    #[test]
    fn pareto_tail_recovered() {
        let r = ReturnSeries::from_raw(pareto(100_000, 3.0, 1), 1, 1, "pareto").unwrap();
        let fit = fit_tail_beta(&r, TailWindow::default(), 2).unwrap();
        assert!((fit.beta - 3.0).abs() < 0.2, "beta = {}", fit.beta);
        assert!(fit.ci.0 < fit.beta && fit.beta < fit.ci.1);
        assert_eq!(fit.points, 2000 - 10);
        let again = fit_tail_beta(&r, TailWindow::default(), 2).unwrap();
        assert_eq!(fit, again);
    }

    #[test]
    fn sparse_tail_rejected() {
        let r = ReturnSeries::from_raw(pareto(2000, 3.0, 1), 1, 1, "p").unwrap();
        let e = fit_tail_beta(&r, TailWindow::default(), 0).unwrap_err();
        assert!(e.to_string().contains("tail too sparse"));
        let r = ReturnSeries::from_raw(pareto(500, 3.0, 1), 1, 1, "p").unwrap();
        assert!(fit_tail_beta(&r, TailWindow::default(), 0).is_err());
    }

    #[test]
    fn one_sided_tails() {
        let mut x = pareto(200_000, 3.0, 4);
        for v in x.iter_mut().filter(|v| **v > 0.0) {
            *v = v.powf(3.0 / 1.5);
        }
        let t = detect_symmetry(&x, TailWindow::default(), 5).unwrap();
        assert!(t.asymmetric);
        assert!((t.right.beta - 1.5).abs() < 0.15);
        assert!((t.left.beta - 3.0).abs() < 0.3);
    }

    #[test]
    fn calibration_table_lookups() {
        let cal = FtCalibration::builtin();
        assert_eq!(delta_h_ft_powerlaw(4.0, 1.0, true, &cal, false).unwrap(), 2.35e-3);
        assert_eq!(delta_h_ft_powerlaw(1.0, 15.0, true, &cal, false).unwrap(), 0.85);
        assert_eq!(delta_h_ft_powerlaw(1.0, 40.0, false, &cal, false).unwrap(), 0.42);
        for r in cal.rows() {
            let c = cal.coefficients(r.beta, r.symmetric, false).unwrap();
            assert_eq!((c.c, c.mu, c.saturation_q15), (r.c, r.mu, r.saturation_q15));
        }
        let e = delta_h_ft_powerlaw(0.8, 2.0, true, &cal, false).unwrap_err();
        assert!(e.to_string().contains("extrapolation refused"));
        assert!(delta_h_ft_powerlaw(50.0, 2.0, true, &cal, false).is_err());
        assert!(delta_h_ft_powerlaw(50.0, 2.0, true, &cal, true).is_ok());
        assert!(delta_h_ft_powerlaw(3.0, 1e-9, true, &cal, false).unwrap() < 1e-10);
        assert_eq!(delta_h_ft_powerlaw(3.0, 0.0, true, &cal, false).unwrap(), 0.0);
    }

    #[test]
    fn interpolation_is_log_linear() {
        let cal = FtCalibration::builtin();
        let mid = (4.0f64 * 9.0).sqrt();
        let c = cal.coefficients(mid, true, false).unwrap();
        assert!((c.c - (2.35e-3f64 * 0.154e-3).sqrt()).abs() < 1e-15);
        assert!((c.mu - 0.5 * (1.02 + 1.06)).abs() < 1e-12);
        assert_eq!(c.power_law_q_max, 5.0);
        assert_eq!(cal.coefficients(1.9, true, false).unwrap().power_law_q_max, 1.0);
    }

    #[test]
    fn calibration_csv_roundtrip_and_validation() {
        let cal = FtCalibration::builtin();
        let mut buf = Vec::new();
        cal.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q_tilde,beta,C,mu,saturation_q15,symmetric\n"));
        let back = FtCalibration::from_csv(text.as_bytes(), "file".into()).unwrap();
        assert_eq!(back.rows(), cal.rows());

        let gaussian_only = "q_tilde,beta,C,mu,saturation_q15,symmetric\n1.4,4,0.002,1,0.08,true\n";
        assert!(FtCalibration::from_csv(gaussian_only.as_bytes(), "x".into()).is_err());
        let bad_mu = "q_tilde,beta,C,mu,saturation_q15,symmetric\n1.4,4,0.002,-1,0.08,true\n2,1,0.1,1,0.8,true\n";
        assert!(FtCalibration::from_csv(bad_mu.as_bytes(), "x".into()).is_err());
    }

    #[test]
    fn fse_formula() {
        let p = FseParams::from_toml("C1 = 1.0\nC0 = 2.0\nC = 0.5\neta1 = 0.5\neta0 = 0.25\nnu = 0.5\nQ = 20\n")
            .unwrap();
        let m = 10_000usize;
        let v = delta_h_fse(Some(&p), 1.0, m, 3.0).unwrap();
        let expected = 2.0 * (m as f64).powf(-0.25) - 0.5 * (m as f64).powf(-0.5) * 17.0;
        assert!((v - expected).abs() < 1e-15);
        let e = delta_h_fse(None, 0.5, m, 2.0).unwrap_err();
        assert!(matches!(e, Error::FseParamsUnset(_)));
        assert!(delta_h_fse(Some(&p), 1.5, m, 2.0).is_err());
        assert!(delta_h_fse(Some(&p), 0.5, 99, 2.0).is_err());
        assert!(FseParams::from_toml("C1 = 1\n").is_err());
        assert!(FseParams::from_toml("C1=1\nC0=1\nC=1\neta1=1\neta0=1\nnu=1\nQ=1\nextra=2\n").is_err());
    }

    #[test]
    fn table_rows_reproduce() {
        let rows = [
            (0.39, 0.0275, 0.184, 0.178),
            (0.235, 0.0142, 0.0893, 0.13),
            (0.099, 0.029, 0.052, 0.026),
            (0.063, 0.043, 0.010, 0.009),
            (0.222, 0.011, 0.1, 0.11),
            (0.195, 0.021, 0.028, 0.146),
            (0.129, 0.0, 0.019, 0.107),
            (0.134, 0.038, 0.01, 0.086),
            (0.254, 0.027, 0.089, 0.138),
            (0.324, 0.032, 0.061, 0.23),
            (0.442, 0.027, 0.171, 0.243),
        ];
        for (dh, fse, ft, nl) in rows {
            let r = DecompositionRow::new(2.0, (dh, 0.0), (fse, None), (ft, None)).unwrap();
            assert_eq!(r.delta_h_nl + r.delta_h_fse + r.delta_h_ft, r.delta_h);
            assert!((r.delta_h_nl - nl).abs() <= 0.01, "{dh} {fse} {ft}");
        }
        let r = DecompositionRow::new(2.0, (0.442, 0.0), (0.027, None), (0.171, None)).unwrap();
        assert!((r.delta_h_ft / r.delta_h - 0.39).abs() < 0.005);
        let neg = DecompositionRow::new(2.0, (0.1, 0.01), (0.08, Some(0.02)), (0.05, None)).unwrap();
        assert!(neg.delta_h_nl < 0.0 && neg.delta_h_nl_clipped == 0.0);
        assert!((neg.delta_h_nl_ci95 - 0.01f64.hypot(0.02)).abs() < 1e-15);
        let wide = neg.with_realization_ci95(Some(0.02));
        assert_eq!(wide.delta_h_nl, neg.delta_h_nl);
        assert!((wide.delta_h_nl_ci95 - 0.01f64.hypot(0.02).hypot(0.02)).abs() < 1e-15);
    }

    #[test]
    fn decompose_with_supplied_inputs() {
        let x = pareto(100_000, 3.5, 9);
        let r = ReturnSeries::from_raw(x, 5, 5, "pareto").unwrap();
        let mfdfa = MfdfaConfig::for_length(r.len(), crate::mfdfa::DataKind::Synthetic)
            .unwrap()
            .with_q_grid(q_range(-4.0, 4.0, 1.0).unwrap())
            .unwrap();
        let mut cfg = DecomposeConfig::new(mfdfa);
        cfg.fse = FseMethod::MonteCarlo {
            ensemble: 5,
            matching: SurrogateMatching::Hurst,
        };
        cfg.seed = 11;
        let (rep, profile) = decompose(&r, &cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert_eq!(profile.q.len(), 9);
        assert_eq!(rep.fse_method, Method::MonteCarlo);
        assert_eq!(rep.ft_method, Method::Formula);
        assert!(rep.inputs.symmetric);
        assert!(!rep.inputs.beta_supplied);
        for row in &rep.rows {
            assert_eq!(row.delta_h_nl + row.delta_h_fse + row.delta_h_ft, row.delta_h);
        }
        let (again, _) = decompose(&r, &cfg).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn monte_carlo_preconditions() {
        let cfg = MfdfaConfig::for_length(100_000, crate::mfdfa::DataKind::Synthetic).unwrap();
        assert!(delta_h_ft_montecarlo(3.0, true, 50_000, &cfg, FitMode::Full, 5, 0).is_err());
        assert!(delta_h_ft_montecarlo(3.0, true, 100_000, &cfg, FitMode::Full, 4, 0).is_err());
        assert!(delta_h_fse_montecarlo(0.5, 100_000, &cfg, FitMode::Full, 3, 0).is_err());
    }

    proptest! {
        #[test]
        fn residual_identity_is_exact(
            dh in -2.0f64..2.0,
            fse in -1.0f64..1.0,
            ft in -1.0f64..1.0,
        ) {
            let r = DecompositionRow::new(1.0, (dh, 0.0), (fse, None), (ft, None)).unwrap();
            prop_assert_eq!(r.delta_h_nl + r.delta_h_fse + r.delta_h_ft, r.delta_h);
            prop_assert_eq!(r.delta_h_nl + (r.delta_h_fse + r.delta_h_ft), r.delta_h);
            prop_assert_eq!(r.delta_h_ft + r.delta_h_fse + r.delta_h_nl, r.delta_h);
            prop_assert!((r.delta_h - dh).abs() <= SPREAD_QUANTUM);
        }

        #[test]
        fn powerlaw_continuous_and_monotone(beta in 1.0f64..39.0, symmetric: bool) {
            let cal = FtCalibration::builtin();
            let c = cal.coefficients(beta, symmetric, false).unwrap();
            let q0 = c.power_law_q_max;
            let left = c.evaluate(q0).unwrap();
            let right = c.evaluate(q0 + 1e-12).unwrap();
            prop_assert!((left - right).abs() < 1e-9);
            prop_assert!((c.evaluate(15.0).unwrap() - c.evaluate(15.0 - 1e-12).unwrap()).abs() < 1e-9);
            let qs = q_range(0.0, 20.0, 0.05).unwrap();
            let v: Vec<f64> = qs.iter().map(|&q| c.evaluate(q).unwrap()).collect();
            for w in v.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }
    }
}
