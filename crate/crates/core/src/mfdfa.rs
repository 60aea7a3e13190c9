//! Multifractal detrended fluctuation analysis.
//!
//! The profile of the centered signal is cut into `K_s = floor(M / s)`
//! non-overlapping windows counted from the front and `K_s` more counted from
//! the back. Each window is detrended with a least-squares polynomial of order
//! `l` and its mean squared residual `F^2(nu, s)` is averaged with the q-th
//! order generalized mean
//!
//! ```text
//! F_q(s) = { 1/(2 K_s) sum_nu [F^2(nu, s)]^(q/2) }^(1/q)
//! ```
//!
//! with the logarithmic mean at `q = 0`. The generalized Hurst exponent `h(q)` is
//! the log-log slope of `F_q(s)` over the fit range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{self, LinearFit};

pub const DEFAULT_DETREND_ORDER: usize = 2;
pub const DEFAULT_S_MIN: usize = 40;
pub const DEFAULT_SCALE_COUNT: usize = 40;
pub const DEFAULT_Q_STEP: f64 = 0.25;
pub const DEFAULT_CROSSOVER_THRESHOLD: f64 = 0.05;

/// Whether a series is synthetic or empirical; sets the default largest scale
/// (`M / 20` and `M / 10` respectively).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Synthetic,
    Empirical,
}

impl DataKind {
    pub fn default_s_max(self, len: usize) -> usize {
        match self {
            DataKind::Synthetic => len / 20,
            DataKind::Empirical => len / 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfdfaConfig {
    /// Strictly increasing moment orders; must contain 2.
    pub q_grid: Vec<f64>,
    /// Strictly increasing window sizes.
    pub s_grid: Vec<usize>,
    pub detrend_order: usize,
    /// Fit range for `h(q)`.
    pub s_min: usize,
    pub s_max: usize,
}

impl MfdfaConfig {
    pub fn new(
        q_grid: Vec<f64>,
        s_grid: Vec<usize>,
        detrend_order: usize,
        s_min: usize,
        s_max: usize,
    ) -> Result<Self> {
        let cfg = Self {
            q_grid,
            s_grid,
            detrend_order,
            s_min,
            s_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default configuration for a series of length `len`: `q` from -10 to 10 in
    /// steps of 0.25, `l = 2`, 40 geometric scales from 40 to the kind's `s_max`.
    pub fn for_length(len: usize, kind: DataKind) -> Result<Self> {
        let s_max = kind.default_s_max(len);
        Self::new(
            q_range(-10.0, 10.0, DEFAULT_Q_STEP)?,
            geometric_scales(DEFAULT_S_MIN, s_max, DEFAULT_SCALE_COUNT)?,
            DEFAULT_DETREND_ORDER,
            DEFAULT_S_MIN,
            s_max,
        )
    }

    pub fn with_q_grid(mut self, q_grid: Vec<f64>) -> Result<Self> {
        self.q_grid = q_grid;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_grid.is_empty() || self.q_grid.iter().any(|q| !q.is_finite()) {
            return invalid("q grid must be non-empty and finite");
        }
        if self.q_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("q grid must be strictly increasing");
        }
        if !self.q_grid.iter().any(|&q| (q - 2.0).abs() < 1e-12) {
            return invalid("q grid must contain q = 2");
        }
        if self.s_grid.is_empty() {
            return invalid("scale grid must be non-empty");
        }
        if self.s_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("scale grid must be strictly increasing");
        }
        let smallest = self.s_grid[0];
        if smallest < self.detrend_order + 2 {
            return Err(Error::WindowTooShort {
                window: smallest,
                order: self.detrend_order,
            });
        }
        if self.s_min > self.s_max {
            return invalid(format!(
                "fit range is empty: s_min = {} > s_max = {}",
                self.s_min, self.s_max
            ));
        }
        Ok(())
    }

    /// Index of `q` on the grid.
    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_grid.iter().position(|&g| (g - q).abs() < 1e-9)
    }
}

/// `min, min + step, ..., max` with `0` snapped exactly.
pub fn q_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return invalid(format!("bad q range [{min}, {max}] step {step}"));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| {
            let q = min + i as f64 * step;
            let r = (q / step).round() * step;
            if (q - r).abs() < 1e-9 {
                r
            } else {
                q
            }
        })
        .collect())
}

/// `count` geometrically spaced integer scales from `s_min` to `s_max`
/// (duplicates after rounding removed).
pub fn geometric_scales(s_min: usize, s_max: usize, count: usize) -> Result<Vec<usize>> {
    if s_min == 0 || s_max < s_min || count == 0 {
        return invalid(format!(
            "bad scale range [{s_min}, {s_max}] with {count} points"
        ));
    }
    if count == 1 || s_max == s_min {
        return Ok(vec![s_min]);
    }
    let ratio = (s_max as f64 / s_min as f64).ln() / (count - 1) as f64;
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((s_min as f64).ln() + ratio * i as f64).exp().round() as usize)
        .collect();
    out[0] = s_min;
    out[count - 1] = s_max;
    out.dedup();
    Ok(out)
}

/// Cumulative sum of the mean-centered signal.
pub fn profile(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return invalid(format!("length ≥ 2 required, got {}", series.len()));
    }
    let m = stats::mean(series);
    let mut acc = 0.0;
    Ok(series
        .iter()
        .map(|x| {
            acc += x - m;
            acc
        })
        .collect())
}

/// Orthonormal polynomial basis on `0..s`, used to remove the local trend by
/// projection.
#[derive(Debug, Clone)]
pub struct Detrender {
    window: usize,
    basis: Vec<Vec<f64>>,
}

impl Detrender {
    pub fn new(window: usize, order: usize) -> Result<Self> {
        if window < order + 2 {
            return Err(Error::WindowTooShort { window, order });
        }
        let half = (window as f64 - 1.0) / 2.0;
        let t: Vec<f64> = (0..window)
            .map(|i| if half > 0.0 { (i as f64 - half) / half } else { 0.0 })
            .collect();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut v: Vec<f64> = t.iter().map(|x| x.powi(k as i32)).collect();
            // Modified Gram–Schmidt, applied twice.
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
        Ok(Self { window, basis })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Mean squared residual of the least-squares fit to `segment`.
    pub fn residual_variance(&self, segment: &[f64]) -> f64 {
        debug_assert_eq!(segment.len(), self.window);
        let coeffs: Vec<f64> = self
            .basis
            .iter()
            .map(|b| segment.iter().zip(b).map(|(y, e)| y * e).sum())
            .collect();
        let mut sse = 0.0;
        for (i, &y) in segment.iter().enumerate() {
            let mut fit = 0.0;
            for (c, b) in coeffs.iter().zip(&self.basis) {
                fit += c * b[i];
            }
            let r = y - fit;
            sse += r * r;
        }
        sse / self.window as f64
    }
}

/// Detrended variances of the `K_s` front windows followed by the `K_s` back
/// windows (the latter counted backwards from the end).
pub fn segment_variances(profile: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    let detrender = Detrender::new(window, order)?;
    segment_variances_with(profile, &detrender)
}

fn segment_variances_with(profile: &[f64], detrender: &Detrender) -> Result<Vec<f64>> {
    let s = detrender.window();
    let m = profile.len();
    let k = m / s;
    if k == 0 {
        return invalid(format!("window {s} longer than the series ({m})"));
    }
    let mut out = Vec::with_capacity(2 * k);
    for nu in 0..k {
        out.push(detrender.residual_variance(&profile[nu * s..(nu + 1) * s]));
    }
    for nu in 0..k {
        let end = m - nu * s;
        out.push(detrender.residual_variance(&profile[end - s..end]));
    }
    Ok(out)
}

/// Generalized means of the segment variances for every `q` (square root included).
fn generalized_means(variances: &[f64], q_grid: &[f64], scale: usize) -> Result<Vec<f64>> {
    let n = variances.len() as f64;
    let first_zero = variances.iter().position(|&v| v <= 0.0);
    let log_var: Vec<f64> = variances.iter().map(|v| v.ln()).collect();
    q_grid
        .iter()
        .map(|&q| {
            if let (Some(segment), true) = (first_zero, q < 0.0) {
                return Err(Error::DegenerateSegment { scale, segment, q });
            }
            if q == 0.0 {
                return Ok((stats::sum(&log_var) / (2.0 * n)).exp());
            }
            let half_q = 0.5 * q;
            let peak = log_var
                .iter()
                .map(|l| half_q * l)
                .fold(f64::NEG_INFINITY, f64::max);
            if peak == f64::NEG_INFINITY {
                return Ok(0.0);
            }
            let terms: Vec<f64> = log_var.iter().map(|l| (half_q * l - peak).exp()).collect();
            let log_mean = peak + (stats::sum(&terms) / n).ln();
            Ok((log_mean / q).exp())
        })
        .collect()
}

/// `F_q(s)` over the `(q, s)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSurface {
    /// `values[i][j]` is `F_{q_i}(s_j)`.
    pub values: Vec<Vec<f64>>,
    /// `2 K_s` per scale.
    pub segment_count: Vec<usize>,
    pub config: MfdfaConfig,
}

impl FluctuationSurface {
    pub fn q_grid(&self) -> &[f64] {
        &self.config.q_grid
    }

    pub fn s_grid(&self) -> &[usize] {
        &self.config.s_grid
    }

    /// `F_q(s)` row for grid index `qi`.
    pub fn row(&self, qi: usize) -> &[f64] {
        &self.values[qi]
    }

    /// Indices of the scales inside `[lo, hi]`.
    fn scale_indices(&self, lo: usize, hi: usize) -> Vec<usize> {
        (0..self.s_grid().len())
            .filter(|&j| (lo..=hi).contains(&self.s_grid()[j]))
            .collect()
    }
}

/// Builds the surface from per-scale variances (`variances[j]` belongs to
/// `config.s_grid[j]`).
pub fn fluctuation_function(
    variances: &[Vec<f64>],
    config: &MfdfaConfig,
) -> Result<FluctuationSurface> {
    config.validate()?;
    if variances.len() != config.s_grid.len() {
        return invalid(format!(
            "{} variance vectors for {} scales",
            variances.len(),
            config.s_grid.len()
        ));
    }
    if variances.iter().flatten().any(|v| !(*v >= 0.0)) {
        return invalid("segment variances must be non-negative");
    }
    let columns: Vec<Vec<f64>> = variances
        .iter()
        .zip(&config.s_grid)
        .map(|(v, &s)| generalized_means(v, &config.q_grid, s))
        .collect::<Result<_>>()?;
    Ok(assemble(columns, variances.iter().map(Vec::len).collect(), config))
}

fn assemble(columns: Vec<Vec<f64>>, segment_count: Vec<usize>, config: &MfdfaConfig) -> FluctuationSurface {
    let values = (0..config.q_grid.len())
        .map(|qi| columns.iter().map(|c| c[qi]).collect())
        .collect();
    FluctuationSurface {
        values,
        segment_count,
        config: config.clone(),
    }
}

/// Full pipeline from a raw signal to the fluctuation surface. Scales are
/// processed in parallel; the result does not depend on the thread count.
pub fn mfdfa(series: &[f64], config: &MfdfaConfig) -> Result<FluctuationSurface> {
    config.validate()?;
    let largest = *config.s_grid.last().expect("validated");
    if largest > series.len() {
        return invalid(format!(
            "largest scale {largest} exceeds the series length {}",
            series.len()
        ));
    }
    let prof = profile(series)?;
    let results: Vec<(Vec<f64>, usize)> = config
        .s_grid
        .par_iter()
        .map(|&s| {
            let detrender = Detrender::new(s, config.detrend_order)?;
            let variances = segment_variances_with(&prof, &detrender)?;
            let means = generalized_means(&variances, &config.q_grid, s)?;
            Ok((means, variances.len()))
        })
        .collect::<Result<_>>()?;
    let (columns, counts): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(assemble(columns, counts, config))
}

/// How the fit range for `h(q)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FitMode {
    /// All scales in `[s_min, s_max]`.
    Full,
    /// Per q, only the scales at or above the detected crossover (full range
    /// when none is detected).
    AboveCrossover { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstProfile {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    /// Standard error of each slope.
    pub stderr: Vec<f64>,
    /// Half-width of the 95% confidence interval of each slope.
    pub ci95: Vec<f64>,
    pub r2: Vec<f64>,
    /// Lower end of the scales used per q.
    pub fit_from: Vec<usize>,
    /// Main Hurst exponent `h(2)`.
    pub hurst: f64,
}

impl HurstProfile {
    pub fn index_of(&self, q: f64) -> Option<usize> {
        self.q.iter().position(|&g| (g - q).abs() < 1e-9)
    }

    pub fn at(&self, q: f64) -> Result<f64> {
        self.index_of(q).map(|i| self.h[i]).ok_or(Error::QNotOnGrid(q))
    }
}

fn log_fit(surface: &FluctuationSurface, qi: usize, idx: &[usize]) -> Result<LinearFit> {
    let q = surface.q_grid()[qi];
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &j in idx {
        let f = surface.values[qi][j];
        let s = surface.s_grid()[j];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::NonPositiveFluctuation { q, scale: s });
        }
        xs.push((s as f64).ln());
        ys.push(f.ln());
    }
    Ok(stats::linear_fit(&xs, &ys))
}

pub fn fit_hq(surface: &FluctuationSurface) -> Result<HurstProfile> {
    fit_hq_mode(surface, FitMode::Full)
}

pub fn fit_hq_mode(surface: &FluctuationSurface, mode: FitMode) -> Result<HurstProfile> {
    let cfg = &surface.config;
    let full = surface.scale_indices(cfg.s_min, cfg.s_max);
    if full.len() < 4 {
        return Err(Error::InsufficientScalingRange {
            found: full.len(),
            needed: 4,
            s_min: cfg.s_min,
            s_max: cfg.s_max,
        });
    }
    let crossovers = match mode {
        FitMode::Full => vec![None; cfg.q_grid.len()],
        FitMode::AboveCrossover { threshold } => detect_crossover_with(surface, threshold),
    };
    let n = cfg.q_grid.len();
    let mut profile = HurstProfile {
        q: cfg.q_grid.clone(),
        h: Vec::with_capacity(n),
        stderr: Vec::with_capacity(n),
        ci95: Vec::with_capacity(n),
        r2: Vec::with_capacity(n),
        fit_from: Vec::with_capacity(n),
        hurst: f64::NAN,
    };
    for qi in 0..n {
        let idx: Vec<usize> = match crossovers[qi] {
            Some(sx) => full
                .iter()
                .copied()
                .filter(|&j| surface.s_grid()[j] >= sx)
                .collect(),
            None => full.clone(),
        };
        if idx.len() < 4 {
            return Err(Error::InsufficientScalingRange {
                found: idx.len(),
                needed: 4,
                s_min: surface.s_grid()[idx.first().copied().unwrap_or(0)],
                s_max: cfg.s_max,
            });
        }
        let fit = log_fit(surface, qi, &idx)?;
        profile.h.push(fit.slope);
        profile.stderr.push(fit.slope_stderr);
        profile.ci95.push(fit.slope_ci95());
        profile.r2.push(fit.r2);
        profile.fit_from.push(surface.s_grid()[idx[0]]);
    }
    profile.hurst = profile.at(2.0)?;
    Ok(profile)
}

/// Crossover scale per q with the default slope-difference threshold.
pub fn detect_crossover(surface: &FluctuationSurface) -> Vec<Option<usize>> {
    detect_crossover_with(surface, DEFAULT_CROSSOVER_THRESHOLD)
}

/// Two-segment log-log fit with a shared breakpoint on the grid, chosen to
/// minimize the total squared error. Reported when the two slopes differ by
/// more than `threshold`. Needs at least 8 scales in the fit range.
pub fn detect_crossover_with(surface: &FluctuationSurface, threshold: f64) -> Vec<Option<usize>> {
    let cfg = &surface.config;
    let idx = surface.scale_indices(cfg.s_min, cfg.s_max);
    (0..cfg.q_grid.len())
        .map(|qi| {
            if idx.len() < 8 {
                return None;
            }
            let fits = |range: &[usize]| log_fit(surface, qi, range).ok();
            let mut best: Option<(f64, usize, f64)> = None;
            for b in 3..=idx.len() - 4 {
                let (Some(left), Some(right)) = (fits(&idx[..=b]), fits(&idx[b..])) else {
                    return None;
                };
                let sse = left.sse + right.sse;
                if best.is_none_or(|(e, _, _)| sse < e) {
                    best = Some((sse, b, (left.slope - right.slope).abs()));
                }
            }
            best.and_then(|(_, b, diff)| (diff > threshold).then(|| surface.s_grid()[idx[b]]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn synthetic_surface(scales: Vec<usize>, f: impl Fn(f64, usize) -> f64) -> FluctuationSurface {
        let q = q_range(-2.0, 2.0, 1.0).unwrap();
        let s_min = scales[0];
        let s_max = *scales.last().unwrap();
        let cfg = MfdfaConfig::new(q.clone(), scales.clone(), 2, s_min, s_max).unwrap();
        FluctuationSurface {
            values: q.iter().map(|&qq| scales.iter().map(|&s| f(qq, s)).collect()).collect(),
            segment_count: vec![2; scales.len()],
            config: cfg,
        }
    }

    #[test]
    fn profile_examples() {
        assert_eq!(profile(&[1.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(profile(&[2.5, 2.5, 2.5]).unwrap(), vec![0.0, 0.0, 0.0]);
        let x = gaussian(10_000, 1);
        let p = profile(&x).unwrap();
        let scale: f64 = x.iter().map(|v| v.abs()).sum();
        assert!(p.last().unwrap().abs() < 1e-8 * scale);
        assert!(profile(&[1.0]).is_err());
    }

    #[test]
    fn polynomial_profile_detrends_to_zero() {
        let prof: Vec<f64> = (0..600)
            .map(|i| {
                let t = i as f64;
                3.0 - 0.2 * t + 1e-3 * t * t
            })
            .collect();
        for s in [4, 10, 37, 100] {
            let v = segment_variances(&prof, s, 2).unwrap();
            assert_eq!(v.len(), 2 * (600 / s));
            assert!(v.iter().all(|&x| x < 1e-18), "s = {s}: {v:?}");
        }
    }

    #[test]
    fn order_zero_full_window_is_population_variance() {
        let x = gaussian(257, 2);
        let v = segment_variances(&x, x.len(), 0).unwrap();
        let pv = stats::population_variance(&x);
        assert_eq!(v.len(), 2);
        assert!((v[0] - pv).abs() < 1e-12 * pv);
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn back_segments_cover_the_tail() {
        // Length 10, s = 4: front windows [0,4), [4,8); back windows [6,10), [2,6).
        let prof: Vec<f64> = vec![0., 0., 0., 0., 0., 0., 0., 0., 5., -5.];
        let v = segment_variances(&prof, 4, 0).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 0.0);
        assert!(v[2] > 0.0);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn short_window_rejected() {
        let e = segment_variances(&[0.0; 20], 3, 2).unwrap_err();
        assert!(e.to_string().contains("window shorter than detrend order + 2"));
    }

    #[test]
    fn generalized_mean_examples() {
        let q = q_range(-3.0, 3.0, 0.5).unwrap();
        let f = generalized_means(&[2.0; 6], &q, 10).unwrap();
        assert!(f.iter().all(|&v| (v - 2f64.sqrt()).abs() < 1e-14));

        let v = [1.0, 4.0];
        let f = generalized_means(&v, &[-2.0, 0.0, 2.0], 10).unwrap();
        assert!((f[0] - (8.0f64 / 5.0).sqrt()).abs() < 1e-14);
        assert!((f[1] - 2f64.sqrt()).abs() < 1e-14);
        // q = 2: RMS of the segment RMS values.
        assert!((f[2] - (2.5f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn zero_variance_under_negative_moment_names_segment() {
        let e = generalized_means(&[1.0, 0.0, 2.0], &[-1.0, 2.0], 50).unwrap_err();
        match e {
            Error::DegenerateSegment { scale, segment, .. } => {
                assert_eq!((scale, segment), (50, 1));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(generalized_means(&[1.0, 0.0], &[2.0], 50).is_ok());
    }

    #[test]
    fn exact_power_law_fit() {
        let scales = geometric_scales(10, 10_000, 20).unwrap();
        let surface = synthetic_surface(scales, |_, s| (s as f64).powf(0.5));
        let hp = fit_hq(&surface).unwrap();
        for (&h, &e) in hp.h.iter().zip(&hp.stderr) {
            assert!((h - 0.5).abs() < 1e-12);
            assert!(e < 1e-12);
        }
        assert!((hp.hurst - 0.5).abs() < 1e-12);
        assert!(detect_crossover(&surface).iter().all(Option::is_none));
    }

    #[test]
    fn insufficient_scaling_range() {
        let surface = synthetic_surface(vec![10, 20, 40], |_, s| s as f64);
        let e = fit_hq(&surface).unwrap_err();
        assert!(e.to_string().contains("insufficient scaling range"));
    }

    #[test]
    fn crossover_on_piecewise_surface() {
        let scales = geometric_scales(40, 100_000, 40).unwrap();
        let brk = scales[20];
        let surface = synthetic_surface(scales.clone(), |_, s| {
            let s = s as f64;
            let b = brk as f64;
            if s <= b {
                s.powf(0.6)
            } else {
                b.powf(0.6) * (s / b).powf(0.5)
            }
        });
        for sx in detect_crossover(&surface) {
            let sx = sx.expect("crossover expected");
            let j = scales.iter().position(|&s| s == sx).unwrap();
            assert!((j as i64 - 20).abs() <= 1, "found {sx}, expected {brk}");
        }
        let hp = fit_hq_mode(&surface, FitMode::AboveCrossover { threshold: 0.05 }).unwrap();
        assert!(hp.h.iter().all(|h| (h - 0.5).abs() < 1e-9));
        assert!(hp.fit_from.iter().all(|&s| s == brk));
    }

    #[test]
    fn mirror_invariance() {
        let x = gaussian(20_000, 3);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let cfg = MfdfaConfig::for_length(x.len(), DataKind::Synthetic).unwrap();
        let a = fit_hq(&mfdfa(&x, &cfg).unwrap()).unwrap();
        let b = fit_hq(&mfdfa(&neg, &cfg).unwrap()).unwrap();
        for (u, v) in a.h.iter().zip(&b.h) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_hurst_is_one_half() {
        let x = gaussian(200_000, 4);
        let cfg = MfdfaConfig::for_length(x.len(), DataKind::Synthetic)
            .unwrap()
            .with_q_grid(vec![-2.0, 2.0])
            .unwrap();
        let hp = fit_hq(&mfdfa(&x, &cfg).unwrap()).unwrap();
        assert!((hp.hurst - 0.5).abs() < 0.03, "H = {}", hp.hurst);
    }

    #[test]
    fn config_validation() {
        assert!(MfdfaConfig::new(vec![1.0, 3.0], vec![10, 20], 2, 10, 20).is_err());
        assert!(MfdfaConfig::new(vec![2.0, 1.0], vec![10, 20], 2, 10, 20).is_err());
        assert!(MfdfaConfig::new(vec![2.0], vec![20, 10], 2, 10, 20).is_err());
        assert!(matches!(
            MfdfaConfig::new(vec![2.0], vec![3, 10], 2, 3, 10),
            Err(Error::WindowTooShort { .. })
        ));
        let q = q_range(-10.0, 10.0, 0.25).unwrap();
        assert_eq!(q.len(), 81);
        assert!(q.contains(&0.0) && q.contains(&2.0) && q.contains(&-10.0));
        let s = geometric_scales(40, 50_000, 40).unwrap();
        assert_eq!((s[0], *s.last().unwrap()), (40, 50_000));
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generalized_means_nondecreasing_in_q(
            v in prop::collection::vec(1e-6f64..1e6, 1..60),
        ) {
            let q = q_range(-10.0, 10.0, 0.5).unwrap();
            let f = generalized_means(&v, &q, 8).unwrap();
            for w in f.windows(2) {
                prop_assert!(w[1] >= w[0] * (1.0 - 1e-12), "{} then {}", w[0], w[1]);
            }
        }
    }
}
