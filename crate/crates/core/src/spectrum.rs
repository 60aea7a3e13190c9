//! Mass exponents, singularity spectrum and the spread `Δh`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mfdfa::HurstProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    pub q: Vec<f64>,
    /// `tau(q) = q h(q) - 1`
    pub tau: Vec<f64>,
    /// `alpha = d tau / d q`
    pub alpha: Vec<f64>,
    /// `f(alpha) = q alpha - tau`
    pub f_alpha: Vec<f64>,
    /// `alpha` at the smallest q.
    pub alpha_max: f64,
    /// `alpha` at the largest q.
    pub alpha_min: f64,
    pub delta_alpha: f64,
    /// `h(q_min) - h(q_max)`
    pub delta_h: f64,
    /// Set when `alpha` is not non-increasing in `q`, i.e. the curve folds back.
    pub folded: bool,
}

/// Legendre transform of `h(q)`.
pub fn legendre(profile: &HurstProfile) -> Result<SingularitySpectrum> {
    let q = &profile.q;
    let n = q.len();
    if n < 3 {
        return invalid(format!("at least 3 q values needed, got {n}"));
    }
    if q.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("q grid must be strictly increasing");
    }
    let tau: Vec<f64> = q.iter().zip(&profile.h).map(|(q, h)| q * h - 1.0).collect();
    let alpha: Vec<f64> = (0..n).map(|i| derivative(q, &tau, i)).collect();
    let f_alpha: Vec<f64> = (0..n).map(|i| q[i] * alpha[i] - tau[i]).collect();
    if tau.iter().chain(&alpha).any(|v| !v.is_finite()) {
        return invalid("h(q) must be finite on the whole grid");
    }
    let alpha_max = alpha[0];
    let alpha_min = alpha[n - 1];
    let scale = alpha_max.abs().max(1.0);
    let folded = alpha.windows(2).any(|w| w[1] > w[0] + 1e-9 * scale);
    Ok(SingularitySpectrum {
        q: q.clone(),
        tau,
        alpha,
        f_alpha,
        alpha_min,
        alpha_max,
        delta_alpha: alpha_max - alpha_min,
        delta_h: profile.h[0] - profile.h[n - 1],
        folded,
    })
}

/// Second-order finite difference on a nonuniform grid: centered inside,
/// one-sided three-point at the ends.
fn derivative(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let (a, b, c) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    // Derivative at x[i] of the parabola through the three points.
    let t = x[i];
    let (xa, xb, xc) = (x[a], x[b], x[c]);
    y[a] * (2.0 * t - xb - xc) / ((xa - xb) * (xa - xc))
        + y[b] * (2.0 * t - xa - xc) / ((xb - xa) * (xb - xc))
        + y[c] * (2.0 * t - xa - xb) / ((xc - xa) * (xc - xb))
}

/// `Δh(q) = h(-q) - h(q)` for `q > 0`.
pub fn delta_h(profile: &HurstProfile, q: f64) -> Result<f64> {
    delta_h_with_ci(profile, q).map(|(d, _)| d)
}

/// `Δh(q)` with the 95% half-width obtained by adding the two endpoint
/// intervals in quadrature.
pub fn delta_h_with_ci(profile: &HurstProfile, q: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return invalid(format!("Δh needs q > 0, got {q}"));
    }
    let hi = profile.index_of(q).ok_or(Error::QNotOnGrid(q))?;
    let lo = profile.index_of(-q).ok_or(Error::QNotOnGrid(-q))?;
    Ok((
        profile.h[lo] - profile.h[hi],
        profile.ci95[lo].hypot(profile.ci95[hi]),
    ))
}

/// One point of the `Δh(q)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadPoint {
    pub q: f64,
    pub delta_h: f64,
    pub ci95: f64,
}

/// `Δh(q)` for every positive grid `q` whose mirror is also on the grid.
pub fn delta_h_curve(profile: &HurstProfile) -> Vec<SpreadPoint> {
    profile
        .q
        .iter()
        .filter(|&&q| q > 0.0)
        .filter_map(|&q| {
            delta_h_with_ci(profile, q)
                .ok()
                .map(|(delta_h, ci95)| SpreadPoint { q, delta_h, ci95 })
        })
        .collect()
}
