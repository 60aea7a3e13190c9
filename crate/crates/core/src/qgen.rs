//! Tsallis q-Gaussian distributions: density, cumulative distribution and
//! seeded samplers for the symmetric and the one-sided (asymmetric) variant.
//!
//! The width is fixed by a unit escort (q-)variance, so the density is
//! `N (1 + (q - 1) B x^2)^(-1/(q - 1))` with `B = 1 / (3 - q)`. At `q = 1` this is
//! the standard normal.
//!
//! Samples come from the generalized Box–Muller transform
//! `Z = sqrt(-2 ln_q'(U1)) cos(2 pi U2)` with `q' = (1 + q) / (3 - q)`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::rng_from_seed;
use crate::series::TimeSeries;

/// Boundary between the Gaussian and the Lévy attractor.
pub const LEVY_THRESHOLD: f64 = 5.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Gaussian,
    Levy,
}

impl Regime {
    pub fn of(q_tilde: f64) -> Regime {
        if q_tilde >= LEVY_THRESHOLD {
            Regime::Levy
        } else {
            Regime::Gaussian
        }
    }

    /// Regime of a q-Gaussian with CDF tail exponent `beta`.
    pub fn of_beta(beta: f64) -> Regime {
        if beta <= 2.0 {
            Regime::Levy
        } else {
            Regime::Gaussian
        }
    }
}

/// Tail exponent of the cumulative distribution, `2 / (q - 1) - 1`.
pub fn beta_from_qtilde(q_tilde: f64) -> Result<f64> {
    if q_tilde.is_nan() || q_tilde <= 1.0 {
        return Err(Error::GaussianLimit(q_tilde));
    }
    if q_tilde > 2.0 {
        return Err(Error::OutsideSupportedRange(q_tilde));
    }
    Ok(2.0 / (q_tilde - 1.0) - 1.0)
}

/// Inverse of [`beta_from_qtilde`].
pub fn qtilde_from_beta(beta: f64) -> Result<f64> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "tail exponent beta = {beta} has no q-Gaussian with q_tilde in (1, 2]"
        )));
    }
    Ok(1.0 + 2.0 / (beta + 1.0))
}

/// Tsallis logarithm `(x^(1-q) - 1) / (1 - q)`.
pub fn ln_q(x: f64, q: f64) -> f64 {
    if (q - 1.0).abs() < 1e-12 {
        x.ln()
    } else {
        (x.powf(1.0 - q) - 1.0) / (1.0 - q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGaussianParams {
    pub q_tilde: f64,
    /// CDF tail exponent; infinite for `q_tilde <= 1`.
    pub beta: f64,
    /// Width parameter `a` of the density, `1 / (3 - q_tilde)`.
    pub a: f64,
    /// Right tail replaced by a half normal.
    pub asymmetric: bool,
}

impl QGaussianParams {
    /// Accepts `0 <= q_tilde <= 2`; values below 1 give compact support.
    pub fn new(q_tilde: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&q_tilde) {
            return Err(Error::OutsideSupportedRange(q_tilde));
        }
        let beta = if q_tilde > 1.0 {
            beta_from_qtilde(q_tilde)?
        } else {
            f64::INFINITY
        };
        Ok(Self {
            q_tilde,
            beta,
            a: 1.0 / (3.0 - q_tilde),
            asymmetric: false,
        })
    }

    pub fn asymmetric(q_tilde: f64) -> Result<Self> {
        Ok(Self {
            asymmetric: true,
            ..Self::new(q_tilde)?
        })
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.q_tilde)
    }

    fn is_gaussian(&self) -> bool {
        (self.q_tilde - 1.0).abs() < 1e-12
    }

    /// Density at the mode of the symmetric q-Gaussian.
    pub fn normalization(&self) -> f64 {
        let q = self.q_tilde;
        let b = self.a;
        if self.is_gaussian() {
            (b / PI).sqrt()
        } else if q < 1.0 {
            (ln_gamma((5.0 - 3.0 * q) / (2.0 - 2.0 * q)) - ln_gamma((2.0 - q) / (1.0 - q))).exp()
                * ((1.0 - q) * b / PI).sqrt()
        } else {
            (ln_gamma(1.0 / (q - 1.0)) - ln_gamma((3.0 - q) / (2.0 * (q - 1.0)))).exp()
                / (PI / ((q - 1.0) * b)).sqrt()
        }
    }

    /// Scale of the half normal used for the right tail of the asymmetric
    /// variant, chosen so both halves have the same density at zero.
    pub fn right_tail_sigma(&self) -> f64 {
        1.0 / (self.normalization() * (2.0 * PI).sqrt())
    }

    /// Upper end of the support of the symmetric density.
    pub fn support_edge(&self) -> f64 {
        if self.q_tilde < 1.0 && !self.is_gaussian() {
            1.0 / ((1.0 - self.q_tilde) * self.a).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn cdf_constants(&self) -> CdfConstants {
        let q = self.q_tilde;
        CdfConstants {
            normalization: self.normalization(),
            q_mean: 0.0,
            b: self.a,
            sigma_bar: 1.0,
            hyper_a: 0.5,
            hyper_b: 1.0 / (q - 1.0),
            hyper_c: 1.5,
            delta_coefficient: -self.a * (q - 1.0),
        }
    }

    /// Symmetric q-Gaussian density.
    fn symmetric_pdf(&self, x: f64) -> f64 {
        let q = self.q_tilde;
        let n = self.normalization();
        if self.is_gaussian() {
            return n * (-self.a * x * x).exp();
        }
        let base = 1.0 + (q - 1.0) * self.a * x * x;
        if base <= 0.0 {
            return 0.0;
        }
        n * base.powf(-1.0 / (q - 1.0))
    }

    /// `P(Z >= x)` for the symmetric density, `x >= 0`.
    fn symmetric_sf(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        let q = self.q_tilde;
        if self.is_gaussian() {
            return 0.5 * erfc(x * self.a.sqrt());
        }
        if q < 1.0 {
            let edge = self.support_edge();
            if x >= edge {
                return 0.0;
            }
            return quad::integrate(|t| self.symmetric_pdf(t), x, edge, 1e-16, 1e-13);
        }
        // Tail beyond 1 via t = 1/u, which maps [1, inf) onto (0, 1].
        let n = self.normalization();
        let k = (q - 1.0) * self.a;
        let b = 1.0 / (q - 1.0);
        let tail = |lo: f64| {
            quad::integrate(
                |u| {
                    let u2 = u * u;
                    n * u2.powf(b - 1.0) * (u2 + k).powf(-b)
                },
                0.0,
                1.0 / lo,
                0.0,
                1e-13,
            )
        };
        if x >= 1.0 {
            tail(x)
        } else {
            quad::integrate(|t| self.symmetric_pdf(t), x, 1.0, 1e-17, 1e-13) + tail(1.0)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.asymmetric && x > 0.0 {
            let sigma = self.right_tail_sigma();
            let z = x / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
        } else {
            self.symmetric_pdf(x)
        }
    }

    /// Survival function `1 - cdf(x)`, evaluated without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        if self.asymmetric {
            if x >= 0.0 {
                0.5 * erfc(x / self.right_tail_sigma() / std::f64::consts::SQRT_2)
            } else {
                1.0 - self.symmetric_sf(-x)
            }
        } else if x >= 0.0 {
            self.symmetric_sf(x)
        } else {
            1.0 - self.symmetric_sf(-x)
        }
    }

    /// Cumulative distribution, by adaptive quadrature of the density.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.symmetric_sf(-x)
        } else {
            1.0 - self.sf(x)
        }
    }

    /// Closed-form symmetric CDF through the Gauss hypergeometric function,
    /// `1/2 + N x 2F1(1/2, 1/(q-1); 3/2; -B (q-1) x^2)`. Valid for `q_tilde > 1`.
    pub fn cdf_closed_form(&self, x: f64) -> f64 {
        let c = self.cdf_constants();
        if self.is_gaussian() {
            return 1.0 - 0.5 * erfc(x * self.a.sqrt());
        }
        let delta = c.delta_coefficient * (c.q_mean - x).powi(2);
        0.5 + c.normalization * (x - c.q_mean) * hyp2f1_neg(c.hyper_a, c.hyper_b, c.hyper_c, delta)
    }
}

/// Constants of the closed-form cumulative distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfConstants {
    pub normalization: f64,
    pub q_mean: f64,
    pub b: f64,
    pub sigma_bar: f64,
    pub hyper_a: f64,
    pub hyper_b: f64,
    pub hyper_c: f64,
    /// `delta = delta_coefficient * (q_mean - x)^2`.
    pub delta_coefficient: f64,
}

/// `2F1(a, b; c; z)` for `z <= 0` through the Pfaff transformation
/// `(1 - z)^(-a) 2F1(a, c - b; c; z / (z - 1))`.
pub fn hyp2f1_neg(a: f64, b: f64, c: f64, z: f64) -> f64 {
    assert!(z <= 0.0, "hyp2f1_neg requires z <= 0");
    let w = z / (z - 1.0);
    let bb = c - b;
    let mut term = 1.0;
    let mut total = 1.0;
    for n in 0..2_000_000 {
        let nf = n as f64;
        term *= (a + nf) * (bb + nf) / ((c + nf) * (nf + 1.0)) * w;
        total += term;
        if term.abs() < 1e-17 * total.abs() {
            break;
        }
    }
    (1.0 - z).powf(-a) * total
}

fn uniform_open_closed<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn box_muller_draw<R: Rng>(rng: &mut R, q: f64) -> f64 {
    let q_prime = (1.0 + q) / (3.0 - q);
    let u1 = uniform_open_closed(rng);
    let u2: f64 = rng.random();
    let r = (-2.0 * ln_q(u1, q_prime)).max(0.0).sqrt();
    r * (2.0 * PI * u2).cos()
}

/// Independent draws from the symmetric q-Gaussian with unit escort variance.
pub fn sample_symmetric(params: &QGaussianParams, n: usize, seed: u64) -> Result<TimeSeries> {
    if params.asymmetric {
        return Err(Error::InvalidInput(
            "sample_symmetric called with asymmetric parameters".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let values = (0..n).map(|_| box_muller_draw(&mut rng, params.q_tilde)).collect();
    TimeSeries::new(values)
}

/// Draws that are `+|z|` (half normal) or `-|y|` (half q-Gaussian) with
/// probability 1/2 each. The normal half uses [`QGaussianParams::right_tail_sigma`].
pub fn sample_asymmetric(params: &QGaussianParams, n: usize, seed: u64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let sigma = params.right_tail_sigma();
    let mut rng = rng_from_seed(seed);
    let values = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                sigma * box_muller_draw(&mut rng, 1.0).abs()
            } else {
                -box_muller_draw(&mut rng, params.q_tilde).abs()
            }
        })
        .collect();
    TimeSeries::new(values)
}

/// Dispatches on `params.asymmetric`.
pub fn sample(params: &QGaussianParams, n: usize, seed: u64) -> Result<TimeSeries> {
    if params.asymmetric {
        sample_asymmetric(params, n, seed)
    } else {
        sample_symmetric(params, n, seed)
    }
}
