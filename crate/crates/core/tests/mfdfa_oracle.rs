mod common;

use mfspread::mfdfa::{fit_hq, geometric_scales, mfdfa, q_range, MfdfaConfig};
use mfspread::qgen::{self, QGaussianParams};
use mfspread::surrogate::{fourier_filtered, SurrogateSpec};

use common::oracle;

fn compare(x: &[f64], order: usize) -> f64 {
    let q = q_range(-6.0, 6.0, 0.5).unwrap();
    let s = geometric_scales(16, x.len() / 8, 12).unwrap();
    let cfg = MfdfaConfig::new(q.clone(), s.clone(), order, 16, x.len() / 8).unwrap();
    let fast = mfdfa(x, &cfg).unwrap();
    let slow = oracle::surface(x, &q, &s, order);
    let fast: Vec<Vec<f64>> = (0..q.len()).map(|i| fast.row(i).to_vec()).collect();
    oracle::max_relative_error(&fast, &slow)
}

#[test]
fn surface_matches_oracle_for_each_order() {
    let x = qgen::sample(&QGaussianParams::new(1.5).unwrap(), 5000, 21).unwrap().into_values();
    for order in 1..=3 {
        let err = compare(&x, order);
        assert!(err < 1e-9, "order {order}: {err:e}");
    }
}

#[test]
fn surface_matches_oracle_for_correlated_input() {
    let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.8, 4096, 4)).unwrap().into_values();
    let err = compare(&x, 2);
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn persistent_noise_gives_matching_hurst() {
    let n = 1 << 17;
    let x = fourier_filtered(&SurrogateSpec::fourier_filtered(0.7, n, 8)).unwrap().into_values();
    let cfg = MfdfaConfig::for_length(n, mfspread::mfdfa::DataKind::Synthetic).unwrap();
    let profile = fit_hq(&mfdfa(&x, &cfg).unwrap()).unwrap();
    assert!((profile.hurst - 0.7).abs() < 0.05, "h(2) = {}", profile.hurst);
    let spread = profile.at(-10.0).unwrap() - profile.at(10.0).unwrap();
    assert!(spread.abs() < 0.15, "Δh(10) = {spread}");
}
