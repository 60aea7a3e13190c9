use mfspread::decompose::{
    decompose, delta_h_fse_montecarlo, fit_tail_beta, DecomposeConfig, FseMethod, FtMethod,
    SurrogateMatching,
};
use mfspread::mfdfa::{q_range, DataKind, FitMode, MfdfaConfig};
use mfspread::qgen::{self, QGaussianParams};
use mfspread::series::ReturnSeries;
use mfspread::stats::mean;

fn config(n: usize) -> MfdfaConfig {
    MfdfaConfig::for_length(n, DataKind::Synthetic)
        .unwrap()
        .with_q_grid(q_range(-5.0, 5.0, 0.5).unwrap())
        .unwrap()
}

fn fse_at(n: usize, q: f64) -> f64 {
    let est = delta_h_fse_montecarlo(0.5, n, &config(n), FitMode::Full, 5, 31).unwrap();
    est.iter().find(|e| (e.q - q).abs() < 1e-9).unwrap().mean
}

#[test]
fn finite_size_spread_is_small_for_long_series() {
    let dh = fse_at(1_000_000, 2.0);
    assert!(dh.abs() <= 0.01, "Δh_FSE(2) = {dh}");
}

#[test]
fn finite_size_spread_shrinks_with_length() {
    let short = fse_at(10_000, 5.0);
    let long = fse_at(1_000_000, 5.0);
    assert!(short > long, "M = 10^4: {short}, M = 10^6: {long}");
}

fn beta_of(q_tilde: f64) -> f64 {
    let params = QGaussianParams::new(q_tilde).unwrap();
    let fits: Vec<f64> = (0..3)
        .map(|s| {
            let x = qgen::sample(&params, 1_000_000, 40 + s).unwrap().into_values();
            let r = ReturnSeries::from_raw(x, 1, 1, "q").unwrap();
            fit_tail_beta(&r, Default::default(), s).unwrap().beta
        })
        .collect();
    mean(&fits)
}

#[test]
fn tail_exponent_of_heavy_tails() {
    let b = beta_of(1.8);
    assert!((b - 1.5).abs() < 0.15, "β = {b}");
}

#[test]
fn tail_exponent_of_moderate_tails() {
    let b = beta_of(1.4);
    assert!((b - 4.0).abs() < 0.4, "β = {b}");
}

#[test]
fn white_noise_has_no_nonlinear_spread() {
    let n = 200_000;
    let x = qgen::sample(&QGaussianParams::new(1.0).unwrap(), n, 12).unwrap().into_values();
    let r = ReturnSeries::from_raw(x, 1, 1, "gaussian").unwrap();
    let mut cfg = DecomposeConfig::new(config(n));
    cfg.fse = FseMethod::MonteCarlo {
        ensemble: 10,
        matching: SurrogateMatching::Hurst,
    };
    cfg.ft = FtMethod::MonteCarlo {
        ensemble: 5,
        length: Some(n),
    };
    cfg.seed = 13;
    let (report, _) = decompose(&r, &cfg).unwrap();
    assert!(!report.rows.is_empty());
    for row in &report.rows {
        assert!(row.delta_h_nl.abs() <= 0.03, "q = {}: NL = {}", row.q, row.delta_h_nl);
        assert_eq!(row.delta_h_fse + row.delta_h_ft + row.delta_h_nl, row.delta_h);
    }
}
