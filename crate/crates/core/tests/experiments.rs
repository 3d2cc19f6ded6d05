use slowfast::experiments::*;
use slowfast::model::{Drift, ModelConfig};
use slowfast::noise::NoiseSpectrum;
use slowfast::spectral::SpectralField;

const SEED: u64 = 7;

fn heat(n: usize) -> ModelConfig {
    ModelConfig::heat_example(0.1, 0.1, n).unwrap()
}

#[test]
fn strong_error_vanishes_when_b_ignores_y() {
    let mut c = heat(16);
    c.drift_b = Drift::new("sin(sqrt(abs(x)))", |x: f64, _y: f64| x.abs().sqrt().sin()).with_dependence(true, false);
    let mut p = StrongErrorParams::standard(&c, 0.55);
    p.n_mc = 4;
    p.t_end = 0.1;
    p.eps_grid = vec![1e-1, 1e-2, 3e-3];
    let r = strong_error(&c, &p, SEED).unwrap();
    for e in &r.estimates {
        assert!(*e < 1e-10, "coupled error {e}");
    }
}

#[test]
fn linear_deterministic_increments_scale_at_least_linearly() {
    let mut c = heat(16);
    c.drift_b = Drift::zero();
    c.q1 = NoiseSpectrum::zero(16);
    let mut p = IncrementParams::standard(&c, 0.55);
    p.n_mc = 2;
    p.x0 = SpectralField::basis(16, 1);
    let r = increment_scaling(&c, &p, SEED).unwrap();
    assert!(r.slope.unwrap() >= 1.0, "slope {:?}", r.slope);
    // finest block has the smallest value
    let finest = r.grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let j = r.grid.iter().position(|g| *g == finest).unwrap();
    assert!(r.estimates.iter().all(|e| *e >= r.estimates[j]));
}

#[test]
fn contraction_zero_difference_and_linear_case() {
    let c = heat(16);
    let mut p = ContractionParams::standard(&c, SEED);
    p.n_mc = 4;
    p.y0_b = p.y0_a.clone();
    let r = contraction_test(&c, &p, SEED).unwrap();
    assert!(r.estimates.iter().all(|e| *e == 0.0));

    let mut lin = heat(16);
    lin.drift_f = Drift::zero();
    let mut p = ContractionParams::standard(&lin, SEED);
    p.n_mc = 4;
    let r = contraction_test(&lin, &p, SEED).unwrap();
    // without F the squared difference decays at least like e^{−2λ₁t}
    for (t, e) in r.grid.iter().zip(&r.estimates) {
        let bound = (-0.5 * t).exp();
        assert!(e * bound <= (-2.0 * t).exp() * (1.0 + 1e-9), "t = {t}");
    }
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn aux_error_grows_with_block() {
    let c = heat(16);
    let mut p = IncrementParams::standard(&c, 0.55);
    p.n_mc = 16;
    p.t_end = 0.25;
    let r = aux_fast_error(&c, &p, SEED).unwrap();
    // grid runs from coarse to fine
    for w in r.estimates.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn correlation_of_y_free_drift_is_zero() {
    let mut c = heat(16);
    c.drift_b = Drift::new("sin(x)", |x: f64, _y: f64| x.sin()).with_dependence(true, false);
    let mut p = CorrelationParams::standard(&c);
    p.n_mc = 4;
    p.window = 5.0;
    let r = correlation_decay(&c, &p, SEED).unwrap();
    assert!(r.estimates.iter().all(|e| e.abs() < 1e-20));
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn correlation_at_lag_zero_is_positive() {
    let c = heat(16);
    let mut p = CorrelationParams::standard(&c);
    p.n_mc = 4;
    p.window = 10.0;
    p.lags = vec![0.0, 0.5, 1.0];
    let r = correlation_decay(&c, &p, SEED).unwrap();
    assert!(r.estimates[0] > 0.0);
}

#[test]
fn moments_decay_without_noise_or_drift() {
    let mut c = heat(16);
    c.drift_b = Drift::zero();
    c.drift_f = Drift::zero();
    c.q1 = NoiseSpectrum::zero(16);
    c.q2 = NoiseSpectrum::zero(16);
    let mut p = MomentParams::standard(&c);
    p.n_mc = 2;
    p.t_end = 0.1;
    p.y0 = SpectralField::basis(16, 2);
    let r = moment_sweep(&c, &p, SEED).unwrap();
    // sup over time is the initial value
    for e in &r.estimates {
        assert!((e - 1.0).abs() < 1e-12);
    }
}

#[test]
fn reports_are_reproducible() {
    let c = heat(16);
    let mut p = IncrementParams::standard(&c, 0.55);
    p.n_mc = 4;
    p.t_end = 0.25;
    let a = increment_scaling(&c, &p, SEED).unwrap();
    let b = increment_scaling(&c, &p, SEED).unwrap();
    assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    assert_eq!(a.to_csv(), b.to_csv());
    let other = increment_scaling(&c, &p, SEED + 1).unwrap();
    assert_ne!(a.digest().unwrap(), other.digest().unwrap());
}

#[test]
fn bad_grids_are_config_errors() {
    let c = heat(8);
    let mut p = IncrementParams::standard(&c, 0.55);
    p.deltas = vec![0.1, 0.05, 0.003];
    assert!(matches!(increment_scaling(&c, &p, SEED), Err(slowfast::Error::Config(_))));
    p.deltas = IncrementParams::standard(&c, 0.55).deltas;
    p.n_mc = 1;
    assert!(increment_scaling(&c, &p, SEED).is_err());
}

#[test]
fn fast_state_sensitivity_to_x_is_bounded() {
    let c = heat(16);
    let mut p = SensitivityParams::standard(&c, SEED);
    p.n_mc = 8;
    let r = contraction_in_x(&c, &p, SEED).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{:?}", r.details);

    let mut free = heat(16);
    free.drift_f = Drift::new("0.5 * cos(y)", |_x: f64, y: f64| 0.5 * y.cos()).with_dependence(false, true);
    let r = contraction_in_x(&free, &p, SEED).unwrap();
    assert!(r.estimates.iter().all(|e| *e == 0.0));
}
