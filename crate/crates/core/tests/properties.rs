use proptest::prelude::*;

use slowfast::averaging::{estimate_bbar, AveragingParams, Strategy as AvgStrategy};
use slowfast::experiments::{rate_fit, RateTarget};
use slowfast::model::{Drift, ModelConfig};
use slowfast::noise::{conv_increment_law, sample_increments, NoiseSpectrum, NoiseStream};
use slowfast::spectral::{
    frac_power_apply, h_norm, semigroup_apply, GridField, OperatorSpectrum, SineTransform, SpectralField,
};
use slowfast::zvonkin::{picard_solve, FnField, OuKernel, SolverOptions, TruncatedFunction};

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trip(c in coeffs(16), pad in 0usize..20) {
        let tr = SineTransform::new(16, 16 + pad).unwrap();
        let u = SpectralField::from_coeffs(c);
        let back = tr.from_grid(&tr.to_grid(&u).unwrap()).unwrap();
        let scale = u.norm().max(1.0);
        prop_assert!(back.distance(&u) <= 1e-12 * scale);
    }

    #[test]
    fn grid_inner_product_is_spectral(a in coeffs(12), b in coeffs(12)) {
        let tr = SineTransform::new(12, 24).unwrap();
        let (u, v) = (SpectralField::from_coeffs(a), SpectralField::from_coeffs(b));
        let gi = tr.to_grid(&u).unwrap().inner(&tr.to_grid(&v).unwrap());
        prop_assert!((gi - u.dot(&v)).abs() <= 1e-10 * (1.0 + u.norm() * v.norm()));
    }

    #[test]
    fn semigroup_contracts_exactly(c in coeffs(20), t in 0.0f64..5.0) {
        let eigs = OperatorSpectrum::dirichlet_laplacian(20).unwrap();
        let u = SpectralField::from_coeffs(c);
        let tu = semigroup_apply(&u, &eigs, t).unwrap();
        prop_assert!(tu.norm() <= (-t).exp() * u.norm() * (1.0 + 1e-15));
    }

    #[test]
    fn fractional_powers_invert(c in coeffs(20), s in -2.0f64..2.0) {
        let eigs = OperatorSpectrum::dirichlet_laplacian(20).unwrap();
        let u = SpectralField::from_coeffs(c);
        let back = frac_power_apply(&frac_power_apply(&u, &eigs, s).unwrap(), &eigs, -s).unwrap();
        prop_assert!(back.distance(&u) <= 1e-12 * u.norm().max(1.0));
        prop_assert!((h_norm(&u, &eigs, 0.0).unwrap() - u.norm()).abs() <= 1e-12 * u.norm().max(1.0));
    }

    #[test]
    fn increment_variance_bounds(k in 1usize..32, dt in 1e-6f64..10.0, r in 0.01f64..0.14) {
        let eigs = OperatorSpectrum::dirichlet_laplacian(32).unwrap();
        let q = NoiseSpectrum::power_law(&eigs, r);
        let law = conv_increment_law(k, dt, &q, &eigs).unwrap();
        let (l, qk) = ((k * k) as f64, q.intensities()[k - 1]);
        let var = law.std * law.std;
        prop_assert!(var <= qk * dt * (1.0 + 1e-12));
        prop_assert!(var <= qk / (2.0 * l) * (1.0 + 1e-12));
        let longer = conv_increment_law(k, 2.0 * dt, &q, &eigs).unwrap();
        prop_assert!(longer.std >= law.std);
    }

    #[test]
    fn equal_seeds_equal_draws(seed in any::<u64>()) {
        let eigs = OperatorSpectrum::dirichlet_laplacian(8).unwrap();
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        let a = sample_increments(&mut NoiseStream::new(seed), 0.1, &q, &eigs).unwrap();
        let b = sample_increments(&mut NoiseStream::new(seed), 0.1, &q, &eigs).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn exact_power_fit(p in -3.0f64..3.0, scale in 0.1f64..10.0) {
        let pts: Vec<_> = (0..5).map(|j| {
            let x = 2f64.powi(-j);
            (x, scale * x.powf(p), 0.0)
        }).collect();
        let f = rate_fit(&pts).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
    }

    #[test]
    fn rate_target_ranges(theta in 0.01f64..0.99, a in 0.01f64..1.0, b in 0.01f64..1.0, g in 0.01f64..1.0, eps in 1e-6f64..0.999) {
        let t = RateTarget::new(theta, a, b, g);
        prop_assert!(t.exponent > 0.0 && t.exponent < 1.0);
        let d = t.delta_rule(eps);
        prop_assert!(d > eps && d < 1.0);
    }

    #[test]
    fn linear_resolvent_closed_form(lambda in 0.2f64..20.0, l1 in 0.5f64..4.0) {
        let k = OuKernel::new(vec![l1], vec![1.0]).unwrap();
        let zero = FnField::new(1, 1, |_: &[f64], o: &mut [f64]| o[0] = 0.0);
        let lin = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let grid = TruncatedFunction::zeros(k.default_radii(), 9, 1).unwrap();
        let sol = picard_solve(&lin, &zero, &grid, lambda, &k, &SolverOptions::for_dim(1)).unwrap();
        for i in 0..sol.u.n_nodes() {
            let x = sol.u.node(i)[0];
            prop_assert!((sol.u.node_value(i)[0] - x / (lambda + l1)).abs() < 1e-6);
        }
    }

    #[test]
    fn heat_r_window(r in 0.0f64..0.5) {
        let ok = ModelConfig::heat_example(r, 0.1, 8).is_ok();
        prop_assert_eq!(ok, r > 0.0 && r < 1.0 / 7.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn y_free_drift_averages_exactly(c in coeffs(4)) {
        let mut cfg = ModelConfig::heat_example(0.1, 0.1, 8).unwrap();
        cfg.drift_b = Drift::new("sin(x)", |x: f64, _y: f64| x.sin()).with_dependence(true, false);
        let mut x = vec![0.0; 8];
        x[..4].copy_from_slice(&c);
        let x = SpectralField::from_coeffs(x);
        let p = AveragingParams { burn_in: 1.0, avg_time: 2.0, dt: 0.1, n_replicas: 2, strategy: AvgStrategy::TimeAverage };
        let est = estimate_bbar(&x, &p, &cfg, 3).unwrap();
        let exact = cfg.apply_b(&x, &SpectralField::zeros(8)).unwrap();
        prop_assert!(est.value.distance(&exact) < 1e-12);
    }

    #[test]
    fn quadrature_of_band_limited_products(a in coeffs(6)) {
        let u = SpectralField::from_coeffs(a);
        let tr = SineTransform::new(6, 12).unwrap();
        let g: GridField = tr.to_grid(&u).unwrap();
        prop_assert!((g.inner(&g) - u.norm().powi(2)).abs() < 1e-10 * (1.0 + u.norm().powi(2)));
    }
}

#[test]
fn synthetic_square_root_fit() {
    let mut s = NoiseStream::new(11);
    let pts: Vec<_> = (0..6)
        .map(|j| {
            let x = 2f64.powi(-j);
            let y = x.sqrt() * (1.0 + 0.05 * s.standard_normal());
            (x, y, 0.05 * y)
        })
        .collect();
    let f = rate_fit(&pts).unwrap();
    assert!((0.4..=0.6).contains(&f.slope), "slope {}", f.slope);
}
