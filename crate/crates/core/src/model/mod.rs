//! Model description: operator spectrum, noise spectra, Nemytskii drifts and
//! the declared regularity constants, plus the assumption checker.

mod assumptions;
pub mod expr;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::noise::{NoiseSpectrum, NoiseStream};
use crate::spectral::{OperatorSpectrum, SineTransform, SpectralField};
use crate::{Error, Result};

pub use assumptions::{
    check_assumptions, check_assumptions_with, AssumptionOptions, AssumptionReport, Status,
    Witness,
};
use expr::Expr;

/// Pointwise scalar map `(x(ξ), y(ξ)) ↦ value` defining a composition
/// (Nemytskii) operator on `H × H`.
#[derive(Clone)]
pub struct Drift {
    name: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    ignores_x: bool,
    ignores_y: bool,
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Drift").field("name", &self.name).finish()
    }
}

impl Drift {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            ignores_x: false,
            ignores_y: false,
        }
    }

    pub fn zero() -> Self {
        Self::new("0", |_, _| 0.0).with_dependence(false, false)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_, _| c).with_dependence(false, false)
    }

    /// Drift from a scalar expression in `x` and `y`.
    pub fn from_expr(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        let (ix, iy) = (e.ignores_x(), e.ignores_y());
        Ok(Self::new(src, move |x, y| e.eval(x, y)).with_dependence(!ix, !iy))
    }

    /// Records whether the drift reads its `x` / `y` argument.
    pub fn with_dependence(mut self, reads_x: bool, reads_y: bool) -> Self {
        self.ignores_x = !reads_x;
        self.ignores_y = !reads_y;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ignores_x(&self) -> bool {
        self.ignores_x
    }

    pub fn ignores_y(&self) -> bool {
        self.ignores_y
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    /// Pointwise evaluation on grid values; a NaN is reported with its grid index.
    pub fn eval_grid(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        for (j, ((o, xv), yv)) in out.iter_mut().zip(x).zip(y).enumerate() {
            let v = (self.f)(*xv, *yv);
            if v.is_nan() {
                return Err(Error::Integration(format!(
                    "drift '{}' produced NaN at grid point {} (x = {xv}, y = {yv})",
                    self.name,
                    j + 1
                )));
            }
            *o = v;
        }
        Ok(())
    }
}

/// Coefficients of the slow-fast system and their declared regularity.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub label: String,
    pub eigs: OperatorSpectrum,
    pub q1: NoiseSpectrum,
    pub q2: NoiseSpectrum,
    pub drift_b: Drift,
    pub drift_f: Drift,
    /// Hölder exponent of `B` in `x`.
    pub alpha: f64,
    /// Hölder exponent of `B` in `y`.
    pub beta: f64,
    /// Hölder exponent of `F` in `x`.
    pub gamma: f64,
    /// Lipschitz constant of `F` in `y`.
    pub l_f: f64,
    /// Pointwise bound `sup |B|`.
    pub bound_b: f64,
    /// Pointwise bound `sup |F|`.
    pub bound_f: f64,
    /// Pseudospectral grid size `M`.
    pub grid_points: usize,
}

/// Resolved numbers that go into run manifests.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub label: String,
    pub n_modes: usize,
    pub grid_points: usize,
    pub drift_b: String,
    pub drift_f: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub l_f: f64,
    pub bound_b: f64,
    pub bound_f: f64,
    pub lambda1: f64,
    pub q1_exponent: Option<f64>,
    pub q2_exponent: Option<f64>,
}

/// Admissible interval for the noise exponents of the heat example.
pub const HEAT_R_MAX: f64 = 1.0 / 7.0;

impl ModelConfig {
    /// Stochastic heat equation on `[0, π]` with Dirichlet conditions:
    /// `λ_k = k²`, `Q_i = (−Δ)^{−r_i}`,
    /// `B(x,y) = sin(√|x| + √|y|)`, `F(x,y) = ½ cos(√|x| + |y|)`.
    pub fn heat_example(r1: f64, r2: f64, n_modes: usize) -> Result<Self> {
        for (name, r) in [("r1", r1), ("r2", r2)] {
            if !(r > 0.0 && r < HEAT_R_MAX) {
                return Err(Error::Config(format!(
                    "{name} = {r} is outside (0, 1/7), the range for which the heat example satisfies the integrability conditions"
                )));
            }
        }
        if n_modes == 0 {
            return Err(Error::Config("n_modes must be positive".into()));
        }
        let eigs = OperatorSpectrum::dirichlet_laplacian(n_modes)?;
        let q1 = NoiseSpectrum::power_law(&eigs, r1);
        let q2 = NoiseSpectrum::power_law(&eigs, r2);
        let cfg = Self {
            label: "heat_example".into(),
            eigs,
            q1,
            q2,
            drift_b: Drift::new("sin(sqrt(abs(x)) + sqrt(abs(y)))", |x: f64, y: f64| {
                (x.abs().sqrt() + y.abs().sqrt()).sin()
            }),
            drift_f: Drift::new("0.5 * cos(sqrt(abs(x)) + abs(y))", |x: f64, y: f64| {
                0.5 * (x.abs().sqrt() + y.abs()).cos()
            }),
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.5,
            l_f: 0.5,
            bound_b: 1.0,
            bound_f: 0.5,
            grid_points: 2 * n_modes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_modes(&self) -> usize {
        self.eigs.n_modes()
    }

    /// Spectral gap `λ₁ − L_F`.
    pub fn spectral_gap(&self) -> f64 {
        self.eigs.lambda1() - self.l_f
    }

    /// `α ∧ (βγ)`, the Hölder index of the averaged drift.
    pub fn averaged_holder_index(&self) -> f64 {
        self.alpha.min(self.beta * self.gamma)
    }

    /// `H`-norm bound on `B`: `√π · sup|B|`.
    pub fn h_bound_b(&self) -> f64 {
        std::f64::consts::PI.sqrt() * self.bound_b
    }

    pub fn transform(&self) -> Result<SineTransform> {
        SineTransform::new(self.n_modes(), self.grid_points)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if !(self.l_f >= 0.0) {
            return Err(Error::Config(format!("l_f = {} must be >= 0", self.l_f)));
        }
        if !self.bound_b.is_finite() || !self.bound_f.is_finite() || self.bound_b < 0.0 || self.bound_f < 0.0 {
            return Err(Error::Config("drift bounds must be finite and nonnegative".into()));
        }
        let n = self.n_modes();
        if self.q1.n_modes() != n || self.q2.n_modes() != n {
            return Err(Error::Dimension("noise spectra must match the operator spectrum".into()));
        }
        if self.grid_points < n {
            return Err(Error::Dimension(format!(
                "grid_points = {} is smaller than n_modes = {n}",
                self.grid_points
            )));
        }
        Ok(())
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            label: self.label.clone(),
            n_modes: self.n_modes(),
            grid_points: self.grid_points,
            drift_b: self.drift_b.name().to_string(),
            drift_f: self.drift_f.name().to_string(),
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            l_f: self.l_f,
            bound_b: self.bound_b,
            bound_f: self.bound_f,
            lambda1: self.eigs.lambda1(),
            q1_exponent: self.q1.decay_exponent(),
            q2_exponent: self.q2.decay_exponent(),
        }
    }

    /// Pseudospectral evaluation of `B(x, y)`.
    pub fn apply_b(&self, x: &SpectralField, y: &SpectralField) -> Result<SpectralField> {
        apply_drift(&self.drift_b, &self.transform()?, x, y)
    }

    /// Pseudospectral evaluation of `F(x, y)`.
    pub fn apply_f(&self, x: &SpectralField, y: &SpectralField) -> Result<SpectralField> {
        apply_drift(&self.drift_f, &self.transform()?, x, y)
    }
}

/// Evaluates a Nemytskii drift: both arguments to the grid, pointwise map,
/// projection back onto the represented modes.
pub fn apply_drift(
    drift: &Drift,
    tr: &SineTransform,
    x: &SpectralField,
    y: &SpectralField,
) -> Result<SpectralField> {
    let gx = tr.to_grid(x)?;
    let gy = tr.to_grid(y)?;
    let mut out = vec![0.0; tr.m_points()];
    drift.eval_grid(gx.values(), gy.values(), &mut out)?;
    tr.from_grid(&crate::spectral::GridField::from_values(out))
}

/// A pair of points `(x, y)` in `H × H`.
pub type FieldPair = (SpectralField, SpectralField);

/// Largest sampled quotient
/// `|f(x₁,y₁) − f(x₂,y₂)| / (|x₁−x₂|^{ex} + |y₁−y₂|^{ey})`.
pub fn empirical_holder<F, S>(
    f: F,
    exponents: (f64, f64),
    n_pairs: usize,
    mut sampler: S,
) -> Result<f64>
where
    F: Fn(&SpectralField, &SpectralField) -> Result<SpectralField>,
    S: FnMut() -> (FieldPair, FieldPair),
{
    if n_pairs == 0 {
        return Err(Error::Config("empirical_holder needs at least one pair".into()));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let ((x1, y1), (x2, y2)) = sampler();
        let denom = x1.distance(&x2).powf(exponents.0) + y1.distance(&y2).powf(exponents.1);
        if denom == 0.0 {
            continue;
        }
        let num = f(&x1, &y1)?.distance(&f(&x2, &y2)?);
        worst = worst.max(num / denom);
    }
    Ok(worst)
}

/// Random field supported on modes `1..=k_max` with coefficients uniform in
/// `[−amplitude, amplitude]`.
pub fn random_low_mode_field(
    stream: &mut NoiseStream,
    n_modes: usize,
    k_max: usize,
    amplitude: f64,
) -> SpectralField {
    let mut c = vec![0.0; n_modes];
    for ck in c.iter_mut().take(k_max.min(n_modes)) {
        *ck = amplitude * (2.0 * stream.uniform() - 1.0);
    }
    SpectralField::from_coeffs(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{derive_substream, NoiseRole};

    #[test]
    fn heat_example_values() {
        let cfg = ModelConfig::heat_example(0.1, 0.1, 8).unwrap();
        assert_eq!(cfg.eigs.eigenvalues()[2], 9.0);
        assert!((cfg.q1.intensities()[1] - 2f64.powf(-0.2)).abs() < 1e-15);
        assert_eq!((cfg.alpha, cfg.beta, cfg.gamma, cfg.l_f), (0.5, 0.5, 0.5, 0.5));
        assert_eq!((cfg.bound_b, cfg.bound_f), (1.0, 0.5));
        assert_eq!(cfg.spectral_gap(), 0.5);
        assert_eq!(cfg.grid_points, 16);
    }

    #[test]
    fn zero_inputs() {
        let cfg = ModelConfig::heat_example(0.1, 0.1, 8).unwrap();
        let z = [0.0; 4];
        let mut out = [9.0; 4];
        cfg.drift_b.eval_grid(&z, &z, &mut out).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        cfg.drift_f.eval_grid(&z, &z, &mut out).unwrap();
        assert!(out.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn r_out_of_range_rejected() {
        for (r1, r2) in [(0.2, 0.1), (0.1, 0.0), (1.0 / 7.0, 0.1), (-0.1, 0.1)] {
            let err = ModelConfig::heat_example(r1, r2, 8).unwrap_err();
            assert!(err.to_string().contains("(0, 1/7)"), "{err}");
        }
    }

    #[test]
    fn nan_drift_reports_grid_point() {
        let d = Drift::new("sqrt(x)", |x: f64, _| x.sqrt());
        let mut out = [0.0; 3];
        let err = d.eval_grid(&[1.0, -1.0, 2.0], &[0.0; 3], &mut out).unwrap_err();
        assert!(err.to_string().contains("grid point 2"));
    }

    // Scalar bounds behind the declared exponents: |sin a − sin b| ≤ |a−b|,
    // |√u − √v| ≤ √|u−v|, |cos a − cos b| ≤ |a−b|.
    #[test]
    fn scalar_holder_bounds_hold_on_dense_samples() {
        let n = 400;
        for i in 0..n {
            for j in 0..n {
                let a = -6.0 + 12.0 * i as f64 / n as f64;
                let b = -6.0 + 12.0 * j as f64 / n as f64;
                assert!((a.sin() - b.sin()).abs() <= (a - b).abs() + 1e-15);
                assert!((a.cos() - b.cos()).abs() <= (a - b).abs() + 1e-15);
                let (u, v) = (a.abs(), b.abs());
                assert!((u.sqrt() - v.sqrt()).abs() <= (u - v).abs().sqrt() + 1e-15);
            }
        }
    }

    #[test]
    fn holder_quotients() {
        let cfg = ModelConfig::heat_example(0.1, 0.1, 16).unwrap();
        let n = cfg.n_modes();
        let mut s = derive_substream(3, 0, NoiseRole::Auxiliary);
        let mut sampler = || {
            let mut f = || random_low_mode_field(&mut s, n, 4, 2.0);
            ((f(), f()), (f(), f()))
        };
        let q0 = empirical_holder(|_, _| Ok(SpectralField::zeros(n)), (0.5, 0.5), 100, &mut sampler).unwrap();
        assert_eq!(q0, 0.0);
        let qid = empirical_holder(|x, _| Ok(x.clone()), (1.0, 1.0), 1000, &mut sampler).unwrap();
        assert!(qid <= 1.0 + 1e-12);
        let qb = empirical_holder(|x, y| cfg.apply_b(x, y), (0.5, 0.5), 10_000, &mut sampler).unwrap();
        assert!(qb > 0.0 && qb <= std::f64::consts::PI.sqrt() + 0.1, "quotient {qb}");
    }

    #[test]
    fn expression_drift_tracks_dependence() {
        let d = Drift::from_expr("sin(sqrt(abs(x)))").unwrap();
        assert!(d.ignores_y() && !d.ignores_x());
        assert!(Drift::zero().ignores_x());
    }
}
