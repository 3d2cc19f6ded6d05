//! Finite spectral representation of `H = L²(0, π)` in the Dirichlet sine
//! basis `e_k(ξ) = √(2/π) sin(kξ)`, together with the diagonal operators
//! built from the spectrum of `A`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mode coefficients `u_k`, `k = 1..N`, of an element of `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; n_modes],
        }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// The basis vector `e_k` (1-based mode index).
    pub fn basis(n_modes: usize, k: usize) -> Self {
        let mut f = Self::zeros(n_modes);
        f.coeffs[k - 1] = 1.0;
        f
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `k` (1-based).
    pub fn mode(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    /// `|u|`, by Parseval the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

/// Point values at the interior grid `ξ_j = jπ/(M+1)`, `j = 1..M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(m_points: usize) -> Self {
        Self {
            values: vec![0.0; m_points],
        }
    }

    /// Samples a function of `ξ` on the `M`-point grid.
    pub fn sample(m_points: usize, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid_points(m_points).map(f).collect(),
        }
    }

    pub fn m_points(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Quadrature inner product `(π/(M+1)) Σ_j u(ξ_j) v(ξ_j)`.
    pub fn inner(&self, other: &Self) -> f64 {
        let w = PI / (self.values.len() as f64 + 1.0);
        w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }
}

/// Interior grid nodes `ξ_j = jπ/(M+1)`.
pub fn grid_points(m_points: usize) -> impl Iterator<Item = f64> {
    let h = PI / (m_points as f64 + 1.0);
    (1..=m_points).map(move |j| j as f64 * h)
}

/// Eigenvalue law used for analytic tail bounds: `λ_k = scale · k^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn at(&self, k: usize) -> f64 {
        self.scale * (k as f64).powf(self.exponent)
    }
}

/// Eigenvalues `λ_k > 0` of `−A`, nondecreasing in `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpectrum {
    eigenvalues: Vec<f64>,
    law: Option<PowerLaw>,
}

impl OperatorSpectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Config("operator spectrum has no modes".into()));
        }
        if let Some(bad) = eigenvalues.iter().position(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::Config(format!(
                "eigenvalue λ_{} = {} is not positive",
                bad + 1,
                eigenvalues[bad]
            )));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("eigenvalues must be nondecreasing".into()));
        }
        Ok(Self {
            eigenvalues,
            law: None,
        })
    }

    /// `λ_k = scale · k^exponent` for `k = 1..n_modes`.
    pub fn power_law(n_modes: usize, scale: f64, exponent: f64) -> Result<Self> {
        let law = PowerLaw { scale, exponent };
        let mut s = Self::new((1..=n_modes).map(|k| law.at(k)).collect())?;
        s.law = Some(law);
        Ok(s)
    }

    /// Dirichlet Laplacian on `(0, π)`: `λ_k = k²`.
    pub fn dirichlet_laplacian(n_modes: usize) -> Result<Self> {
        Self::power_law(n_modes, 1.0, 2.0)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn law(&self) -> Option<PowerLaw> {
        self.law
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest eigenvalue `λ₁`.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Same spectrum restricted to the first `n` modes.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            eigenvalues: self.eigenvalues[..n.min(self.eigenvalues.len())].to_vec(),
            law: self.law,
        }
    }

    fn check_len(&self, u: &SpectralField) -> Result<()> {
        if u.n_modes() != self.n_modes() {
            return Err(Error::Dimension(format!(
                "field has {} modes, spectrum has {}",
                u.n_modes(),
                self.n_modes()
            )));
        }
        Ok(())
    }
}

/// `‖u‖_s = √(Σ λ_k^s u_k²)`.
pub fn h_norm(u: &SpectralField, eigs: &OperatorSpectrum, s: f64) -> Result<f64> {
    eigs.check_len(u)?;
    Ok(u.coeffs
        .iter()
        .zip(&eigs.eigenvalues)
        .map(|(c, l)| l.powf(s) * c * c)
        .sum::<f64>()
        .sqrt())
}

/// `e^{tA} u`, coefficient-wise `u_k ↦ e^{−λ_k t} u_k`.
pub fn semigroup_apply(u: &SpectralField, eigs: &OperatorSpectrum, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("semigroup time must be >= 0, got {t}")));
    }
    eigs.check_len(u)?;
    Ok(SpectralField::from_coeffs(
        u.coeffs
            .iter()
            .zip(&eigs.eigenvalues)
            .map(|(c, l)| (-l * t).exp() * c)
            .collect(),
    ))
}

/// `(−A)^{s/2} u`, coefficient-wise `u_k ↦ λ_k^{s/2} u_k`.
pub fn frac_power_apply(u: &SpectralField, eigs: &OperatorSpectrum, s: f64) -> Result<SpectralField> {
    eigs.check_len(u)?;
    Ok(SpectralField::from_coeffs(
        u.coeffs
            .iter()
            .zip(&eigs.eigenvalues)
            .map(|(c, l)| l.powf(0.5 * s) * c)
            .collect(),
    ))
}

/// Constant in `‖e^{tA}u‖_θ ≤ C_θ t^{−θ/2} |u|`: `(θ/(2e))^{θ/2}`, the
/// per-mode supremum of `(λt)^{θ/2} e^{−λt}`.
pub fn smoothing_constant(theta: f64) -> f64 {
    (theta / (2.0 * std::f64::consts::E)).powf(0.5 * theta)
}

/// Constant in `|e^{tA}u − e^{sA}u| ≤ C (t−s)^θ s^{−θ} |u|`: `(θ/e)^θ`.
pub fn time_holder_constant(theta: f64) -> f64 {
    (theta / std::f64::consts::E).powf(theta)
}

/// Orthogonal sine-transform pair between `N` mode coefficients and `M`
/// interior grid values, computed with a DST-I of length `M` through an
/// FFT of length `2(M+1)`.
#[derive(Clone)]
pub struct SineTransform {
    n_modes: usize,
    m_points: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform")
            .field("n_modes", &self.n_modes)
            .field("m_points", &self.m_points)
            .finish()
    }
}

impl SineTransform {
    pub fn new(n_modes: usize, m_points: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Dimension("transform needs at least one mode".into()));
        }
        if m_points < n_modes {
            return Err(Error::Dimension(format!(
                "grid has {m_points} points but {n_modes} modes were requested (need M >= N)"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (m_points + 1));
        Ok(Self {
            n_modes,
            m_points,
            fft,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn m_points(&self) -> usize {
        self.m_points
    }

    /// Scratch buffer sized for [`Self::to_grid_into`] / [`Self::from_grid_into`].
    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); 2 * (self.m_points + 1)]
    }

    // Unnormalized DST-I: S_j = Σ_{n=1}^{len(input)} x_n sin(π n j/(M+1)), j = 1..out.len()
    fn dst1(&self, input: &[f64], out: &mut [f64], buf: &mut [Complex64]) {
        let m = self.m_points;
        let len = 2 * (m + 1);
        for b in buf.iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        for (n, &x) in input.iter().enumerate() {
            buf[n + 1].re = x;
            buf[len - n - 1].re = -x;
        }
        self.fft.process(buf);
        for (j, o) in out.iter_mut().enumerate() {
            *o = -0.5 * buf[j + 1].im;
        }
    }

    /// Grid values `u(ξ_j) = Σ_k u_k e_k(ξ_j)`.
    pub fn to_grid_into(&self, coeffs: &[f64], out: &mut [f64], buf: &mut [Complex64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(out.len(), self.m_points);
        self.dst1(coeffs, out, buf);
        let s = (2.0 / PI).sqrt();
        for o in out.iter_mut() {
            *o *= s;
        }
    }

    /// Mode coefficients by discrete quadrature, truncated to the first `N`.
    pub fn from_grid_into(&self, values: &[f64], out: &mut [f64], buf: &mut [Complex64]) {
        debug_assert_eq!(values.len(), self.m_points);
        debug_assert_eq!(out.len(), self.n_modes);
        self.dst1(values, out, buf);
        let s = (2.0 * PI).sqrt() / (self.m_points as f64 + 1.0);
        for o in out.iter_mut() {
            *o *= s;
        }
    }

    pub fn to_grid(&self, u: &SpectralField) -> Result<GridField> {
        if u.n_modes() != self.n_modes {
            return Err(Error::Dimension(format!(
                "field has {} modes, transform expects {}",
                u.n_modes(),
                self.n_modes
            )));
        }
        let mut out = vec![0.0; self.m_points];
        self.to_grid_into(u.coeffs(), &mut out, &mut self.scratch());
        Ok(GridField::from_values(out))
    }

    pub fn from_grid(&self, g: &GridField) -> Result<SpectralField> {
        if g.m_points() != self.m_points {
            return Err(Error::Dimension(format!(
                "grid has {} points, transform expects {}",
                g.m_points(),
                self.m_points
            )));
        }
        let mut out = vec![0.0; self.n_modes];
        self.from_grid_into(g.values(), &mut out, &mut self.scratch());
        Ok(SpectralField::from_coeffs(out))
    }
}

/// Projects grid values onto the first `n_modes` sine modes.
pub fn transform(grid: &GridField, n_modes: usize) -> Result<SpectralField> {
    SineTransform::new(n_modes, grid.m_points())?.from_grid(grid)
}

/// Evaluates `u` on an `m_points` interior grid.
pub fn to_grid(u: &SpectralField, m_points: usize) -> Result<GridField> {
    SineTransform::new(u.n_modes(), m_points)?.to_grid(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // O(NM) direct summation, independent of the FFT path.
    fn direct_to_grid(c: &[f64], m: usize) -> Vec<f64> {
        grid_points(m)
            .map(|x| {
                c.iter()
                    .enumerate()
                    .map(|(k, ck)| ck * (2.0 / PI).sqrt() * ((k + 1) as f64 * x).sin())
                    .sum()
            })
            .collect()
    }

    fn direct_from_grid(v: &[f64], n: usize) -> Vec<f64> {
        let m = v.len();
        let w = PI / (m as f64 + 1.0);
        (1..=n)
            .map(|k| {
                w * grid_points(m)
                    .zip(v)
                    .map(|(x, vj)| vj * (2.0 / PI).sqrt() * (k as f64 * x).sin())
                    .sum::<f64>()
            })
            .collect()
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> SpectralField {
        SpectralField::from_coeffs((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_grid_gives_zero_coeffs() {
        let u = transform(&GridField::zeros(16), 8).unwrap();
        assert!(u.coeffs().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn first_basis_vector_recovered() {
        let g = GridField::sample(16, |x| (2.0 / PI).sqrt() * x.sin());
        let u = transform(&g, 8).unwrap();
        assert!((u.mode(1) - 1.0).abs() < 1e-13);
        for k in 2..=8 {
            assert!(u.mode(k).abs() < 1e-13);
        }
    }

    #[test]
    fn fast_transform_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_field(&mut rng, 8);
        let tr = SineTransform::new(8, 16).unwrap();
        let g = tr.to_grid(&u).unwrap();
        let direct = direct_to_grid(u.coeffs(), 16);
        for (a, b) in g.values().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-13);
        }
        let back = tr.from_grid(&g).unwrap();
        let back_direct = direct_from_grid(g.values(), 8);
        for ((a, b), c) in back.coeffs().iter().zip(&back_direct).zip(u.coeffs()) {
            assert!((a - b).abs() < 1e-13);
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_smaller_than_modes_is_rejected() {
        assert!(matches!(SineTransform::new(8, 7), Err(Error::Dimension(_))));
        assert!(transform(&GridField::zeros(4), 8).is_err());
    }

    #[test]
    fn quadrature_inner_product_matches_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tr = SineTransform::new(32, 64).unwrap();
        for _ in 0..20 {
            let u = random_field(&mut rng, 32);
            let v = random_field(&mut rng, 32);
            let gu = tr.to_grid(&u).unwrap();
            let gv = tr.to_grid(&v).unwrap();
            assert!((gu.inner(&gv) - u.dot(&v)).abs() < 1e-10);
        }
    }

    #[test]
    fn h_norm_examples() {
        let eigs = OperatorSpectrum::dirichlet_laplacian(4).unwrap();
        let e1 = SpectralField::basis(4, 1);
        for s in [-1.0, 0.0, 0.5, 3.0] {
            assert_eq!(h_norm(&e1, &eigs, s).unwrap(), 1.0);
        }
        let e2 = SpectralField::basis(4, 2);
        assert!((h_norm(&e2, &eigs, 1.0).unwrap() - 2.0).abs() < 1e-15);
        let u = SpectralField::from_coeffs(vec![0.3, -1.2, 0.7, 2.0]);
        assert!((h_norm(&u, &eigs, 0.0).unwrap() - u.norm()).abs() < 1e-15);
    }

    #[test]
    fn semigroup_examples() {
        let eigs = OperatorSpectrum::dirichlet_laplacian(4).unwrap();
        let u = SpectralField::from_coeffs(vec![0.3, -1.2, 0.7, 2.0]);
        assert_eq!(semigroup_apply(&u, &eigs, 0.0).unwrap(), u);
        let e1 = SpectralField::basis(4, 1);
        let v = semigroup_apply(&e1, &eigs, 1.0).unwrap();
        assert!((v.mode(1) - (-1.0f64).exp()).abs() < 1e-16);
        assert!(matches!(
            semigroup_apply(&u, &eigs, -0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn frac_power_examples() {
        let eigs = OperatorSpectrum::dirichlet_laplacian(4).unwrap();
        let e2 = SpectralField::basis(4, 2);
        assert_eq!(frac_power_apply(&e2, &eigs, 2.0).unwrap(), e2.scaled(4.0));
        let u = SpectralField::from_coeffs(vec![0.3, -1.2, 0.7, 2.0]);
        assert_eq!(frac_power_apply(&u, &eigs, 0.0).unwrap(), u);
        let back = frac_power_apply(&frac_power_apply(&u, &eigs, 1.3).unwrap(), &eigs, -1.3).unwrap();
        assert!(back.distance(&u) < 1e-12);
    }

    #[test]
    fn spectrum_validation() {
        assert!(OperatorSpectrum::new(vec![1.0, 0.0]).is_err());
        assert!(OperatorSpectrum::new(vec![2.0, 1.0]).is_err());
        assert!(OperatorSpectrum::new(vec![]).is_err());
        assert!(OperatorSpectrum::new(vec![1.0, 1.0]).is_ok());
    }
}
