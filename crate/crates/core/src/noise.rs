//! Exact per-mode sampling of stochastic convolutions
//! `∫ e^{(t−s)A} √Q dW_s` for `Q` diagonal in the eigenbasis of `A`.
//!
//! Every mode is a scalar Ornstein–Uhlenbeck process, so the transition over
//! a step `Δ` is Gaussian with mean factor `e^{−λ_kΔ}` and variance
//! `q_k(1 − e^{−2λ_kΔ})/(2λ_k)`. Streams are ChaCha8 keyed by the root seed
//! and addressed by a 64-bit stream id built from `(index, role)`, so
//! trajectories can be replayed bit-exactly and coupled across solvers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::spectral::{OperatorSpectrum, SpectralField};
use crate::{Error, Result};

/// Per-mode noise intensities `q_k ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    intensities: Vec<f64>,
    /// `r` in `q_k = scale · λ_k^{−r}` when the spectrum follows a power law.
    decay_exponent: Option<f64>,
    scale: f64,
}

impl NoiseSpectrum {
    pub fn new(intensities: Vec<f64>) -> Result<Self> {
        if let Some(bad) = intensities.iter().position(|q| !(*q >= 0.0) || !q.is_finite()) {
            return Err(Error::Config(format!(
                "noise intensity q_{} = {} must be finite and nonnegative",
                bad + 1,
                intensities[bad]
            )));
        }
        Ok(Self {
            intensities,
            decay_exponent: None,
            scale: 1.0,
        })
    }

    /// `q_k = λ_k^{−r}`; for `λ_k = k²` this is `k^{−2r}`.
    pub fn power_law(eigs: &OperatorSpectrum, r: f64) -> Self {
        Self::scaled_power_law(eigs, 1.0, r)
    }

    pub fn scaled_power_law(eigs: &OperatorSpectrum, scale: f64, r: f64) -> Self {
        Self {
            intensities: eigs.eigenvalues().iter().map(|l| scale * l.powf(-r)).collect(),
            decay_exponent: Some(r),
            scale,
        }
    }

    pub fn zero(n_modes: usize) -> Self {
        Self {
            intensities: vec![0.0; n_modes],
            decay_exponent: None,
            scale: 0.0,
        }
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn decay_exponent(&self) -> Option<f64> {
        self.decay_exponent
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn n_modes(&self) -> usize {
        self.intensities.len()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            intensities: self.intensities[..n.min(self.intensities.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Exact one-step law of a single mode: `x⁺ = decay·x + … + std·ζ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeLaw {
    pub decay: f64,
    pub std: f64,
}

fn mode_law(lambda: f64, q: f64, dt: f64) -> ModeLaw {
    let decay = (-lambda * dt).exp();
    // 1 − e^{−2λΔ} without cancellation for small λΔ
    let frac = -(-2.0 * lambda * dt).exp_m1();
    ModeLaw {
        decay,
        std: (q * frac / (2.0 * lambda)).sqrt(),
    }
}

/// Mean decay and standard deviation of the mode-`k` (1-based) convolution
/// increment over a step `dt`.
pub fn conv_increment_law(
    k: usize,
    dt: f64,
    spectrum: &NoiseSpectrum,
    eigs: &OperatorSpectrum,
) -> Result<ModeLaw> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("increment step must be > 0, got {dt}")));
    }
    if k == 0 || k > eigs.n_modes() || k > spectrum.n_modes() {
        return Err(Error::Dimension(format!("mode index {k} out of range")));
    }
    Ok(mode_law(eigs.eigenvalues()[k - 1], spectrum.intensities()[k - 1], dt))
}

/// Per-mode laws for a fixed step, precomputed once per integrator.
#[derive(Clone, Debug)]
pub struct IncrementTable {
    dt: f64,
    laws: Vec<ModeLaw>,
}

impl IncrementTable {
    pub fn new(dt: f64, spectrum: &NoiseSpectrum, eigs: &OperatorSpectrum) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("increment step must be > 0, got {dt}")));
        }
        if spectrum.n_modes() != eigs.n_modes() {
            return Err(Error::Dimension(format!(
                "noise spectrum has {} modes, operator has {}",
                spectrum.n_modes(),
                eigs.n_modes()
            )));
        }
        let laws = eigs
            .eigenvalues()
            .iter()
            .zip(spectrum.intensities())
            .map(|(l, q)| mode_law(*l, *q, dt))
            .collect();
        Ok(Self { dt, laws })
    }

    /// Laws of the fast equation, whose operator is `A/ε` and intensity
    /// `Q/ε`, over a step `h`. By the time change `s = t/ε` these are the
    /// laws of `(A, Q)` over `h/ε`.
    pub fn fast(h: f64, eps: f64, spectrum: &NoiseSpectrum, eigs: &OperatorSpectrum) -> Result<Self> {
        Self::new(h / eps, spectrum, eigs)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn laws(&self) -> &[ModeLaw] {
        &self.laws
    }

    /// Applies `u ↦ e^{AΔ}(u + drift_scale·drift) + noise` in place, drawing
    /// one Gaussian per mode from `stream`.
    pub fn mild_step(&self, u: &mut [f64], drift: &[f64], drift_scale: f64, stream: &mut NoiseStream) {
        for ((ui, di), law) in u.iter_mut().zip(drift).zip(&self.laws) {
            let z = stream.standard_normal();
            *ui = law.decay * (*ui + drift_scale * di) + law.std * z;
        }
    }
}

/// Distinguishes the independent driving noises derived from one root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseRole {
    /// `W¹`, slow-equation noise.
    Slow,
    /// `W²`, fast-equation noise.
    Fast,
    /// Frozen-equation replicas used by averaged-drift estimators.
    Frozen,
    /// Micro-solver noise inside on-the-fly averaged-drift estimation.
    Micro,
    /// Field samplers and other auxiliary draws.
    Auxiliary,
    Custom(u8),
}

impl NoiseRole {
    pub fn tag(self) -> u8 {
        match self {
            NoiseRole::Slow => 1,
            NoiseRole::Fast => 2,
            NoiseRole::Frozen => 3,
            NoiseRole::Micro => 4,
            NoiseRole::Auxiliary => 5,
            NoiseRole::Custom(t) => t,
        }
    }
}

/// Seeded Gaussian source. Single-owner mutable state.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Stream for trajectory `index` and `role` under `root_seed`. The stream id
/// `index << 8 | role` is injective for all `index < 2⁵⁶`.
pub fn derive_substream(root_seed: u64, index: u64, role: NoiseRole) -> NoiseStream {
    debug_assert!(index < (1u64 << 56));
    NoiseStream::with_stream(root_seed, (index << 8) | role.tag() as u64)
}

/// One vector of independent convolution increments over `dt`.
pub fn sample_increments(
    stream: &mut NoiseStream,
    dt: f64,
    spectrum: &NoiseSpectrum,
    eigs: &OperatorSpectrum,
) -> Result<SpectralField> {
    let table = IncrementTable::new(dt, spectrum, eigs)?;
    Ok(SpectralField::from_coeffs(
        table
            .laws()
            .iter()
            .map(|law| law.std * stream.standard_normal())
            .collect(),
    ))
}

/// Trace condition `Σ_k q_k/(2λ_k) < ∞` for the fast noise. Returns the
/// partial sum over the represented modes together with an integral-test
/// tail bound when both spectra follow power laws, `None` otherwise.
pub fn trace_condition(spectrum: &NoiseSpectrum, eigs: &OperatorSpectrum) -> (f64, Option<f64>) {
    let partial: f64 = spectrum
        .intensities()
        .iter()
        .zip(eigs.eigenvalues())
        .map(|(q, l)| q / (2.0 * l))
        .sum();
    let tail = match (spectrum.decay_exponent(), eigs.law()) {
        (Some(r), Some(law)) => {
            // q_k/(2λ_k) = (scale_q/2) a^{−(1+r)} k^{−p(1+r)}
            let s = law.exponent * (1.0 + r);
            if s > 1.0 {
                let c = 0.5 * spectrum.scale() * law.scale.powf(-(1.0 + r));
                let n = eigs.n_modes() as f64;
                Some(c * n.powf(1.0 - s) / (s - 1.0))
            } else {
                Some(f64::INFINITY)
            }
        }
        _ => None,
    };
    (partial, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat(n: usize) -> OperatorSpectrum {
        OperatorSpectrum::dirichlet_laplacian(n).unwrap()
    }

    #[test]
    fn stationary_variance_limit() {
        let eigs = OperatorSpectrum::new(vec![1.0]).unwrap();
        let q = NoiseSpectrum::new(vec![1.0]).unwrap();
        let law = conv_increment_law(1, 60.0, &q, &eigs).unwrap();
        assert!((law.std * law.std - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_step_variance_is_q_dt() {
        let eigs = heat(4);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        for k in 1..=4 {
            let dt = 1e-7;
            let law = conv_increment_law(k, dt, &q, &eigs).unwrap();
            let qk = q.intensities()[k - 1];
            let lam = eigs.eigenvalues()[k - 1];
            assert!((law.std * law.std - qk * dt).abs() < 2.0 * qk * lam * dt * dt);
        }
    }

    #[test]
    fn closed_form_variance() {
        let eigs = heat(8);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        for k in 1..=8 {
            let law = conv_increment_law(k, 0.1, &q, &eigs).unwrap();
            let l = (k * k) as f64;
            let qk = (k as f64).powf(-0.2);
            let expect = qk * (1.0 - (-2.0 * l * 0.1f64).exp()) / (2.0 * l);
            assert!((law.std * law.std - expect).abs() < 1e-12);
            assert!((law.decay - (-l * 0.1f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn time_change_identity() {
        let eigs = heat(16);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        let (h, eps) = (3e-4, 3e-3);
        let via_time_change = IncrementTable::fast(h, eps, &q, &eigs).unwrap();
        for (k, law) in via_time_change.laws().iter().enumerate() {
            let l = eigs.eigenvalues()[k] / eps;
            let qk = q.intensities()[k] / eps;
            let decay = (-l * h).exp();
            let std = (qk * (1.0 - (-2.0 * l * h).exp()) / (2.0 * l)).sqrt();
            assert!((law.decay - decay).abs() < 1e-12);
            assert!((law.std - std).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_step_rejected() {
        let eigs = heat(2);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        assert!(matches!(conv_increment_law(1, 0.0, &q, &eigs), Err(Error::Domain(_))));
        assert!(conv_increment_law(1, -1.0, &q, &eigs).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let eigs = heat(8);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        let mut a = derive_substream(42, 3, NoiseRole::Slow);
        let mut b = derive_substream(42, 3, NoiseRole::Slow);
        for _ in 0..5 {
            assert_eq!(
                sample_increments(&mut a, 0.01, &q, &eigs).unwrap(),
                sample_increments(&mut b, 0.01, &q, &eigs).unwrap()
            );
        }
    }

    #[test]
    fn degenerate_noise_is_zero() {
        let eigs = heat(8);
        let mut s = NoiseStream::new(1);
        let u = sample_increments(&mut s, 0.1, &NoiseSpectrum::zero(8), &eigs).unwrap();
        assert!(u.coeffs().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn distinct_indices_differ() {
        let mut a = derive_substream(9, 0, NoiseRole::Fast);
        let mut b = derive_substream(9, 1, NoiseRole::Fast);
        assert_ne!(a.standard_normal(), b.standard_normal());
    }

    #[test]
    fn sample_mean_is_centered() {
        let eigs = heat(4);
        let q = NoiseSpectrum::power_law(&eigs, 0.1);
        let mut s = derive_substream(5, 0, NoiseRole::Auxiliary);
        let n = 100_000;
        let mut sum = [0.0; 4];
        for _ in 0..n {
            let u = sample_increments(&mut s, 0.05, &q, &eigs).unwrap();
            for (a, c) in sum.iter_mut().zip(u.coeffs()) {
                *a += c;
            }
        }
        for k in 1..=4 {
            let sd = conv_increment_law(k, 0.05, &q, &eigs).unwrap().std;
            let mean = sum[k - 1] / n as f64;
            assert!(mean.abs() < 4.0 * sd / (n as f64).sqrt(), "mode {k}: mean {mean}");
        }
    }

    #[test]
    fn roles_are_uncorrelated() {
        let mut w1 = derive_substream(77, 0, NoiseRole::Slow);
        let mut w2 = derive_substream(77, 0, NoiseRole::Fast);
        let n = 100_000;
        let mut cross = 0.0;
        for _ in 0..n {
            cross += w1.standard_normal() * w2.standard_normal();
        }
        let corr = cross / n as f64;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "correlation {corr}");
    }

    #[test]
    fn trace_condition_heat_spectrum() {
        let eigs = heat(32);
        let q2 = NoiseSpectrum::power_law(&eigs, 0.1);
        let (partial, tail) = trace_condition(&q2, &eigs);
        let tail = tail.unwrap();
        assert!(partial > 0.5 && partial < 1.0);
        // Σ_{k>32} k^{−2.2}/2 ≤ 32^{−1.2}/2.4
        assert!(tail.is_finite() && tail < 32f64.powf(-1.2) / 2.4 + 1e-15);
    }
}
