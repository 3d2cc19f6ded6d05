//! Averaged drift `B̄(x) = ∫ B(x, y) μˣ(dy)` estimated from the frozen fast
//! equation, plus oracles that feed it to the averaged-equation solver.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::experiments::{exp_rate_fit, ExpFit};
use crate::model::ModelConfig;
use crate::noise::{derive_substream, NoiseRole, NoiseStream};
use crate::simulator::FrozenStepper;
use crate::spectral::SpectralField;
use crate::{Error, Result};

/// Anything that can return `B̄(x)` on demand.
pub trait AveragedDrift {
    fn averaged_drift(&mut self, x: &SpectralField) -> Result<SpectralField>;
}

impl<F> AveragedDrift for F
where
    F: FnMut(&SpectralField) -> Result<SpectralField>,
{
    fn averaged_drift(&mut self, x: &SpectralField) -> Result<SpectralField> {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Time average over `[T_b, T_b + T_a]` along each replica.
    TimeAverage,
    /// One sample per replica at time `T_b`.
    EnsembleAtHorizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingParams {
    pub burn_in: f64,
    pub avg_time: f64,
    pub dt: f64,
    pub n_replicas: usize,
    pub strategy: Strategy,
}

impl AveragingParams {
    /// Target bias of the default burn-in, relative to `sup|B|`.
    pub const DEFAULT_TOL: f64 = 1e-3;

    /// Burn-in `(2/((λ₁ − L_F)β))·ln(1/tol)` from the exponential mixing bound.
    pub fn default_burn_in(config: &ModelConfig, tol: f64) -> Result<f64> {
        let gap = config.spectral_gap();
        if !(gap > 0.0) {
            return Err(Error::Refused(format!(
                "spectral gap λ₁ - L_F = {gap} is not positive; the frozen equation need not be ergodic"
            )));
        }
        Ok(2.0 / (gap * config.beta) * (1.0 / tol).ln())
    }

    pub fn default_for(config: &ModelConfig) -> Result<Self> {
        Ok(Self {
            burn_in: Self::default_burn_in(config, Self::DEFAULT_TOL)?,
            avg_time: 50.0,
            dt: 0.05,
            n_replicas: 8,
            strategy: Strategy::TimeAverage,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("averaging dt = {} must be positive", self.dt)));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::Config(format!("burn-in {} must be >= 0", self.burn_in)));
        }
        if self.strategy == Strategy::TimeAverage && !(self.avg_time >= self.dt) {
            return Err(Error::Config(format!(
                "averaging time {} must be at least one step {}",
                self.avg_time, self.dt
            )));
        }
        if self.n_replicas < 2 {
            return Err(Error::Config("need at least 2 replicas for an error bar".into()));
        }
        Ok(())
    }

    fn burn_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }

    fn avg_steps(&self) -> usize {
        ((self.avg_time / self.dt).round() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BbarEstimate {
    pub x: SpectralField,
    pub value: SpectralField,
    /// `√(Σ_k SE_k²)`, the standard error on the `H`-norm scale.
    pub stderr: f64,
    pub mode_stderr: Vec<f64>,
    pub params: AveragingParams,
    pub seed: u64,
}

fn check_gap(config: &ModelConfig) -> Result<()> {
    let gap = config.spectral_gap();
    if !(gap > 0.0) {
        return Err(Error::Refused(format!(
            "spectral gap λ₁ - L_F = {gap} is not positive; ergodicity of the frozen equation is not guaranteed"
        )));
    }
    Ok(())
}

/// Estimate started from `y₀ = 0`.
pub fn estimate_bbar(
    x: &SpectralField,
    params: &AveragingParams,
    config: &ModelConfig,
    seed: u64,
) -> Result<BbarEstimate> {
    estimate_bbar_from(x, &SpectralField::zeros(config.n_modes()), params, config, seed)
}

/// One replica's contribution: the grid average of `B(x, Y_t)` over the
/// averaging window, projected onto the modes.
fn replica_value(
    x: &SpectralField,
    y0: &SpectralField,
    params: &AveragingParams,
    config: &ModelConfig,
    stream: &mut NoiseStream,
) -> Result<SpectralField> {
    let mut stepper = FrozenStepper::new(config, params.dt)?;
    stepper.set_x(x);
    let mut y = y0.clone();
    for _ in 0..params.burn_steps() {
        stepper.step(&mut y, stream)?;
    }
    let m = config.grid_points;
    let mut acc = vec![0.0; m];
    let samples = match params.strategy {
        Strategy::TimeAverage => params.avg_steps(),
        Strategy::EnsembleAtHorizon => 1,
    };
    for i in 0..samples {
        if params.strategy == Strategy::TimeAverage || i > 0 {
            stepper.step(&mut y, stream)?;
        }
        let g = stepper.pseudo().eval_on_grid(&config.drift_b, y.coeffs())?;
        for (a, v) in acc.iter_mut().zip(g) {
            *a += v;
        }
    }
    let inv = 1.0 / samples as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    Ok(stepper.pseudo().project(&acc))
}

pub fn estimate_bbar_from(
    x: &SpectralField,
    y0: &SpectralField,
    params: &AveragingParams,
    config: &ModelConfig,
    seed: u64,
) -> Result<BbarEstimate> {
    check_gap(config)?;
    params.validate()?;
    let n = config.n_modes();
    if x.n_modes() != n || y0.n_modes() != n {
        return Err(Error::Dimension(format!("fields must have {n} modes")));
    }
    let replicas: Vec<SpectralField> = (0..params.n_replicas)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_substream(seed, i as u64, NoiseRole::Frozen);
            replica_value(x, y0, params, config, &mut stream)
        })
        .collect::<Result<_>>()?;
    let r = replicas.len() as f64;
    let mut mean = vec![0.0; n];
    for v in &replicas {
        for (m, c) in mean.iter_mut().zip(v.coeffs()) {
            *m += c / r;
        }
    }
    let mut mode_stderr = vec![0.0; n];
    for (k, se) in mode_stderr.iter_mut().enumerate() {
        let var: f64 = replicas.iter().map(|v| (v.coeffs()[k] - mean[k]).powi(2)).sum::<f64>() / (r - 1.0);
        *se = (var / r).sqrt();
    }
    let stderr = mode_stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(BbarEstimate {
        x: x.clone(),
        value: SpectralField::from_coeffs(mean),
        stderr,
        mode_stderr,
        params: *params,
        seed,
    })
}

/// Memoizing averaged-drift oracle. The key is the first `key_modes`
/// coefficients of `x` rounded to `resolution`; a miss estimates at the
/// queried point with a fixed seed (common random numbers across points).
#[derive(Debug)]
pub struct BbarOracle {
    config: ModelConfig,
    params: AveragingParams,
    seed: u64,
    resolution: f64,
    key_modes: usize,
    cache: Mutex<HashMap<Vec<i64>, BbarEstimate>>,
}

impl BbarOracle {
    pub const DEFAULT_RESOLUTION: f64 = 1e-2;
    pub const DEFAULT_KEY_MODES: usize = 8;

    pub fn new(config: &ModelConfig, params: AveragingParams, seed: u64, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::Config(format!(
                "cache resolution {resolution} must be positive (0 would make the cache unbounded)"
            )));
        }
        check_gap(config)?;
        params.validate()?;
        Ok(Self {
            config: config.clone(),
            params,
            seed,
            resolution,
            key_modes: Self::DEFAULT_KEY_MODES,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_key_modes(mut self, k: usize) -> Self {
        self.key_modes = k.max(1);
        self
    }

    fn key(&self, x: &SpectralField) -> Vec<i64> {
        x.coeffs()
            .iter()
            .take(self.key_modes)
            .map(|c| (c / self.resolution).round() as i64)
            .collect()
    }

    pub fn estimate(&self, x: &SpectralField) -> Result<BbarEstimate> {
        let key = self.key(x);
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let est = estimate_bbar(x, &self.params, &self.config, self.seed)?;
        self.cache.lock().expect("cache poisoned").insert(key, est.clone());
        Ok(est)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

impl AveragedDrift for BbarOracle {
    fn averaged_drift(&mut self, x: &SpectralField) -> Result<SpectralField> {
        Ok(self.estimate(x)?.value)
    }
}

impl AveragedDrift for &BbarOracle {
    fn averaged_drift(&mut self, x: &SpectralField) -> Result<SpectralField> {
        Ok(self.estimate(x)?.value)
    }
}

/// On-the-fly averaged drift for long averaged-equation runs: a single
/// frozen-equation state is carried from call to call (warm start) and each
/// call averages `B(x, ·)` over `window` fast-time units after re-freezing at
/// the new `x`. Because successive `x` are close, the carried state is
/// already near equilibrium for the new point.
#[derive(Clone, Debug)]
pub struct WarmStartDrift {
    stepper: FrozenStepper,
    drift_b: crate::model::Drift,
    y: SpectralField,
    stream: NoiseStream,
    n_steps: usize,
    acc: Vec<f64>,
}

impl WarmStartDrift {
    pub fn new(
        config: &ModelConfig,
        y0: SpectralField,
        dt: f64,
        window: f64,
        stream: NoiseStream,
    ) -> Result<Self> {
        check_gap(config)?;
        if !(window >= dt && dt > 0.0) {
            return Err(Error::Config(format!("window {window} must cover at least one step {dt}")));
        }
        Ok(Self {
            stepper: FrozenStepper::new(config, dt)?,
            drift_b: config.drift_b.clone(),
            y: y0,
            stream,
            n_steps: (window / dt).round() as usize,
            acc: vec![0.0; config.grid_points],
        })
    }

    /// Runs the carried state for `t` fast-time units at `x` without averaging.
    pub fn burn_in(&mut self, x: &SpectralField, t: f64) -> Result<()> {
        self.stepper.set_x(x);
        let n = (t / self.stepper.dt()).round() as usize;
        for _ in 0..n {
            self.stepper.step(&mut self.y, &mut self.stream)?;
        }
        Ok(())
    }
}

impl AveragedDrift for WarmStartDrift {
    fn averaged_drift(&mut self, x: &SpectralField) -> Result<SpectralField> {
        self.stepper.set_x(x);
        self.acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..self.n_steps {
            self.stepper.step(&mut self.y, &mut self.stream)?;
            let g = self.stepper.pseudo().eval_on_grid(&self.drift_b, self.y.coeffs())?;
            for (a, v) in self.acc.iter_mut().zip(g) {
                *a += v;
            }
        }
        let inv = 1.0 / self.n_steps as f64;
        self.acc.iter_mut().for_each(|a| *a *= inv);
        Ok(self.stepper.pseudo().project(&self.acc))
    }
}

/// Decay-rate fit of `|E φ(Y_t) − μˣ(φ)|` for `φ` the mode-1 coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct MixingFit {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Estimated stationary mean of the observable.
    pub stationary_mean: f64,
    pub fit: Option<ExpFit>,
    /// Set when the data cannot pin down a rate (too short a horizon or too
    /// few significant points).
    pub wide_ci: bool,
    pub decaying: bool,
}

#[derive(Clone, Debug)]
pub struct MixingOptions {
    pub y0: SpectralField,
    pub dt: f64,
    /// Record every this many steps.
    pub sample_every: usize,
    pub seed: u64,
}

/// Starts `n_replicas` frozen paths at `y₀`, tracks the replica mean of the
/// mode-1 coordinate up to `horizon`, estimates the stationary mean from the
/// window `[horizon, 2·horizon]` and fits an exponential rate to the
/// deviations that exceed twice their standard error.
pub fn mixing_diagnostic(
    x: &SpectralField,
    config: &ModelConfig,
    horizon: f64,
    n_replicas: usize,
    opts: &MixingOptions,
) -> Result<MixingFit> {
    check_gap(config)?;
    if n_replicas < 2 {
        return Err(Error::Config("mixing diagnostic needs at least 2 replicas".into()));
    }
    if !(horizon > 0.0 && opts.dt > 0.0) || opts.sample_every == 0 {
        return Err(Error::Config("horizon, dt and sampling stride must be positive".into()));
    }
    let n_h = (horizon / opts.dt).round().max(1.0) as usize;
    let n_samples = n_h / opts.sample_every + 1;
    let paths: Vec<(Vec<f64>, f64)> = (0..n_replicas)
        .into_par_iter()
        .map(|i| {
            let mut stream = derive_substream(opts.seed, i as u64, NoiseRole::Frozen);
            let mut stepper = FrozenStepper::new(config, opts.dt)?;
            stepper.set_x(x);
            let mut y = opts.y0.clone();
            let mut rec = Vec::with_capacity(n_samples);
            rec.push(y.mode(1));
            for s in 1..=n_h {
                stepper.step(&mut y, &mut stream)?;
                if s % opts.sample_every == 0 {
                    rec.push(y.mode(1));
                }
            }
            let mut tail = 0.0;
            for _ in 0..n_h {
                stepper.step(&mut y, &mut stream)?;
                tail += y.mode(1);
            }
            Ok((rec, tail / n_h as f64))
        })
        .collect::<Result<_>>()?;
    let r = n_replicas as f64;
    let mu = paths.iter().map(|p| p.1).sum::<f64>() / r;
    let n_rec = paths[0].0.len();
    let mut times = Vec::with_capacity(n_rec);
    let mut deviations = Vec::with_capacity(n_rec);
    let mut stderrs = Vec::with_capacity(n_rec);
    for j in 0..n_rec {
        let vals: Vec<f64> = paths.iter().map(|p| p.0[j]).collect();
        let m = vals.iter().sum::<f64>() / r;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1.0);
        times.push((j * opts.sample_every) as f64 * opts.dt);
        deviations.push((m - mu).abs());
        stderrs.push((var / r).sqrt());
    }
    let pts: Vec<(f64, f64, f64)> = times
        .iter()
        .zip(&deviations)
        .zip(&stderrs)
        .filter(|((_, d), s)| **d > 2.0 * **s)
        .map(|((t, d), s)| (*t, *d, *s))
        .collect();
    let relaxation = 1.0 / config.spectral_gap();
    let fit = if pts.len() >= 3 { exp_rate_fit(&pts).ok() } else { None };
    let wide_ci = match &fit {
        None => true,
        Some(f) => horizon < relaxation || !(f.rate_ci < f.rate.abs()),
    };
    let decaying = fit.as_ref().map(|f| f.rate > 0.0).unwrap_or(false);
    Ok(MixingFit { times, deviations, stderrs, stationary_mean: mu, fit, wide_ci, decaying })
}
