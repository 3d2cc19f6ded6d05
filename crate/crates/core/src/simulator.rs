//! Exponential-Euler integrators for the coupled slow-fast system, the frozen
//! fast equation, the averaged slow equation and the block-frozen auxiliary
//! fast process.
//!
//! Every step has the form `u⁺ = e^{AΔ}(u + Δ·drift) + ξ` where `ξ` is the
//! exact stochastic-convolution increment, so the linear part and the noise
//! carry no discretization error. Drifts are evaluated pseudospectrally.

use rustfft::num_complex::Complex64;

use crate::averaging::AveragedDrift;
use crate::model::{Drift, ModelConfig};
use crate::noise::{IncrementTable, NoiseStream};
use crate::spectral::{SineTransform, SpectralField};
use crate::{Error, Result};

/// Time-stepping parameters of the slow-fast integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepScheme {
    /// Macro (slow) step `Δ`.
    pub dt_macro: f64,
    /// `h̃` in `(0, 1]`: the fast substep is at most `ε·h̃`.
    pub fast_substep_factor: f64,
}

impl StepScheme {
    pub const DEFAULT_FAST_FACTOR: f64 = 0.1;

    pub fn new(dt_macro: f64, fast_substep_factor: f64) -> Result<Self> {
        if !(dt_macro > 0.0 && dt_macro.is_finite()) {
            return Err(Error::Config(format!("dt = {dt_macro} must be positive")));
        }
        if !(fast_substep_factor > 0.0 && fast_substep_factor <= 1.0) {
            return Err(Error::Config(format!(
                "fast substep factor {fast_substep_factor} must lie in (0, 1]"
            )));
        }
        Ok(Self { dt_macro, fast_substep_factor })
    }

    pub fn with_dt(dt_macro: f64) -> Result<Self> {
        Self::new(dt_macro, Self::DEFAULT_FAST_FACTOR)
    }

    /// `⌈Δ/(ε·h̃)⌉`.
    pub fn n_substeps(&self, eps: f64) -> usize {
        let n = (self.dt_macro / (eps * self.fast_substep_factor) * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }

    pub fn fast_dt(&self, eps: f64) -> f64 {
        self.dt_macro / self.n_substeps(eps) as f64
    }
}

/// State of the coupled system at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlowFastState {
    pub x: SpectralField,
    pub y: SpectralField,
    pub t: f64,
    eps: f64,
}

impl SlowFastState {
    pub fn new(x: SpectralField, y: SpectralField, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if x.n_modes() != y.n_modes() {
            return Err(Error::Dimension(format!(
                "slow field has {} modes, fast field {}",
                x.n_modes(),
                y.n_modes()
            )));
        }
        if x.n_modes() == 0 {
            return Err(Error::Dimension("zero-mode state".into()));
        }
        Ok(Self { x, y, t: 0.0, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("eps = {eps} must lie in (0, 1)")));
    }
    Ok(())
}

/// Reusable buffers for pseudospectral drift evaluation.
#[derive(Clone, Debug)]
pub(crate) struct Pseudo {
    tr: SineTransform,
    buf: Vec<Complex64>,
    xg: Vec<f64>,
    yg: Vec<f64>,
    fg: Vec<f64>,
    out: Vec<f64>,
}

impl Pseudo {
    pub(crate) fn new(config: &ModelConfig) -> Result<Self> {
        let tr = config.transform()?;
        let m = tr.m_points();
        Ok(Self {
            buf: tr.scratch(),
            xg: vec![0.0; m],
            yg: vec![0.0; m],
            fg: vec![0.0; m],
            out: vec![0.0; tr.n_modes()],
            tr,
        })
    }

    /// Loads the slow argument onto the grid.
    pub(crate) fn set_x(&mut self, x: &[f64]) {
        self.tr.to_grid_into(x, &mut self.xg, &mut self.buf);
    }

    /// `drift(x, y)` in mode space with `x` taken from the last [`Self::set_x`].
    pub(crate) fn eval(&mut self, drift: &Drift, y: &[f64]) -> Result<&[f64]> {
        self.tr.to_grid_into(y, &mut self.yg, &mut self.buf);
        drift.eval_grid(&self.xg, &self.yg, &mut self.fg)?;
        self.tr.from_grid_into(&self.fg, &mut self.out, &mut self.buf);
        Ok(&self.out)
    }

    /// Grid values of `drift(x, y)` with `x` from the last [`Self::set_x`].
    pub(crate) fn eval_on_grid(&mut self, drift: &Drift, y: &[f64]) -> Result<&[f64]> {
        self.tr.to_grid_into(y, &mut self.yg, &mut self.buf);
        drift.eval_grid(&self.xg, &self.yg, &mut self.fg)?;
        Ok(&self.fg)
    }

    pub(crate) fn project(&mut self, grid: &[f64]) -> SpectralField {
        let mut out = vec![0.0; self.tr.n_modes()];
        self.tr.from_grid_into(grid, &mut out, &mut self.buf);
        SpectralField::from_coeffs(out)
    }
}

/// One exponential-Euler integrator of the frozen equation
/// `dY = [AY + F(x, Y)]dt + √Q₂ dW²` with step `dt`.
#[derive(Clone, Debug)]
pub struct FrozenStepper {
    table: IncrementTable,
    pseudo: Pseudo,
    drift: Drift,
}

impl FrozenStepper {
    pub fn new(config: &ModelConfig, dt: f64) -> Result<Self> {
        Ok(Self {
            table: IncrementTable::new(dt, &config.q2, &config.eigs)?,
            pseudo: Pseudo::new(config)?,
            drift: config.drift_f.clone(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.table.dt()
    }

    pub fn set_x(&mut self, x: &SpectralField) {
        self.pseudo.set_x(x.coeffs());
    }

    pub fn step(&mut self, y: &mut SpectralField, w2: &mut NoiseStream) -> Result<()> {
        let dt = self.table.dt();
        let f = self.pseudo.eval(&self.drift, y.coeffs())?;
        self.table.mild_step(y.coeffs_mut(), f, dt, w2);
        Ok(())
    }

    pub(crate) fn pseudo(&mut self) -> &mut Pseudo {
        &mut self.pseudo
    }
}

/// Integrator of the coupled system for a fixed `ε` and scheme.
#[derive(Clone, Debug)]
pub struct SlowFastStepper {
    scheme: StepScheme,
    eps: f64,
    n_sub: usize,
    slow: IncrementTable,
    fast: FrozenStepper,
    pseudo_b: Pseudo,
    drift_b: Drift,
}

impl SlowFastStepper {
    pub fn new(config: &ModelConfig, scheme: StepScheme, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        config.validate()?;
        let n_sub = scheme.n_substeps(eps);
        let h = scheme.dt_macro / n_sub as f64;
        Ok(Self {
            scheme,
            eps,
            n_sub,
            slow: IncrementTable::new(scheme.dt_macro, &config.q1, &config.eigs)?,
            // time change: the fast equation over h is (A, Q₂) over h/ε
            fast: FrozenStepper::new(config, h / eps)?,
            pseudo_b: Pseudo::new(config)?,
            drift_b: config.drift_b.clone(),
        })
    }

    pub fn n_substeps(&self) -> usize {
        self.n_sub
    }

    pub fn scheme(&self) -> StepScheme {
        self.scheme
    }

    /// Advances by one macro step. `W¹` is consumed once per macro step,
    /// `W²` once per fast substep; both drifts see `X` at the macro-step start.
    pub fn step(&mut self, state: &mut SlowFastState, w1: &mut NoiseStream, w2: &mut NoiseStream) -> Result<()> {
        if state.eps != self.eps {
            return Err(Error::Config("state and stepper disagree on eps".into()));
        }
        self.pseudo_b.set_x(state.x.coeffs());
        let b = self.pseudo_b.eval(&self.drift_b, state.y.coeffs())?.to_vec();
        self.fast.set_x(&state.x);
        for _ in 0..self.n_sub {
            self.fast.step(&mut state.y, w2)?;
        }
        let dt = self.scheme.dt_macro;
        self.slow.mild_step(state.x.coeffs_mut(), &b, dt, w1);
        state.t += dt;
        Ok(())
    }
}

/// One macro step of the coupled system.
pub fn step_slow_fast(
    state: &SlowFastState,
    scheme: &StepScheme,
    w1: &mut NoiseStream,
    w2: &mut NoiseStream,
    config: &ModelConfig,
) -> Result<SlowFastState> {
    let mut stepper = SlowFastStepper::new(config, *scheme, state.eps)?;
    let mut next = state.clone();
    stepper.step(&mut next, w1, w2)?;
    Ok(next)
}

/// Sampled path of a single field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
}

impl Trajectory {
    fn push(&mut self, t: f64, u: &SpectralField) {
        self.times.push(t);
        self.states.push(u.clone());
    }

    pub fn last(&self) -> Option<&SpectralField> {
        self.states.last()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Sampled path of the coupled system on the macro grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SlowFastPath {
    pub times: Vec<f64>,
    pub x: Vec<SpectralField>,
    pub y: Vec<SpectralField>,
}

pub fn n_steps(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::Config(format!("need T > 0 and dt > 0 (T = {t_end}, dt = {dt})")));
    }
    let n = (t_end / dt).round();
    if ((n * dt) - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Path of the coupled system, recorded at every macro step (including `t = 0`).
#[allow(clippy::too_many_arguments)]
pub fn simulate_slow_fast(
    config: &ModelConfig,
    x0: &SpectralField,
    y0: &SpectralField,
    eps: f64,
    scheme: StepScheme,
    t_end: f64,
    w1: &mut NoiseStream,
    w2: &mut NoiseStream,
) -> Result<SlowFastPath> {
    let n = n_steps(t_end, scheme.dt_macro)?;
    let mut stepper = SlowFastStepper::new(config, scheme, eps)?;
    let mut state = SlowFastState::new(x0.clone(), y0.clone(), eps)?;
    let mut path = SlowFastPath::default();
    path.times.push(0.0);
    path.x.push(state.x.clone());
    path.y.push(state.y.clone());
    for i in 1..=n {
        stepper.step(&mut state, w1, w2)?;
        path.times.push(i as f64 * scheme.dt_macro);
        path.x.push(state.x.clone());
        path.y.push(state.y.clone());
    }
    Ok(path)
}

/// Frozen-equation path with the slow argument fixed at `x`.
pub fn simulate_frozen(
    x: &SpectralField,
    y0: &SpectralField,
    t_end: f64,
    dt: f64,
    w2: &mut NoiseStream,
    config: &ModelConfig,
) -> Result<Trajectory> {
    let n = n_steps(t_end, dt)?;
    let mut stepper = FrozenStepper::new(config, dt)?;
    stepper.set_x(x);
    let mut y = y0.clone();
    let mut traj = Trajectory::default();
    traj.push(0.0, &y);
    for i in 1..=n {
        stepper.step(&mut y, w2)?;
        traj.push(i as f64 * dt, &y);
    }
    Ok(traj)
}

/// Averaged-equation path; `W¹` is consumed in the same order as
/// [`SlowFastStepper::step`], so equal streams give coupled paths.
pub fn simulate_averaged(
    x0: &SpectralField,
    t_end: f64,
    dt: f64,
    w1: &mut NoiseStream,
    bbar: &mut dyn AveragedDrift,
    config: &ModelConfig,
) -> Result<Trajectory> {
    let n = n_steps(t_end, dt)?;
    let table = IncrementTable::new(dt, &config.q1, &config.eigs)?;
    let mut x = x0.clone();
    let mut traj = Trajectory::default();
    traj.push(0.0, &x);
    for i in 1..=n {
        let b = bbar.averaged_drift(&x)?;
        if b.n_modes() != x.n_modes() {
            return Err(Error::Dimension("averaged drift returned a field of the wrong size".into()));
        }
        table.mild_step(x.coeffs_mut(), b.coeffs(), dt, w1);
        traj.push(i as f64 * dt, &x);
    }
    Ok(traj)
}

/// Fast process with its slow argument frozen at `X_{t(δ)}`, `t(δ) = ⌊t/δ⌋δ`.
/// `slow_path` holds the slow path on the macro grid of `scheme` (as returned
/// by [`simulate_slow_fast`]); `w2` must replay the fast noise of that run.
pub fn simulate_auxiliary_fast(
    slow_path: &[SpectralField],
    y0: &SpectralField,
    delta: f64,
    eps: f64,
    scheme: StepScheme,
    w2: &mut NoiseStream,
    config: &ModelConfig,
) -> Result<Trajectory> {
    check_eps(eps)?;
    if slow_path.is_empty() {
        return Err(Error::Config("empty slow path".into()));
    }
    let dt = scheme.dt_macro;
    let ratio = delta / dt;
    let block = ratio.round();
    if !(block >= 1.0) || (ratio - block).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!(
            "freeze block delta = {delta} is not a positive multiple of dt = {dt}"
        )));
    }
    let block = block as usize;
    let n_sub = scheme.n_substeps(eps);
    let mut fast = FrozenStepper::new(config, scheme.fast_dt(eps) / eps)?;
    let mut y = y0.clone();
    let mut traj = Trajectory::default();
    traj.push(0.0, &y);
    let mut frozen_at = usize::MAX;
    for n in 0..slow_path.len() - 1 {
        let k = (n / block) * block;
        if k != frozen_at {
            fast.set_x(&slow_path[k]);
            frozen_at = k;
        }
        for _ in 0..n_sub {
            fast.step(&mut y, w2)?;
        }
        traj.push((n + 1) as f64 * dt, &y);
    }
    Ok(traj)
}
