//! Resolvent equation `λU − L̄U = G` at truncated dimension `d ≤ 3`, solved
//! through the integral fixed point
//! `U = ∫₀^∞ e^{−λt} T_t(⟨B̄, DU⟩ + G) dt` by Picard iteration from `U ≡ 0`.
//!
//! `T_t` is the Ornstein–Uhlenbeck semigroup of the first `d` modes, computed
//! by tensor Gauss–Hermite quadrature against its exact Gaussian transition.
//! Gradients use Gaussian integration by parts,
//! `∂_j T_t f(x) = E[f(m + sZ) Z_j] e^{−λ_j t}/s_j`, so only values of `f` are
//! needed.

use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{estimate_bbar, AveragingParams};
use crate::model::ModelConfig;
use crate::numerics::{gauss_hermite, log_panel_rule};
use crate::spectral::SpectralField;
use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A map `R^d → R^{n_out}`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn n_out(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_out()];
        self.eval_into(x, &mut out);
        out
    }
}

/// A closure viewed as a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    n_out: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnField<F> {
    pub fn new(dim: usize, n_out: usize, f: F) -> Self {
        Self { dim, n_out, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Samples on the tensor grid of `[−R_a, R_a]` with `n` nodes per axis,
/// multilinear in between and clamped outside the box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncatedFunction {
    dim: usize,
    n_out: usize,
    n_per_axis: usize,
    radii: Vec<f64>,
    /// Node-major: `values[node * n_out + c]`, axis 0 varying fastest.
    values: Vec<f64>,
}

impl TruncatedFunction {
    pub fn zeros(radii: Vec<f64>, n_per_axis: usize, n_out: usize) -> Result<Self> {
        let dim = radii.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if n_per_axis < 2 {
            return Err(Error::Config("need at least 2 nodes per axis".into()));
        }
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("box radii must be positive".into()));
        }
        let n_nodes = n_per_axis.pow(dim as u32);
        Ok(Self { dim, n_out, n_per_axis, radii, values: vec![0.0; n_nodes * n_out] })
    }

    pub fn sample(radii: Vec<f64>, n_per_axis: usize, f: &dyn VectorField) -> Result<Self> {
        let mut g = Self::zeros(radii, n_per_axis, f.n_out())?;
        if f.dim() != g.dim {
            return Err(Error::Dimension("sampled field has the wrong dimension".into()));
        }
        let n_out = g.n_out;
        let nodes: Vec<Vec<f64>> = (0..g.n_nodes()).map(|i| g.node(i)).collect();
        for (i, x) in nodes.iter().enumerate() {
            f.eval_into(x, &mut g.values[i * n_out..(i + 1) * n_out]);
        }
        Ok(g)
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len() / self.n_out.max(1)
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_value(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_out..(i + 1) * self.n_out]
    }

    fn spacing(&self, a: usize) -> f64 {
        2.0 * self.radii[a] / (self.n_per_axis - 1) as f64
    }

    /// Coordinates of node `i`.
    pub fn node(&self, mut i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (a, xa) in x.iter_mut().enumerate() {
            let ia = i % self.n_per_axis;
            i /= self.n_per_axis;
            *xa = -self.radii[a] + ia as f64 * self.spacing(a);
        }
        x
    }

    /// Largest absolute node value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n_per_axis == other.n_per_axis && self.radii == other.radii
    }
}

impl VectorField for TruncatedFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_per_axis;
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for a in 0..self.dim {
            let r = self.radii[a];
            let u = (x[a].clamp(-r, r) + r) / self.spacing(a);
            let i0 = (u.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = u - i0 as f64;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for a in 0..self.dim {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx += (base[a] + bit) * stride;
                stride *= n;
            }
            if w == 0.0 {
                continue;
            }
            let v = &self.values[idx * self.n_out..(idx + 1) * self.n_out];
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }
    }
}

/// Per-mode OU data of the first `d` modes: `dZ = −λ Z dt + √q dW`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuKernel {
    pub lambdas: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl OuKernel {
    pub fn new(lambdas: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() > MAX_DIM || lambdas.len() != intensities.len() {
            return Err(Error::Dimension("kernel needs 1..=3 matching modes".into()));
        }
        if lambdas.iter().any(|l| !(*l > 0.0)) || intensities.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::Config("kernel eigenvalues and intensities must be positive".into()));
        }
        Ok(Self { lambdas, intensities })
    }

    /// First `dim` modes of the slow operator and noise.
    pub fn from_config(config: &ModelConfig, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM || dim > config.n_modes() {
            return Err(Error::Dimension(format!("truncation dimension {dim} outside 1..={MAX_DIM}")));
        }
        Self::new(
            config.eigs.eigenvalues()[..dim].to_vec(),
            config.q1.intensities()[..dim].to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn decay(&self, t: f64) -> Vec<f64> {
        self.lambdas.iter().map(|l| (-l * t).exp()).collect()
    }

    /// `√(q(1 − e^{−2λt})/(2λ))` per axis.
    pub fn std(&self, t: f64) -> Vec<f64> {
        self.lambdas
            .iter()
            .zip(&self.intensities)
            .map(|(l, q)| (-q * (-2.0 * l * t).exp_m1() / (2.0 * l)).sqrt())
            .collect()
    }

    pub fn stationary_std(&self) -> Vec<f64> {
        self.lambdas.iter().zip(&self.intensities).map(|(l, q)| (q / (2.0 * l)).sqrt()).collect()
    }

    /// Box radii `4·stationary std`.
    pub fn default_radii(&self) -> Vec<f64> {
        self.stationary_std().iter().map(|s| 4.0 * s).collect()
    }
}

/// Tensor Gauss–Hermite rule for `E f(Z)`, `Z ~ N(0, I_d)`.
#[derive(Clone, Debug)]
pub struct TensorRule {
    dim: usize,
    points: Vec<[f64; MAX_DIM]>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if order < 3 {
            return Err(Error::Config(format!("quadrature order {order} must be >= 3")));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Dimension(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        let (z, w) = gauss_hermite(order);
        let total = order.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for mut i in 0..total {
            let mut p = [0.0; MAX_DIM];
            let mut wt = 1.0;
            for pa in p.iter_mut().take(dim) {
                let ia = i % order;
                i /= order;
                *pa = z[ia];
                wt *= w[ia];
            }
            points.push(p);
            weights.push(wt);
        }
        Ok(Self { dim, points, weights })
    }
}

fn check_dims(f: &dyn VectorField, x: &[f64], kernel: &OuKernel, rule: &TensorRule) -> Result<()> {
    let d = kernel.dim();
    if f.dim() != d || x.len() != d || rule.dim != d {
        return Err(Error::Dimension(format!(
            "field dim {}, point dim {}, kernel dim {d}, rule dim {}",
            f.dim(),
            x.len(),
            rule.dim
        )));
    }
    Ok(())
}

/// `(T_t f)(x)` and, when `t > 0` and `grad` is given, the gradient
/// `∂_j (T_t f)_i(x)` stored at `grad[i·d + j]`.
fn ou_moments(
    f: &dyn VectorField,
    x: &[f64],
    t: f64,
    kernel: &OuKernel,
    rule: &TensorRule,
    value: &mut [f64],
    mut grad: Option<&mut [f64]>,
) {
    let d = kernel.dim();
    let n_out = f.n_out();
    let decay = kernel.decay(t);
    let std = kernel.std(t);
    let mut m = [0.0; MAX_DIM];
    for a in 0..d {
        m[a] = decay[a] * x[a];
    }
    value.iter_mut().for_each(|v| *v = 0.0);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let mut point = [0.0; MAX_DIM];
    let mut fv = [0.0; 16];
    let fv = &mut fv[..n_out];
    for (z, w) in rule.points.iter().zip(&rule.weights) {
        for a in 0..d {
            point[a] = m[a] + std[a] * z[a];
        }
        f.eval_into(&point[..d], fv);
        for (v, fi) in value.iter_mut().zip(fv.iter()) {
            *v += w * fi;
        }
        if let Some(g) = grad.as_deref_mut() {
            for (i, fi) in fv.iter().enumerate() {
                for a in 0..d {
                    g[i * d + a] += w * fi * z[a];
                }
            }
        }
    }
    if let Some(g) = grad {
        for i in 0..n_out {
            for a in 0..d {
                g[i * d + a] *= decay[a] / std[a];
            }
        }
    }
}

/// `(T_t f)(x) = E f(e^{tA}x + Q(t)^{1/2} Z)`; `t = 0` returns `f(x)`.
pub fn ou_semigroup_at(
    f: &dyn VectorField,
    x: &[f64],
    t: f64,
    kernel: &OuKernel,
    rule: &TensorRule,
) -> Result<Vec<f64>> {
    check_dims(f, x, kernel, rule)?;
    if t < 0.0 {
        return Err(Error::Domain(format!("semigroup time {t} < 0")));
    }
    if t == 0.0 {
        return Ok(f.eval(x));
    }
    if f.n_out() > 16 {
        return Err(Error::Dimension("at most 16 output components".into()));
    }
    let mut v = vec![0.0; f.n_out()];
    ou_moments(f, x, t, kernel, rule, &mut v, None);
    Ok(v)
}

/// Gradient of `T_t f` at `x` by integration by parts, row-major
/// `[component][axis]`.
pub fn ou_gradient_at(
    f: &dyn VectorField,
    x: &[f64],
    t: f64,
    kernel: &OuKernel,
    rule: &TensorRule,
) -> Result<Vec<f64>> {
    check_dims(f, x, kernel, rule)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("gradient needs t > 0, got {t}")));
    }
    if f.n_out() > 16 {
        return Err(Error::Dimension("at most 16 output components".into()));
    }
    let mut v = vec![0.0; f.n_out()];
    let mut g = vec![0.0; f.n_out() * kernel.dim()];
    ou_moments(f, x, t, kernel, rule, &mut v, Some(&mut g));
    Ok(g)
}

/// `T_t f` sampled on the grid of `f`.
pub fn ou_semigroup_apply(f: &TruncatedFunction, t: f64, kernel: &OuKernel, order: usize) -> Result<TruncatedFunction> {
    let rule = TensorRule::new(f.dim, order)?;
    let mut out = f.clone();
    for i in 0..f.n_nodes() {
        let v = ou_semigroup_at(f, &f.node(i), t, kernel, &rule)?;
        out.values[i * f.n_out..(i + 1) * f.n_out].copy_from_slice(&v);
    }
    Ok(out)
}

/// `(DT_t f)(x)·h` sampled on the grid of `f`.
pub fn ou_gradient_apply(
    f: &TruncatedFunction,
    t: f64,
    kernel: &OuKernel,
    order: usize,
    direction: &[f64],
) -> Result<TruncatedFunction> {
    if direction.len() != f.dim {
        return Err(Error::Dimension("direction has the wrong dimension".into()));
    }
    let rule = TensorRule::new(f.dim, order)?;
    let mut out = f.clone();
    let d = f.dim;
    for i in 0..f.n_nodes() {
        let g = ou_gradient_at(f, &f.node(i), t, kernel, &rule)?;
        for c in 0..f.n_out {
            out.values[i * f.n_out + c] = (0..d).map(|a| g[c * d + a] * direction[a]).sum();
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub gh_order: usize,
    pub n_panels: usize,
    pub t_min: f64,
    /// Defaults to `40/λ₁`.
    pub t_max: Option<f64>,
    pub max_iter: usize,
    /// Stop once the sup-norm change of `U` drops below this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gh_order: 20, n_panels: 60, t_min: 1e-9, t_max: None, max_iter: 200, tol: 1e-9 }
    }
}

impl SolverOptions {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => Self::default(),
            2 => Self { gh_order: 10, n_panels: 30, ..Self::default() },
            _ => Self { gh_order: 6, n_panels: 16, tol: 1e-6, ..Self::default() },
        }
    }
}

/// Right-hand side `f = ⟨B̄, DU⟩ + G` evaluated pointwise from the current
/// iterate.
struct Integrand<'a> {
    g: &'a dyn VectorField,
    bbar: &'a dyn VectorField,
    du: Option<&'a TruncatedFunction>,
}

impl VectorField for Integrand<'_> {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn n_out(&self) -> usize {
        self.g.n_out()
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        self.g.eval_into(x, out);
        if let Some(du) = self.du {
            let d = self.g.dim();
            let mut b = [0.0; MAX_DIM];
            self.bbar.eval_into(x, &mut b[..d]);
            let mut j = [0.0; 16 * MAX_DIM];
            let j = &mut j[..out.len() * d];
            du.eval_into(x, j);
            for (i, o) in out.iter_mut().enumerate() {
                for a in 0..d {
                    *o += j[i * d + a] * b[a];
                }
            }
        }
    }
}

struct TimeRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    head: f64,
    t_min: f64,
}

fn time_rule(lambda: f64, kernel: &OuKernel, opts: &SolverOptions) -> TimeRule {
    let t_max = opts.t_max.unwrap_or(40.0 / kernel.lambdas[0]);
    let (nodes, w) = log_panel_rule(opts.t_min, t_max, opts.n_panels);
    let weights = nodes.iter().zip(&w).map(|(t, wi)| wi * (-lambda * t).exp()).collect();
    TimeRule { nodes, weights, head: -(-lambda * opts.t_min).exp_m1() / lambda, t_min: opts.t_min }
}

/// One application of `U ↦ ∫ e^{−λt} T_t(⟨B̄, DU⟩ + G) dt` on the grid of
/// `template`, returning the new `U` and its gradient.
fn picard_map(
    f: &dyn VectorField,
    template: &TruncatedFunction,
    kernel: &OuKernel,
    rule: &TensorRule,
    times: &TimeRule,
) -> (TruncatedFunction, TruncatedFunction) {
    let d = template.dim;
    let n_out = template.n_out;
    let results: Vec<(Vec<f64>, Vec<f64>)> = (0..template.n_nodes())
        .into_par_iter()
        .map(|i| {
            let x = template.node(i);
            let mut u = f.eval(&x);
            u.iter_mut().for_each(|v| *v *= times.head);
            let mut du = vec![0.0; n_out * d];
            let mut v = vec![0.0; n_out];
            let mut g = vec![0.0; n_out * d];
            // head of the gradient integral, DT_t f ≈ DT_{t_min} f on [0, t_min]
            ou_moments(f, &x, times.t_min, kernel, rule, &mut v, Some(&mut g));
            for (a, b) in du.iter_mut().zip(&g) {
                *a += times.t_min * b;
            }
            for (t, w) in times.nodes.iter().zip(&times.weights) {
                ou_moments(f, &x, *t, kernel, rule, &mut v, Some(&mut g));
                for (a, b) in u.iter_mut().zip(&v) {
                    *a += w * b;
                }
                for (a, b) in du.iter_mut().zip(&g) {
                    *a += w * b;
                }
            }
            (u, du)
        })
        .collect();
    let mut u = template.clone();
    let mut du = TruncatedFunction {
        dim: d,
        n_out: n_out * d,
        n_per_axis: template.n_per_axis,
        radii: template.radii.clone(),
        values: vec![0.0; template.n_nodes() * n_out * d],
    };
    for (i, (ui, dui)) in results.into_iter().enumerate() {
        u.values[i * n_out..(i + 1) * n_out].copy_from_slice(&ui);
        du.values[i * n_out * d..(i + 1) * n_out * d].copy_from_slice(&dui);
    }
    (u, du)
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardSolution {
    pub lambda: f64,
    pub u: TruncatedFunction,
    /// Gradient, `n_out × d` components per node.
    pub du: TruncatedFunction,
    pub iterations: usize,
    /// Sup-norm change of `U` per iteration.
    pub changes: Vec<f64>,
}

fn validate_problem(g: &dyn VectorField, bbar: &dyn VectorField, grid: &TruncatedFunction, kernel: &OuKernel) -> Result<()> {
    let d = kernel.dim();
    if g.dim() != d || bbar.dim() != d || grid.dim != d {
        return Err(Error::Dimension("G, B̄, grid and kernel must share the dimension".into()));
    }
    if bbar.n_out() != d {
        return Err(Error::Dimension("B̄ must map R^d to R^d".into()));
    }
    if g.n_out() == 0 || g.n_out() > 16 {
        return Err(Error::Dimension("G must have 1..=16 components".into()));
    }
    Ok(())
}

/// Picard iteration `U₀ ≡ 0`, `U_{n+1} = ∫ e^{−λt} T_t(⟨B̄, DU_n⟩ + G) dt`
/// on the nodes of `grid` (whose values are ignored).
pub fn picard_solve(
    g: &dyn VectorField,
    bbar: &dyn VectorField,
    grid: &TruncatedFunction,
    lambda: f64,
    kernel: &OuKernel,
    opts: &SolverOptions,
) -> Result<PicardSolution> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    validate_problem(g, bbar, grid, kernel)?;
    let rule = TensorRule::new(kernel.dim(), opts.gh_order)?;
    let times = time_rule(lambda, kernel, opts);
    let template = TruncatedFunction::zeros(grid.radii.clone(), grid.n_per_axis, g.n_out())?;
    let mut u = template.clone();
    let mut du: Option<TruncatedFunction> = None;
    let mut changes = Vec::new();
    for it in 1..=opts.max_iter {
        let f = Integrand { g, bbar, du: du.as_ref() };
        let (nu, ndu) = picard_map(&f, &template, kernel, &rule, &times);
        let change = nu.max_abs_diff(&u);
        changes.push(change);
        u = nu;
        du = Some(ndu);
        if change < opts.tol {
            return Ok(PicardSolution { lambda, u, du: du.expect("set above"), iterations: it, changes });
        }
        let n = changes.len();
        if n >= 4 && changes[n - 1] > changes[n - 2] && changes[n - 2] > changes[n - 3] && changes[n - 3] > changes[n - 4] {
            return Err(Error::NonContraction(format!(
                "sup-norm change grew for 3 consecutive iterations at lambda = {lambda} \
                 (last changes {:.3e}, {:.3e}, {:.3e}); try a larger lambda",
                changes[n - 3],
                changes[n - 2],
                changes[n - 1]
            )));
        }
    }
    Err(Error::NonContraction(format!(
        "no convergence to {} within {} iterations at lambda = {lambda} (last change {:.3e}); try a larger lambda",
        opts.tol,
        opts.max_iter,
        changes.last().copied().unwrap_or(f64::NAN)
    )))
}

/// `‖U − ∫ e^{−λt} T_t(⟨B̄, DU⟩ + G) dt‖_∞` over the grid nodes, with the
/// right side evaluated under `opts` (typically finer than the solve).
pub fn fixed_point_residual(
    sol: &PicardSolution,
    g: &dyn VectorField,
    bbar: &dyn VectorField,
    kernel: &OuKernel,
    opts: &SolverOptions,
) -> Result<f64> {
    validate_problem(g, bbar, &sol.u, kernel)?;
    let rule = TensorRule::new(kernel.dim(), opts.gh_order)?;
    let times = time_rule(sol.lambda, kernel, opts);
    let f = Integrand { g, bbar, du: Some(&sol.du) };
    let (image, _) = picard_map(&f, &sol.u, kernel, &rule, &times);
    if !image.same_grid(&sol.u) {
        return Err(Error::Dimension("grid mismatch".into()));
    }
    Ok(image.max_abs_diff(&sol.u))
}

#[derive(Clone, Debug, Serialize)]
pub struct DLambdaRow {
    pub lambda: f64,
    pub u_sup: f64,
    pub du_sup: f64,
    pub iterations: usize,
}

/// Sup-norms of `U` and `DU` across increasing `λ`.
pub fn dlambda_curve(
    g: &dyn VectorField,
    bbar: &dyn VectorField,
    grid: &TruncatedFunction,
    kernel: &OuKernel,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<DLambdaRow>> {
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("lambdas must be strictly increasing".into()));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let sol = picard_solve(g, bbar, grid, lambda, kernel, opts)?;
            Ok(DLambdaRow { lambda, u_sup: sol.u.sup_norm(), du_sup: sol.du.sup_norm(), iterations: sol.iterations })
        })
        .collect()
}

/// `B̄` of a model restricted to its first `d` modes, sampled on the box grid
/// (`x = Σ_{a<d} x_a e_a`, higher modes of the argument and of the result
/// dropped). Every node uses the same seed.
pub fn truncated_bbar(
    config: &ModelConfig,
    kernel: &OuKernel,
    n_per_axis: usize,
    params: &AveragingParams,
    seed: u64,
) -> Result<TruncatedFunction> {
    let d = kernel.dim();
    let mut out = TruncatedFunction::zeros(kernel.default_radii(), n_per_axis, d)?;
    let n = config.n_modes();
    for i in 0..out.n_nodes() {
        let node = out.node(i);
        let mut c = vec![0.0; n];
        c[..d].copy_from_slice(&node);
        let est = estimate_bbar(&SpectralField::from_coeffs(c), params, config, seed)?;
        out.values[i * d..(i + 1) * d].copy_from_slice(&est.value.coeffs()[..d]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel1() -> OuKernel {
        OuKernel::new(vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn interpolation_is_exact_on_linear_and_clamps() {
        let f = FnField::new(2, 1, |x: &[f64], o: &mut [f64]| o[0] = 2.0 * x[0] - x[1] + 0.5);
        let g = TruncatedFunction::sample(vec![1.0, 2.0], 9, &f).unwrap();
        let v = g.eval(&[0.13, -0.77]);
        assert!((v[0] - (0.26 + 0.77 + 0.5)).abs() < 1e-12);
        let c = g.eval(&[5.0, 0.0]);
        assert!((c[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn semigroup_moments() {
        let k = kernel1();
        let rule = TensorRule::new(1, 12).unwrap();
        let lin = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let sq = FnField::new(1, 1, |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0]);
        let (x, t) = (0.8, 0.3f64);
        let a = ou_semigroup_at(&lin, &[x], t, &k, &rule).unwrap()[0];
        assert!((a - (-t).exp() * x).abs() < 1e-14);
        let b = ou_semigroup_at(&sq, &[x], t, &k, &rule).unwrap()[0];
        let exact = (-2.0 * t).exp() * x * x + (1.0 - (-2.0 * t).exp()) / 2.0;
        assert!((b - exact).abs() < 1e-14);
        let g = ou_gradient_at(&lin, &[x], t, &k, &rule).unwrap()[0];
        assert!((g - (-t).exp()).abs() < 1e-13);
        assert!(ou_gradient_at(&lin, &[x], 0.0, &k, &rule).is_err());
    }

    #[test]
    fn resolvent_of_constant() {
        let k = kernel1();
        let g = FnField::new(1, 1, |_: &[f64], o: &mut [f64]| o[0] = 3.0);
        let zero = FnField::new(1, 1, |_: &[f64], o: &mut [f64]| o[0] = 0.0);
        let grid = TruncatedFunction::zeros(k.default_radii(), 9, 1).unwrap();
        let sol = picard_solve(&g, &zero, &grid, 2.0, &k, &SolverOptions::default()).unwrap();
        for i in 0..grid.n_nodes() {
            assert!((sol.u.node_value(i)[0] - 1.5).abs() < 1e-8);
        }
    }
}
