//! Command-line interface: config parsing, subcommand dispatch, run manifests.
//!
//! Exit codes: 0 on success or a passing verdict, 1 on a failing or
//! inconclusive verdict, 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::averaging::{estimate_bbar, AveragingParams, Strategy};
use crate::experiments::{self as ex, sha256_hex, ExperimentReport, Verdict};
use crate::model::{check_assumptions, Drift, ModelConfig, Status};
use crate::noise::{derive_substream, NoiseRole, NoiseSpectrum};
use crate::simulator::{check_eps, n_steps, SlowFastState, SlowFastStepper, StepScheme};
use crate::spectral::{h_norm, OperatorSpectrum, SpectralField};
use crate::zvonkin::{
    dlambda_curve, fixed_point_residual, picard_solve, truncated_bbar, OuKernel, SolverOptions, MAX_DIM,
};
use crate::{Error, Result};

pub const SEED_ENV: &str = "SPDE_SEED";
pub const DEFAULT_SEED: u64 = 20240601;

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_theta() -> f64 {
    0.55
}
fn default_model() -> String {
    "heat_example".into()
}
fn default_r() -> f64 {
    0.1
}
fn default_modes() -> usize {
    32
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

/// Parsed configuration file. Unknown keys are rejected; the resolved value
/// (defaults filled) is echoed into every run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// `heat_example` or `custom`.
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_r")]
    pub r1: f64,
    #[serde(default = "default_r")]
    pub r2: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    pub grid_points: Option<usize>,
    // custom-model keys
    #[serde(default = "two")]
    pub eigen_exponent: f64,
    #[serde(default = "one")]
    pub eigen_scale: f64,
    #[serde(default = "one")]
    pub q1_scale: f64,
    #[serde(default = "one")]
    pub q2_scale: f64,
    pub drift_b: Option<String>,
    pub drift_f: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub l_f: Option<f64>,
    pub bound_b: Option<f64>,
    pub bound_f: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub averaging: AveragingSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub fast_factor: f64,
    /// Initial slow state `x0_amplitude · e_{x0_mode}`; the fast state starts at 0.
    pub x0_mode: usize,
    pub x0_amplitude: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self { eps: 1e-2, dt: 1e-3, t_end: 1.0, fast_factor: StepScheme::DEFAULT_FAST_FACTOR, x0_mode: 1, x0_amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingSection {
    /// Defaults to the gap-based relaxation time.
    pub burn_in: Option<f64>,
    pub avg_time: f64,
    pub dt: f64,
    pub replicas: usize,
}

impl Default for AveragingSection {
    fn default() -> Self {
        Self { burn_in: None, avg_time: 50.0, dt: 0.05, replicas: 8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Overrides each experiment's replica count.
    pub n_mc: Option<usize>,
    /// Overrides the `ε` grid of `converge`.
    pub eps_list: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let mut c: RunConfig = toml::from_str(src).map_err(|e| Error::Config(e.message().to_string()))?;
        c.resolve()?;
        Ok(c)
    }

    /// Defaults only, as if the file were empty.
    pub fn heat_default() -> Self {
        Self::from_toml("").expect("empty config resolves")
    }

    fn resolve(&mut self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta = {} must lie in (0, 1)", self.theta)));
        }
        let eps_ok = |e: f64| e > 0.0 && e < 1.0;
        if !eps_ok(self.scheme.eps) {
            return Err(Error::Config(format!("scheme.eps = {} must lie in (0, 1)", self.scheme.eps)));
        }
        if let Some(l) = &self.experiment.eps_list {
            if let Some(e) = l.iter().find(|e| !eps_ok(**e)) {
                return Err(Error::Config(format!("experiment.eps_list entry {e} must lie in (0, 1)")));
            }
        }
        if self.scheme.x0_mode == 0 || self.scheme.x0_mode > self.n_modes {
            return Err(Error::Config(format!(
                "scheme.x0_mode = {} must lie in 1..={}",
                self.scheme.x0_mode, self.n_modes
            )));
        }
        StepScheme::new(self.scheme.dt, self.scheme.fast_factor)?;
        let custom_keys = [
            ("drift_b", self.drift_b.is_some()),
            ("drift_f", self.drift_f.is_some()),
            ("alpha", self.alpha.is_some()),
            ("beta", self.beta.is_some()),
            ("gamma", self.gamma.is_some()),
            ("l_f", self.l_f.is_some()),
            ("bound_b", self.bound_b.is_some()),
            ("bound_f", self.bound_f.is_some()),
        ];
        match self.model.as_str() {
            "heat_example" => {
                if let Some((k, _)) = custom_keys.iter().find(|(_, set)| *set) {
                    return Err(Error::Config(format!("{k} only applies to model = \"custom\"")));
                }
            }
            "custom" => {
                if let Some((k, _)) = custom_keys.iter().find(|(_, set)| !*set) {
                    return Err(Error::Config(format!("model = \"custom\" requires {k}")));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "model = \"{other}\" is unknown (expected \"heat_example\" or \"custom\")"
                )))
            }
        }
        let grid = self.grid_points.unwrap_or(2 * self.n_modes);
        self.grid_points = Some(grid);
        let m = self.model_config()?;
        if self.averaging.burn_in.is_none() {
            self.averaging.burn_in = Some(AveragingParams::default_burn_in(&m, AveragingParams::DEFAULT_TOL).unwrap_or(0.0));
        }
        self.averaging_params()?.validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut m = if self.model == "heat_example" {
            ModelConfig::heat_example(self.r1, self.r2, self.n_modes)?
        } else {
            let eigs = OperatorSpectrum::power_law(self.n_modes, self.eigen_scale, self.eigen_exponent)?;
            let q1 = NoiseSpectrum::scaled_power_law(&eigs, self.q1_scale, self.r1);
            let q2 = NoiseSpectrum::scaled_power_law(&eigs, self.q2_scale, self.r2);
            let expr = |k: &str, s: &Option<String>| {
                Drift::from_expr(s.as_deref().unwrap_or_default()).map_err(|e| Error::Config(format!("{k}: {e}")))
            };
            ModelConfig {
                label: "custom".into(),
                eigs,
                q1,
                q2,
                drift_b: expr("drift_b", &self.drift_b)?,
                drift_f: expr("drift_f", &self.drift_f)?,
                alpha: self.alpha.unwrap_or_default(),
                beta: self.beta.unwrap_or_default(),
                gamma: self.gamma.unwrap_or_default(),
                l_f: self.l_f.unwrap_or_default(),
                bound_b: self.bound_b.unwrap_or_default(),
                bound_f: self.bound_f.unwrap_or_default(),
                grid_points: 2 * self.n_modes,
            }
        };
        if let Some(g) = self.grid_points {
            m.grid_points = g;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn scheme(&self) -> Result<StepScheme> {
        StepScheme::new(self.scheme.dt, self.scheme.fast_factor)
    }

    pub fn averaging_params(&self) -> Result<AveragingParams> {
        Ok(AveragingParams {
            burn_in: self.averaging.burn_in.unwrap_or(0.0),
            avg_time: self.averaging.avg_time,
            dt: self.averaging.dt,
            n_replicas: self.averaging.replicas,
            strategy: Strategy::TimeAverage,
        })
    }

    pub fn x0(&self) -> SpectralField {
        SpectralField::basis(self.n_modes, self.scheme.x0_mode).scaled(self.scheme.x0_amplitude)
    }
}

/// Reads and resolves a config file; `None` gives the defaults.
pub fn parse_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::heat_default()),
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&src)
        }
    }
}

/// Seed precedence: flag, then the environment override, then the config.
pub fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV} = {v:?} is not a decimal 64-bit seed"))),
        Err(_) => Ok(config.seed),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    /// SHA-256 per output; JSON reports are hashed without their wall-clock field.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Parser, Debug)]
#[command(name = "slowfast", version, about = "Slow-fast SPDE simulation and averaging checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML config; defaults to the heat example with r1 = r2 = 0.1, N = 32.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the coupled system; CSV of norms and leading modes.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long = "T")]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        /// Leading modes of X and Y to record.
        #[arg(long, default_value_t = 3)]
        modes: usize,
    },
    /// Estimate the averaged drift at x; CSV of mode coefficients with stderr.
    Average {
        #[command(flatten)]
        common: Common,
        /// File of mode coefficients (whitespace or comma separated) or `zero`.
        #[arg(long, default_value = "zero")]
        x: String,
        #[arg(long = "Tb")]
        burn_in: Option<f64>,
        #[arg(long = "Ta")]
        avg_time: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Strong error of the slow component against the averaged equation.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        n_mc: Option<usize>,
    },
    /// Check the structural assumptions; JSON report.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Solve the resolvent equation on the leading modes; CSV of U and DU.
    Zvonkin {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        lambda: Vec<f64>,
        /// Nodes per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run one verification experiment; JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "lemma", value_name = "NAME")]
        property: Property,
        #[arg(long)]
        n_mc: Option<usize>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    Contraction,
    ContractionX,
    Increment,
    AuxFast,
    Correlation,
    Moments,
    Ergodicity,
    Holder,
    Strong,
}

impl Property {
    fn name(self) -> &'static str {
        match self {
            Property::Contraction => "contraction",
            Property::ContractionX => "contraction-x",
            Property::Increment => "increment",
            Property::AuxFast => "aux-fast",
            Property::Correlation => "correlation",
            Property::Moments => "moments",
            Property::Ergodicity => "ergodicity",
            Property::Holder => "holder",
            Property::Strong => "strong",
        }
    }
}

/// What a subcommand produced: a body for `--out`, its digest and an exit code.
struct Outcome {
    body: String,
    digest: String,
    extra: Vec<(PathBuf, String)>,
    code: i32,
}

impl Outcome {
    fn plain(body: String, code: i32) -> Self {
        let digest = sha256_hex(body.as_bytes());
        Self { body, digest, extra: vec![], code }
    }
}

fn report_outcome(r: &ExperimentReport, out: Option<&Path>) -> Result<Outcome> {
    let code = if r.verdict == Verdict::Pass { 0 } else { 1 };
    let mut o = Outcome { body: r.to_json()?, digest: r.digest()?, extra: vec![], code };
    if let Some(p) = out {
        o.extra.push((p.with_extension("csv"), r.to_csv()));
    }
    Ok(o)
}

fn read_x(spec: &str, n: usize) -> Result<SpectralField> {
    if spec == "zero" {
        return Ok(SpectralField::zeros(n));
    }
    let src = std::fs::read_to_string(spec).map_err(|e| Error::Config(format!("--x {spec}: {e}")))?;
    let vals: Vec<f64> = src
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("--x {spec}: {t:?} is not a number"))))
        .collect::<Result<_>>()?;
    if vals.len() > n {
        return Err(Error::Config(format!("--x {spec}: {} coefficients for {n} modes", vals.len())));
    }
    let mut c = vec![0.0; n];
    c[..vals.len()].copy_from_slice(&vals);
    Ok(SpectralField::from_coeffs(c))
}

fn simulate(cfg: &RunConfig, seed: u64, eps: f64, t_end: f64, dt: f64, modes: usize) -> Result<Outcome> {
    check_eps(eps)?;
    let m = cfg.model_config()?;
    let scheme = StepScheme::new(dt, cfg.scheme.fast_factor)?;
    let steps = n_steps(t_end, dt)?;
    let modes = modes.min(m.n_modes());
    let mut stepper = SlowFastStepper::new(&m, scheme, eps)?;
    let mut s = SlowFastState::new(cfg.x0(), SpectralField::zeros(m.n_modes()), eps)?;
    let mut w1 = derive_substream(seed, 0, NoiseRole::Slow);
    let mut w2 = derive_substream(seed, 0, NoiseRole::Fast);
    let mut csv = String::from("t,x_norm,x_theta_norm,y_norm");
    for k in 1..=modes {
        csv.push_str(&format!(",x{k}"));
    }
    for k in 1..=modes {
        csv.push_str(&format!(",y{k}"));
    }
    csv.push('\n');
    let row = |s: &SlowFastState, csv: &mut String| -> Result<()> {
        csv.push_str(&format!("{},{},{},{}", s.t, s.x.norm(), h_norm(&s.x, &m.eigs, cfg.theta)?, s.y.norm()));
        for k in 1..=modes {
            csv.push_str(&format!(",{}", s.x.mode(k)));
        }
        for k in 1..=modes {
            csv.push_str(&format!(",{}", s.y.mode(k)));
        }
        csv.push('\n');
        Ok(())
    };
    row(&s, &mut csv)?;
    for _ in 0..steps {
        stepper.step(&mut s, &mut w1, &mut w2)?;
        row(&s, &mut csv)?;
    }
    Ok(Outcome::plain(csv, 0))
}

fn zvonkin(cfg: &RunConfig, seed: u64, dim: usize, lambdas: &[f64], grid: Option<usize>, out: Option<&Path>) -> Result<Outcome> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Config(format!("--dim = {dim} must lie in 1..={MAX_DIM}")));
    }
    let m = cfg.model_config()?;
    let kernel = OuKernel::from_config(&m, dim)?;
    let n_axis = grid.unwrap_or(match dim {
        1 => 41,
        2 => 17,
        _ => 9,
    });
    let bbar = truncated_bbar(&m, &kernel, n_axis, &cfg.averaging_params()?, seed)?;
    // the drift itself is the right-hand side of the transformation
    let g = &bbar;
    let opts = SolverOptions::for_dim(dim);
    let mut fine = opts.clone();
    fine.n_panels *= 2;
    fine.gh_order += 4;
    let first = *lambdas.first().ok_or_else(|| Error::Config("--lambda is empty".into()))?;
    let sol = picard_solve(g, &bbar, &bbar, first, &kernel, &opts)?;
    let residual = fixed_point_residual(&sol, g, &bbar, &kernel, &fine)?;
    let table = dlambda_curve(g, &bbar, &bbar, &kernel, lambdas, &opts)?;
    let mut csv = String::new();
    let axes: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    let grads: Vec<String> = (1..=dim).map(|a| format!("du{a}")).collect();
    csv.push_str(&format!("{},u,{}\n", axes.join(","), grads.join(",")));
    for i in 0..sol.u.n_nodes() {
        let node: Vec<String> = sol.u.node(i).iter().map(|v| v.to_string()).collect();
        let du: Vec<String> = sol.du.node_value(i).iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{},{}\n", node.join(","), sol.u.node_value(i)[0], du.join(",")));
    }
    let mut summary = String::from("lambda,u_sup,du_sup,iterations\n");
    for r in &table {
        summary.push_str(&format!("{},{},{},{}\n", r.lambda, r.u_sup, r.du_sup, r.iterations));
    }
    let g_sup = bbar.sup_norm();
    eprintln!(
        "zvonkin: lambda = {first}, iterations = {}, residual = {residual:.3e}, |G|_inf = {g_sup:.4}",
        sol.iterations
    );
    eprint!("{summary}");
    let decreasing = table.windows(2).all(|w| w[1].u_sup < w[0].u_sup && w[1].du_sup < w[0].du_sup);
    let code = if residual < 1e-2 * g_sup && decreasing { 0 } else { 1 };
    let mut o = Outcome::plain(csv, code);
    if let Some(p) = out {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("zvonkin");
        summary.push_str(&format!("# residual = {residual}\n"));
        o.extra.push((p.with_file_name(format!("{stem}_dlambda.csv")), summary));
    }
    Ok(o)
}

fn verify(cfg: &RunConfig, seed: u64, property: Property, n_mc: Option<usize>, out: Option<&Path>) -> Result<Outcome> {
    let m = cfg.model_config()?;
    let n_mc = n_mc.or(cfg.experiment.n_mc);
    let theta = cfg.theta;
    let r = match property {
        Property::Contraction => {
            let mut p = ex::ContractionParams::standard(&m, seed);
            if let Some(n) = n_mc {
                p.n_mc = n;
            }
            ex::contraction_test(&m, &p, seed)?
        }
        Property::ContractionX => {
            let mut p = ex::SensitivityParams::standard(&m, seed);
            if let Some(n) = n_mc {
                p.n_mc = n;
            }
            ex::contraction_in_x(&m, &p, seed)?
        }
        Property::Increment | Property::AuxFast => {
            let mut p = ex::IncrementParams::standard(&m, theta);
            p.eps = cfg.scheme.eps;
            p.x0 = cfg.x0();
            if let Some(n) = n_mc {
                p.n_mc = n;
            }
            if property == Property::Increment {
                ex::increment_scaling(&m, &p, seed)?
            } else {
                ex::aux_fast_error(&m, &p, seed)?
            }
        }
        Property::Correlation => {
            let mut p = ex::CorrelationParams::standard(&m);
            if let Some(n) = n_mc {
                p.n_mc = n;
            }
            ex::correlation_decay(&m, &p, seed)?
        }
        Property::Moments => {
            let mut p = ex::MomentParams::standard(&m);
            p.x0 = cfg.x0();
            if let Some(n) = n_mc {
                p.n_mc = n;
            }
            ex::moment_sweep(&m, &p, seed)?
        }
        Property::Ergodicity => {
            let mut p = ex::ErgodicityParams::standard(&m, seed)?;
            if let Some(n) = n_mc {
                p.mixing_replicas = n;
            }
            ex::ergodicity_check(&m, &p, seed)?
        }
        Property::Holder => {
            let mut p = ex::HolderParams::standard();
            if let Some(n) = n_mc {
                p.n_pairs = n;
            }
            ex::bbar_holder(&m, &p, seed)?
        }
        Property::Strong => return converge(cfg, seed, None, n_mc, out),
    };
    report_outcome(&r, out)
}

fn converge(cfg: &RunConfig, seed: u64, eps: Option<Vec<f64>>, n_mc: Option<usize>, out: Option<&Path>) -> Result<Outcome> {
    let m = cfg.model_config()?;
    let mut p = ex::StrongErrorParams::standard(&m, cfg.theta);
    if let Some(e) = eps.or_else(|| cfg.experiment.eps_list.clone()) {
        p.eps_grid = e;
    }
    if let Some(n) = n_mc.or(cfg.experiment.n_mc) {
        p.n_mc = n;
    }
    p.dt = cfg.scheme.dt;
    p.t_end = cfg.scheme.t_end;
    p.fast_factor = cfg.scheme.fast_factor;
    p.x0 = cfg.x0();
    let r = ex::strong_error(&m, &p, seed)?;
    report_outcome(&r, out)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension(_) | Error::Refused(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body)?;
    Ok(())
}

fn execute(command: Command, args: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let (name, common) = match &command {
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Average { common, .. } => ("average", common),
        Command::Converge { common, .. } => ("converge", common),
        Command::Check { common, .. } => ("check", common),
        Command::Zvonkin { common, .. } => ("zvonkin", common),
        Command::Verify { common, .. } => ("verify", common),
    };
    let common = common.clone();
    let cfg = parse_config(common.config.as_deref())?;
    let seed = resolve_seed(common.seed, &cfg)?;
    let out = common.out.as_deref();
    let outcome = match command {
        Command::Simulate { eps, t_end, dt, modes, .. } => simulate(
            &cfg,
            seed,
            eps.unwrap_or(cfg.scheme.eps),
            t_end.unwrap_or(cfg.scheme.t_end),
            dt.unwrap_or(cfg.scheme.dt),
            modes,
        )?,
        Command::Average { x, burn_in, avg_time, dt, replicas, .. } => {
            let m = cfg.model_config()?;
            let mut p = cfg.averaging_params()?;
            if let Some(v) = burn_in {
                p.burn_in = v;
            }
            if let Some(v) = avg_time {
                p.avg_time = v;
            }
            if let Some(v) = dt {
                p.dt = v;
            }
            if let Some(v) = replicas {
                p.n_replicas = v;
            }
            let x = read_x(&x, m.n_modes())?;
            let est = estimate_bbar(&x, &p, &m, seed)?;
            let mut csv = String::from("mode,bbar,stderr\n");
            for (k, (v, se)) in est.value.coeffs().iter().zip(&est.mode_stderr).enumerate() {
                csv.push_str(&format!("{},{v},{se}\n", k + 1));
            }
            eprintln!("|bbar| = {:.6}, stderr = {:.3e}", est.value.norm(), est.stderr);
            Outcome::plain(csv, 0)
        }
        Command::Converge { eps, n_mc, .. } => converge(&cfg, seed, eps, n_mc, out)?,
        Command::Check { theta, .. } => {
            let m = cfg.model_config()?;
            let rep = check_assumptions(&m, theta.unwrap_or(cfg.theta))?;
            for e in &rep.entries {
                eprintln!("{:<4} {:?}  {}", e.id, e.status, e.note);
            }
            let code = if rep.entries.iter().all(|e| e.status == Status::Holds) { 0 } else { 1 };
            Outcome::plain(serde_json::to_string_pretty(&rep)?, code)
        }
        Command::Zvonkin { dim, lambda, grid, .. } => zvonkin(&cfg, seed, dim, &lambda, grid, out)?,
        Command::Verify { property, n_mc, .. } => {
            eprintln!("verify --lemma {}", property.name());
            verify(&cfg, seed, property, n_mc, out)?
        }
    };
    let mut outputs = BTreeMap::new();
    match out {
        Some(p) => {
            write_file(p, &outcome.body)?;
            outputs.insert(p.display().to_string(), outcome.digest.clone());
            for (path, body) in &outcome.extra {
                write_file(path, body)?;
                outputs.insert(path.display().to_string(), sha256_hex(body.as_bytes()));
            }
        }
        None => {
            print!("{}", outcome.body);
            if !outcome.body.ends_with('\n') {
                println!();
            }
            outputs.insert("<stdout>".into(), outcome.digest.clone());
        }
    }
    let manifest = RunManifest {
        subcommand: name.into(),
        args,
        config: cfg,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    match out {
        Some(p) => write_file(&manifest_path(p), &text)?,
        None => eprintln!("{text}"),
    }
    Ok(outcome.code)
}

/// `<out>.manifest.json` next to the main output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let echo = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, echo) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main_entry() -> i32 {
    run(std::env::args_os())
}
