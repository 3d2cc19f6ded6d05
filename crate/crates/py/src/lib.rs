//! Python bindings for the `slowfast` toolkit.
//!
//! Functions take plain numbers and lists and return plain Python values;
//! reports and assumption checks come back as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use slowfast::averaging::{estimate_bbar as estimate, AveragingParams};
use slowfast::experiments as ex;
use slowfast::model::ModelConfig;
use slowfast::noise::{derive_substream, NoiseRole};
use slowfast::simulator::{simulate_slow_fast, StepScheme};
use slowfast::spectral::SpectralField;
use slowfast::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension(_) | Error::Refused(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn heat(r1: f64, r2: f64, n_modes: usize) -> PyResult<ModelConfig> {
    ModelConfig::heat_example(r1, r2, n_modes).map_err(py_err)
}

fn field(coeffs: Vec<f64>, n: usize) -> PyResult<SpectralField> {
    if coeffs.len() > n {
        return Err(PyValueError::new_err(format!("{} coefficients for {n} modes", coeffs.len())));
    }
    let mut c = vec![0.0; n];
    c[..coeffs.len()].copy_from_slice(&coeffs);
    Ok(SpectralField::from_coeffs(c))
}

/// Exact decay and standard deviation of one mode's convolution increment
/// for the heat spectrum `λ_k = k²`, `q_k = k^{−2r}`.
#[pyfunction]
#[pyo3(signature = (k, dt, r=0.1, n_modes=32))]
fn increment_law(k: usize, dt: f64, r: f64, n_modes: usize) -> PyResult<(f64, f64)> {
    let c = heat(r, r, n_modes)?;
    let law = slowfast::noise::conv_increment_law(k, dt, &c.q2, &c.eigs).map_err(py_err)?;
    Ok((law.decay, law.std))
}

/// Simulates the heat example from `x0 = e₁`, `y0 = 0`; returns times and
/// the norms of both components per macro step.
#[pyfunction]
#[pyo3(signature = (eps, t_end, dt, seed, r1=0.1, r2=0.1, n_modes=32))]
fn simulate(
    eps: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
    r1: f64,
    r2: f64,
    n_modes: usize,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let c = heat(r1, r2, n_modes)?;
    let scheme = StepScheme::with_dt(dt).map_err(py_err)?;
    let mut w1 = derive_substream(seed, 0, NoiseRole::Slow);
    let mut w2 = derive_substream(seed, 0, NoiseRole::Fast);
    let x0 = SpectralField::basis(n_modes, 1);
    let y0 = SpectralField::zeros(n_modes);
    let path = simulate_slow_fast(&c, &x0, &y0, eps, scheme, t_end, &mut w1, &mut w2).map_err(py_err)?;
    Ok((
        path.times,
        path.x.iter().map(|x| x.norm()).collect(),
        path.y.iter().map(|y| y.norm()).collect(),
    ))
}

/// Averaged drift of the heat example at `x` (leading mode coefficients);
/// returns the coefficients and the norm-scale standard error.
#[pyfunction]
#[pyo3(signature = (x, seed, replicas=8, avg_time=50.0, r1=0.1, r2=0.1, n_modes=32))]
fn averaged_drift(
    x: Vec<f64>,
    seed: u64,
    replicas: usize,
    avg_time: f64,
    r1: f64,
    r2: f64,
    n_modes: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let c = heat(r1, r2, n_modes)?;
    let p = AveragingParams { n_replicas: replicas, avg_time, ..AveragingParams::default_for(&c).map_err(py_err)? };
    let est = estimate(&field(x, n_modes)?, &p, &c, seed).map_err(py_err)?;
    Ok((est.value.into_coeffs(), est.stderr))
}

/// Assumption report for the heat example as JSON.
#[pyfunction]
#[pyo3(signature = (theta, r1=0.1, r2=0.1, n_modes=32))]
fn check_assumptions(theta: f64, r1: f64, r2: f64, n_modes: usize) -> PyResult<String> {
    let rep = slowfast::model::check_assumptions(&heat(r1, r2, n_modes)?, theta).map_err(py_err)?;
    serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Weighted log-log fit over `(scale, estimate, stderr)` triples; returns
/// `(slope, intercept, ci_half_width)`.
#[pyfunction]
fn rate_fit(points: Vec<(f64, f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = ex::rate_fit(&points).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((f.slope, f.intercept, f.ci_half))
}

/// Runs a named experiment on the heat example and returns its JSON report.
/// Names: contraction, contraction-x, increment, aux-fast, correlation,
/// moments, ergodicity, holder, strong.
#[pyfunction]
#[pyo3(signature = (name, seed, n_mc=None, theta=0.55))]
fn run_experiment(name: &str, seed: u64, n_mc: Option<usize>, theta: f64) -> PyResult<String> {
    let c = heat(0.1, 0.1, 32)?;
    let r = match name {
        "contraction" => {
            let mut p = ex::ContractionParams::standard(&c, seed);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            ex::contraction_test(&c, &p, seed)
        }
        "contraction-x" => {
            let mut p = ex::SensitivityParams::standard(&c, seed);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            ex::contraction_in_x(&c, &p, seed)
        }
        "increment" | "aux-fast" => {
            let mut p = ex::IncrementParams::standard(&c, theta);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            if name == "increment" {
                ex::increment_scaling(&c, &p, seed)
            } else {
                ex::aux_fast_error(&c, &p, seed)
            }
        }
        "correlation" => {
            let mut p = ex::CorrelationParams::standard(&c);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            ex::correlation_decay(&c, &p, seed)
        }
        "moments" => {
            let mut p = ex::MomentParams::standard(&c);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            ex::moment_sweep(&c, &p, seed)
        }
        "ergodicity" => {
            let mut p = ex::ErgodicityParams::standard(&c, seed).map_err(py_err)?;
            p.mixing_replicas = n_mc.unwrap_or(p.mixing_replicas);
            ex::ergodicity_check(&c, &p, seed)
        }
        "holder" => {
            let mut p = ex::HolderParams::standard();
            p.n_pairs = n_mc.unwrap_or(p.n_pairs);
            ex::bbar_holder(&c, &p, seed)
        }
        "strong" => {
            let mut p = ex::StrongErrorParams::standard(&c, theta);
            p.n_mc = n_mc.unwrap_or(p.n_mc);
            ex::strong_error(&c, &p, seed)
        }
        other => return Err(PyValueError::new_err(format!("unknown experiment {other:?}"))),
    }
    .map_err(py_err)?;
    r.to_json().map_err(py_err)
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    slowfast::cli::run(std::iter::once("slowfast".to_string()).chain(args))
}

#[pymodule]
fn slowfast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(increment_law, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_drift, m)?)?;
    m.add_function(wrap_pyfunction!(check_assumptions, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
