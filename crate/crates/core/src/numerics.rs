//! Small quadrature and root-finding helpers shared by the checkers and the
//! resolvent solver.

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Nodes and weights of composite 5-point Gauss–Legendre on `n_panels`
/// equal panels of `[ln t_min, ln t_max]`, mapped back to `t` so that
/// `Σ w_i g(t_i) ≈ ∫_{t_min}^{t_max} g(t) dt`.
pub fn log_panel_rule(t_min: f64, t_max: f64, n_panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (s0, s1) = (t_min.ln(), t_max.ln());
    let h = (s1 - s0) / n_panels as f64;
    let mut nodes = Vec::with_capacity(5 * n_panels);
    let mut weights = Vec::with_capacity(5 * n_panels);
    for p in 0..n_panels {
        let c = s0 + (p as f64 + 0.5) * h;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let t = (c + 0.5 * h * x).exp();
            nodes.push(t);
            weights.push(0.5 * h * w * t);
        }
    }
    (nodes, weights)
}

/// Maximizer of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Probabilists' Gauss–Hermite rule: `Σ w_i f(z_i) ≈ E f(Z)`, `Z ~ N(0, 1)`.
/// Nodes by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z: f64 = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    // physicists' nodes/weights → standard normal expectation
    let s = std::f64::consts::PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / s).collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for order in [3, 5, 8, 12, 20] {
            let (z, w) = gauss_hermite(order);
            let m = |p: i32| z.iter().zip(&w).map(|(zi, wi)| wi * zi.powi(p)).sum::<f64>();
            assert!((m(0) - 1.0).abs() < 1e-13, "order {order}");
            assert!(m(1).abs() < 1e-13);
            assert!((m(2) - 1.0).abs() < 1e-12);
            if order >= 3 {
                assert!((m(4) - 3.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn log_panels_integrate_exponential() {
        let (t, w) = log_panel_rule(1e-9, 40.0, 60);
        for lam in [1.0, 11.0, 101.0] {
            let v: f64 = t.iter().zip(&w).map(|(ti, wi)| wi * (-lam * ti).exp()).sum();
            let exact = ((-lam * 1e-9f64).exp() - (-lam * 40.0f64).exp()) / lam;
            assert!((v - exact).abs() < 1e-10, "λ={lam}: {v} vs {exact}");
        }
    }

    #[test]
    fn simpson_and_golden() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let (x, fx) = golden_max(&|x: f64| -(x - 1.3) * (x - 1.3), 0.0, 5.0, 100);
        assert!((x - 1.3).abs() < 1e-8 && fx.abs() < 1e-15);
    }
}
