use std::fs;

use slowfast::cli::{manifest_path, parse_config, run, RunConfig};

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn no_arguments_is_usage_error() {
    assert_eq!(run(["slowfast"]), 2);
    assert_eq!(run(["slowfast", "bogus"]), 2);
}

#[test]
fn minimal_config_fills_defaults() {
    let c = RunConfig::from_toml("model = \"heat_example\"\nr1 = 0.1\nr2 = 0.1\nn_modes = 32\n").unwrap();
    assert_eq!(c.grid_points, Some(64));
    assert_eq!(c.scheme.eps, 0.01);
    assert!((c.averaging.burn_in.unwrap() - 4.0 * 1000f64.ln() * 2.0).abs() < 1e-9);
    assert_eq!(parse_config(None).unwrap(), c);
}

#[test]
fn rejects_out_of_range_and_unknown_keys() {
    let e = RunConfig::from_toml("r1 = 0.2\n").unwrap_err().to_string();
    assert!(e.contains("r1") && e.contains("1/7"), "{e}");
    let e = RunConfig::from_toml("[scheme]\neps = 1.5\n").unwrap_err().to_string();
    assert!(e.contains("eps") && e.contains("(0, 1)"), "{e}");
    let e = RunConfig::from_toml("colour = 3\n").unwrap_err().to_string();
    assert!(e.contains("colour"), "{e}");
    let e = RunConfig::from_toml("drift_b = \"sin(x)\"\n").unwrap_err().to_string();
    assert!(e.contains("custom"), "{e}");
}

#[test]
fn custom_model_from_expressions() {
    let src = r#"
model = "custom"
n_modes = 8
r1 = 0.2
r2 = 0.2
drift_b = "sin(x + y)"
drift_f = "0.25 * cos(y)"
alpha = 1.0
beta = 1.0
gamma = 1.0
l_f = 0.25
bound_b = 1.0
bound_f = 0.25
"#;
    let c = RunConfig::from_toml(src).unwrap();
    let m = c.model_config().unwrap();
    assert_eq!(m.n_modes(), 8);
    assert!((m.spectral_gap() - 0.75).abs() < 1e-12);
}

#[test]
fn check_and_verify_exit_codes_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "heat.cfg", "model = \"heat_example\"\nr1 = 0.1\nr2 = 0.1\nn_modes = 32\n");
    let out = dir.path().join("check.json");
    assert_eq!(run(["slowfast", "check", "--config", &cfg, "--theta", "0.55", "--out", out.to_str().unwrap()]), 0);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rep["kappa1"], 0.75);
    assert!(manifest_path(&out).exists());

    let bad = write(&dir, "bad.cfg", "r1 = 0.2\n");
    assert_eq!(run(["slowfast", "check", "--config", &bad]), 2);

    let out = dir.path().join("c.json");
    let code = run(["slowfast", "verify", "--lemma", "contraction", "--n-mc", "8", "--out", out.to_str().unwrap()]);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rep["name"], "contraction");
    assert_eq!(code, if rep["verdict"] == "pass" { 0 } else { 1 });
    for key in ["grid", "estimates", "stderrs", "slope", "slope_ci", "target", "verdict", "seed", "wall_time_s"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(csv.starts_with("t,estimate,stderr\n"));
}

#[test]
fn simulate_and_average_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let o = out.to_str().unwrap();
    assert_eq!(run(["slowfast", "simulate", "--T", "0.01", "--dt", "0.001", "--eps", "0.1", "--out", o]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x_norm,x_theta_norm,y_norm,x1,x2,x3,y1,y2,y3");
    assert_eq!(lines.len(), 12);
    assert_eq!(run(["slowfast", "simulate", "--eps", "1.5"]), 2);

    let x = write(&dir, "x.txt", "0.5, 0.1\n");
    let out = dir.path().join("bbar.csv");
    let code = run([
        "slowfast", "average", "--x", &x, "--Tb", "2", "--Ta", "2", "--replicas", "2", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("mode,bbar,stderr\n"));
    assert_eq!(text.lines().count(), 33);
}

#[test]
fn zvonkin_subcommand_reports_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "z.cfg", "[averaging]\navg_time = 10.0\nreplicas = 2\n");
    let out = dir.path().join("u.csv");
    let code = run([
        "slowfast", "zvonkin", "--config", &cfg, "--dim", "1", "--lambda", "1,10,100", "--grid", "21", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let table = fs::read_to_string(dir.path().join("u_dlambda.csv")).unwrap();
    assert!(table.starts_with("lambda,u_sup,du_sup,iterations\n"));
    assert_eq!(run(["slowfast", "zvonkin", "--dim", "4"]), 2);
}
