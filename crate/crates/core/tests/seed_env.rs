// Own test binary: it sets a process-wide environment variable.

use std::fs;

use slowfast::cli::{manifest_path, run, SEED_ENV};

#[test]
fn environment_seed_overrides_config_and_flag_overrides_both() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(&cfg, "seed = 5\n").unwrap();
    let out = dir.path().join("o.csv");
    let seed_of = |extra: &[&str]| {
        let mut args = vec!["slowfast", "simulate", "--T", "0.002", "--config", cfg.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["--out", out.to_str().unwrap()]);
        assert_eq!(run(args), 0);
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(manifest_path(&out)).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    std::env::remove_var(SEED_ENV);
    assert_eq!(seed_of(&[]), 5);
    std::env::set_var(SEED_ENV, "99");
    assert_eq!(seed_of(&[]), 99);
    assert_eq!(seed_of(&["--seed", "7"]), 7);
    std::env::set_var(SEED_ENV, "not-a-number");
    assert_eq!(run(["slowfast", "simulate", "--T", "0.002"]), 2);
    std::env::remove_var(SEED_ENV);
}
