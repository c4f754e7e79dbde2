//! End-to-end tests of the `ddek` binary: exit codes, determinism, and the
//! fit/predict round trip against in-process results.

use std::path::Path;
use std::process::Command;

fn ddek() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddek"))
}

#[test]
fn missing_config_exits_1_and_names_path() {
    let out = ddek()
        .args(["experiment", "--config", "definitely_missing.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("definitely_missing.toml"), "{stderr}");
}

#[test]
fn unknown_flag_exits_1() {
    let out = ddek().args(["simulate", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus"), "{stderr}");
    // one-line diagnostic
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
}

#[test]
fn invalid_system_exits_1() {
    let out = ddek()
        .args(["simulate", "--system", "lorenz"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = ddek()
            .args([
                "simulate",
                "--system",
                "hill",
                "--seed",
                "7",
                "--count",
                "2",
                "--horizon",
                "2.0",
                "--out",
            ])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let d1 = run("a");
    let d2 = run("b");
    for name in ["trajectory_000.csv", "trajectory_001.csv"] {
        let a = std::fs::read(d1.join(name)).unwrap();
        let b = std::fs::read(d2.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} not byte-identical");
    }
}

#[test]
fn fit_then_predict_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let surrogate_path = dir.path().join("s.json");
    let out = ddek()
        .args([
            "fit", "--system", "hill", "--M", "2", "--p", "40", "--rho", "0.3", "--ntr", "8",
            "--seed", "3", "--horizon", "4.0", "--out",
        ])
        .arg(&surrogate_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let rollout_path = dir.path().join("rollout.csv");
    let out = ddek()
        .args(["predict", "--init", "0.5", "--steps", "50", "--surrogate"])
        .arg(&surrogate_path)
        .arg("--out")
        .arg(&rollout_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // in-process reference: load the same surrogate and roll out
    let s = dde_koopman::kedmd::KoopmanSurrogate::load(&surrogate_path).unwrap();
    let meta = s.metadata();
    let z0 = dde_koopman::discretize::DiscretizedState::new(
        meta.n,
        meta.m,
        nalgebra::DVector::from_element(meta.n * meta.m, 0.5),
    )
    .unwrap();
    let states = s.rollout(&z0, 50).unwrap();

    let text = std::fs::read_to_string(&rollout_path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 51);
    for (k, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        for j in 0..meta.n * meta.m {
            let got: f64 = fields[2 + j].parse().unwrap();
            assert_eq!(
                got.to_bits(),
                states[k].data()[j].to_bits(),
                "row {k} component {j} differs"
            );
        }
    }
}

#[test]
fn fill_distance_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let centers = dir.path().join("centers.csv");
    let cloud = dir.path().join("cloud.csv");
    std::fs::write(&centers, "z1\n0e0\n1e0\n").unwrap();
    std::fs::write(&cloud, "z1\n0e0\n5e-1\n1e0\n").unwrap();
    let out = ddek()
        .args(["fill-distance", "--centers"])
        .arg(&centers)
        .arg("--cloud")
        .arg(&cloud)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: f64 = stdout.trim().parse().unwrap();
    assert_eq!(value, 0.5);
}

#[test]
fn experiment_runs_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = format!(
        r#"
system = "hill"
horizon = 1.0
m_list = [2]
p_list = [20]
rho_list = [0.3]
n_train = [4]
n_test = 3
data_seed = 6
test_seed = 1006
out_dir = "{}"
"#,
        out_dir.display()
    );
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, &config).unwrap();
    let out = ddek()
        .args(["experiment", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.csv").exists());

    // invalid key named in the diagnostic
    let bad = config.replace("n_test = 3", "n_test = 3\nmystery_knob = 1");
    std::fs::write(&config_path, bad).unwrap();
    let out = ddek()
        .args(["experiment", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery_knob"));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    // p far beyond the available distinct states -> InsufficientData at fit
    let out = ddek()
        .args([
            "fit", "--system", "hill", "--M", "2", "--p", "100000", "--rho", "0.3", "--ntr",
            "2", "--horizon", "1.0", "--out",
        ])
        .arg(out_dir.join("s.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn example_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for name in ["hill.toml", "hill_sweeps.toml", "hill_m_match.toml", "tumor.toml"] {
        let path = root.join("configs").join(name);
        let text = std::fs::read_to_string(&path).unwrap();
        dde_koopman::config::parse_config(&text)
            .unwrap_or_else(|e| panic!("configs/{name}: {e}"));
    }
}
