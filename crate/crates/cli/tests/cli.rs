use std::path::Path;
use std::process::{Command, Output};

fn superou(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superou"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/smoke.toml")
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_twice_gives_identical_bytes() {
    let cfg = config_path();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = superou(&[
            "--config",
            &cfg,
            "--out",
            dir.path().to_str().unwrap(),
            "simulate",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("survival fraction"));
    }
    for f in ["checkpoints.jsonl", "summary.csv", "manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let lines = std::fs::read_to_string(a.path().join("checkpoints.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 100);
}

#[test]
fn seed_flag_changes_output() {
    let cfg = config_path();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    superou(&[
        "--config",
        &cfg,
        "--out",
        a.path().to_str().unwrap(),
        "simulate",
    ]);
    superou(&[
        "--config",
        &cfg,
        "--seed",
        "8",
        "--out",
        b.path().to_str().unwrap(),
        "simulate",
    ]);
    let x = std::fs::read(a.path().join("checkpoints.jsonl")).unwrap();
    let y = std::fs::read(b.path().join("checkpoints.jsonl")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn parallelism_does_not_change_output() {
    let cfg = config_path();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    superou(&[
        "--config",
        &cfg,
        "--parallelism",
        "1",
        "--out",
        a.path().to_str().unwrap(),
        "simulate",
    ]);
    superou(&[
        "--config",
        &cfg,
        "--parallelism",
        "3",
        "--out",
        b.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(
        std::fs::read(a.path().join("checkpoints.jsonl")).unwrap(),
        std::fs::read(b.path().join("checkpoints.jsonl")).unwrap()
    );
}

#[test]
fn zero_horizon_reproduces_initial_functionals() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config_path())
        .unwrap()
        .replace(
            "checkpoints = [0.25, 0.5, 0.75, 1.0]",
            "checkpoints = [0.0, 1.0]\nstatistic_time = 1.0\ncompensator_u = 0.0",
        )
        .replace("replicates = 100", "replicates = 5");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, text).unwrap();
    let o = superou(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("\n0,mass,1,0,5\n"), "{summary}");
}

#[test]
fn verify_reuses_simulation_and_report_collects() {
    let cfg = config_path();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = superou(&["--config", &cfg, "--out", out, "verify", "means"]);
    assert!(
        o.status.success(),
        "{}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("verify_means.json").exists());
    let before = std::fs::read(dir.path().join("checkpoints.jsonl")).unwrap();
    let o = superou(&["--config", &cfg, "--out", out, "verify", "martingale"]);
    assert!(!String::from_utf8_lossy(&o.stderr).contains("simulating"));
    assert_eq!(
        before,
        std::fs::read(dir.path().join("checkpoints.jsonl")).unwrap()
    );
    let o = superou(&["--config", &cfg, "--out", out, "report"]);
    let text = stdout(&o);
    assert!(
        text.contains("means[") && text.contains("martingale["),
        "{text}"
    );
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = superou(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_without_inputs_names_the_dependency() {
    let dir = tempfile::tempdir().unwrap();
    let o = superou(&["--out", dir.path().to_str().unwrap(), "report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cli::report"));
}

#[test]
fn malformed_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[ou]\nsigma = \"x\"\n").unwrap();
    let o = superou(&["--config", bad.to_str().unwrap(), "limits"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("sigma"), "{err}");
    let text = std::fs::read_to_string(config_path())
        .unwrap()
        .replace("n = 100", "n = 5");
    std::fs::write(&bad, text).unwrap();
    let o = superou(&["--config", bad.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulation.n"));
}

#[test]
fn spectral_check_passes_and_catches_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = superou(&["--out", out, "spectral-check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = superou(&["--out", out, "spectral-check", "--corrupt-basis"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn limits_of_constant_and_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let base = std::fs::read_to_string(config_path()).unwrap();
    std::fs::write(
        &cfg,
        base.replace(
            "f = [{ p = [1], c = 1.0 }, { p = [2], c = 1.0 }]",
            "f = [{ p = [0], c = 1.0 }]",
        ),
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let o = superou(&["--config", cfg.to_str().unwrap(), "--out", out, "limits"]);
    assert!(o.status.success());
    let mt = std::fs::read_to_string(dir.path().join("limits_mt.csv")).unwrap();
    let last: Vec<f64> = mt
        .lines()
        .last()
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(
        (last[0] + 0.47140).abs() < 1e-5 && (last[1] + 0.47140).abs() < 1e-5,
        "{mt}"
    );

    std::fs::write(
        &cfg,
        base.replace("f = [{ p = [1], c = 1.0 }, { p = [2], c = 1.0 }]", "f = []"),
    )
    .unwrap();
    let o = superou(&["--config", cfg.to_str().unwrap(), "--out", out, "limits"]);
    assert!(o.status.success());
    let mt = std::fs::read_to_string(dir.path().join("limits_mt.csv")).unwrap();
    for row in mt.lines().skip(1) {
        let v: Vec<f64> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert_eq!(v, vec![0.0, 0.0]);
    }
}

#[test]
fn infeasible_run_is_a_resource_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let text = std::fs::read_to_string(config_path()).unwrap().replace(
        "checkpoints = [0.25, 0.5, 0.75, 1.0]",
        "checkpoints = [3.0, 6.0]",
    );
    std::fs::write(&cfg, text).unwrap();
    let o = superou(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "simulate",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulator::run_ensemble"));
}
