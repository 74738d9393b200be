use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sparsepc::pcbasis::BasisSpec;
use sparsepc::sampling::{assemble_measurement, draw_samples};

const CONFIG: &str = r#"{
    "field": {"mean": 0.1, "sigma": 0.03, "correlation_length": 0.5, "dim": 2, "quadrature_nodes": 60},
    "mesh": {"n_elements": 16},
    "schedule": [{"n": 20, "order": 2}, {"n": 40, "order": 2}],
    "seeds": [1, 2],
    "crossval": {"replications": 2, "grid_points": 6},
    "reference": {"tensor_quadrature": {"q_per_dim": 5}}
}"#;

fn sparsepc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsepc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn experiment_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = sparsepc(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    // header + 2 seeds x 2 budgets x (omp, bpdn, mc)
    assert_eq!(report.lines().count(), 1 + 12);
    assert!(out.join("summary.json").exists());
    assert!(out.join("forward_cache.csv").exists());
}

#[test]
fn seed_flag_overrides_config_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = sparsepc(&[
        "experiment",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().skip(1).all(|l| l.starts_with("9,")));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = sparsepc(&[
        "experiment",
        "--config",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "{\"field\": {}}");
    assert_eq!(
        sparsepc(&["diagnose", "--config", &cfg]).status.code(),
        Some(2)
    );
    let cfg = write_config(dir.path(), &CONFIG.replace("\"n\": 40", "\"n\": 10"));
    assert_eq!(
        sparsepc(&["diagnose", "--config", &cfg]).status.code(),
        Some(2)
    );
    assert_eq!(sparsepc(&["oracle"]).status.code(), Some(2));
    assert_eq!(sparsepc(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // a negative mean makes every realization of the coefficient negative
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("\"mean\": 0.1", "\"mean\": -0.1"),
    );
    let out = dir.path().join("out");
    let o = sparsepc(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(fs::read_to_string(out.join("report.csv"))
        .unwrap()
        .contains("error"));
    assert_eq!(
        sparsepc(&["oracle", "--config", &cfg]).status.code(),
        Some(3)
    );
}

#[test]
fn diagnose_and_oracle_print_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = sparsepc(&["diagnose", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("seed,n,order,basis_size,coherence"));
    assert_eq!(text.lines().count(), 5);

    let o = sparsepc(&["oracle", "--config", &cfg, "--q", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("alpha,value\n0-0,"));
    assert_eq!(text.lines().count(), 1 + 6);
}

fn write_problem(dir: &Path) -> (String, String) {
    let basis = BasisSpec::total_order(2, 3).unwrap();
    let samples = draw_samples(3, 30, 4);
    let m = assemble_measurement(&basis, &samples).unwrap();
    let mut c = vec![0.0; basis.len()];
    c[0] = 1.5;
    c[4] = -0.5;
    let u = m.values.matvec(&c);
    let mp = dir.join("matrix.csv");
    m.write_csv(fs::File::create(&mp).unwrap()).unwrap();
    let vp = dir.join("values.txt");
    fs::write(&vp, u.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    (
        mp.to_str().unwrap().to_string(),
        vp.to_str().unwrap().to_string(),
    )
}

#[test]
fn recover_from_matrix_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, vp) = write_problem(dir.path());
    let out = dir.path().join("rec");
    let o = sparsepc(&[
        "recover",
        "--matrix",
        &mp,
        "--values",
        &vp,
        "--solver",
        "omp",
        "--delta",
        "1e-9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let coeffs = fs::read_to_string(out.join("coefficients.csv")).unwrap();
    let get = |alpha: &str| -> f64 {
        coeffs
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{alpha},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("0-0-0") - 1.5).abs() < 1e-10);
    assert!((get("2-0-0") + 0.5).abs() < 1e-10);
    assert!(out.join("recovery.json").exists());

    // δ by cross-validation, BPDN
    let o = sparsepc(&["recover", "--matrix", &mp, "--values", &vp]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    fs::write(&vp, "1\n2\n").unwrap();
    assert_eq!(
        sparsepc(&["recover", "--matrix", &mp, "--values", &vp])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn crossval_exports_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, vp) = write_problem(dir.path());
    let o = sparsepc(&[
        "crossval", "--matrix", &mp, "--values", &vp, "--solver", "omp",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("delta_r,mean_delta_v,delta_v_0"));
    assert_eq!(text.lines().count(), 13);

    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("cv");
    let o = sparsepc(&[
        "crossval",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("cv_seed3_n40_bpdn.csv").exists());
    assert!(out.join("cv_seed3_n20_omp.csv").exists());
}
