//! End-to-end tests of the command-line binary: file outputs, exit codes
//! and rerun determinism.

use std::path::Path;
use std::process::Command;

fn gelnet() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gelnet"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

fn read_vector(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

#[test]
fn fit_with_huge_fusion_returns_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("x.csv"), "1,0\n0,1\n");
    write(&dir.path().join("y.csv"), "1\n3\n");
    let out = dir.path().join("out");
    let status = gelnet()
        .args(["fit", "-x"])
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--graph", "chain:2", "--lambda1", "1000000", "--lambda2", "0"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let beta = read_vector(&out.join("beta.csv"));
    assert!((beta[0] - 2.0).abs() <= 1e-4);
    assert!((beta[1] - 2.0).abs() <= 1e-4);
    assert!(out.join("diagnostics.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn ols_fit_is_an_exact_solve() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("x.csv"), "2,0\n0,4\n");
    write(&dir.path().join("y.csv"), "2\n8\n");
    let out = dir.path().join("out");
    let status = gelnet()
        .arg("fit")
        .arg("-x")
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--preset", "ols"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let beta = read_vector(&out.join("beta.csv"));
    assert!((beta[0] - 1.0).abs() <= 1e-10);
    assert!((beta[1] - 2.0).abs() <= 1e-10);
}

#[test]
fn cd_and_ip_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    // deterministic 6x4 design
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..6 {
        let row: Vec<String> =
            (0..4).map(|j| format!("{}", ((i * 7 + j * 3) % 5) as f64 - 2.0)).collect();
        x.push_str(&(row.join(",") + "\n"));
        y.push_str(&format!("{}\n", (i as f64) - 2.5));
    }
    write(&dir.path().join("x.csv"), &x);
    write(&dir.path().join("y.csv"), &y);
    let mut betas = Vec::new();
    for solver in ["cd", "ip"] {
        let out = dir.path().join(solver);
        let status = gelnet()
            .arg("fit")
            .arg("-x")
            .arg(dir.path().join("x.csv"))
            .arg("-y")
            .arg(dir.path().join("y.csv"))
            .args(["--graph", "chain:4", "--lambda1", "0.5", "--lambda2", "0.25"])
            .args(["--solver", solver, "--tol", "1e-9"])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{solver} failed");
        betas.push(read_vector(&out.join("beta.csv")));
    }
    for (a, b) in betas[0].iter().zip(betas[1].iter()) {
        assert!((a - b).abs() <= 1e-4, "cd {a} vs ip {b}");
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("x.csv"), "1,0\n0,1\n");
    write(&dir.path().join("y.csv"), "1\n2\n3\n"); // dimension mismatch

    // validation error -> 2
    let status = gelnet()
        .arg("fit")
        .arg("-x")
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--graph", "chain:2", "--out"])
        .arg(dir.path().join("o1"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // unreadable input -> 4
    let status = gelnet()
        .arg("fit")
        .arg("-x")
        .arg(dir.path().join("missing.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--graph", "chain:2", "--out"])
        .arg(dir.path().join("o2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));

    // bad usage (clap) -> 2
    let status = gelnet().args(["fit", "--definitely-not-a-flag"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn non_convergence_still_writes_outputs_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..8 {
        let row: Vec<String> =
            (0..5).map(|j| format!("{}", (((i + 2) * (j + 3)) % 7) as f64 - 3.0)).collect();
        x.push_str(&(row.join(",") + "\n"));
        y.push_str(&format!("{}\n", (i as f64) * 0.7 - 2.0));
    }
    write(&dir.path().join("x.csv"), &x);
    write(&dir.path().join("y.csv"), &y);
    let out = dir.path().join("out");
    let status = gelnet()
        .arg("fit")
        .arg("-x")
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--graph", "chain:5", "--lambda1", "0.9", "--tol", "1e-14", "--max-iter", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    assert!(out.join("beta.csv").exists());
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap())
            .unwrap();
    assert_eq!(diag["converged"], serde_json::Value::Bool(false));
}

#[test]
fn cv_single_point_grid_and_rerun_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..12 {
        let row: Vec<String> =
            (0..3).map(|j| format!("{}", ((i * 5 + j * 11) % 9) as f64 / 3.0 - 1.0)).collect();
        x.push_str(&(row.join(",") + "\n"));
        y.push_str(&format!("{}\n", (i % 4) as f64 - 1.5));
    }
    write(&dir.path().join("x.csv"), &x);
    write(&dir.path().join("y.csv"), &y);

    let run = |out: &Path| {
        let status = gelnet()
            .arg("cv")
            .arg("-x")
            .arg(dir.path().join("x.csv"))
            .arg("-y")
            .arg(dir.path().join("y.csv"))
            .args(["--graph", "chain:3", "--preset", "gen", "--k", "3", "--seed", "7"])
            .args(["--grid-lambda1", "0.25", "--grid-lambda2", "0.5"])
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&dir.path().join("a"));
    run(&dir.path().join("b"));

    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/best.json")).unwrap())
            .unwrap();
    assert_eq!(best["best_params"]["lambda1"], serde_json::json!(0.25));
    assert_eq!(best["best_params"]["lambda2"], serde_json::json!(0.5));

    let table_a = std::fs::read(dir.path().join("a/cv_table.csv")).unwrap();
    let table_b = std::fs::read(dir.path().join("b/cv_table.csv")).unwrap();
    assert_eq!(table_a, table_b, "cv_table.csv not byte-identical across reruns");
}

#[test]
fn graph_dump_reports_the_star_scaling_factor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let status = gelnet()
        .args(["graph", "--kind", "star", "--p", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let spectra: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spectra.json")).unwrap()).unwrap();
    let rho = spectra["rho"].as_f64().unwrap();
    assert!((rho - 0.75f64.sqrt()).abs() <= 1e-10);
    assert!(out.join("incidence.csv").exists());
    assert!(out.join("laplacian.csv").exists());
}

#[test]
fn eigen_curve_with_zero_grid_matches_gmin_over_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let status = gelnet()
        .args(["eigen-curve", "--covariance", "identity:5", "--graph", "chain:5"])
        .args(["--lambda2-grid", "0"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("eigen_curve.csv")).unwrap();
    let line = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = line.split(',').collect();
    let gmin: f64 = fields[1].parse().unwrap();
    assert!((gmin - 1.0 / 64.0).abs() <= 1e-12);
}

#[test]
fn re_check_on_the_default_chain_setup_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("re");
    let status = gelnet()
        .args(["re-check", "--covariance", "identity:20", "--graph", "chain:20"])
        .args(["--n", "200", "--trials", "5", "--directions", "8", "--seed", "1"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("re_check.csv")).unwrap();
    let fraction: f64 = text.lines().nth(1).unwrap().split(',').last().unwrap().parse().unwrap();
    assert!(fraction >= 0.99);
}

#[test]
fn synth_runs_a_tiny_noiseless_study() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    write(
        &config,
        "graph = chain:12\n\
         covariance = identity:12\n\
         signal = piecewise_constant\n\
         signal_tv = 4\n\
         signal_jumps = 2\n\
         sigma = 0\n\
         n_train = 30\n\
         n_val = 20\n\
         n_test = 20\n\
         replicates = 3\n\
         seed = 5\n\
         estimators = ols\n",
    );
    let out = dir.path().join("s");
    let status = gelnet().arg("synth").arg("--config").arg(&config).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("replicates.csv")).unwrap();
    for line in text.lines().skip(1) {
        let est_err: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(est_err <= 1e-8, "noiseless OLS should recover the truth, got {est_err}");
    }

    // same seed, fresh run: identical summary bytes
    let out2 = dir.path().join("s2");
    let status = gelnet().arg("synth").arg("--config").arg(&config).arg("--out").arg(&out2).status().unwrap();
    assert!(status.success());
    assert_eq!(
        std::fs::read(out.join("summary.csv")).unwrap(),
        std::fs::read(out2.join("summary.csv")).unwrap()
    );
}

#[test]
fn bench_trivial_point_runs_all_solvers_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let start = std::time::Instant::now();
    let status = gelnet()
        .args(["bench", "--points", "chain:10x10", "--solvers", "cd,ip,admm", "--seed", "3"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(out.join("runtimes.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "header plus one row per solver");
    for line in &lines[1..] {
        let median: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(median < 1.0, "trivial point took {median}s");
        assert!(line.ends_with("true,false"), "expected converged, uncensored: {line}");
    }
    assert!(start.elapsed().as_secs() < 60);

    // identical row structure on a rerun (times differ)
    let out2 = dir.path().join("b2");
    gelnet()
        .args(["bench", "--points", "chain:10x10", "--solvers", "cd,ip,admm", "--seed", "3"])
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    let text2 = std::fs::read_to_string(out2.join("runtimes.csv")).unwrap();
    let structure = |t: &str| -> Vec<String> {
        t.lines()
            .map(|l| l.split(',').take(4).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(structure(&text), structure(&text2));
}

#[test]
fn cv_with_zero_grids_reproduces_the_ols_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..20 {
        let row: Vec<String> = (0..4)
            .map(|j| format!("{}", (((i * 13 + j * 7) % 11) as f64) / 5.0 - 1.0))
            .collect();
        x.push_str(&(row.join(",") + "\n"));
        y.push_str(&format!("{}\n", ((i * 3) % 7) as f64 - 3.0));
    }
    write(&dir.path().join("x.csv"), &x);
    write(&dir.path().join("y.csv"), &y);

    let cv_out = dir.path().join("cv");
    let status = gelnet()
        .arg("cv")
        .arg("-x")
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--graph", "chain:4", "--preset", "gen", "--k", "5", "--seed", "11"])
        .args(["--grid-lambda1", "0", "--grid-lambda2", "0", "--tol", "1e-12"])
        .arg("--out")
        .arg(&cv_out)
        .status()
        .unwrap();
    assert!(status.success());

    let fit_out = dir.path().join("fit");
    let status = gelnet()
        .arg("fit")
        .arg("-x")
        .arg(dir.path().join("x.csv"))
        .arg("-y")
        .arg(dir.path().join("y.csv"))
        .args(["--preset", "ols"])
        .arg("--out")
        .arg(&fit_out)
        .status()
        .unwrap();
    assert!(status.success());

    let a = read_vector(&cv_out.join("beta.csv"));
    let b = read_vector(&fit_out.join("beta.csv"));
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= 1e-8, "cv zero-grid {x} vs ols {y}");
    }
}

#[test]
fn fit_accepts_a_key_value_run_configuration() {
    let dir = tempfile::tempdir().unwrap();
    write(&dir.path().join("x.csv"), "1,0\n0,1\n");
    write(&dir.path().join("y.csv"), "1\n3\n");
    write(
        &dir.path().join("run.cfg"),
        &format!(
            "x = {}\ny = {}\ngraph = chain:2\npreset = gen\nlambda1 = 1000000\nlambda2 = 0\n",
            dir.path().join("x.csv").display(),
            dir.path().join("y.csv").display()
        ),
    );
    let out = dir.path().join("out");
    let status = gelnet()
        .arg("fit")
        .arg("--config")
        .arg(dir.path().join("run.cfg"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let beta = read_vector(&out.join("beta.csv"));
    assert!((beta[0] - 2.0).abs() <= 1e-4);

    // an explicit flag overrides the config value
    let out2 = dir.path().join("out2");
    let status = gelnet()
        .arg("fit")
        .arg("--config")
        .arg(dir.path().join("run.cfg"))
        .args(["--lambda1", "0"])
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    let beta = read_vector(&out2.join("beta.csv"));
    assert!((beta[0] - 1.0).abs() <= 1e-8, "ols solution expected, got {}", beta[0]);
}
