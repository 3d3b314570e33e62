use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ssc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssc"))
        .args(args)
        .env_remove("SSC_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited")
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_shape(path: impl AsRef<Path>) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    (rows.len(), rows[0].split(',').count())
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn gen_writes_expected_shapes_and_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = ssc(&[
            "gen", "--d", "4", "--ambient-dim", "50", "--theta-deg", "60", "--points-per-subspace", "128", "--seed",
            "7", "--out-dir", &dir.path().display().to_string(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(csv_shape(a.path().join("data.csv")), (50, 384));
    assert_eq!(csv_shape(a.path().join("bases.csv")), (50, 12));
    for f in ["data.csv", "labels.txt", "bases.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let m = read_json(a.path().join("manifest.json"));
    assert_eq!(m["format_version"], 1);
    assert_eq!(m["command"], "gen");
    assert_eq!(m["seed"], 7);
}

#[test]
fn gen_rejects_zero_angle() {
    let dir = TempDir::new().unwrap();
    let out = ssc(&["gen", "--theta-deg", "0", "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 2);
    let out = ssc(&["gen", "--theta-deg", "30", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn seed_environment_overrides_flag() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let run = |dir: &TempDir, flag: &str| {
        Command::new(env!("CARGO_BIN_EXE_ssc"))
            .args(["gen", "--d", "2", "--ambient-dim", "6", "--theta-deg", "40", "--points-per-subspace", "5"])
            .args(["--seed", flag, "--out-dir", &dir.path().display().to_string()])
            .env("SSC_SEED", "11")
            .output()
            .unwrap()
    };
    assert_eq!(code(&run(&a, "1")), 0);
    assert_eq!(code(&run(&b, "2")), 0);
    assert_eq!(fs::read(a.path().join("data.csv")).unwrap(), fs::read(b.path().join("data.csv")).unwrap());
    assert_eq!(read_json(a.path().join("manifest.json"))["seed"], 11);
}

#[test]
fn solve_then_cluster_recovers_synthetic_groups() {
    let dir = TempDir::new().unwrap();
    let d = dir.path().display().to_string();
    let out = ssc(&[
        "gen", "--d", "2", "--ambient-dim", "10", "--theta-deg", "60", "--points-per-subspace", "12", "--seed", "3",
        "--out-dir", &d,
    ]);
    assert_eq!(code(&out), 0);
    let out = ssc(&["solve", "--input", &p(&dir, "data.csv"), "--variant", "exact", "--out-dir", &d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let diag = read_json(dir.path().join("diagnostics.json"));
    assert_eq!(diag["converged"], true);
    assert_eq!(diag["format_version"], 1);
    assert_eq!(csv_shape(dir.path().join("C.csv")), (36, 36));
    let out = ssc(&[
        "cluster", "--coeffs", &p(&dir, "C.csv"), "--n", "3", "--truth", &p(&dir, "labels.txt"), "--out-dir", &d,
        "--out-labels", &p(&dir, "pred.txt"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(dir.path().join("cluster.json"))["clustering_error"], 0.0);
    assert_eq!(fs::read_to_string(dir.path().join("spectrum.csv")).unwrap().lines().count(), 37);
}

#[test]
fn default_solve_uses_affine_noise_configuration() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,0,0.9,0.1\n0,1,0.1,0.9\n");
    let out = ssc(&["solve", "--input", &input, "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(dir.path().join("manifest.json"));
    assert_eq!(m["parameters"]["variant"], "noise");
    assert_eq!(m["parameters"]["affine"], true);
    assert_eq!(m["parameters"]["alpha_z"], 800.0);
}

#[test]
fn outlier_variant_writes_error_matrix() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,0,0.9,0.1\n0,1,0.1,0.9\n0,0,0.05,0\n");
    let out = ssc(&[
        "solve", "--input", &input, "--variant", "outlier", "--alpha-e", "20", "--out-dir",
        &dir.path().display().to_string(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_shape(dir.path().join("E.csv")), (3, 4));
    assert_eq!(read_json(dir.path().join("manifest.json"))["parameters"]["affine"], false);
}

#[test]
fn small_alpha_reports_zero_columns() {
    let dir = TempDir::new().unwrap();
    // Unit columns with pairwise products at most 1, so mu_z = 1 for the
    // duplicate pair and lambda_z = 0.5 zeroes every column.
    let input = write(&dir, "y.csv", "1,1,0,0\n0,0,1,1\n");
    let out = ssc(&[
        "solve", "--input", &input, "--variant", "noise", "--no-affine", "--alpha-z", "0.5", "--out-dir",
        &dir.path().display().to_string(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let diag = read_json(dir.path().join("diagnostics.json"));
    assert!(!diag["zero_columns"].as_array().unwrap().is_empty());
}

#[test]
fn non_convergence_exits_three_unless_allowed() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,0,0.9,0.1,0.5\n0,1,0.1,0.9,0.5\n0.2,0.1,0,0.3,0.1\n");
    let d = dir.path().display().to_string();
    let out = ssc(&["solve", "--input", &input, "--max-iter", "1", "--out-dir", &d]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("C.csv").exists());
    let out = ssc(&["solve", "--input", &input, "--max-iter", "1", "--allow-nonconverged", "--out-dir", &d]);
    assert_eq!(code(&out), 0);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = ssc(&["solve", "--input", &p(&dir, "absent.csv"), "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn masks_with_empty_common_support_fail_precondition() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,0\n0,1\n");
    let masks = write(&dir, "m.txt", "1\n2\n");
    let out = ssc(&["solve", "--input", &input, "--masks", &masks, "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 4);
}

fn block_coeffs() -> String {
    // Two blocks {1,2,3} and {4,5}.
    "0,1,1,0,0\n1,0,1,0,0\n1,1,0,0,0\n0,0,0,0,1\n0,0,0,1,0\n".to_owned()
}

#[test]
fn cluster_block_diagonal_with_given_and_estimated_n() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "C.csv", &block_coeffs());
    let d = dir.path().display().to_string();
    let out = ssc(&["cluster", "--coeffs", &c, "--n", "2", "--out-dir", &d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labels = fs::read_to_string(dir.path().join("labels.txt")).unwrap();
    let l: Vec<&str> = labels.lines().collect();
    assert_eq!(l[0], l[1]);
    assert_eq!(l[1], l[2]);
    assert_eq!(l[3], l[4]);
    assert_ne!(l[0], l[3]);

    let three = "0,1,0,0,0,0\n1,0,0,0,0,0\n0,0,0,1,0,0\n0,0,1,0,0,0\n0,0,0,0,0,1\n0,0,0,0,1,0\n";
    let c3 = write(&dir, "C3.csv", three);
    let out = ssc(&["cluster", "--coeffs", &c3, "--estimate-n", "--n-max", "5", "--out-dir", &d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(dir.path().join("cluster.json"))["n_clusters"], 3);
    assert_eq!(read_json(dir.path().join("manifest.json"))["parameters"]["n"], 3);

    let out = ssc(&["cluster", "--coeffs", &c, "--n", "2", "--no-normalize", "--out-dir", &d]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(dir.path().join("manifest.json"))["parameters"]["normalize"], false);
}

#[test]
fn cluster_rejects_more_groups_than_points() {
    let dir = TempDir::new().unwrap();
    let c = write(&dir, "C.csv", &block_coeffs());
    let out = ssc(&["cluster", "--coeffs", &c, "--n", "9", "--out-dir", &dir.path().display().to_string()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_single_cell_is_error_free_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = ssc(&[
            "bench", "--theta-list", "60", "--ng-list", "128", "--trials", "1", "--seed", "5", "--out",
            &p(&dir, name),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "theta_deg,ng,trial,ssr_error,clustering_error,converged");
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert!(fields[3].parse::<f64>().unwrap() < 1e-6, "{}", lines[1]);
    assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
    let summary = fs::read_to_string(dir.path().join("a_summary.csv")).unwrap();
    assert!(summary.starts_with("theta_deg,ng,trials,mean_ssr_error"));
}

#[test]
fn check_orthogonal_data_holds_and_reports_infinite_margin() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,-1,0,0\n0,0,1,-1\n");
    let labels = write(&dir, "l.txt", "1\n1\n2\n2\n");
    let out_path = p(&dir, "report.json");
    let out = ssc(&[
        "check", "--input", &input, "--labels", &labels, "--thm3", "--thm2-samples", "3", "--out", &out_path,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    assert_eq!(r["classification"], "Independent");
    assert_eq!(r["thm3"]["holds"], serde_json::json!([true, true]));
    for v in r["thm3"]["rhs"].as_array().unwrap() {
        assert!(v.as_f64().unwrap() < 1e-12);
    }
    assert!(r["thm2"][0]["min_margin"].is_null());
    assert!(r["thm2"][0]["note"].is_string());
}

#[test]
fn check_reports_negative_margin_with_witness() {
    let dir = TempDir::new().unwrap();
    let (c, s) = (45f64.to_radians().cos(), 45f64.to_radians().sin());
    let a = 5f64.to_radians();
    let data = format!(
        "{},{},0,0\n{},{},{},{}\n0,0,{},{}\n",
        a.cos(),
        a.cos(),
        a.sin(),
        -a.sin(),
        c,
        c,
        s,
        -s
    );
    let input = write(&dir, "y.csv", &data);
    let labels = write(&dir, "l.txt", "1\n1\n2\n3\n");
    let bases = write(&dir, "b.csv", &format!("# dims=2,1,1\n1,0,0,0\n0,1,{c},{c}\n0,0,{s},{}\n", -s));
    let out_path = p(&dir, "report.json");
    let out = ssc(&[
        "check", "--input", &input, "--labels", &labels, "--bases", &bases, "--thm2-samples", "2", "--out", &out_path,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&out_path);
    assert_eq!(r["classification"], "DisjointNotIndependent");
    let m = &r["thm2"][0];
    assert!(m["min_margin"].as_f64().unwrap() < 0.0);
    assert_eq!(m["verdict"], "counterexample");
    assert_eq!(m["witness"].as_array().unwrap().len(), 3);
}

#[test]
fn check_rank_deficient_exits_four() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "y.csv", "1,2,0\n0,0,0\n0,0,1\n");
    let labels = write(&dir, "l.txt", "1\n1\n2\n");
    let bases = write(&dir, "b.csv", "# dims=2,1\n1,0,0\n0,1,0\n0,0,1\n");
    let out = ssc(&[
        "check", "--input", &input, "--labels", &labels, "--bases", &bases, "--thm3", "--out", &p(&dir, "r.json"),
    ]);
    assert_eq!(code(&out), 4);
}
