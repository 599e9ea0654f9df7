use std::process::{Command, Output};

use apcones::solver::GridField;

fn apcones(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apcones"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn selftest_exits_zero() {
    let out = apcones(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("check,passed,detail\n"));
    assert!(body.contains("sum-of-weights,true"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(apcones(&["bogus"]).status.code(), Some(2));
    assert_eq!(apcones(&["verify-inequality", "--dim", "7"]).status.code(), Some(2));
    assert_eq!(apcones(&["concentrate", "--gammas", "0.9,1"]).status.code(), Some(2));
    assert_eq!(apcones(&["q-curve"]).status.code(), Some(2));
    let out = apcones(&["q-curve", "--boundary", "parabola:0.7,0.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("deviation"));
    assert_eq!(apcones(&["solve", "--n", "10"]).status.code(), Some(2));
}

#[test]
fn verify_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("verify.csv");
    let out = apcones(&[
        "verify-inequality",
        "--dim",
        "2",
        "--samples",
        "4",
        "--seed",
        "3",
        "--level",
        "16",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next(),
        Some("sample_id,eigenvalues,Q1,quad_error,margin,nearest_k,dist_to_SP,anomaly")
    );
    assert_eq!(lines.count(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["pass_count"], 4);
    assert_eq!(summary["outcome"], "pass");
}

#[test]
fn identical_command_lines_give_identical_bodies() {
    let args = ["verify-inequality", "--dim", "3", "--samples", "20", "--seed", "9", "--family", "boundary"];
    assert_eq!(apcones(&args).stdout, apcones(&args).stdout);
}

#[test]
fn q_curve_of_rank_one_cone() {
    let out = apcones(&["q-curve", "--boundary", "parabola:1,0", "--t-points", "7", "--level", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("t,Q_direct,Q_expanded,q,q_dd_formula,q_dd_finite_diff\n"));
    for line in body.lines().skip(1) {
        let t: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(t > 0.0 && t < 1.0);
    }
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.contains("\"t_bar\": \"1.0000000000000000e0\""));
}

#[test]
fn q_curve_of_radial_cone_reports_infinite_t_bar() {
    let out = apcones(&["q-curve", "--dim", "3", "--boundary", "symmetric:3", "--t-points", "5", "--level", "8"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stderr).unwrap().contains("\"t_bar\": \"inf\""));
}

#[test]
fn solve_dumps_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("u.txt");
    let out = apcones(&[
        "solve",
        "--dim",
        "2",
        "--gamma",
        "1.2",
        "--n",
        "81",
        "--boundary",
        "parabola:0.7,0.3",
        "--out",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next(),
        Some("gamma,n,energy,el_residual,homogeneity_defect,contact_fraction,converged")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[6], "true");
    let contact: f64 = row[5].parse().unwrap();
    assert!(contact < 0.05, "{contact}");
    let (field, gamma) = GridField::load(&dump).unwrap();
    assert_eq!(gamma, 1.2);
    assert_eq!(field.n(), 81);
    assert!(dir.path().join("u.txt.summary.json").exists());
}

#[test]
fn concentrate_on_symmetric_data_passes() {
    let out = apcones(&["concentrate", "--gammas", "0.8,0.9", "--n", "41", "--boundary", "symmetric:1"]);
    assert_eq!(out.status.code(), Some(0));
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("gamma,beta,dist_best,k_best,green_lhs,green_rhs,el_residual,contact_fraction\n"));
    assert_eq!(body.lines().count(), 3);
}
