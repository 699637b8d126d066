#![forbid(unsafe_code)]
//! End-to-end checks of the command-line binary: argument plumbing, output
//! formats, provenance headers, data-file resolution, and exit codes.
//!
//! Numeric substance lives in the unit suites and the acceptance gate; these
//! tests pin the user-facing contract of each subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_randeq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let output = run(args);
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 output")
}

fn snapshot_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/us_regions_2020-05-12.csv")
}

fn line_value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("report is missing a '{key}' line:\n{report}"))
}

// ===== pvalue =====

#[test]
fn pvalue_with_explicit_uniforms_reports_all_four_values() {
    let report = run_ok(&[
        "pvalue", "--n", "1", "--s", "1", "--theta1", "0.25", "--theta2", "0.75", "--u", "0.5",
        "--u-tilde", "0.9", "--c", "0.5",
    ]);
    // By hand: the lower-bound tail gives 0.25 + 0.5 * 0.75 = 0.625, the
    // upper-bound tail 0 + 0.5 * 0.25 = 0.125; the first stage keeps the
    // max, which is at or above c, so the second stage returns the fresh
    // uniform 0.9.
    assert_eq!(line_value(&report, "p_lower"), "0.625000");
    assert_eq!(line_value(&report, "p_upper"), "0.125000");
    assert_eq!(line_value(&report, "p_ump"), "0.625000");
    assert_eq!(line_value(&report, "p_rand2"), "0.900000");
}

#[test]
fn pvalue_seeded_draw_is_reproducible_and_echoes_config() {
    let args = [
        "pvalue", "--n", "50", "--s", "20", "--theta1", "0.25", "--theta2", "0.75", "--seed", "7",
    ];
    let first = run_ok(&args);
    assert_eq!(first, run_ok(&args));
    for key in ["# kind", "# n", "# s", "# seed", "# u", "# u_tilde"] {
        assert!(
            first.lines().any(|l| l.starts_with(key)),
            "missing provenance line '{key}':\n{first}"
        );
    }
}

#[test]
fn pvalue_json_nests_draw_under_provenance_document() {
    let report = run_ok(&[
        "pvalue", "--n", "10", "--s", "5", "--theta1", "0.25", "--theta2", "0.75", "--u", "0.3",
        "--u-tilde", "0.6", "--format", "json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&report).expect("valid json");
    assert_eq!(doc["provenance"]["kind"], "pvalue");
    assert!(doc["draw"]["p_ump"].is_f64());
    assert!(doc["draw"]["p_rand2"].is_f64());
}

// ===== cdf and power series =====

#[test]
fn cdf_csv_has_provenance_then_columns() {
    let report = run_ok(&[
        "cdf", "--n", "10", "--theta1", "0.25", "--theta2", "0.75", "--theta", "0.5", "--t-grid",
        "0:1:11",
    ]);
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("# kind = cdf-curve"));
    let header = lines
        .clone()
        .find(|l| !l.starts_with('#'))
        .expect("column header");
    assert_eq!(header, "t,ump,rand2");
    let rows: Vec<&str> = lines.filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("0,"));
    assert!(rows[10].starts_with("1,"));
}

#[test]
fn power_vs_n_counts_drops_in_the_header() {
    let report = run_ok(&[
        "power-vs-n", "--theta1", "0.25", "--theta2", "0.75", "--theta", "0.5", "--n-lo", "20",
        "--n-hi", "40",
    ]);
    assert!(report.contains("# kind = power-vs-n"));
    assert!(report.contains("# nonmonotone_ump = "));
    assert!(report.contains("# nonmonotone_rand2 = "));
    let rows = report.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 22, "header row plus one row per sample size");
}

#[test]
fn max_power_reports_interior_argmax_for_both_methods() {
    let report = run_ok(&[
        "max-power", "--n", "20", "--theta1", "0.25", "--theta2", "0.75",
    ]);
    for key in ["ump_argmax_theta", "rand2_argmax_theta"] {
        let theta: f64 = line_value(&report, key).parse().unwrap();
        assert!(
            theta > 0.25 && theta < 0.75,
            "{key} = {theta} should be interior"
        );
    }
}

// ===== estimate-pi0 =====

#[test]
fn estimate_pi0_from_file_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pvalues.txt");
    std::fs::write(&path, "# four p-values\n0.1\n0.2\n\n0.9\n0.95\n").unwrap();
    let report = run_ok(&["estimate-pi0", "--pvalues", path.to_str().unwrap()]);
    // Two of four p-values sit above lambda = 0.5, so the line through
    // (0.5, 1/2) and (1, 1) estimates k0 = 4 * (1/2) / (1/2) = 4.
    assert_eq!(line_value(&report, "k"), "4");
    assert_eq!(line_value(&report, "k0_hat"), "4.000000");
    assert_eq!(line_value(&report, "pi0_hat"), "1.000000");
    assert_eq!(line_value(&report, "intercept"), "0.000000");
}

#[test]
fn estimate_pi0_simulated_mode_uses_the_snapshot() {
    let report = run_ok(&[
        "estimate-pi0",
        "--regions",
        snapshot_path().to_str().unwrap(),
        "--theta1",
        "0.3076",
        "--theta2",
        "0.7566",
        "--seed",
        "3",
    ]);
    assert_eq!(line_value(&report, "# k"), "47");
    assert_eq!(line_value(&report, "# k0_true"), "28");
    let rand2: f64 = line_value(&report, "rand2_k0_hat").parse().unwrap();
    assert!((0.0..=94.0).contains(&rand2), "one replicate, wide range");
}

#[test]
fn data_dir_environment_variable_resolves_the_snapshot() {
    let data_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let output = bin()
        .env("RANDEQ_DATA_DIR", &data_dir)
        .args([
            "estimate-pi0", "--theta1", "0.3076", "--theta2", "0.7566", "--seed", "3",
        ])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "env-resolved run failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let report = String::from_utf8(output.stdout).unwrap();
    assert_eq!(line_value(&report, "# k"), "47");
}

// ===== simulate-table and fwer =====

#[test]
fn simulate_table_csv_row_shape_and_exact_k0_column() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    std::fs::write(&pairs, "theta1,theta2\n0.3076,0.7566\n").unwrap();
    let report = run_ok(&[
        "simulate-table",
        "--regions",
        snapshot_path().to_str().unwrap(),
        "--pairs",
        pairs.to_str().unwrap(),
        "--reps",
        "50",
        "--seed",
        "5",
    ]);
    assert!(report.contains("# kind = study-table"));
    assert!(report.contains("# k = 47"));
    assert!(report.contains("# rows_dropped = 11"));
    let rows: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        rows[0],
        "theta1,theta2,delta,k0,k0_hat_ump,k0_hat_rand2,stderr_ump,stderr_rand2"
    );
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(fields[0], "0.3076");
    assert_eq!(fields[1], "0.7566");
    assert_eq!(fields[3], "28");
}

#[test]
fn fwer_json_reports_both_methods() {
    let report = run_ok(&[
        "fwer",
        "--regions",
        snapshot_path().to_str().unwrap(),
        "--theta1",
        "0.98",
        "--theta2",
        "0.995",
        "--reps",
        "200",
        "--seed",
        "5",
        "--format",
        "json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&report).expect("valid json");
    assert_eq!(doc["provenance"]["k0_true"], "47");
    let fwer = doc["estimate"]["fwer_rand2"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&fwer));
}

// ===== oracle-check =====

#[test]
fn oracle_check_passes_at_default_tolerance() {
    let report = run_ok(&["oracle-check", "--max-n", "4"]);
    assert_eq!(line_value(&report, "status"), "ok");
    let deviation: f64 = line_value(&report, "max_ump_deviation").parse().unwrap();
    assert!(deviation <= 1e-10);
}

#[test]
fn oracle_check_fails_at_impossible_tolerance() {
    let output = run(&["oracle-check", "--max-n", "2", "--tol", "1e-300"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error:"), "stderr was: {stderr}");
}

// ===== exit codes and failure surfaces =====

#[test]
fn domain_errors_exit_with_code_1() {
    let output = run(&[
        "pvalue", "--n", "1", "--s", "0", "--theta1", "0.9", "--theta2", "0.1", "--u", "0.5",
        "--u-tilde", "0.5",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.starts_with("error:"), "stderr was: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_2() {
    assert_eq!(run(&["pvalue", "--nope"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_regions_file_exits_with_code_1() {
    let output = run(&[
        "simulate-table",
        "--regions",
        "/nonexistent/regions.csv",
        "--reps",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cdf.csv");
    let args = [
        "cdf", "--n", "5", "--theta1", "0.25", "--theta2", "0.75", "--theta", "0.3",
    ];
    let stdout = run_ok(&args);
    let mut with_out: Vec<&str> = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    let silent = run_ok(&with_out);
    assert!(silent.is_empty(), "file mode should not echo to stdout");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout);
}
