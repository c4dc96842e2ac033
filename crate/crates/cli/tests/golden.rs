//! End-to-end CLI behavior on the shipped scenario files: report contents,
//! exit codes, and byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let mut path = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    path.push("../../fixtures");
    path.push(name);
    path.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superloc"))
        .args(args)
        .output()
        .expect("spawn superloc")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON on stdout: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn residue_p11_golden() {
    let out = run(&["residue", "--scenario", &fixture("p1-1.json")]);
    assert!(out.status.success());
    let expected = "{\"residue\":[1.0,0.0],\"mode\":\"strict\",\"point\":0,\"hypothesis\":\"parity hypothesis enforced (xi-count matches the parity of n)\"}\n";
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
}

#[test]
fn residue_general_p22_golden() {
    let out = run(&["residue-general", "--scenario", &fixture("p2-2.json")]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["residue"], serde_json::json!([1.0, 0.0]));
    assert_eq!(v["mode"], "general");
}

#[test]
fn degenerate_singularity_exits_2() {
    let out = run(&["residue", "--scenario", &fixture("degenerate.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate"), "stderr: {err}");
    assert!(err.contains("math-domain"), "stderr: {err}");
}

#[test]
fn parity_violation_exits_1() {
    let out = run(&["residue", "--scenario", &fixture("parity-violation.json")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hypothesis"), "stderr: {err}");
}

#[test]
fn check_p11_passes() {
    let out = run(&[
        "check",
        "--scenario",
        &fixture("p1-1.json"),
        "--tol",
        "1e-6",
    ]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["pass"], serde_json::json!(true));
    assert_eq!(v["residues"], serde_json::json!([[1.0, 0.0]]));
    assert!(v["abs_diff"].as_f64().unwrap() < 1e-6);
}

#[test]
fn check_no_singularity_scenario() {
    let out = run(&["check", "--scenario", &fixture("no-singularity.json")]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["sum"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["residues"], serde_json::json!([]));
    assert_eq!(v["pass"], serde_json::json!(true));
}

#[test]
fn integrate_gaussian_fixture() {
    let out = run(&["integrate", "--scenario", &fixture("gaussian-1.json")]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let integral = v["integral"].as_array().unwrap();
    let re = integral[0].as_f64().unwrap();
    let im = integral[1].as_f64().unwrap();
    let want = -2.0 * std::f64::consts::PI;
    assert!(re.abs() < 1e-6);
    assert!((im - want).abs() < 1e-5, "im = {im}");
}

#[test]
fn berezinian_on_invertible_d() {
    // f = xi (1 + z), g = z: at the origin D = 1 and Ber(V) = det(JV)/det(D) = 1
    let out = run(&["berezinian", "--scenario", &fixture("ber-point.json")]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(
        v["berezinian"],
        serde_json::json!([{"idx": [], "re": 1.0, "im": 0.0}])
    );
}

#[test]
fn berezinian_singular_d_exits_2() {
    // at the published singular point the D block has zero body
    let out = run(&["berezinian", "--scenario", &fixture("p2-2.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Berezinian undefined"), "stderr: {err}");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["check", "--scenario", &fixture("p1-1.json")];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    let args = ["residue-general", "--scenario", &fixture("p2-2.json")];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn selftest_passes_and_prints_table() {
    let out = run(&["selftest"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["all_pass"], serde_json::json!(true));
    assert!(v["checks"].as_array().unwrap().len() >= 20);

    let pretty = run(&["selftest", "--pretty", "--tol", "1e-3"]);
    assert!(pretty.status.success());
    let text = String::from_utf8_lossy(&pretty.stdout);
    assert!(text.contains("PASS grassmann_anticommutativity"));
    assert!(text.contains("all checks passed"));
}

#[test]
fn unreachable_tolerance_exits_3() {
    // an absurd tolerance on the slowly-converging four-dimensional
    // integrand exhausts the panel-doubling budget
    let text = std::fs::read_to_string(fixture("p2-2.json")).unwrap();
    let broken = text.replace("\"tol\": 0.0005", "\"tol\": 1e-12");
    assert_ne!(text, broken);
    let dir = std::env::temp_dir().join("superloc-golden");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nonconvergent.json");
    std::fs::write(&path, broken).unwrap();
    let out = run(&["integrate", "--scenario", &path.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("non-convergence"), "stderr: {err}");
}

#[test]
fn missing_scenario_exits_1() {
    let out = run(&["residue", "--scenario", "/nonexistent/file.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_point_index_exits_1() {
    let out = run(&[
        "residue",
        "--scenario",
        &fixture("p1-1.json"),
        "--point",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("out of range"), "stderr: {err}");
}

#[test]
fn mode_override_flag() {
    // forcing f_zero on a field with nonzero f is a validation error
    let out = run(&[
        "residue",
        "--scenario",
        &fixture("p1-1.json"),
        "--mode",
        "f_zero",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pretty_flag_is_multiline() {
    let out = run(&[
        "residue",
        "--scenario",
        &fixture("p1-1.json"),
        "--pretty",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() > 3);
}
