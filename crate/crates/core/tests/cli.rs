//! The command-line binary: exit codes and output.

use std::process::Command;

fn panalm(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_panalm")).args(args).output().expect("run binary");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn field(stdout: &str, name: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name))
        .unwrap_or_else(|| panic!("no `{name}` in\n{stdout}"))
        .trim()
        .to_string()
}

#[test]
fn rosenbrock_alm_converges() {
    let (code, stdout, _) = panalm(&["rosenbrock", "--encoding", "alm", "--p", "1,50,1.5"]);
    assert_eq!(code, 0, "{stdout}");
    assert_eq!(field(&stdout, "status"), "Converged");
    assert!(field(&stdout, "outer iterations").parse::<usize>().unwrap() <= 10);
    let feas: f64 = field(&stdout, "‖Δy‖∞").parse().unwrap();
    let penalty: f64 = field(&stdout, "penalty").parse().unwrap();
    // ‖Δy‖∞ / c is the constraint violation
    assert!(feas / penalty <= 1e-4);
}

#[test]
fn rosenbrock_writes_json() {
    let path = std::env::temp_dir().join(format!("panalm-cli-{}.json", std::process::id()));
    let (code, _, _) = panalm(&["rosenbrock", "--encoding", "penalty", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v["exit_status"], "Converged");
    assert_eq!(v["solution"].as_array().unwrap().len(), 5);
}

#[test]
fn bad_arguments_exit_2() {
    for args in [
        &["nmpc", "--steps", "0"][..],
        &["mhe", "--horizon", "70"],
        &["rosenbrock", "--p", "1,2"],
        &["rosenbrock", "--encoding", "sqp"],
        &["serve", "--problem", "nope"],
        &["frobnicate"],
    ] {
        let (code, _, stderr) = panalm(args);
        assert_eq!(code, 2, "{args:?}: {stderr}");
    }
}

#[test]
fn selftest_passes() {
    let (code, stdout, _) = panalm(&["selftest"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn short_nmpc_and_mhe_runs() {
    let (code, stdout, _) = panalm(&["nmpc", "--steps", "5"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("steps (converged)"));
    let path = std::env::temp_dir().join(format!("panalm-mhe-{}.json", std::process::id()));
    let (code, stdout, _) = panalm(&["mhe", "--horizon", "50", "--trials", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(v["trials"].as_array().unwrap().len(), 2);
    assert_eq!(v["base_seed"], 2020);
}
