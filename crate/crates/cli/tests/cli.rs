use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sideslip-sim"))
}

#[test]
fn run_writes_csv_and_summary() {
    let out = tempfile::tempdir().unwrap();
    let status = sim()
        .arg("run")
        .arg(scenario("mild_high_mu.cfg"))
        .args([
            "--controller",
            "conventional",
            "--mu",
            "0.5",
            "--seed",
            "3",
            "--set",
            "scenario.duration=2",
        ])
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let stdout = String::from_utf8(status.stdout).unwrap();
    assert!(stdout.contains("controller = conventional"));
    assert!(stdout.contains("mu = 0.5"));
    let csv = std::fs::read_to_string(out.path().join("mild_high_mu_conventional.csv")).unwrap();
    assert!(csv.starts_with("t,delta_f,v_x,beta,r,a_y,"));
    assert!(out.path().join("mild_high_mu_conventional_summary.txt").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let output = sim()
            .arg("run")
            .arg(scenario("aggressive.cfg"))
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("aggressive_conventional.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn compare_and_sweep() {
    let out = tempfile::tempdir().unwrap();
    let compare = sim_output(&["compare"], "mild_medium_mu.cfg", out.path());
    assert!(compare.contains("conventional"));
    for kind in ["none", "mpc", "conventional"] {
        assert!(out.path().join(format!("mild_medium_mu_{kind}.csv")).exists());
    }
    let sweep = sim()
        .args(["sweep", "--param", "baseline.lambda", "--values", "5,500", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let table = String::from_utf8(sweep.stdout).unwrap();
    assert!(table.contains("baseline.lambda=5 ") && table.contains("baseline.lambda=500"));
}

fn sim_output(args: &[&str], file: &str, out: &std::path::Path) -> String {
    let output = sim()
        .args(args)
        .arg(scenario(file))
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    String::from_utf8(output.stdout).unwrap()
}

#[test]
fn bad_input_fails_cleanly() {
    let out = tempfile::tempdir().unwrap();
    let unknown = sim()
        .arg("run")
        .arg(scenario("mild_high_mu.cfg"))
        .args(["--set", "mpc.bogus=1", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("mpc.bogus"));
    let sweep = sim()
        .args(["sweep", "--param", "nope", "--values", "1"])
        .output()
        .unwrap();
    assert!(!sweep.status.success());
    assert!(!sim()
        .args(["run", "/nonexistent.cfg"])
        .output()
        .unwrap()
        .status
        .success());
}
