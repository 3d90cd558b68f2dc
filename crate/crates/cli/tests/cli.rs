use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ecqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecqs")).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn error_line(o: &Output) -> Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    serde_json::from_str(lines[0]).expect("error line is JSON")
}

struct Fixtures {
    dir: tempfile::TempDir,
}

impl Fixtures {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Self { dir };
        let h = -0.5;
        f.write("gamma1.json", &format!(r#"{{"corr": {{"n": 3, "c": [[1, {h}, {h}], [{h}, 1, {h}], [{h}, {h}, 1]]}}, "t2": 1.0, "omega0": 1.0}}"#));
        f.write("allplus.json", r#"{"corr": {"n": 3, "c": [[1, 1, 1], [1, 1, 1], [1, 1, 1]]}, "t2": 1.0, "omega0": 1.0}"#);
        f.write("pair.json", r#"{"corr": {"n": 2, "c": [[1, 0.3], [0.3, 1]]}, "t2": 2.0, "omega0": 1.0}"#);
        f.write("pair_plus.json", r#"{"corr": {"n": 2, "c": [[1, 1], [1, 1]]}, "t2": 1.0, "omega0": 1.0}"#);
        f.write("nonpsd.json", r#"{"corr": {"n": 3, "c": [[1, -0.9, -0.9], [-0.9, 1, -0.9], [-0.9, -0.9, 1]]}, "t2": 1.0, "omega0": 1.0}"#);
        let z = "[0.0, 0.0]";
        let one = "[1.0, 0.0]";
        let ket = |k: usize| (0..8).map(|i| if i == k { one } else { z }).collect::<Vec<_>>().join(", ");
        f.write("ghz.json", &format!(r#"{{"n": 3, "ket0": [{}], "ket1": [{}]}}"#, ket(0), ket(7)));
        let s = 1.0 / 3f64.sqrt();
        let w = |idx: [usize; 3]| {
            (0..8).map(|i| if idx.contains(&i) { format!("[{s}, 0.0]") } else { z.to_string() }).collect::<Vec<_>>().join(", ")
        };
        f.write("w.json", &format!(r#"{{"n": 3, "ket0": [{}], "ket1": [{}]}}"#, w([1, 2, 4]), w([3, 5, 6])));
        f
    }

    fn write(&self, name: &str, body: &str) {
        fs::write(self.path(name), body).unwrap();
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn manifest(out: &Path) -> Value {
    let p = PathBuf::from(format!("{}.manifest.json", out.display()));
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn jumps_reports_impossible_for_all_ones() {
    let f = Fixtures::new();
    let v = stdout_json(&ecqs(&["jumps", "--model", &f.arg("allplus.json")]));
    assert_eq!(v["ecqs"]["possible"], false);
    assert_eq!(v["modes"].as_array().unwrap().len(), 3);
    let v = stdout_json(&ecqs(&["jumps", "--model", &f.arg("gamma1.json")]));
    assert_eq!(v["ecqs"]["possible"], true);
    assert_eq!(v["h0_in_span"], false);
}

#[test]
fn check_ghz_is_dfs_with_gain_three() {
    let f = Fixtures::new();
    let v = stdout_json(&ecqs(&["check", "--model", &f.arg("gamma1.json"), "--code", &f.arg("ghz.json")]));
    assert_eq!(v["kl"]["dfs"], true);
    assert!((v["effective"]["gain"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    let v = stdout_json(&ecqs(&["check", "--model", &f.arg("gamma1.json"), "--code", &f.arg("w.json")]));
    assert_eq!(v["kl"]["dfs"], false);
    assert!(v["kl"]["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn search_writes_code_and_manifest() {
    let f = Fixtures::new();
    let out = f.path("result.json");
    let code = f.path("code.json");
    let args = [
        "search",
        "--model",
        &f.arg("gamma1.json"),
        "--eps",
        "1e-5",
        "--gain-min",
        "0.1",
        "--restarts",
        "200",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "--code-out",
        code.to_str().unwrap(),
    ];
    let o = ecqs(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(r["found"], true);
    assert!(r["f_tot"].as_f64().unwrap() <= 1e-10);
    let m = manifest(&out);
    assert_eq!(m["command"], "search");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["params"]["restarts"], 200);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);

    let first = fs::read(&out).unwrap();
    assert!(ecqs(&args).status.success());
    assert_eq!(fs::read(&out).unwrap(), first, "equal parameters must reproduce the output");

    let v = stdout_json(&ecqs(&["check", "--model", &f.arg("gamma1.json"), "--code", code.to_str().unwrap()]));
    assert!(v["f_g"].as_f64().unwrap() > 0.01);
}

#[test]
fn scan_output_does_not_depend_on_jobs() {
    let f = Fixtures::new();
    let a = f.path("a.csv");
    let b = f.path("b.csv");
    for (path, jobs) in [(&a, "1"), (&b, "3")] {
        let o = ecqs(&["scan", "--grid", "5", "--restarts", "4", "--seed", "3", "--jobs", jobs, "--out", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# scan grid=5"));
    assert_eq!(lines.next().unwrap(), "c12,c23,c13,class,f_tot,f_g,evaluations");
    assert!(lines.count() > 10);
    assert_eq!(manifest(&a)["params"]["jobs"], 1);
}

#[test]
fn simulate_tracks_logical_coherence() {
    let f = Fixtures::new();
    let o = ecqs(&["simulate", "--model", &f.arg("gamma1.json"), "--code", &f.arg("w.json"), "--dt", "1e-3", "--steps", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 201);
    let last: Vec<f64> = rows.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[1] > 0.99);
    assert!((last[2] - 1.0).abs() < 0.01);
}

#[test]
fn sensitivity_csv_layout() {
    let o = ecqs(&["sensitivity", "--gamma-min", "0", "--gamma-max", "0.9", "--gamma-steps", "10", "--t2", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with('#') && lines[0].contains("t_max=100") && lines[0].contains("formula="));
    assert_eq!(lines[1], "gamma,eta_parallel,eta_ghz,eta_active,t_opt_parallel,t_opt_ghz,t_opt_active");
    let r: Vec<f64> = lines[11].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((r[3] / r[1] - 0.1f64.sqrt()).abs() < 1e-9);
}

#[test]
fn estimate_c_recovers_pair_correlation() {
    let f = Fixtures::new();
    let v = stdout_json(&ecqs(&["estimate-c", "--model", &f.arg("pair.json"), "--pairs", "0-1", "--t-samples", "0,0.5,1,1.5,2"]));
    let c = v[0]["c_hat"].as_f64().unwrap();
    assert!((c - 0.3).abs() < 1e-8);
}

#[test]
fn usage_errors_exit_one() {
    let o = ecqs(&["jumps", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "usage");
    let o = ecqs(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_inputs_exit_one() {
    let f = Fixtures::new();
    f.write("broken.json", "{ not json");
    let o = ecqs(&["jumps", "--model", &f.arg("broken.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "parse");
    let o = ecqs(&["jumps", "--model", &f.arg("nonpsd.json")]);
    assert_eq!(o.status.code(), Some(1));
    let o = ecqs(&["jumps", "--model", &f.arg("missing.json")]);
    assert_eq!(o.status.code(), Some(1));
    let o = ecqs(&["check", "--model", &f.arg("pair.json"), "--code", &f.arg("ghz.json")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "dimension");
    let o = ecqs(&["sensitivity", "--gamma-max", "1.0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let f = Fixtures::new();
    // Coherence underflows to zero, so the log-linear fit cannot proceed.
    let o = ecqs(&["estimate-c", "--model", &f.arg("pair_plus.json"), "--pairs", "0-1", "--t-samples", "0,100,200,300"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "fit");
}

#[test]
fn no_partial_output_on_failure() {
    let f = Fixtures::new();
    let out = f.path("never.json");
    let o = ecqs(&["jumps", "--model", &f.arg("nonpsd.json"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}
