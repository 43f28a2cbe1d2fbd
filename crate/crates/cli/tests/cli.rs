use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const STANDARD_SPHERE: &str = r#"{"manifold":"Sphere3","U":[1,0,0,0,1,0,0,0,1]}"#;
const STANDARD_TORUS: &str = r#"{"manifold":"Torus3","U":[1,0,0,0,1,0,0,0,1]}"#;

fn singular_sphere() -> String {
    let a = 2f64.powf(2.0 / 3.0);
    let b = -(2f64.powf(-1.0 / 3.0));
    format!(r#"{{"manifold":"Sphere3","U":[{a},0,0,0,{b},0,0,0,{b}]}}"#)
}

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_fueterlab"))
            .args(args)
            .current_dir(self.dir.path())
            .env("FUETERLAB_THREADS", "2")
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn flow_of(o: &Output) -> i64 {
    let out = stdout(o);
    let line = out.lines().find(|l| l.starts_with("flow: ")).expect("flow line");
    line["flow: ".len()..].trim().parse().unwrap()
}

#[test]
fn spectrum_standard_sphere_is_regular() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", STANDARD_SPHERE);
    let o = sb.run(&["spectrum", "--frame", f.to_str().unwrap(), "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&sb.path("run/summary.json"));
    assert_eq!(s["verdict"], "Regular");
    assert_eq!(s["kernel_dimension"], 4);
    assert!((s["spinc_lambda"].as_f64().unwrap() - 1.5).abs() < 1e-14);
    let m = json(&sb.path("run/manifest.json"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["artifacts"], serde_json::json!(["spectrum.csv", "summary.json"]));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn spectrum_singular_sphere_has_larger_kernel() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", &singular_sphere());
    let o = sb.run(&["spectrum", "--frame", f.to_str().unwrap(), "--out", "run"]);
    assert_eq!(code(&o), 0);
    let s = json(&sb.path("run/summary.json"));
    assert_eq!(s["verdict"], "Singular");
    assert!(s["kernel_dimension"].as_u64().unwrap() >= 8);
}

#[test]
fn spectrum_csv_round_trips_seventeen_digits() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", r#"{"manifold":"Torus3","U":[1.1,0.2,0,0,0.9,0.3,0.1,0,1.2]}"#);
    let o = sb.run(&["spectrum", "--frame", f.to_str().unwrap(), "--kmax", "2", "--out", "run"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(sb.path("run/spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# "));
    let body: Vec<_> = lines.skip_while(|l| l.starts_with('#')).skip(1).collect();
    assert!(!body.is_empty());
    for l in body {
        let cell = l.rsplit(',').next().unwrap();
        let v: f64 = cell.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), cell);
    }
}

#[test]
fn input_errors_exit_one() {
    let sb = Sandbox::new();
    let bad = sb.file("bad.json", "{\"manifold\": ");
    let o = sb.run(&["spectrum", "--frame", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
    assert!(!sb.path("fueterlab-spectrum").exists());

    let singular = sb.file("sing.json", r#"{"manifold":"Torus3","U":[1,0,0,0,1,0,0,0,0]}"#);
    assert_eq!(code(&sb.run(&["spectrum", "--frame", singular.to_str().unwrap()])), 1);
    assert_eq!(code(&sb.run(&["verify", "curvature"])), 1);
    assert_eq!(code(&sb.run(&["spectrum"])), 1);
    assert_eq!(code(&sb.run(&["--help"])), 0);
}

#[test]
fn overwrite_requires_force() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", STANDARD_SPHERE);
    let f = f.to_str().unwrap();
    assert_eq!(code(&sb.run(&["spectrum", "--frame", f, "--out", "run"])), 0);
    assert_eq!(code(&sb.run(&["spectrum", "--frame", f, "--out", "run"])), 1);
    assert_eq!(code(&sb.run(&["spectrum", "--frame", f, "--out", "run", "--force"])), 0);
}

#[test]
fn uncertified_truncation_exits_two() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", STANDARD_SPHERE);
    let o = sb.run(&["spectrum", "--frame", f.to_str().unwrap(), "--jmax", "0.5", "--out", "run"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&sb.path("run/manifest.json"))["exit_code"], 2);
}

#[test]
fn specflow_catalog_path_and_reversal() {
    let sb = Sandbox::new();
    let p = sb.file("path.json", r#"{"kind":"singular_approach","range":[0.0,1.2]}"#);
    let p = p.to_str().unwrap();
    let fwd = sb.run(&["specflow", "--path", p, "--out", "fwd"]);
    assert_eq!(code(&fwd), 0, "{}", String::from_utf8_lossy(&fwd.stderr));
    assert_eq!(flow_of(&fwd).abs(), 4);
    let crossings = json(&sb.path("fwd/crossings.json"));
    let s_star = crossings[0]["s_star"].as_f64().unwrap();
    assert!((s_star - 1.0).abs() < 1e-6);

    let back = sb.run(&["specflow", "--path", p, "--reverse", "--out", "back"]);
    assert_eq!(flow_of(&back), -flow_of(&fwd));

    let svg = fs::read_to_string(sb.path("fwd/curves.svg")).unwrap();
    assert!(svg.contains("<polyline") && !svg.contains("href"));
}

#[test]
fn specflow_constant_path_has_zero_flow() {
    let sb = Sandbox::new();
    for (name, frame) in [("t.json", STANDARD_TORUS), ("s.json", STANDARD_SPHERE)] {
        let f = sb.file(name, frame);
        let out = format!("run-{name}");
        let o = sb.run(&["specflow", "--frame", f.to_str().unwrap(), "--out", &out]);
        assert_eq!(code(&o), 0);
        assert_eq!(flow_of(&o), 0);
    }
}

#[test]
fn rerun_reproduces_csv_bytes() {
    let sb = Sandbox::new();
    let p = sb.file("path.json", r#"{"kind":"singular_approach","range":[0.0,1.2]}"#);
    let p = p.to_str().unwrap();
    sb.run(&["specflow", "--path", p, "--out", "a"]);
    sb.run(&["specflow", "--path", p, "--out", "b"]);
    assert_eq!(fs::read(sb.path("a/curves.csv")).unwrap(), fs::read(sb.path("b/curves.csv")).unwrap());
    sb.run(&["verify", "energy", "--seed", "7", "--out", "c"]);
    sb.run(&["verify", "energy", "--seed", "7", "--out", "d"]);
    assert_eq!(fs::read(sb.path("c/residuals.csv")).unwrap(), fs::read(sb.path("d/residuals.csv")).unwrap());
    let (mc, md) = (json(&sb.path("c/manifest.json")), json(&sb.path("d/manifest.json")));
    assert_eq!(mc["input_hash"], md["input_hash"]);
}

#[test]
fn verify_identities_pass() {
    let sb = Sandbox::new();
    let f = sb.file("frame.json", STANDARD_SPHERE);
    let o = sb.run(&["verify", "energy", "--frame", f.to_str().unwrap(), "--samples", "10", "--out", "e"]);
    assert_eq!(code(&o), 0);
    assert!(json(&sb.path("e/summary.json"))["max_residual"].as_f64().unwrap() < 1e-8);
    for id in ["dd2", "s1s2", "duality", "divergence"] {
        let o = sb.run(&["verify", id, "--out", id]);
        assert_eq!(code(&o), 0, "{id}: {}", stdout(&o));
        assert!(stdout(&o).contains("PASS"));
    }
    let o = sb.run(&["verify", "isoperimetric", "--samples", "100", "--out", "iso"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("equality witness"));
    assert!(json(&sb.path("iso/summary.json"))["witness"]["gap"].as_f64().unwrap() < 1e-10);
}

#[test]
fn verify_failure_exits_five() {
    let sb = Sandbox::new();
    let o = sb.run(&["verify", "energy", "--tol", "1e-30", "--out", "run"]);
    assert_eq!(code(&o), 5);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn floer_cosine_count_and_trajectory() {
    let sb = Sandbox::new();
    let p = sb.file(
        "problem.json",
        &format!(
            r#"{{"frame":{STANDARD_TORUS},"hamiltonian":{{"copies":1,"separable_cosine":0.05}},"grid":4,
               "trajectory":{{"minus":[0.5,0,0,0],"plus":[0,0,0,0],"half_length":6,"nodes":301}}}}"#
        ),
    );
    let o = sb.run(&["floer", p.to_str().unwrap(), "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&sb.path("run/summary.json"))["count"], 16);
    let t = json(&sb.path("run/trajectory.json"));
    assert!(t["energy_residual"].as_f64().unwrap() < 1e-4);
    let dump = fs::read_to_string(sb.path("run/solutions.csv")).unwrap();
    // 16 solutions on a 4^3 grid
    assert_eq!(dump.lines().filter(|l| !l.starts_with('#')).count(), 1 + 16 * 64);
}

#[test]
fn floer_zero_hamiltonian_exits_four() {
    let sb = Sandbox::new();
    let p = sb.file(
        "problem.json",
        &format!(r#"{{"frame":{STANDARD_TORUS},"hamiltonian":{{"copies":1,"terms":[]}},"search":{{"random_starts":2}}}}"#),
    );
    let o = sb.run(&["floer", p.to_str().unwrap(), "--out", "run"]);
    assert_eq!(code(&o), 4);
    assert!(json(&sb.path("run/summary.json"))["count"].is_null());
}

#[test]
fn ample_reports() {
    let sb = Sandbox::new();
    let o = sb.run(&["ample", "equivalence", "--samples", "1000", "--out", "eq"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&sb.path("eq/summary.json"))["passes"], 1000);

    let o = sb.run(&["ample", "decompose", "--samples", "20", "--out", "dec"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(sb.path("dec/decompose.csv")).unwrap();
    let canonical = csv.lines().find(|l| l.starts_with("canonical,1,")).unwrap();
    let cells: Vec<&str> = canonical.split(',').collect();
    assert_eq!(cells[2], "ok");
    assert_eq!(cells[6].parse::<f64>().unwrap(), 0.0);
    assert!(csv.lines().any(|l| l.starts_with("empty-slice,1,empty_intersection")));
}
