use std::path::Path;
use std::process::{Command, Output};

fn prodform(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prodform")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
name = "small"
kind = "trotter-sweep"
[basis]
cutoffs = [10]
[state]
kind = "fock"
occupations = [1]
[sweep]
t = 0.5
n = [4, 8, 16]
[generators.a]
ou = { lambda = 1.0, mu = 0.0 }
[generators.b]
ou = { lambda = 0.0, mu = 0.5 }
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn catalog_lists_and_validates() {
    let o = prodform(&["list-experiments"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert!(names.len() >= 8);
    assert!(names.contains(&"strang-ou"));
    for name in names {
        let v = prodform(&["validate", "--experiment", name]);
        assert!(v.status.success(), "{name}: {}", stderr(&v));
    }
}

#[test]
fn run_writes_csv_and_json_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let o = prodform(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--no-timing", "--threads", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let csv1 = std::fs::read(out1.join("small.csv")).unwrap();
    assert_eq!(csv1, std::fs::read(out2.join("small.csv")).unwrap());
    assert_eq!(std::fs::read(out1.join("small.json")).unwrap(), std::fs::read(out2.join("small.json")).unwrap());
    let csv = String::from_utf8(csv1).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,error_trace_norm,trace_drift,min_eig,top_level_mass,wall_time_ms"));
    assert_eq!(lines.count(), 3);
    let json = std::fs::read_to_string(out1.join("small.json")).unwrap();
    for key in ["\"slope\"", "\"r_squared\"", "\"saturated\"", "\"config\"", "\"versions\""] {
        assert!(json.contains(key), "{key} missing");
    }
}

#[test]
fn overrides_land_in_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("o");
    let o = prodform(&["run", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", "42", "--oracle-tol", "1e-10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let json = std::fs::read_to_string(out.join("small.json")).unwrap();
    assert!(json.contains("\"seed\": 42"));
    assert!(json.contains("\"oracle_tol\": 1e-10"));
}

#[test]
fn short_grid_exits_2_naming_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("[4, 8, 16]", "[4, 8]"));
    let o = prodform(&["run", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("at least 3"), "{}", stderr(&o));
    let v = prodform(&["validate", "--config", &cfg]);
    assert_eq!(v.status.code(), Some(2));
}

#[test]
fn malformed_and_missing_configs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "junk.toml", "kind = [");
    assert_eq!(prodform(&["validate", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(prodform(&["validate", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(prodform(&["run", "--experiment", "no-such-entry"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "huge.toml", &SMALL.replace("t = 0.5", "t = 1e300"));
    let o = prodform(&["run", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure in"), "{}", stderr(&o));
}

#[test]
fn state_file_is_read_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "state.json",
        r#"{"cutoffs": [10], "real": [[0.5,0,0,0,0,0,0,0,0,0],[0,0.5,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0]]}"#,
    );
    let text = SMALL.replace("kind = \"fock\"\noccupations = [1]", "kind = \"file\"\npath = \"state.json\"");
    let cfg = write(dir.path(), "file.toml", &text);
    let o = prodform(&["run", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}
