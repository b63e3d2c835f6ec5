use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermorev"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn header(text: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.headers().unwrap().iter().map(String::from).collect()
}

const UP_SCAN: &str = r#"
command = "gap-scan"
beta = 1.0
epsilon = 0.05
n_list = [8, 16, 32, 64]
family = { kind = "iid_mixed", state = { dim = 2, diag = [1.0, 0.0] } }
lattice = { model = "ising", j = 0.0, h = 1.0 }
"#;

const UPDOWN_MIX: &str = r#"
command = "mixture-scan"
n_list = [8, 16, 32]
epsilon = 0.05
lattice = { model = "ising", j = 1.0, h = 0.0 }

[family]
kind = "finite_mixture"
components = [
  [0.5, { kind = "iid_mixed", state = { dim = 2, diag = [1.0, 0.0] } }],
  [0.5, { kind = "iid_mixed", state = { dim = 2, diag = [0.0, 1.0] } }],
]
"#;

#[test]
fn spin_up_scan_has_constant_potential() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("up.toml"), UP_SCAN).unwrap();
    let o = run_in(dir.path(), &["gap-scan", "--config", "up.toml"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let cols = header(&text);
    assert_eq!(cols, ["n", "eps", "d_min_rate", "d_max_rate", "umegaki_rate", "gap_rate", "method", "err_bound"]);
    let k = cols.iter().position(|c| c == "umegaki_rate").unwrap();
    let want = 1.0 + (2.0 * 1f64.cosh()).ln();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!((r[k].parse::<f64>().unwrap() - want).abs() < 1e-9);
        assert_eq!(r[6], "classical_dp");
    }
    assert!(text.contains("\r\n"));
}

#[test]
fn identical_states_have_zero_divergences() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rho.json"), r#"{"dim":2,"re":[[0.7,0.2],[0.2,0.3]],"im":[[0,0.1],[-0.1,0]]}"#).unwrap();
    let o = run_in(dir.path(), &["divergence", "--rho", "rho.json", "--sigma", "rho.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["umegaki", "d_min", "d_max", "d_hyp"]);
    for r in &rows {
        assert!(r[2].parse::<f64>().unwrap().abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mix.toml"), UPDOWN_MIX).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run_in(dir.path(), &["mixture-scan", "--config", "mix.toml", "-o", "out.csv"]);
        assert!(o.status.success());
        outputs.push((fs::read(dir.path().join("out.csv")).unwrap(), fs::read(dir.path().join("out.csv.meta.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let meta: Value = serde_json::from_slice(&outputs[0].1).unwrap();
    assert_eq!(meta["tool"], "thermorev");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["command"], "mixture-scan");
    assert_eq!(meta["summary"]["verdict"], "reversible");
}

#[test]
fn json_output_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mix.toml"), UPDOWN_MIX.replace("j = 1.0, h = 0.0", "j = 0.0, h = 1.0")).unwrap();
    let o = run_in(dir.path(), &["mixture-scan", "--config", "mix.toml", "--format", "json"]);
    assert!(o.status.success());
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["meta"]["config"]["format"], "json");
    assert_eq!(doc["result"]["verdict"], "irreversible");
    let spread = doc["result"]["spread"].as_f64().unwrap();
    assert!((spread - 2.0).abs() < 1e-9);
}

#[test]
fn canonical_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mix.toml"), UPDOWN_MIX).unwrap();
    let first = stdout(&run_in(dir.path(), &["mixture-scan", "--config", "mix.toml", "--print-config"]));
    fs::write(dir.path().join("canon.toml"), &first).unwrap();
    let second = stdout(&run_in(dir.path(), &["mixture-scan", "--config", "canon.toml", "--print-config"]));
    assert_eq!(first, second);
    assert!(first.contains("beta = 1.0"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("up.toml"), UP_SCAN).unwrap();
    let o = run_in(dir.path(), &["gap-scan", "--config", "up.toml", "--epsilon", "0.2", "--n-list", "4,2", "--print-config"]);
    let text = stdout(&o);
    assert!(text.contains("epsilon = 0.2"), "{text}");
    assert!(text.contains("n_list = [2, 4]"), "{text}");
}

fn error_of(o: &Output) -> Value {
    let line = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str::<Value>(line.trim()).unwrap()["error"].clone()
}

#[test]
fn configuration_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "command = \"gap-scan\"\nbetta = 1.0\n").unwrap();
    let o = run_in(dir.path(), &["gap-scan", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["kind"], "config");

    fs::write(dir.path().join("up.toml"), UP_SCAN).unwrap();
    let o = run_in(dir.path(), &["gap-scan", "--config", "up.toml", "--epsilon", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), &["variance", "--config", "up.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_of(&o)["message"].as_str().unwrap().contains("gap-scan"));
    let o = run_in(dir.path(), &["work", "--rho", "missing.json", "--hamiltonian", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_in(dir.path(), &["lorenz", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infinite_values_serialize_as_inf() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("up.json"), r#"{"dim":2,"diag":[1,0]}"#).unwrap();
    fs::write(dir.path().join("down.json"), r#"{"dim":2,"diag":[0,1]}"#).unwrap();
    let o = run_in(dir.path(), &["divergence", "--rho", "up.json", "--sigma", "down.json"]);
    assert!(o.status.success());
    for r in csv_rows(&stdout(&o)) {
        assert_eq!(r[2], "inf");
    }
    let o = run_in(dir.path(), &["divergence", "--rho", "up.json", "--sigma", "down.json", "--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["result"]["d_max"]["value"], "inf");
}

#[test]
fn variance_of_the_plus_state() {
    let dir = tempfile::tempdir().unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    fs::write(dir.path().join("plus.json"), format!(r#"{{"kind":"iid_pure","psi":{{"re":[{h},{h}]}}}}"#)).unwrap();
    fs::write(dir.path().join("sz.json"), r#"{"dim":2,"diag":[1,-1]}"#).unwrap();
    let o = run_in(dir.path(), &["variance", "--family", "plus.json", "--observable", "sz.json", "--n-list", "8,64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for r in csv_rows(&stdout(&o)) {
        let n: f64 = r[0].parse().unwrap();
        assert!((r[1].parse::<f64>().unwrap() - 1.0 / n).abs() < 1e-14);
    }
}

#[test]
fn thermodynamic_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("ground.json"), r#"{"dim":2,"diag":[1,0]}"#).unwrap();
    fs::write(dir.path().join("h.json"), r#"{"dim":2,"diag":[0,1]}"#).unwrap();
    let z = 1.0 + (-1f64).exp();

    let o = run_in(dir.path(), &["lorenz", "--rho", "ground.json", "--hamiltonian", "h.json"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!((rows[1][0].parse::<f64>().unwrap() - 1.0 / z).abs() < 1e-12);

    let o = run_in(dir.path(), &["work", "--rho", "ground.json", "--hamiltonian", "h.json"]);
    let rows = csv_rows(&stdout(&o));
    for r in &rows {
        assert!((r[2].parse::<f64>().unwrap() - z.ln()).abs() < 1e-9, "{r:?}");
        assert!((r[6].parse::<f64>().unwrap() - z.ln()).abs() <= 1e-3 + 1e-9, "{r:?}");
    }

    let o = run_in(dir.path(), &["protocol", "--rho", "ground.json", "--hamiltonian", "h.json", "--protocol", "reference-frame", "--delta", "0.5", "--levels", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let ledger = rows.iter().find(|r| r[0] == "coherence_energy_range").unwrap();
    assert_eq!(ledger[1].parse::<f64>().unwrap(), 0.5 * 3.0 + 0.5);
}

#[test]
fn every_selftest_passes() {
    for cmd in ["divergence", "lorenz", "work", "protocol", "gap-scan", "mixture-scan", "variance"] {
        let o = bin().args([cmd, "--selftest"]).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stdout(&o));
        let rep: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(rep["checks"].as_u64().unwrap() > 0);
        assert!(rep["failures"].as_array().unwrap().is_empty());
    }
}
