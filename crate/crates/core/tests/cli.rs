use std::path::Path;
use std::process::{Command, Output};

fn seqdyn(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_seqdyn"));
    cmd.args(args).env_remove("SEQDYN_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("SEQDYN_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const DECAY: &str = "scenario = \"decay\"\nseed = 4\n[sequence]\nkind = \"constant_beta\"\nbeta = 2.0\n[params]\nn_max = 20\nproxy_cells = 65536\n";

#[test]
fn list_has_ten_rows_in_text_and_json() {
    let text = seqdyn(&["list"], None);
    assert!(text.status.success());
    assert_eq!(stdout(&text).lines().count(), 11);
    let json = seqdyn(&["list", "--json"], None);
    assert!(json.status.success());
    let rows: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for (row, line) in rows.iter().zip(stdout(&text).lines().skip(1)) {
        assert!(line.starts_with(row["name"].as_str().unwrap()));
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = seqdyn(&["list", "--bogus"], None);
    assert!(!o.status.success());
}

#[test]
fn missing_seed_is_a_validation_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &DECAY.replace("seed = 4\n", ""));
    let out = dir.path().join("out");
    let o = seqdyn(&["run", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error_class"], "validation");
    assert!(err["message"].as_str().unwrap().contains("seed"));
    assert!(!out.exists());
}

#[test]
fn run_writes_csv_and_json_then_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "decay.toml", DECAY);
    let out = dir.path().join("out");
    let o = seqdyn(&["run", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("decay.curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema: seqdyn/decay/curve/v1"));
    assert_eq!(lines.next(), Some("n,min,max,variation,l1,bv"));
    assert_eq!(lines.count(), 21);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("decay.json")).unwrap()).unwrap();
    let theta = record["fitted"]["theta_hat"].as_f64().unwrap();
    assert!((theta - 0.5).abs() < 0.05, "{theta}");
    assert_eq!(record["config"]["seed"], 4);

    let v = seqdyn(&["verify", out.join("decay.json").to_str().unwrap()], None);
    assert!(v.status.success(), "{}", stdout(&v));
}

#[test]
fn environment_sets_default_output_and_seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tail.json",
        r#"{"scenario":"ld_tail","seed":1,"sequence":{"kind":"constant_beta","beta":2.0},
            "params":{"n":16,"t_list":[0.0,0.1],"m_samples":500},"output":"tail"}"#,
    );
    let env_dir = dir.path().join("env-out");
    let o = seqdyn(&["run", &cfg, "--seed-override", "99"], Some(&env_dir));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(env_dir.join("tail.json")).unwrap()).unwrap();
    assert_eq!(record["config"]["seed"], 99);
    assert!(env_dir.join("tail.tail.csv").exists());
}

#[test]
fn tampered_record_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "decay.toml", DECAY);
    let out = dir.path().join("out");
    assert!(seqdyn(&["run", &cfg, "--out", out.to_str().unwrap()], None).status.success());
    let path = out.join("decay.json");
    let mut record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    record["fitted"]["theta_hat"] = serde_json::json!(0.25);
    std::fs::write(&path, record.to_string()).unwrap();
    let v = seqdyn(&["verify", path.to_str().unwrap()], None);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("theta_hat"));
}

#[test]
fn malformed_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "broken.toml", "scenario = [\n");
    let o = seqdyn(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error_class"], "parse");
}
