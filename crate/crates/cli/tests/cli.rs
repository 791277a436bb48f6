use std::path::Path;
use std::process::{Command, Output};

fn isdrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isdrecon")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn chain_audits_hold() {
    let o = isdrecon(&["chain"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
    let o = isdrecon(&["chain", "--constants"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("C43"));
}

#[test]
fn chain_rejects_bad_eps() {
    assert_eq!(code(&isdrecon(&["chain", "--eps", "2.0"])), 2);
}

#[test]
fn empty_sweep_prints_the_header() {
    let o = isdrecon(&["sweep", "--axis", "delta"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim_end(), "delta,sigma,gh_upper,repair_mass,vol_err,proj_err,runtime_s");
}

#[test]
fn bad_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), r#"{"no_such_key": 1}"#);
    let o = isdrecon(&["evaluate", "--config", &unknown]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let outside = write_config(dir.path(), r#"{"r0": 4.0}"#);
    assert_eq!(code(&isdrecon(&["extract", "--config", &outside, "--out", "x.json"])), 2);
    assert_eq!(code(&isdrecon(&["evaluate", "--config", "/nonexistent/config.json"])), 2);
}

#[test]
fn extract_perturb_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let cfg = write_config(dir.path(), r#"{"j": 20, "n_r": 16, "n_theta": 32}"#);
    assert_eq!(code(&isdrecon(&["extract", "--config", &cfg, "--out", &d("a.json")])), 0);
    let o = isdrecon(&["perturb", "--input", &d("a.json"), "--delta", "0.01", "--seed", "3", "--out", &d("b.json"), "--certificate", &d("c.json")]);
    assert_eq!(code(&o), 0);
    assert!(Path::new(&d("c.json")).exists());
    let o = isdrecon(&["check-close", &d("a.json"), &d("b.json"), "--delta", "0.01", "--report", &d("r.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(Path::new(&d("r.json")).exists());
    assert_eq!(code(&isdrecon(&["perturb", "--input", &d("a.json"), "--delta", "0.05", "--out", &d("far.json")])), 0);
    let o = isdrecon(&["check-close", &d("a.json"), &d("far.json"), "--delta", "0.005"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("not close"));
    assert_eq!(code(&isdrecon(&["perturb", "--input", &d("a.json"), "--delta", "1.5", "--out", &d("x.json")])), 2);
}

#[test]
fn volumes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = isdrecon(&["volumes", "--radii", "0.3,0.6", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["radius", "spectral", "quadrature", "rel_err"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    // off-lattice radii are an error, not a failed contract
    assert_eq!(code(&isdrecon(&["volumes", "--radii", "0.333"])), 2);
}
