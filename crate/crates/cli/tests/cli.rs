use std::fs;
use std::process::Command;

fn dfmg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfmg"))
}

#[test]
fn mesh_writes_nodes_and_elements() {
    let out = dfmg().args(["mesh", "--h-inv", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first.trim(), "25");
    assert!(text.lines().count() >= 25 + 32);
}

#[test]
fn run_with_config_prints_rows_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        "name = \"cli\"\nproblems = [\"problem2\"]\nbetas = [5.0]\nh_inv = [4]\nsolvers = [\"pr\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = dfmg()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--alpha", "auto,1", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("problem,beta,alpha_rule"));
    assert_eq!(csv.lines().count(), 3);
    assert!(out_dir.join("cli_rows.csv").exists());
    assert!(out_dir.join("cli_meta.json").exists());
}

#[test]
fn rejects_unknown_table_and_bad_config() {
    let out = dfmg().args(["table", "7"]).output().unwrap();
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "tol = -1.0\n").unwrap();
    let out = dfmg().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol"));
}

#[test]
fn check_passes() {
    let out = dfmg().args(["check", "--seed", "3"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
