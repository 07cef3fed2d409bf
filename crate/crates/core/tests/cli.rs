use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structured-omd"))
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "N = 4\nT = 4\nspace = \"nonsense\"\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));

    let missing = bin()
        .args(["run", "--config", "/nonexistent/x.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let adversary = bin()
        .args([
            "lowerbound",
            "--V",
            "5",
            "--s",
            "1",
            "--N",
            "16",
            "--T",
            "64",
            "--trials",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(adversary.status.code(), Some(1));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "N = 4\nT = 3\nspace = \"standard\"\ntrials = 5\n").unwrap();
    let out = bin()
        .args([
            "run", "--trials", "2", "--seed", "7", "--out", "r.csv", "--config",
        ])
        .arg(&cfg)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(csv.starts_with("trial,round,regret,bound\n0,1,"));
}

#[test]
fn bound_prints_the_matched_regularizer() {
    let out = bin()
        .args(["bound", "--space", "noisy(eps=1)", "--T", "1024"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bound = 3.2000000000000000e1"));
    assert!(text.contains("regularizer = euclidean(eps=1)"));
}
