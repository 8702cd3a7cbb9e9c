use std::path::Path;
use std::process::{Command, Output};

fn kdv_flex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kdv-flex"))
        .current_dir(dir)
        .args(args)
        .env_remove("KDVFLEX_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn base_case_iteration_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdv_flex(dir.path(), &["iterate", "--q-max", "0", "--A", "0.05"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["certificate_q0.json", "summary.csv", "q0/u.csv", "q0/E.csv", "q0/manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("q,lambda,epsilon,sigma,e_hs,w_l2,w_l1\n0,0,0,0,"), "{summary}");

    let r = kdv_flex(dir.path(), &["residual", "--checkpoint", "out/q0", "--test-freqs", "1..8"]);
    assert_eq!(code(&r), 0);
    assert_eq!(String::from_utf8_lossy(&r.stdout).lines().filter(|l| l.ends_with("PASS")).count(), 8);
}

#[test]
fn capped_search_exits_exhausted() {
    let dir = tempfile::tempdir().unwrap();
    let o = kdv_flex(dir.path(), &["iterate", "--lambda-max", "64"]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("exhausted") && err.contains("error decay"), "{err}");
    assert!(dir.path().join("out/q1/manifest.json").is_file());
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "lamda_max = 64\n").unwrap();
    assert_eq!(code(&kdv_flex(dir.path(), &["--config", "bad.toml", "iterate", "--q-max", "0"])), 3);
    let o = Command::new(env!("CARGO_BIN_EXE_kdv-flex"))
        .current_dir(dir.path())
        .args(["iterate", "--q-max", "0"])
        .env("KDVFLEX_NOT_A_KEY", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    assert_eq!(code(&kdv_flex(dir.path(), &["residual", "--checkpoint", "out/q7"])), 3);
    assert_eq!(code(&kdv_flex(dir.path(), &["scaling", "--lambda", "128..512"])), 3);
}

#[test]
fn config_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "q_max = 0\namplitude = 0.01\nout = \"custom\"\n").unwrap();
    let o = kdv_flex(dir.path(), &["--config", "run.toml", "iterate"]);
    assert_eq!(code(&o), 0);
    let manifest = std::fs::read_to_string(dir.path().join("custom/q0/manifest.json")).unwrap();
    assert!(manifest.contains("\"q\": 0"));
}

#[test]
fn lemma_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = kdv_flex(dir.path(), &["lemmas", "--seed", "7", "--out", "a"]);
    let b = kdv_flex(dir.path(), &["lemmas", "--seed", "7", "--out", "b"]);
    assert_eq!(code(&a), code(&b));
    assert_eq!(a.stdout, b.stdout);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("lemmas_seed7.json")).unwrap();
    assert_eq!(read("a"), read("b"));
}
