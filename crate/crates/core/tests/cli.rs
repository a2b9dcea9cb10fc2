//! The command-line front end: exit codes and reproduction of the shipped
//! data files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn nbest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbest")).args(args).output().unwrap()
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_nbest"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn same_file(a: &Path, b: &Path) {
    assert!(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), "{} differs from {}", a.display(), b.display());
}

#[test]
fn exit_codes() {
    assert_eq!(nbest(&["--help"]).status.code(), Some(0));
    assert_eq!(nbest(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(nbest(&["train", "--data", p(&data())]).status.code(), Some(1));
    let missing = nbest(&["evaluate", "--data", p(&data()), "--nbest", "/nonexistent.nbest", "--refs", "/nonexistent.ref"]);
    assert_eq!(missing.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.nbest");
    std::fs::write(&bad, "u1\tone\t0.0\tshow flights\n").unwrap();
    let out = nbest(&["select", "--data", p(&data()), "--nbest", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let out = nbest(&["repair", "--data", p(&data()), "--set", "k=zero"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repair_reports_json_lines() {
    let out = with_stdin(
        &["repair", "--data", p(&data())],
        "i want to go from boston no from denver to boston on tuesday\nshow flights\n",
    );
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["corrected"], "i want to go from denver to boston on tuesday");
    assert_eq!(lines[0]["candidates"][0]["score"], 3);
    assert_eq!(lines[1]["candidates"].as_array().unwrap().len(), 0);
}

#[test]
fn parse_with_both_grammars() {
    let s = "show the flights to boston\n";
    for with in ["general", "specialized"] {
        let out = with_stdin(&["parse", "--data", p(&data()), "--with", with], s);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(!v["trees"].as_array().unwrap().is_empty(), "{with}");
    }
}

#[test]
fn gen_corpus_reproduces_shipped_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = nbest(&["gen-corpus", "--data", p(&data()), "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "treebank.txt",
        "heldout.txt",
        "train.nbest",
        "train.ref",
        "eval.nbest",
        "eval.ref",
        "norepair.nbest",
        "norepair.ref",
    ] {
        same_file(&dir.path().join(name), &data().join(name));
    }
    let other = tempfile::tempdir().unwrap();
    assert!(nbest(&["gen-corpus", "--data", p(&data()), "--out", p(other.path()), "--seed", "7"])
        .status
        .success());
    assert!(std::fs::read(other.path().join("eval.nbest")).unwrap() != std::fs::read(data().join("eval.nbest")).unwrap());
}

#[test]
fn specialize_reproduces_shipped_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("specialized.txt");
    let t = dir.path().join("lr_table.txt");
    let out = nbest(&[
        "specialize",
        "--data",
        p(&data()),
        "--treebank",
        p(&data().join("treebank.txt")),
        "--out-grammar",
        p(&g),
        "--out-table",
        p(&t),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("coverage            50/50"));
    same_file(&g, &data().join("specialized.txt"));
    same_file(&t, &data().join("lr_table.txt"));
}

#[test]
fn train_reproduces_shipped_model() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("model.txt");
    let out = nbest(&[
        "train",
        "--data",
        p(&data()),
        "--nbest",
        p(&data().join("train.nbest")),
        "--refs",
        p(&data().join("train.ref")),
        "--model-out",
        p(&m),
    ]);
    assert!(out.status.success());
    same_file(&m, &data().join("model.txt"));
    let traj: Vec<usize> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("trajectory "))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert!(traj.windows(2).all(|w| w[0] <= w[1]), "{traj:?}");
}

#[test]
fn select_and_evaluate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let out = nbest(&[
        "evaluate",
        "--data",
        p(&data()),
        "--nbest",
        p(&data().join("eval.nbest")),
        "--refs",
        p(&data().join("eval.ref")),
        "--model",
        p(&data().join("model.txt")),
        "--json",
        p(&json),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Right repair chosen"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["utterances"], 200);

    let out = nbest(&["select", "--data", p(&data()), "--nbest", p(&data().join("norepair.nbest"))]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 100);
}
