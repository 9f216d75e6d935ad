use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopinv")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn lu_invariants_as_text() {
    let lu = corpus("lu.clk");
    let o = run(&["derive", "--input", lu.to_str().unwrap(), "--stage", "invariants", "--format", "text"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(s.matches("Invariant ").count(), 5);
    assert!(s.contains(" L_BL = A_BL U_TL^-1     │ A_BR = A_BR - L_BL U_TR\n"), "{s}");
}

#[test]
fn sylvester_graph_as_dot() {
    let syl = corpus("coupled_sylvester.clk");
    let o = run(&["derive", "--input", syl.to_str().unwrap(), "--stage", "graph", "--format", "dot", "--pme", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("digraph "));
    assert_eq!(s.matches("[label=").count(), 12);
    assert_eq!(s.matches(" -> ").count(), 16);
    assert!(s.contains("t8 -> t12") && !s.contains("t8 -> t9"));
}

#[test]
fn verify_prints_a_summary() {
    let lu = corpus("lu.clk");
    let o = run(&[
        "derive",
        "--input",
        lu.to_str().unwrap(),
        "--stage",
        "invariants",
        "--verify",
        "--seed",
        "7",
        "--size",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("verify: seed 7, sizes m=4: "), "{s}");
    assert!(s.trim_end().ends_with("all passed"));
}

#[test]
fn output_is_deterministic() {
    let syl = corpus("coupled_sylvester.clk");
    let args = ["derive", "--input", syl.to_str().unwrap(), "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("\"schema_version\": 1"));
}

#[test]
fn out_directory_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let syl = corpus("coupled_sylvester.clk");
    let out = dir.path().to_str().unwrap();
    let o = run(&["derive", "--input", syl.to_str().unwrap(), "--stage", "graph", "--format", "dot", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for i in 1..=3 {
        assert!(dir.path().join(format!("Psi.pme{i}.dot")).exists());
    }
    let o = run(&["derive", "--input", syl.to_str().unwrap(), "--stage", "pme", "--format", "latex", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let tex = std::fs::read_to_string(dir.path().join("Psi.pme.tex")).unwrap();
    assert_eq!(tex.matches("\\begin{array}").count(), 3);
    assert!(o.stdout.is_empty());
}

#[test]
fn spec_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.clk");
    std::fs::write(&bad, "operation Bad {\n  operand A : m x m [Input, Frobnicate];\n}\n").unwrap();
    let o = run(&["derive", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.clk:2:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("E101"));
}

#[test]
fn usage_errors_exit_with_one() {
    let lu = corpus("lu.clk");
    let lu = lu.to_str().unwrap();
    assert_eq!(run(&["derive", "--input", "/nonexistent/x.clk"]).status.code(), Some(1));
    assert_eq!(run(&["derive", "--input", lu, "--format", "html"]).status.code(), Some(1));
    assert_eq!(run(&["derive", "--input", lu, "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["derive", "--input", lu, "--stage", "graph", "--format", "latex"]).status.code(), Some(1));
    assert_eq!(run(&["derive", "--input", lu, "--pme", "2"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn derivation_failure_exits_with_two() {
    let o = run(&["derive", "--input", corpus("scalar_copy.clk").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no admissible rule set"));
}

#[test]
fn every_stage_renders_as_text_and_json() {
    let syl = corpus("coupled_sylvester.clk");
    for stage in ["rulesets", "pme", "tasks", "graph", "candidates", "invariants"] {
        for format in ["text", "json"] {
            let o = run(&["derive", "--input", syl.to_str().unwrap(), "--stage", stage, "--format", format]);
            assert_eq!(o.status.code(), Some(0), "{stage} {format}: {}", stderr(&o));
            assert!(!o.stdout.is_empty());
        }
    }
}
