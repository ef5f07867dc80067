use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etrnn::eval::Witness;
use etrnn::lowering::compile_full;
use etrnn::network::encode_instance;
use etrnn::scalar::Scalar;
use etrnn::witness::synthesize_witness;
use etrnn::{parse_etr_inv, Assignment};
use serde_json::Value;
use tempfile::TempDir;

fn etrnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etrnn"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn setup(formula: &str, solution: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("f.etr"), formula).unwrap();
    std::fs::write(dir.path().join("a.json"), solution).unwrap();
    let p = dir.path().to_path_buf();
    (dir, p)
}

#[test]
fn compile_synth_verify_extract() {
    let (_dir, p) = setup("x + y = z\nx * w = 1\n", r#"{"x":"2","y":"1","z":"3","w":"1/2"}"#);
    let o = etrnn(&p, &["compile", "f.etr", "-o", "f.json", "--map", "f.map.json"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = etrnn(&p, &["synth", "f.etr", "--solution", "a.json", "-o", "w.json"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");

    let o = etrnn(&p, &["verify", "f.json", "w.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "accepted\ncost: 0\n");

    let o = etrnn(&p, &["extract", "f.json", "w.json", "--map", "f.map.json", "-o", "out.json"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let back: Value = serde_json::from_slice(&std::fs::read(p.join("out.json")).unwrap()).unwrap();
    assert_eq!(back["w"], "1/2");
    assert_eq!(back["z"], "3");
}

#[test]
fn cli_output_is_byte_identical_to_the_library() {
    let text = "x * y = 1\nx + y = z\n";
    let (_dir, p) = setup(text, r#"{"x":"3","y":"1/3","z":"10/3"}"#);
    assert_eq!(etrnn(&p, &["compile", "f.etr", "-o", "f.json", "--map", "m.json"]).status.code(), Some(0));
    assert_eq!(etrnn(&p, &["synth", "f.etr", "--solution", "a.json", "-o", "w.json"]).status.code(), Some(0));

    let f = parse_etr_inv(text).unwrap();
    let (inst, map) = compile_full(&f).unwrap();
    let a = Assignment::from_values([Scalar::integer(3), Scalar::ratio(1, 3), Scalar::ratio(10, 3)]);
    let w = synthesize_witness(&inst, &map, &a, 0.0).unwrap();
    assert_eq!(std::fs::read(p.join("f.json")).unwrap(), encode_instance(&inst));
    assert_eq!(std::fs::read(p.join("m.json")).unwrap(), map.encode());
    assert_eq!(std::fs::read(p.join("w.json")).unwrap(), w.encode());
}

#[test]
fn perturbed_witness_is_rejected() {
    let (_dir, p) = setup("x + y = z\n", r#"{"x":"1","y":"1","z":"2"}"#);
    etrnn(&p, &["compile", "f.etr", "-o", "f.json", "--map", "m.json"]);
    etrnn(&p, &["synth", "f.etr", "--solution", "a.json", "-o", "w.json"]);
    let mut w = Witness::decode(&std::fs::read(p.join("w.json")).unwrap()).unwrap();
    let e = *w.weights.keys().next().unwrap();
    let v = w.weights[&e].add(&Scalar::ratio(1, 7)).unwrap();
    w.weights.insert(e, v);
    std::fs::write(p.join("bad.json"), w.encode()).unwrap();

    let o = etrnn(&p, &["verify", "f.json", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("rejected\ncost: "));
    let o = etrnn(&p, &["--report", "json", "verify", "f.json", "bad.json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["accepted"], false);
    assert_ne!(v["total_cost"], "0");

    let o = etrnn(&p, &["extract", "f.json", "bad.json", "--map", "m.json", "-o", "x.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_inputs_are_usage_errors() {
    let (_dir, p) = setup("x + y = z\nx * = 1\n", "{}");
    let o = etrnn(&p, &["compile", "f.etr", "-o", "f.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = etrnn(&p, &["--report", "json", "compile", "f.etr", "-o", "f.json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"], "formula");
    assert_eq!(v["exit_code"], 2);

    std::fs::write(p.join("junk.json"), "{\"neurons\": 3}").unwrap();
    let o = etrnn(&p, &["stats", "junk.json"]);
    assert_eq!(o.status.code(), Some(2));
    let o = etrnn(&p, &["stats", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unsatisfying_solution_is_rejected() {
    let (_dir, p) = setup("x * y = 1\n", r#"{"x":"2","y":"2"}"#);
    let o = etrnn(&p, &["synth", "f.etr", "--solution", "a.json", "-o", "w.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stats_of_compiled_instances() {
    let (_dir, p) = setup("x + y = z\n", "{}");
    etrnn(&p, &["compile", "f.etr", "-o", "f.json"]);
    let o = etrnn(&p, &["--report", "json", "stats", "f.json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["outputs"], 3);
    let text = stdout(&etrnn(&p, &["stats", "f.json"]));
    assert!(text.contains("outputs: 3\n"));
}

#[test]
fn grid_solve_on_a_restricted_instance() {
    let (_dir, p) = setup("x * y = 1\n", "{}");
    etrnn(&p, &["compile", "f.etr", "-o", "r.json", "--map", "m.json", "--stop-after", "restricted"]);
    let o = etrnn(&p, &["solve", "r.json", "--grid", "-2,-1,-1/2,1/2,1,2", "-o", "w.json"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let o = etrnn(&p, &["verify", "r.json", "w.json"]);
    assert_eq!(stdout(&o), "accepted\ncost: 0\n");
    let o = etrnn(&p, &["extract", "r.json", "w.json", "--map", "m.json", "-o", "a.json"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");

    let o = etrnn(&p, &["solve", "r.json", "--grid", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "not found\n");
}

#[test]
fn local_solve_is_deterministic() {
    let (_dir, p) = setup("x + y = z\n", "{}");
    etrnn(&p, &["compile", "f.etr", "-o", "r.json", "--stop-after", "restricted"]);
    let args = ["--report", "json", "solve", "r.json", "--restarts", "8", "--iters", "2000", "--seed", "4"];
    let a = etrnn(&p, &args);
    let b = etrnn(&p, &args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0), "{a:?}");
}

#[test]
fn dot_writes_a_digraph() {
    let (_dir, p) = setup("x * y = 1\n", "{}");
    etrnn(&p, &["compile", "f.etr", "-o", "f.json", "--stop-after", "restricted"]);
    let o = etrnn(&p, &["dot", "f.json", "-o", "f.dot"]);
    assert_eq!(o.status.code(), Some(0));
    let dot = std::fs::read_to_string(p.join("f.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}
