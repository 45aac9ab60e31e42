use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const DESK: &str = "seed = 1
[model]
blocks = 2
d_m = 16
d_t = 32
[optim]
lr = 1e-3
batch_size = 4
window = 16
epochs = 3
";

fn chainhoi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainhoi")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = chainhoi(dir, args);
    assert_eq!(code(&o), 0, "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("desk.toml"), DESK).unwrap();
    ok(t.path(), &["generate", "--count", "8", "--seed", "3", "--out", "ds"]);
    t
}

fn first_mesh(dir: &Path) -> PathBuf {
    let mut names: Vec<_> = fs::read_dir(dir.join("ds/meshes")).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names.remove(0)
}

fn first_text(dir: &Path) -> String {
    let line = fs::read_to_string(dir.join("ds/dataset.jsonl")).unwrap().lines().next().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    v["text"].as_str().unwrap().to_string()
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let t = workspace();
    ok(t.path(), &["generate", "--count", "8", "--seed", "3", "--out", "again"]);
    ok(t.path(), &["generate", "--count", "8", "--seed", "4", "--out", "other"]);
    let read = |p: &str| fs::read(t.path().join(p)).unwrap();
    assert_eq!(read("ds/dataset.jsonl"), read("again/dataset.jsonl"));
    assert_eq!(read("ds/groups.json"), read("again/groups.json"));
    assert_ne!(read("ds/dataset.jsonl"), read("other/dataset.jsonl"));
}

#[test]
fn train_then_sample_is_reproducible() {
    let t = workspace();
    let d = t.path();
    ok(d, &["--config", "desk.toml", "train", "--data", "ds", "--out", "a"]);
    ok(d, &["--config", "desk.toml", "train", "--data", "ds", "--out", "b"]);
    let csv = fs::read_to_string(d.join("a/loss.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "epoch,l_diff,l_h,l_o,total");
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv, fs::read_to_string(d.join("b/loss.csv")).unwrap());
    assert_eq!(fs::read(d.join("a/checkpoint.bin")).unwrap(), fs::read(d.join("b/checkpoint.bin")).unwrap());

    let mesh = first_mesh(d);
    let mesh = mesh.to_str().unwrap();
    let text = first_text(d);
    let base = ["--config", "desk.toml", "sample", "--checkpoint", "a/checkpoint.bin", "--text", &text, "--object", mesh];
    let defaults = ok(d, &[&base[..], &["--out", "s1.jsonl"]].concat());
    assert!(defaults.contains("50 DDIM steps, guidance 2 "), "{}", defaults);
    ok(d, &[&base[..], &["--steps", "50", "--guidance", "2", "--out", "s2.jsonl"]].concat());
    ok(d, &[&base[..], &["--seed", "9", "--out", "s3.jsonl"]].concat());
    let s1 = fs::read(d.join("s1.jsonl")).unwrap();
    assert_eq!(s1, fs::read(d.join("s2.jsonl")).unwrap());
    assert_ne!(s1, fs::read(d.join("s3.jsonl")).unwrap());

    // a sampled record is a valid evaluation input
    let out = ok(d, &["evaluate", "--generated", "s1.jsonl", "--references", "ds/dataset.jsonl"]);
    assert!(out.lines().any(|l| l.starts_with("sample")), "{}", out);
}

#[test]
fn resume_continues_the_same_run() {
    let t = workspace();
    let d = t.path();
    ok(d, &["--config", "desk.toml", "train", "--data", "ds", "--out", "full"]);
    ok(d, &["--config", "desk.toml", "train", "--data", "ds", "--out", "part", "--max-steps", "2"]);
    ok(d, &["--config", "desk.toml", "train", "--data", "ds", "--out", "rest", "--resume", "part/checkpoint.bin"]);
    assert_eq!(fs::read(d.join("full/checkpoint.bin")).unwrap(), fs::read(d.join("rest/checkpoint.bin")).unwrap());
}

#[test]
fn ground_truth_against_itself() {
    let t = workspace();
    let d = t.path();
    let args = ["evaluate", "--generated", "ds/dataset.jsonl", "--references", "ds/dataset.jsonl", "--report", "r/report.json"];
    ok(d, &args);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r/report.json")).unwrap()).unwrap();
    assert!(report["violations"].as_array().unwrap().is_empty());
    for s in report["sequences"].as_array().unwrap() {
        assert_eq!(s["fsr"].as_f64().unwrap(), 0.0);
        // labels are geometric with a 5 cm threshold
        assert!(s["cd"].as_f64().unwrap() <= 0.05);
        assert_eq!(s["cd"], s["ocd"]);
    }
    let table = fs::read_to_string(d.join("r/report.txt")).unwrap();
    assert_eq!(table.lines().count(), 10);

    ok(d, &[&args[..5], &["--groups", "ds/groups.json", "--report", "g/report.json"]].concat());
    let grouped: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("g/report.json")).unwrap()).unwrap();
    for s in grouped["sequences"].as_array().unwrap() {
        assert!(s["ocd"].as_f64().unwrap() <= s["cd"].as_f64().unwrap());
    }
    assert!(grouped["ocd"].as_f64().unwrap() <= grouped["cd"].as_f64().unwrap());
}

#[test]
fn gradcheck_reports_every_op() {
    let t = tempfile::tempdir().unwrap();
    let out = ok(t.path(), &["gradcheck", "--cases", "2", "--seed", "5"]);
    for op in ["linear", "attention", "layer_norm", "graph_conv", "temporal_conv", "model_1block", "loss_h"] {
        assert!(out.lines().any(|l| l.starts_with(op) && l.ends_with("ok")), "{}\n{}", op, out);
    }
    let fail = chainhoi(t.path(), &["gradcheck", "--cases", "1", "--ops", "linear", "--tol", "1e-14"]);
    assert_eq!(code(&fail), 4);
    assert_eq!(code(&chainhoi(t.path(), &["gradcheck", "--ops", "conv9"])), 2);
}

#[test]
fn inspect_graph_tables_and_dot() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("c.toml"), "").unwrap();
    let out = ok(t.path(), &["inspect-graph", "--config", "c.toml", "--seed", "1"]);
    let row = out.lines().rev().find(|l| l.trim_start().starts_with("human_object")).unwrap();
    let ones = row.split_whitespace().skip(1).filter(|v| *v == "1").count();
    assert_eq!(ones, 9);
    let dot = ok(t.path(), &["inspect-graph", "--dot"]);
    assert!(dot.starts_with("graph hoi {"));
    assert_eq!(dot.matches(" -- ").count(), out.lines().filter(|l| l.contains(" -- ")).count());
}

#[test]
fn exit_codes() {
    let t = workspace();
    let d = t.path();
    fs::write(d.join("bad.toml"), "seed = \"x\"\n").unwrap();
    fs::write(d.join("unknown.toml"), "[optim]\nlearning_rate = 1\n").unwrap();
    fs::write(d.join("broken.jsonl"), "{\"id\": 1}\n").unwrap();
    let cases: [(&[&str], i32); 6] = [
        (&["--config", "missing.toml", "inspect-graph"], 2),
        (&["--config", "bad.toml", "inspect-graph"], 2),
        (&["--config", "unknown.toml", "gradcheck", "--cases", "1"], 2),
        (&["train", "--data", "ds"], 2),
        (&["evaluate", "--generated", "none.jsonl", "--references", "ds/dataset.jsonl"], 3),
        (&["evaluate", "--generated", "broken.jsonl", "--references", "ds/dataset.jsonl"], 3),
    ];
    for (args, want) in cases {
        let o = chainhoi(d, args);
        assert_eq!(code(&o), want, "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let o = chainhoi(d, &["evaluate", "--generated", "broken.jsonl", "--references", "ds/dataset.jsonl"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.jsonl line 1"));
}
