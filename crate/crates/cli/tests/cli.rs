use std::path::Path;
use std::process::{Command, Output};

fn relex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relex"))
        .args(args)
        .env("RELEX_THREADS", "2")
        .output()
        .expect("spawn relex")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn value_after(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

#[test]
fn schedule_prints_sizes() {
    let out = ok(relex(&["schedule", "--n", "19961"]));
    assert_eq!(out.trim(), "39 78 156 312 624 1248 2495 4990 9981 19961");
}

#[test]
fn unknown_preset_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = relex(&["run", "--preset", "X-Y", "--corpus", "none.jsonl", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let o = relex(&["run", "--corpus", p(&missing), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn gradcheck_passes() {
    let out = ok(relex(&["gradcheck", "--per-kind", "3"]));
    assert!(out.contains("max relative error"));
}

#[test]
fn synth_finetune_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let model = dir.path().join("m.json");
    ok(relex(&["synth", "--n", "120", "--relations", "3", "--seed", "4", "--out", p(&corpus)]));
    let trained = ok(relex(&[
        "finetune", "--preset", "B-H", "--corpus", p(&corpus), "--val", p(&corpus), "--out", p(&model),
    ]));
    let train_acc = value_after(&trained, "train accuracy");
    let scored = ok(relex(&["eval", "--model", p(&model), "--corpus", p(&corpus), "--per-label"]));
    assert_eq!(value_after(&scored, "instances"), 120.0);
    assert!((value_after(&scored, "accuracy") - train_acc).abs() < 1e-6);
}

#[test]
fn pretrain_then_finetune() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let pre = dir.path().join("pre.json");
    let fine = dir.path().join("fine.json");
    ok(relex(&["synth", "--n", "60", "--relations", "2", "--out", p(&corpus)]));
    let out = ok(relex(&["pretrain", "--preset", "M-E-L", "--corpus", p(&corpus), "--out", p(&pre)]));
    assert!(out.starts_with("epoch 1 objective"));
    ok(relex(&["finetune", "--init", p(&pre), "--corpus", p(&corpus), "--out", p(&fine)]));
    assert!(fine.exists());
    let o = relex(&["pretrain", "--preset", "B-H", "--corpus", p(&corpus), "--out", p(&pre)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    ok(relex(&["synth", "--n", "200", "--relations", "3", "--skew", "0.6", "--out", p(&corpus)]));
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let printed = ok(relex(&[
            "run", "--preset", "M-E-LUE", "--seed", "3", "--corpus", p(&corpus), "--sizes", "20,40,140",
            "--out", p(&out_dir),
        ]));
        let path = printed.trim().to_string();
        assert!(path.ends_with("M-E-LUE_seed3.csv"));
        outputs.push(std::fs::read_to_string(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0].lines().count(), 4);
    assert!(outputs[0].starts_with("experiment,train_size,seed,macro_p"));
}

#[test]
fn embed_then_tune() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let vectors = dir.path().join("v.txt");
    let grid = dir.path().join("grid.toml");
    ok(relex(&["synth", "--n", "150", "--relations", "3", "--out", p(&corpus)]));
    let out = ok(relex(&["embed", "--corpus", p(&corpus), "--out", p(&vectors), "--dim", "8", "--epochs", "1"]));
    assert!(out.contains("dim 8"));
    std::fs::write(&grid, "alpha_fc = [0.05, 0.1]\ndim = 8\n").unwrap();
    let table = ok(relex(&[
        "tune", "--preset", "B-H", "--mode", "finetune", "--grid", p(&grid), "--corpus", p(&corpus),
        "--embeddings", p(&vectors),
    ]));
    assert_eq!(table.lines().count(), 3, "{table}");
}
