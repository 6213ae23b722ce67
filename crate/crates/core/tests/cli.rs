use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hmil-explain"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hmil-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus_and_schema(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus.jsonl");
    let schema = dir.join("schema.json");
    ok(&[
        "gen-corpus",
        "--n",
        &n.to_string(),
        "--seed",
        "1",
        "--out",
        s(&corpus),
    ]);
    ok(&["infer-schema", "--input", s(&corpus), "--out", s(&schema)]);
    (corpus, schema)
}

#[test]
fn infer_schema_is_reproducible() {
    let dir = workdir("schema");
    let (corpus, schema) = corpus_and_schema(&dir, 300);
    let again = dir.join("again.json");
    let printed = ok(&["infer-schema", "--input", s(&corpus), "--out", s(&again)]);
    assert_eq!(fs::read(&schema).unwrap(), fs::read(&again).unwrap());
    assert!(printed.contains("mac_vendor"));
    let v: Value = serde_json::from_slice(&fs::read(&schema).unwrap()).unwrap();
    assert_eq!(v["variant"], "dictionary");
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn empty_corpus_is_an_error() {
    let dir = workdir("empty");
    let corpus = dir.join("empty.jsonl");
    fs::write(&corpus, "\n\n").unwrap();
    let out = run(&[
        "infer-schema",
        "--input",
        s(&corpus),
        "--out",
        s(&dir.join("x.json")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!dir.join("x.json").exists());
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn malformed_corpus_reports_the_line() {
    let dir = workdir("malformed");
    let corpus = dir.join("bad.jsonl");
    fs::write(&corpus, "{\"a\": 1}\n{\"a\": \n").unwrap();
    let out = run(&[
        "infer-schema",
        "--input",
        s(&corpus),
        "--out",
        s(&dir.join("x.json")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains('2'));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn gen_data_is_deterministic_for_every_kind() {
    let dir = workdir("gendata");
    let (_, schema) = corpus_and_schema(&dir, 500);
    for kind in ["i", "ii", "iii", "iv", "v", "vi", "vii"] {
        let a = dir.join(format!("{kind}-a.jsonl"));
        let b = dir.join(format!("{kind}-b.jsonl"));
        for out in [&a, &b] {
            ok(&[
                "gen-data",
                "--schema",
                s(&schema),
                "--kind",
                kind,
                "--n",
                "200",
                "--seed",
                "9",
                "--out",
                s(out),
            ]);
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "kind {kind}");
        let text = fs::read_to_string(&a).unwrap();
        let rows: Vec<Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(rows.len(), 200);
        assert_eq!(rows.iter().filter(|r| r["label"] == "pos").count(), 100);
        let concept: Value = serde_json::from_slice(
            &fs::read(dir.join(format!("{kind}-a.jsonl.concept.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(concept["kind"], kind);
    }
    let out = run(&[
        "gen-data",
        "--schema",
        s(&schema),
        "--kind",
        "viii",
        "--out",
        s(&dir.join("x")),
    ]);
    assert!(!out.status.success());
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn train_explain_and_evaluate() {
    let dir = workdir("pipeline");
    let (_, schema) = corpus_and_schema(&dir, 600);
    let data = dir.join("data.jsonl");
    let model = dir.join("model.json");
    ok(&[
        "gen-data",
        "--schema",
        s(&schema),
        "--kind",
        "i",
        "--n",
        "400",
        "--seed",
        "2",
        "--out",
        s(&data),
    ]);
    let report = ok(&[
        "train",
        "--schema",
        s(&schema),
        "--dataset",
        s(&data),
        "--steps",
        "600",
        "--n-models",
        "2",
        "--out",
        s(&model),
    ]);
    assert!(report.contains("training accuracy"));
    let history: Value =
        serde_json::from_slice(&fs::read(dir.join("model.json.history.json")).unwrap()).unwrap();
    assert_eq!(history["losses"].as_array().unwrap().len(), 600);
    assert_eq!(history["candidates"].as_array().unwrap().len(), 2);

    let rows: Vec<Value> = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let explained = dir.join("explanation.json");
    let mut done = false;
    for (i, row) in rows.iter().enumerate().filter(|(_, r)| r["label"] == "pos") {
        let out = run(&[
            "explain",
            "--model",
            s(&model),
            "--sample",
            s(&data),
            "--index",
            &i.to_string(),
            "--method",
            "lbyl-banz-add+rr+ft",
            "--out",
            s(&explained),
        ]);
        if !out.status.success() {
            assert!(String::from_utf8_lossy(&out.stderr).contains("not classified positive"));
            continue;
        }
        let pruned: Value = serde_json::from_slice(&fs::read(&explained).unwrap()).unwrap();
        assert!(hmil_explain::synthgen::contains_subtree(
            &row["sample"],
            &pruned
        ));
        let meta: Value =
            serde_json::from_slice(&fs::read(dir.join("explanation.json.meta.json")).unwrap())
                .unwrap();
        assert!(meta["confidence"].as_f64().unwrap() >= meta["tau"].as_f64().unwrap());
        assert_eq!(meta["method"], "lbyl-banz-add+rr+ft");
        done = true;
        break;
    }
    assert!(done, "no positive could be explained");

    let bad = run(&[
        "explain",
        "--model",
        s(&model),
        "--sample",
        s(&data),
        "--index",
        "0",
        "--method",
        "flat-best-add",
        "--out",
        s(&explained),
    ]);
    assert!(!bad.status.success());
    let bad = run(&[
        "explain",
        "--model",
        s(&model),
        "--sample",
        s(&data),
        "--index",
        "0",
        "--method",
        "flat-grad-add",
        "--tau-factor",
        "1.5",
        "--out",
        s(&explained),
    ]);
    assert!(!bad.status.success());

    let json_report = dir.join("report.json");
    let table = ok(&[
        "evaluate",
        "--model",
        s(&model),
        "--dataset",
        s(&data),
        "--method",
        "flat-grad-add,leafs-rand-add+rr",
        "--n-explanations",
        "10",
        "--out",
        s(&json_report),
    ]);
    assert!(table.contains("flat-grad-add") && table.contains("leafs-rand-add+rr"));
    let report: Value = serde_json::from_slice(&fs::read(&json_report).unwrap()).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    fs::remove_dir_all(dir).unwrap();
}
