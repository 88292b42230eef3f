use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rorokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rorokit"))
        .args(args)
        .env("ROROKIT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CHAIN_DOC: &str = r#"{"id":"d1","page":[1000,1000],"segments":[{"id":0,"box":[10,10,200,40],"words":[{"text":"a","box":[10,10,60,40]}]},{"id":1,"box":[10,60,200,90],"words":[{"text":"b","box":[10,60,60,90]}]},{"id":2,"box":[10,110,200,140],"words":[{"text":"c","box":[10,110,60,140]}]}],"isdr":[[0,1],[1,2]]}"#;

#[test]
fn validate_reports_clean_corpus_and_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.jsonl");
    fs::write(&clean, format!("{CHAIN_DOC}\n")).unwrap();
    let out = rorokit(&["validate", p(&clean)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let cyclic = dir.path().join("cyclic.jsonl");
    fs::write(&cyclic, CHAIN_DOC.replace("[[0,1],[1,2]]", "[[0,1],[1,2],[2,0]]") + "\n").unwrap();
    let out = rorokit(&["validate", p(&cyclic)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreadable_input_exits_with_two() {
    let out = rorokit(&["validate", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    assert_eq!(rorokit(&["stats", p(&bad)]).status.code(), Some(2));
}

#[test]
fn closure_prints_the_transitive_closure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rel.json");
    fs::write(&input, r#"{"n":4,"pairs":[[0,1],[1,2],[2,3]]}"#).unwrap();
    let out = rorokit(&["closure", p(&input)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 6);
}

#[test]
fn render_draws_every_segment_and_pair() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(&corpus, format!("{CHAIN_DOC}\n")).unwrap();
    let svg = dir.path().join("d.svg");
    let out = rorokit(&["render", p(&corpus), "--out", p(&svg)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<rect").count(), 3);
    assert_eq!(text.matches("<line").count(), 2);
}

#[test]
fn synth_train_predict_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let synth_cfg = dir.path().join("synth.json");
    fs::write(&synth_cfg, r#"{"n_docs":12,"chain_segments":[3,5],"column_segments":[2,3],"grid_rows":[2,2],"grid_cols":[2,2],"form_fields":[2,3]}"#).unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let out = rorokit(&["synth", "--config", p(&synth_cfg), "--seed", "3", "--out", p(&corpus)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&corpus).unwrap().lines().count(), 12);

    let train_cfg = dir.path().join("train.json");
    fs::write(
        &train_cfg,
        r#"{"rop":{"epochs":3,"head_size":8},"encoder":{"layers":1,"model_dim":16,"heads":2,"ffn_dim":32,"vocab_hash_size":128}}"#,
    )
    .unwrap();
    let model = dir.path().join("model.json");
    let report = dir.path().join("train_report.json");
    let out = rorokit(&[
        "train",
        p(&corpus),
        "--config",
        p(&train_cfg),
        "--out",
        p(&model),
        "--report",
        p(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["epochs_run"].as_u64().unwrap() >= 1);

    let pred = dir.path().join("pred.jsonl");
    let out = rorokit(&["predict", p(&corpus), "--model", p(&model), "--enforce-acyclic", "--out", p(&pred)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&pred).unwrap().lines().count(), 12);
    // Repaired predictions are acyclic, so they validate cleanly.
    assert_eq!(rorokit(&["validate", p(&pred)]).status.code(), Some(0));

    let scores = dir.path().join("eval.json");
    let out = rorokit(&[
        "eval",
        p(&corpus),
        "--model",
        p(&model),
        "--baseline",
        "heuristic",
        "--baseline",
        "permutation-oracle",
        "--out",
        p(&scores),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&scores).unwrap()).unwrap();
    let systems = v["systems"].as_array().unwrap();
    assert_eq!(systems.len(), 3);
    for s in systems {
        let f1 = s["f1"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
    }
}

#[test]
fn convert_writes_word_level_relations() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(&corpus, format!("{CHAIN_DOC}\n")).unwrap();
    let out = rorokit(&["convert", p(&corpus), "--level", "word"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["id"], "d1");
    assert_eq!(v["n"], 3);
}
