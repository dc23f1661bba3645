use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pgsum::corpus::{generate_synthetic_corpus, to_jsonl, Vocabulary};
use serde_json::Value;

fn pgsum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgsum"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pgsum(dir, args);
    assert!(
        out.status.success(),
        "pgsum {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn prepare_partitions_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--out-dir", "gen", "--per-domain", "20", "--seed", "3"]);
    ok(d, &["prepare", "--corpus", "gen/corpus.jsonl", "--out-dir", "a", "--seed", "3"]);
    ok(d, &["prepare", "--corpus", "gen/corpus.jsonl", "--out-dir", "b", "--seed", "3"]);
    let total: usize = ["train", "valid", "test"]
        .iter()
        .map(|s| lines(&d.join(format!("a/{s}.jsonl"))))
        .sum();
    assert_eq!(total, lines(&d.join("gen/corpus.jsonl")));
    for f in ["train.jsonl", "valid.jsonl", "test.jsonl", "vocab.txt"] {
        let a = fs::read(d.join("a").join(f)).unwrap();
        let b = fs::read(d.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn missing_input_fails_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pgsum(tmp.path(), &["prepare", "--corpus", "absent.jsonl", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(pgsum(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(pgsum(d, &["--help"]).status.code(), Some(0));
    fs::write(d.join("c.jsonl"), "{}\n").unwrap();
    let bad_split = pgsum(d, &["prepare", "--corpus", "c.jsonl", "--out-dir", "o", "--split", "0.5,0.5"]);
    assert_eq!(bad_split.status.code(), Some(1));
    let empty = pgsum(d, &["prepare", "--corpus", "c.jsonl", "--out-dir", "o"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(!d.join("o").exists());
    fs::write(d.join("bad.cfg"), "learning_rate 3\n").unwrap();
    let bad_cfg = pgsum(d, &["--config", "bad.cfg", "baseline", "first-k", "--corpus", "c.jsonl"]);
    assert_eq!(bad_cfg.status.code(), Some(1));
}

fn three_doc_corpus() -> String {
    [
        r#"{"id":"1","domain":"news","text":"First one here. Then more.","abstract":"x"}"#,
        r#"{"id":"2","domain":"opinion","text":"No terminator at all","abstract":"y"}"#,
        r#"{"id":"3","domain":"news","text":"Why? Because.","abstract":"z"}"#,
    ]
    .join("\n")
}

#[test]
fn baseline_writes_one_line_per_document() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.jsonl"), three_doc_corpus()).unwrap();
    ok(d, &["baseline", "first-sentence", "--corpus", "c.jsonl", "--out-dir", "b"]);
    assert_eq!(
        fs::read_to_string(d.join("b/baseline.txt")).unwrap(),
        "first one here .\nno terminator at all\nwhy ?\n"
    );
    ok(d, &["baseline", "first-k", "--corpus", "c.jsonl", "--out-dir", "k", "--k", "2"]);
    assert_eq!(
        fs::read_to_string(d.join("k/baseline.txt")).unwrap(),
        "first one\nno terminator\nwhy ?\n"
    );
}

#[test]
fn replay_reproduces_outputs_from_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.jsonl"), three_doc_corpus()).unwrap();
    ok(d, &["baseline", "first-k", "--corpus", "c.jsonl", "--out-dir", "b"]);
    ok(d, &["--out-dir", "again", "replay", "b/baseline.manifest.json"]);
    assert_eq!(
        fs::read(d.join("b/baseline.txt")).unwrap(),
        fs::read(d.join("again/baseline.txt")).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_set_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.jsonl"), three_doc_corpus()).unwrap();
    fs::write(d.join("run.cfg"), "# baseline settings\nk = 1\ncorpus = c.jsonl\nout_dir = from-config\n").unwrap();
    ok(d, &["--config", "run.cfg", "--set", "k=3", "baseline", "first-k"]);
    assert_eq!(lines(&d.join("from-config/baseline.txt")), 3);
    let first = fs::read_to_string(d.join("from-config/baseline.txt")).unwrap();
    assert!(first.starts_with("first one here\n"));
    ok(d, &["--config", "run.cfg", "--set", "k=3", "baseline", "first-k", "--k", "2"]);
    let second = fs::read_to_string(d.join("from-config/baseline.txt")).unwrap();
    assert!(second.starts_with("first one\n"));
    let manifest = json(&d.join("from-config/baseline.manifest.json"));
    assert_eq!(manifest["settings"]["k"], "2");
}

#[test]
fn evaluate_reports_json_and_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("out.txt"), "a b c d\nx y\n").unwrap();
    fs::write(d.join("ref.txt"), "a b c d\nx z\n").unwrap();
    let printed = ok(d, &["evaluate", "--outputs", "out.txt", "--references", "ref.txt", "--out-dir", "e"]);
    let v: Value = serde_json::from_str(printed.trim()).unwrap();
    assert_eq!(v, json(&d.join("e/eval.json")));
    assert_eq!(v["avg_len"], 3.0);
    assert_eq!(v["rouge2"], 0.5);
    assert_eq!(lines(&d.join("e/pairs.csv")), 3);
    fs::write(d.join("short.txt"), "a b c d\n").unwrap();
    let mismatch = pgsum(d, &["evaluate", "--outputs", "short.txt", "--references", "ref.txt", "--out-dir", "m"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

const ATTENTION_CORPUS: &str = concat!(
    r#"{"id":"a","domain":"news","text":"alice praised acme .","abstract":"alice praised .","annotations":{"#,
    r#""text":[["NNP","PERSON","none"],["VBD","NONE","positive"],["NNP","ORGANIZATION","none"],[".","NONE","none"]],"#,
    r#""abstract":[["NNP","PERSON","none"],["VBD","NONE","positive"],[".","NONE","none"]]}}"#,
    "\n",
    r#"{"id":"b","domain":"opinion","text":"bob hated rain .","abstract":"rain fell .","annotations":{"#,
    r#""text":[["NNP","PERSON","none"],["VBD","NONE","negative"],["NN","NONE","none"],[".","NONE","none"]],"#,
    r#""abstract":[["NN","NONE","none"],["VBD","NONE","none"],[".","NONE","none"]]}}"#,
    "\n",
);

const ATTENTION_TRACES: &str = r#"[
 {"id":"a","input":["alice","praised","acme","."],"attention":[
   [0.7,0.1,0.1,0.1],[0.1,0.6,0.2,0.1],[0.2,0.2,0.5,0.1],[0.25,0.25,0.25,0.25]]},
 {"id":"b","input":["bob","hated","rain","."],"attention":[
   [0.1,0.1,0.7,0.1],[0.0,0.9,0.1,0.0]]}
]"#;

#[test]
fn analyze_attention_matches_hand_count() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.jsonl"), ATTENTION_CORPUS).unwrap();
    fs::write(d.join("t.json"), ATTENTION_TRACES).unwrap();
    ok(d, &["analyze", "attention", "--corpus", "c.jsonl", "--traces", "t.json", "--out-dir", "an"]);
    let r = json(&d.join("an/attention.json"));
    // Argmax tokens: alice, praised, acme, alice (tie), rain, hated.
    let pct = |k: usize| 100.0 * k as f64 / 6.0;
    assert_eq!(r["steps"], 6);
    assert_eq!(r["person"].as_f64().unwrap(), pct(2));
    assert_eq!(r["organization"].as_f64().unwrap(), pct(1));
    assert_eq!(r["all_entities"].as_f64().unwrap(), pct(3));
    assert_eq!(r["noun"].as_f64().unwrap(), pct(4));
    assert_eq!(r["verb"].as_f64().unwrap(), pct(2));
    assert_eq!(r["positive"].as_f64().unwrap(), pct(1));
    assert_eq!(r["negative"].as_f64().unwrap(), pct(1));
    assert_eq!(r["summary_worthy_rate"].as_f64().unwrap(), 4.0 / 6.0);
    assert!(fs::read_to_string(d.join("an/attention.csv"))
        .unwrap()
        .starts_with("category,percentage\nPERSON,"));

    ok(d, &["analyze", "summary-worthy", "--corpus", "c.jsonl", "--traces", "t.json", "--out-dir", "sw"]);
    assert_eq!(json(&d.join("sw/summary_worthy.json"))["summary_worthy_rate"], 4.0 / 6.0);
}

#[test]
fn analyze_reuse_distribution_and_breakdown() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("c.jsonl"), ATTENTION_CORPUS).unwrap();
    ok(d, &["analyze", "reuse", "--corpus", "c.jsonl", "--out-dir", "r"]);
    // a: alice, praised, . reused; b: rain, . reused, fell not.
    assert_eq!(json(&d.join("r/reuse.json"))["reuse_rate"], 5.0 / 6.0);
    ok(d, &["analyze", "reuse", "--corpus", "c.jsonl", "--pos", "verb", "--out-dir", "rv"]);
    assert_eq!(json(&d.join("rv/reuse.json"))["reuse_rate"], 0.5);

    ok(d, &["analyze", "distribution", "--corpus", "c.jsonl", "--field", "ne", "--side", "text", "--out-dir", "ds"]);
    let dist = json(&d.join("ds/distribution.json"));
    assert_eq!(dist["PERSON"], 25.0);
    assert_eq!(dist["ORGANIZATION"], 12.5);
    assert_eq!(dist["NONE"], 62.5);

    fs::write(d.join("train.jsonl"), r#"{"id":"t","domain":"news","text":"q","abstract":"alice rain ."}"#).unwrap();
    fs::write(d.join("out.txt"), "alice alice\nfell\n").unwrap();
    ok(
        d,
        &[
            "analyze", "breakdown", "--corpus", "c.jsonl", "--outputs", "out.txt", "--train-corpus", "train.jsonl",
            "--out-dir", "bd",
        ],
    );
    let b = json(&d.join("bd/breakdown.json"));
    // Gold: alice(seen,in,gen) praised(unseen,in) .(seen,in,missed)
    //       rain(seen,in,missed) fell(unseen,not in) .(seen,in,missed)
    let pct = |k: usize| 100.0 * k as f64 / 6.0;
    assert_eq!(b["gold_tokens"], 6);
    assert_eq!(b["seen_in_input_generated"].as_f64().unwrap(), pct(1));
    assert_eq!(b["seen_in_input_missed"].as_f64().unwrap(), pct(3));
    assert_eq!(b["unseen_in_input"].as_f64().unwrap(), pct(1));
    assert_eq!(b["unseen_not_in_input"].as_f64().unwrap(), pct(1));
}

#[test]
fn divergence_exits_three_and_keeps_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--out-dir", "gen", "--per-domain", "10"]);
    ok(d, &["prepare", "--corpus", "gen/corpus.jsonl", "--out-dir", "prep"]);
    let out = pgsum(
        d,
        &[
            "train", "--regime", "in-domain", "--target", "prep", "--out-dir", "run", "--hidden-size", "4",
            "--embedding-size", "4", "--max-steps", "5", "--learning-rate", "1e308", "--set", "clip_norm=1e308",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("run/last_good.ckpt").exists());
    assert!(d.join("run/loss_history.csv").exists());
    assert!(!d.join("run/model.ckpt").exists());
}

/// One synthetic pair as train, validation and test set.
fn single_pair_dir(dir: &Path) {
    let doc = generate_synthetic_corpus(1, 11).remove(0);
    let jsonl = to_jsonl(std::slice::from_ref(&doc));
    fs::create_dir_all(dir).unwrap();
    for name in ["train.jsonl", "valid.jsonl", "test.jsonl"] {
        fs::write(dir.join(name), &jsonl).unwrap();
    }
    let vocab = Vocabulary::build(&[doc], 1000).unwrap();
    fs::write(dir.join("vocab.txt"), vocab.to_text()).unwrap();
}

#[test]
fn overfit_model_decodes_and_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    single_pair_dir(&d.join("one"));
    ok(
        d,
        &[
            "train", "--regime", "in-domain", "--target", "one", "--out-dir", "run", "--hidden-size", "32",
            "--embedding-size", "32", "--batch-size", "1", "--learning-rate", "2.0", "--max-steps", "200",
            "--set", "early_stopping=false",
        ],
    );
    ok(d, &["decode", "--checkpoint", "run/model.ckpt", "--input", "one/test.jsonl", "--out-dir", "dec"]);
    ok(d, &["evaluate", "--outputs", "dec/outputs.txt", "--references", "one/test.jsonl", "--out-dir", "ev"]);
    assert_eq!(json(&d.join("ev/eval.json"))["bleu"], 1.0);

    ok(
        d,
        &[
            "decode", "--checkpoint", "run/model.ckpt", "--input", "one/test.jsonl", "--decoder", "beam",
            "--beam-width", "3", "--out-dir", "beam",
        ],
    );
    assert_eq!(
        fs::read(d.join("dec/outputs.txt")).unwrap(),
        fs::read(d.join("beam/outputs.txt")).unwrap()
    );
}
