//! The `cuiwb` binary: golden tables, exit codes, and JSON output equal to
//! the service bodies.

mod common;

use std::fs;

use common::{fixture, run, stdout, Server};
use serde_json::{json, Value};

fn f(path: &str) -> String {
    fixture(path).display().to_string()
}

fn norm_args() -> Vec<String> {
    ["eval", "norm", "--train"]
        .into_iter()
        .map(String::from)
        .chain([f("norm/train.tsv"), "--gold".into(), f("norm/gold.tsv"), "--pred".into()])
        .chain(["sys1", "sys2", "sys3"].map(|s| f(&format!("norm/{s}.tsv"))))
        .chain(["--vocab".into(), f("toy_vocab.tsv")])
        .collect()
}

fn e2e_args(extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec!["eval".into(), "e2e".into(), "--gold".into(), f("toy_corpus.json"), "--pred".into(), f("toy_pred.jsonl")];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_owned(args: &[String]) -> std::process::Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs)
}

/// Each case is a command line and the golden file holding its table.
fn golden_cases() -> Vec<(Vec<String>, &'static str)> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let vocab = f("toy_vocab.tsv");
    vec![
        (norm_args(), "eval_norm.txt"),
        (s(&["suggest", "--vocab", &vocab, "--query", "pt"]), "suggest_pt.txt"),
        (s(&["suggest", "--vocab", &vocab, "--query", "severe asthma exacerbation"]), "suggest_severe_asthma.txt"),
        (s(&["corpus", "validate", "--vocab", &vocab, &f("toy_corpus_unknown_cui.json")]), "validate_unknown_cui.txt"),
        (s(&["corpus", "stats", &f("toy_corpus.json")]), "corpus_stats.txt"),
        (s(&["agreement", "--a", "ann1", "--b", "ann2", &f("toy_corpus.json")]), "agreement.txt"),
        (e2e_args(&["--vocab", &vocab, "--semtype-min", "1"]), "eval_e2e_framework_exact.txt"),
        (e2e_args(&["--mode", "lenient"]), "eval_e2e_lenient.txt"),
        (s(&["vocab", "check", "--input", &vocab]), "vocab_check.txt"),
    ]
}

#[test]
fn tables_match_golden_files() {
    for (args, golden) in golden_cases() {
        let out = run_owned(&args);
        assert_eq!(out.status.code(), Some(0), "{golden}: {}", String::from_utf8_lossy(&out.stderr));
        let expected = fs::read_to_string(fixture(&format!("golden/cli/{golden}"))).unwrap();
        assert_eq!(stdout(&out), expected, "{golden}");
        // Byte-identical on a second run.
        assert_eq!(run_owned(&args).stdout, out.stdout, "{golden}");
    }
}

#[test]
fn norm_table_all_row() {
    let out = stdout(&run_owned(&norm_args()));
    let all = out.lines().find(|l| l.starts_with("All ")).unwrap();
    let cells: Vec<&str> = all.split_whitespace().collect();
    assert_eq!(cells, ["All", "4", "75.0", "58.3", "100.0"]);
}

#[test]
fn pt_has_three_direct_candidates() {
    let out = run(&["suggest", "--vocab", &f("toy_vocab.tsv"), "--query", "pt", "--format", "json"]);
    let body: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["direct"].as_array().unwrap().len(), 3);
    assert_eq!(stdout(&run(&["suggest", "--vocab", &f("toy_vocab.tsv"), "--query", "pt"])).matches(" direct ").count(), 3);
}

#[test]
fn exit_codes() {
    let vocab = f("toy_vocab.tsv");
    // Warnings do not fail validation.
    let out = run(&["corpus", "validate", "--vocab", &vocab, &f("toy_corpus_unknown_cui.json"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let findings: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let warnings: Vec<&Value> = findings.iter().filter(|x| x["severity"] == "warning").collect();
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0]["rule_id"], "L3_unknown_cui");

    // Offsets past the end of the document are an error finding.
    let dir = tempfile::tempdir().unwrap();
    let mut corpus: Value = serde_json::from_slice(&fs::read(fixture("toy_corpus.json")).unwrap()).unwrap();
    corpus["annotations"][0]["end"] = json!(10_000);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, corpus.to_string()).unwrap();
    let out = run(&["corpus", "validate", "--vocab", &vocab, bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("L1_offsets"));

    // Usage errors.
    for args in [
        vec!["suggest", "--vocab", &vocab, "--query", "pt", "--k", "0"],
        vec!["suggest", "--vocab", &vocab],
        vec!["eval", "e2e", "--gold", "g", "--pred", "p", "--match", "fuzzy"],
        vec!["corpus", "stats", "x.json", "--format", "yaml"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }

    // Runtime failures.
    assert_eq!(run(&["corpus", "stats", "/nonexistent/corpus.json"]).status.code(), Some(1));
    assert_eq!(run(&["agreement", "--a", "ann1", "--b", "ghost", &f("toy_corpus.json")]).status.code(), Some(1));
    let empty = dir.path().join("empty.tsv");
    fs::write(&empty, "").unwrap();
    let mut args = norm_args();
    let at = args.iter().position(|a| a == "--pred").unwrap();
    args.splice(at + 1..at + 4, [empty.display().to_string()]);
    assert_eq!(run_owned(&args).status.code(), Some(1));
}

#[test]
fn autotag_writes_to_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    fs::create_dir_all(store.join("docs")).unwrap();
    fs::write(store.join("docs/n1.json"), json!({"id": "n1", "text": "Asthma noted; jaundiced."}).to_string()).unwrap();
    let args = ["autotag", "--vocab", &f("toy_vocab.tsv"), "--doc", "n1", "--store", store.to_str().unwrap(), "--format", "json"];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let proposals: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let spans: Vec<(u64, u64)> = proposals
        .iter()
        .map(|p| (p["start"].as_u64().unwrap(), p["end"].as_u64().unwrap()))
        .collect();
    assert_eq!(spans, [(0, 6), (14, 23)]);
    assert!(proposals.iter().all(|p| p["status"] == "proposed"));
    let again: Vec<Value> = serde_json::from_slice(&run(&args).stdout).unwrap();
    assert!(again.is_empty());
    let stored: Vec<Value> = serde_json::from_slice(&fs::read(store.join("annotations/n1.json")).unwrap()).unwrap();
    assert_eq!(stored, proposals);
    let mut missing = args;
    missing[4] = "nope";
    assert_eq!(run(&missing).status.code(), Some(1));
}

#[test]
fn json_output_equals_service_bodies() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(&fixture("toy_vocab.tsv"), dir.path());
    let corpus: Value = serde_json::from_slice(&fs::read(fixture("toy_corpus.json")).unwrap()).unwrap();
    for d in corpus["documents"].as_array().unwrap() {
        assert_eq!(server.post("/api/documents", d).0, 201);
    }
    for a in corpus["annotations"].as_array().unwrap() {
        let doc = a["doc_id"].as_str().unwrap();
        assert_eq!(server.post(&format!("/api/documents/{doc}/annotations"), a).0, 201);
    }
    let cli_json = |args: Vec<String>| -> Value {
        let mut args = args;
        args.extend(["--format".to_string(), "json".to_string()]);
        let out = run_owned(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();

    for q in ["pt", "severe asthma", ""] {
        let path = format!("/api/suggest?q={}&k=3", q.replace(' ', "%20"));
        let (status, body) = server.get(&path);
        assert_eq!(status, 200);
        assert_eq!(cli_json(s(&["suggest", "--vocab", &f("toy_vocab.tsv"), "--query", q, "--k", "3"])), body, "{q:?}");
    }

    let (_, body) = server.get("/api/agreement?a=ann1&b=ann2");
    assert_eq!(cli_json(s(&["agreement", "--a", "ann1", "--b", "ann2", &f("toy_corpus.json")])), body);

    let preds: Vec<Value> = fs::read_to_string(fixture("toy_pred.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    for (mode, matching) in [("framework", "exact"), ("framework", "overlap"), ("lenient", "exact")] {
        let (status, body) = server.post(
            "/api/eval/e2e",
            &json!({"mode": mode, "match": matching, "semtype_min": 1, "predictions": preds}),
        );
        assert_eq!(status, 200);
        let cli = cli_json(e2e_args(&["--mode", mode, "--match", matching, "--semtype-min", "1", "--vocab", &f("toy_vocab.tsv")]));
        assert_eq!(cli, body, "{mode} {matching}");
    }
}

#[test]
fn serve_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    // The environment names a vocabulary that does not exist; the flag wins.
    let mut child = common::cuiwb()
        .args(["serve", "--port", "0", "--vocab", &f("toy_vocab.tsv")])
        .env("CUIWB_VOCAB", "/nonexistent/vocab.tsv")
        .env("CUIWB_STORE", dir.path())
        .env("CUIWB_PORT", "1")
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    std::io::BufRead::read_line(&mut std::io::BufReader::new(child.stdout.take().unwrap()), &mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(line.starts_with("listening on http://127.0.0.1:"), "{line:?}");
    assert!(!line.trim().ends_with(":1"));
    assert!(dir.path().join("config.json").exists());

    // Without the flag the environment is used.
    let out = common::cuiwb()
        .args(["serve"])
        .env("CUIWB_VOCAB", "/nonexistent/vocab.tsv")
        .env("CUIWB_STORE", dir.path())
        .env("CUIWB_PORT", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/vocab.tsv"));
}
