mod common;

use std::path::Path;

use findbench::cli::{self, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use findbench::dataset::tree_hash;
use findbench::evaluate::Report;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["findbench"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path) {
    let (code, out) = run(&[
        "generate", "--out", s(dir), "--category", "numeric", "--category", "strings", "--category", "relations",
        "--numeric-count", "5", "--string-count", "6", "--seed", "3",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
}

#[test]
fn generate_reports_counts_and_validates_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let (code, out) = run(&["generate", "--out", s(&ds), "--category", "strings", "--count", "10", "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("wrote 10 functions"), "{out}");
    assert!(out.contains("strings: atomic 3, composed 7"), "{out}");

    assert_eq!(run(&["generate", "--out", s(&ds), "--category", "strings", "--count", "10"]).0, EXIT_USAGE);
    assert_eq!(run(&["generate", "--out", s(&ds), "--category", "strings", "--count", "10", "--force"]).0, EXIT_OK);
    let other = tmp.path().join("x");
    assert_eq!(run(&["generate", "--out", s(&other), "--category", "strings", "--count", "0"]).0, EXIT_USAGE);
    assert_eq!(run(&["generate", "--out", s(&other), "--category", "colours", "--count", "3"]).0, EXIT_USAGE);
    assert_eq!(run(&["generate", "--out", s(&other), "--category", "strings"]).0, EXIT_USAGE);
    assert_eq!(run(&["generate", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\ncount = 5\ncategories = [\"strings\"]\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    assert_eq!(run(&["generate", "--config", s(&cfg), "--out", s(&a)]).0, EXIT_OK);
    assert_eq!(run(&["generate", "--out", s(&b), "--category", "strings", "--count", "5", "--seed", "9"]).0, EXIT_OK);
    assert_eq!(tree_hash(&a).unwrap(), tree_hash(&b).unwrap());
    let (_, out) = run(&["generate", "--config", s(&cfg), "--out", s(&c), "--count", "7"]);
    assert!(out.contains("wrote 7 functions"), "{out}");

    std::fs::write(&cfg, "sede = 9\n").unwrap();
    assert_eq!(run(&["generate", "--config", s(&cfg), "--out", s(&tmp.path().join("d"))]).0, EXIT_USAGE);
}

#[test]
fn reference_pipeline_writes_interpretations_and_a_checkable_report() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    let interps = tmp.path().join("i.jsonl");
    let trans = tmp.path().join("t.jsonl");
    let (code, out) = run(&[
        "interpret", "--dataset", s(&ds), "--interpreter", "reference", "--out", s(&interps), "--transcripts", s(&trans),
        "--category", "strings", "--category", "relations",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let report = tmp.path().join("r.json");
    let csv = tmp.path().join("r.csv");
    let (code, table) =
        run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&interps), "--out", s(&report), "--csv", s(&csv)]);
    assert_eq!(code, EXIT_OK, "{table}");
    assert!(table.contains("exact_match"));
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("category,subcategory,functions,nmse,exact_match,unit_test"));
    assert!(csv_text.lines().any(|l| l.starts_with("strings,all,6,")), "{csv_text}");

    let (code, again) = run(&["report", "--report", s(&report)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(again, table);

    // Tampering with a stored aggregate is caught.
    let mut r: Report = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    r.aggregates.values_mut().next().unwrap().successes += 1;
    std::fs::write(&report, serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(run(&["report", "--report", s(&report)]).0, EXIT_FAILURE);
}

#[test]
fn interpreter_and_category_mismatches_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    let out = tmp.path().join("i.jsonl");
    let base = ["interpret", "--dataset", s(&ds), "--out", s(&out)];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        run(&v).0
    };
    assert_eq!(with(&["--interpreter", "oracle"]), EXIT_USAGE);
    assert_eq!(with(&["--interpreter", "lm-agent"]), EXIT_USAGE);
    assert_eq!(with(&["--interpreter", "string-ref", "--id", "f99999"]), EXIT_USAGE);
    assert_eq!(with(&["--interpreter", "string-ref", "--budget", "0"]), EXIT_USAGE);
    assert_eq!(with(&["--interpreter", "string-ref", "--limit", "2"]), EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3, "header plus two interpretations");
}

#[test]
fn evaluation_rejects_foreign_or_duplicate_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    let interps = tmp.path().join("i.jsonl");
    assert_eq!(
        run(&["interpret", "--dataset", s(&ds), "--interpreter", "ground-truth", "--out", s(&interps), "--limit", "3"]).0,
        EXIT_OK
    );
    let mut lines: Vec<String> = std::fs::read_to_string(&interps).unwrap().lines().map(String::from).collect();
    lines.push(lines[1].clone());
    let dup = tmp.path().join("dup.jsonl");
    std::fs::write(&dup, lines.join("\n")).unwrap();
    let r = tmp.path().join("r.json");
    assert_eq!(run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&dup), "--out", s(&r)]).0, EXIT_FAILURE);
    let foreign = tmp.path().join("foreign.jsonl");
    std::fs::write(&foreign, lines[1].replace("\"f00000\"", "\"f77777\"")).unwrap();
    assert_eq!(run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&foreign), "--out", s(&r)]).0, EXIT_FAILURE);
    let empty = tmp.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&empty), "--out", s(&r)]).0, EXIT_FAILURE);
    assert_eq!(
        run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&interps), "--out", s(&r), "--judge", "oracle"]).0,
        EXIT_USAGE
    );
}

#[test]
fn lm_agent_runs_against_a_stub_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    // Probe once, then answer.
    let stub = common::serve(|body| {
        let n = body["messages"].as_array().map_or(0, |m| m.len());
        if n <= 2 {
            (200, "COMMAND: PYTHON(./temp/function.py hello 3 France)".into())
        } else {
            (200, "[DESCRIPTION]: something\n[DOMAIN]: none\n[CODE]: (reverse)".into())
        }
    });
    let interps = tmp.path().join("i.jsonl");
    let trans = tmp.path().join("t.jsonl");
    let (code, out) = run(&[
        "agent", "--dataset", s(&ds), "--transcripts", s(&trans), "--out", s(&interps), "--endpoint", &stub.url,
        "--model", "stub", "--category", "strings", "--rate-limit", "100",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("wrote 6 transcripts") && out.contains("(0 partial)"), "{out}");
    assert_eq!(stub.bodies.lock().unwrap().len(), 12);
    let (code, out) = run(&["agent", "--replay", "--dataset", s(&ds), "--transcripts", s(&trans)]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("0 differ"));

    let report = tmp.path().join("r.json");
    assert_eq!(run(&["evaluate", "--dataset", s(&ds), "--interpretations", s(&interps), "--out", s(&report)]).0, EXIT_OK);

    // A broken endpoint still completes the run, with partial transcripts.
    let (code, out) = run(&[
        "interpret", "--dataset", s(&ds), "--interpreter", "lm-agent", "--out", s(&interps), "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions", "--model", "stub", "--limit", "1",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let text = std::fs::read_to_string(&interps).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("\"partial\":true"), "{text}");
}

#[test]
fn endpoint_judge_uses_the_first_digit_of_the_reply() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    let interps = tmp.path().join("i.jsonl");
    run(&["interpret", "--dataset", s(&ds), "--interpreter", "ground-truth", "--out", s(&interps), "--category", "strings"]);
    let stub = common::serve(|_| (200, "The answer is 2.".into()));
    let report = tmp.path().join("r.json");
    let (code, out) = run(&[
        "evaluate", "--dataset", s(&ds), "--interpretations", s(&interps), "--out", s(&report), "--judge", "endpoint",
        "--endpoint", &stub.url, "--model", "judge", "--trials", "8",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    let r: Report = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.judge, "endpoint:judge");
    assert_eq!(stub.bodies.lock().unwrap().len(), 6 * 8);
    let prompt = common::last_user(&stub.bodies.lock().unwrap()[0]);
    assert!(prompt.contains("1.") && prompt.contains("3."), "{prompt}");
    // Always answering 2 lands on the truth about a third of the time.
    let ut: Vec<f64> = r.records.iter().filter(|x| x.indicator.name() == "unit_test").map(|x| x.score).collect();
    let mean = ut.iter().sum::<f64>() / ut.len() as f64;
    assert!(mean > 0.1 && mean < 0.6, "{mean}");
}

#[test]
fn exemplar_files_are_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"f00000": ["a", "b"]}"#).unwrap();
    assert!(findbench::agent::load_exemplars(&bad).is_err());
    let empty = tmp.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    assert!(findbench::agent::load_exemplars(&empty).unwrap().is_empty());
    let good = tmp.path().join("good.json");
    let ten: Vec<String> = (0..10).map(|i| i.to_string()).collect();
    std::fs::write(&good, serde_json::json!({ "f00001": ten }).to_string()).unwrap();
    assert_eq!(findbench::agent::load_exemplars(&good).unwrap()["f00001"].len(), 10);

    // An exemplar mode with an empty set is a startup error.
    let ds = tmp.path().join("ds");
    small_dataset(&ds);
    let (code, _) = run(&[
        "agent", "--dataset", s(&ds), "--transcripts", s(&tmp.path().join("t.jsonl")), "--endpoint", "http://127.0.0.1:9/",
        "--model", "m", "--mode", "milan", "--exemplars", s(&empty),
    ]);
    assert_eq!(code, EXIT_USAGE);
}
