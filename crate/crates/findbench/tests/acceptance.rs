//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use findbench::agent::client::ScriptedClient;
use findbench::agent::{self, AgentConfig, Mode};
use findbench::cli;
use findbench::data::shipped_tables;
use findbench::dataset::{file_hash, Dataset};
use findbench::evaluate::{self, EvalConfig, JudgeChoice};
use findbench::interpret::{ground_truth, Budgets};
use findbench_core::blackbox::{BoundFunction, Budget, Session, RESPONSE_PREFIX};
use findbench_core::generator::{
    numeric_function, relation_dataset, round_share, sample_numeric_dataset, sample_string_dataset,
};
use findbench_core::interpret::{interpret_numeric, interpret_relation, interpret_string, NumericConfig, StringConfig};
use findbench_core::interval::iou;
use findbench_core::metrics::{build_unit_test, nmse, unit_test, Indicator, RandomJudge};
use findbench_core::mlp::{train, TrainConfig};
use findbench_core::rng::stream;
use findbench_core::{grid, Family, FunctionSpec, NumericExpr, Payload, StringOp, StringProgram, Subcategory};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn bind(spec: &FunctionSpec) -> BoundFunction {
    BoundFunction::new(spec.clone(), None, None).expect("bind")
}

fn counts(specs: &[FunctionSpec]) -> BTreeMap<Subcategory, usize> {
    let mut m = BTreeMap::new();
    for s in specs {
        *m.entry(s.subcategory).or_default() += 1;
    }
    m
}

fn dataset_composition() -> Outcome {
    let numeric = sample_numeric_dataset(1000, 2024, 0).map_err(|e| e.to_string())?;
    let strings = sample_string_dataset(1000, 2024, 1000).map_err(|e| e.to_string())?;
    let n = counts(&numeric);
    let s = counts(&strings);
    let share = round_share(850, 15);
    let get = |m: &BTreeMap<Subcategory, usize>, k| m.get(&k).copied().unwrap_or(0);
    let atomics = get(&n, Subcategory::Atomic) + 3 * share;
    let modifiers_match = numeric.iter().all(|f| match f.subcategory {
        Subcategory::Noisy => f.noise().is_some() && f.corruption().is_none(),
        Subcategory::Corrupted => f.corruption().is_some() && f.noise().is_none(),
        Subcategory::Approximated => f.approximation().is_some(),
        Subcategory::Composed => f.modifiers.is_empty() && matches!(f.numeric(), Some(NumericExpr::Compose(_))),
        Subcategory::Atomic => f.modifiers.is_empty(),
    });
    let ok = share == 128
        && atomics == 850
        && get(&n, Subcategory::Composed) == 150
        && [Subcategory::Noisy, Subcategory::Corrupted, Subcategory::Approximated].iter().all(|k| get(&n, *k) == share)
        && get(&s, Subcategory::Atomic) == 300
        && get(&s, Subcategory::Composed) == 700
        && modifiers_match;
    check(ok, format!("numeric {n:?}, strings {s:?}"))
}

fn metric_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let sub = if i % 2 == 0 { Subcategory::Atomic } else { Subcategory::Composed };
        let spec = numeric_function(77, i, sub);
        let e = spec.numeric().unwrap().clone();
        let same = nmse(|x| e.eval(x), |x| e.eval(x)).map_err(|e| e.to_string())?.value;
        let zero = nmse(|x| e.eval(x), |_| Some(0.0)).map_err(|e| e.to_string())?.value;
        worst = worst.max(same.abs()).max((zero - 1.0).abs());
    }
    let pool: Vec<BoundFunction> = sample_string_dataset(1000, 5, 0).map_err(|e| e.to_string())?.iter().map(bind).collect();
    let mut judge = RandomJudge::new(99);
    let (mut correct, mut items) = (0.0, 0usize);
    for (k, f) in pool.iter().enumerate() {
        let its = build_unit_test(f, &pool, 10, k as u64).map_err(|e| e.to_string())?;
        correct += unit_test("", &its, &mut judge).score * its.len() as f64;
        items += its.len();
    }
    let rate = correct / items as f64;
    check(
        worst <= 1e-12 && items == 10_000 && (rate - 1.0 / 3.0).abs() <= 0.02,
        format!("max identity error {worst:.1e}; random judge {rate:.4} over {items} items"),
    )
}

fn golden_exec() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Case {
        target: String,
        inputs: Vec<String>,
        expected: String,
    }
    let text = std::fs::read_to_string(fixtures().join("exec_golden.json")).map_err(|e| e.to_string())?;
    let cases: Vec<Case> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let dir = fixtures().join("golden");
    let mut bad = 0;
    for c in &cases {
        match cli::exec_line(&dir, &c.target, &c.inputs, 0) {
            Ok(line) if line == c.expected => {}
            _ => bad += 1,
        }
    }
    check(cases.len() == 30 && bad == 0, format!("{} of {} cases match", cases.len() - bad, cases.len()))
}

fn skyline() -> Outcome {
    let specs = sample_numeric_dataset(1000, 404, 0).map_err(|e| e.to_string())?;
    let clean: Vec<&FunctionSpec> = specs
        .iter()
        .filter(|s| matches!(s.subcategory, Subcategory::Atomic | Subcategory::Composed))
        .take(200)
        .collect();
    let mut hits = 0;
    let mut max_evals = 0;
    for s in &clean {
        let f = bind(s);
        let mut session = Session::open(&f, 0, Budget::evaluations(500));
        let i = interpret_numeric(&mut session, &NumericConfig::default());
        max_evals = max_evals.max(i.evaluations);
        let cand = |x: f64| match &i.program {
            Some(Payload::Numeric(e)) => e.eval(x),
            _ => None,
        };
        if nmse(|x| f.base(x), cand).is_ok_and(|n| n.success()) {
            hits += 1;
        }
    }
    let numeric_rate = hits as f64 / clean.len() as f64;

    let corrupted: Vec<&FunctionSpec> = specs.iter().filter(|s| s.subcategory == Subcategory::Corrupted).take(60).collect();
    let mut good_iou = 0;
    for s in &corrupted {
        let f = bind(s);
        let mut session = Session::open(&f, 0, Budget::evaluations(500));
        let i = interpret_numeric(&mut session, &NumericConfig::default());
        max_evals = max_evals.max(i.evaluations);
        if iou(&i.corrupted, &s.corruption().unwrap().region(), grid::LO, grid::HI) >= 0.5 {
            good_iou += 1;
        }
    }
    let iou_rate = good_iou as f64 / corrupted.len() as f64;

    let strings = sample_string_dataset(300, 404, 0).map_err(|e| e.to_string())?;
    let mut by_sub: BTreeMap<Subcategory, (usize, usize)> = BTreeMap::new();
    for s in &strings {
        let f = bind(s);
        let mut session = Session::open(&f, 0, Budget::evaluations(100));
        let i = interpret_string(&mut session, &StringConfig::default());
        let ok = s.test_set.inputs().iter().all(|x| {
            let got = match &i.program {
                Some(Payload::Strings(p)) => p.eval(x).ok(),
                _ => None,
            };
            got.as_deref() == Some(f.respond(x, 0, 0).as_str())
        });
        let e = by_sub.entry(s.subcategory).or_default();
        e.0 += usize::from(ok);
        e.1 += 1;
    }
    let rate = |k| by_sub.get(&k).map_or(0.0, |(a, n)| *a as f64 / *n as f64);
    let (atomic, composed) = (rate(Subcategory::Atomic), rate(Subcategory::Composed));
    check(
        numeric_rate >= 0.9 && iou_rate >= 0.8 && atomic >= 0.95 && composed >= 0.7 && max_evals <= 500,
        format!(
            "numeric NMSE<0.1 {numeric_rate:.3} (n={}); IoU>=0.5 {iou_rate:.3} (n={}); strings atomic {atomic:.3}, composed {composed:.3}; max evaluations {max_evals}",
            clean.len(),
            corrupted.len()
        ),
    )
}

/// Every atomic op the generator can emit, over its full parameter ranges.
fn op_universe() -> Vec<StringOp> {
    let letters: Vec<char> = ('a'..='z').collect();
    let mut affixes: Vec<String> = letters.iter().map(|c| c.to_string()).collect();
    for a in &letters {
        for b in &letters {
            affixes.push(format!("{a}{b}"));
        }
    }
    let mut ops: Vec<StringOp> = StringOp::NULLARY.to_vec();
    for a in &affixes {
        ops.push(StringOp::Concatenate { suffix: a.clone() });
        ops.push(StringOp::Prepend { prefix: a.clone() });
    }
    for &from in &letters {
        for &to in &letters {
            if from != to {
                ops.push(StringOp::Replace { from, to });
            }
        }
    }
    ops.extend((1..=3).map(|k| StringOp::RotateLeft { k }));
    ops
}

/// Longer affixes come from windows of the observed outputs, where two
/// merged appends leave their text.
fn with_observed_affixes(base: &[StringOp], obs: &[(String, String)]) -> Vec<StringOp> {
    let mut extra: BTreeSet<String> = BTreeSet::new();
    for (_, o) in obs {
        let chars: Vec<char> = o.chars().collect();
        for len in 3..=4 {
            for w in chars.windows(len) {
                extra.insert(w.iter().collect());
            }
        }
    }
    let mut ops = base.to_vec();
    for a in extra {
        ops.push(StringOp::Concatenate { suffix: a.clone() });
        ops.push(StringOp::Prepend { prefix: a });
    }
    ops
}

fn pairs_of(line: &str) -> Vec<(String, String)> {
    let body = line.strip_prefix(RESPONSE_PREFIX).unwrap_or(line);
    body.trim_start_matches('(')
        .trim_end_matches(')')
        .split(")(")
        .filter_map(|p| p.split_once(", "))
        .map(|(i, o)| (i.to_string(), o.to_string()))
        .collect()
}

/// All depth-1 and depth-2 programs over `ops` consistent with `obs`.
fn consistent(ops: &[StringOp], obs: &[(String, String)]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let (first_in, first_out) = &obs[0];
    let fits = |p: &StringProgram| obs.iter().all(|(i, o)| p.run(i) == *o);
    // Group first ops by what they do to the first input.
    let mut by_mid: BTreeMap<String, Vec<&StringOp>> = BTreeMap::new();
    for a in ops {
        let mid = a.apply(first_in);
        if mid == *first_out {
            let p = StringProgram { ops: vec![a.clone()] };
            if fits(&p) {
                out.insert(p.to_string());
            }
        }
        by_mid.entry(mid).or_default().push(a);
    }
    for (mid, firsts) in &by_mid {
        for b in ops {
            if b.apply(mid) != *first_out {
                continue;
            }
            for a in firsts {
                let p = StringProgram { ops: vec![(*a).clone(), b.clone()] };
                if fits(&p) {
                    out.insert(p.to_string());
                }
            }
        }
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let ops = op_universe();
    let specs = sample_string_dataset(100, 505, 0).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    for s in &specs {
        let f = bind(s);
        let mut session = Session::open(&f, 0, Budget::evaluations(100));
        let i = interpret_string(&mut session, &StringConfig::default());
        let obs: Vec<(String, String)> = session.into_transcript().iter().flat_map(|e| pairs_of(&e.output)).collect();
        let answer = match &i.program {
            Some(Payload::Strings(p)) => p.to_string(),
            _ => {
                bad.push(format!("{}: no answer", s.id));
                continue;
            }
        };
        if obs.is_empty() || !consistent(&with_observed_affixes(&ops, &obs), &obs).contains(&answer) {
            bad.push(format!("{}: {answer} not among the consistent programs", s.id));
        }
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{} functions", specs.len()) } else { bad.join("; ") })
}

fn harness_soundness() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds_dir = tmp.path().join("ds");
    let mut sink = Vec::new();
    let code = cli::run(
        ["findbench", "generate", "--out", ds_dir.to_str().unwrap(), "--category", "strings", "--category", "relations", "--count", "100", "--seed", "606"],
        &mut sink,
    );
    if code != 0 {
        return Err(format!("generate exited {code}"));
    }
    let ds = Dataset::read(&ds_dir).map_err(|e| e.to_string())?;
    let interps: Vec<_> = ds.specs.iter().map(ground_truth).collect();
    let cfg = EvalConfig { judge: JudgeChoice::Simulation, trials: 10, seed: 1, jobs: 0 };
    let report = evaluate::evaluate(&ds, &interps, &cfg).map_err(|e| e.to_string())?;
    let unit: Vec<_> = report.records.iter().filter(|r| r.indicator == Indicator::UnitTest).collect();
    let perfect = unit.iter().filter(|r| r.score == 1.0).count();
    check(
        perfect == unit.len() && unit.len() == ds.specs.len(),
        format!("{perfect} of {} string and relation functions score 1.0", unit.len()),
    )
}

fn relation_corruption() -> Outcome {
    let tables = shipped_tables();
    let lexicon = findbench::data::shipped_lexicon();
    let specs = relation_dataset(&tables, 707, 0).map_err(|e| e.to_string())?;
    let mut total = 0;
    let mut bad = Vec::new();
    for s in specs.iter().filter(|s| s.subcategory == Subcategory::Corrupted) {
        total += 1;
        let rel = s.relation().unwrap();
        let table = tables.iter().find(|t| t.name == rel.relation).unwrap();
        let f = BoundFunction::new(s.clone(), None, Some(table.clone())).map_err(|e| e.to_string())?;
        let mut session = Session::open(&f, 0, Budget::evaluations(Budgets::default().relations));
        let i = interpret_relation(&mut session, &tables, &lexicon);
        if i.corrupted_tag != rel.corrupted_tag {
            bad.push(format!("{} {:?} -> {:?}", rel.relation, rel.corrupted_tag, i.corrupted_tag));
        }
    }
    check(total > 0 && bad.is_empty(), format!("{} of {total} tags named; {}", total - bad.len(), bad.join("; ")))
}

fn mlp_quality() -> Outcome {
    let excluded = [Family::Tan, Family::Reciprocal, Family::Rational];
    let families: Vec<Family> = Family::ATOMIC.iter().copied().filter(|f| !excluded.contains(f)).collect();
    let mut good = 0;
    let mut slowest: f64 = 0.0;
    for (i, fam) in families.iter().enumerate() {
        let mut rng = stream(808, i as u64);
        let expr = NumericExpr::Atom(findbench_core::generator::sample_atom(*fam, &mut rng));
        let start = Instant::now();
        let net = train(&expr, i as u64, &TrainConfig::default()).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        good += usize::from(net.train_nmse < 0.05);
    }
    let rate = good as f64 / families.len() as f64;
    check(
        rate >= 0.8 && slowest < 30.0,
        format!("{good} of {} families below 0.05; slowest {slowest:.1}s", families.len()),
    )
}

fn pipeline(root: &Path, jobs: &str) -> Result<Vec<String>, String> {
    let p = |n: &str| root.join(n).to_string_lossy().into_owned();
    let steps: [Vec<String>; 3] = [
        ["generate", "--out", &p("ds"), "--category", "all", "--numeric-count", "6", "--string-count", "10", "--seed", "909", "--jobs", jobs]
            .map(String::from)
            .to_vec(),
        ["interpret", "--dataset", &p("ds"), "--interpreter", "reference", "--out", &p("i.jsonl"), "--transcripts", &p("t.jsonl"), "--jobs", jobs]
            .map(String::from)
            .to_vec(),
        ["evaluate", "--dataset", &p("ds"), "--interpretations", &p("i.jsonl"), "--out", &p("r.json"), "--csv", &p("r.csv"), "--jobs", jobs]
            .map(String::from)
            .to_vec(),
    ];
    for step in steps {
        let mut args = vec!["findbench".to_string()];
        args.extend(step);
        let code = cli::run(args, &mut Vec::new());
        if code != 0 {
            return Err(format!("step exited {code}"));
        }
    }
    ["ds/manifest.jsonl", "ds/dataset.json", "i.jsonl", "t.jsonl", "r.json", "r.csv"]
        .iter()
        .map(|f| file_hash(&root.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn reproducibility() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let ha = pipeline(a.path(), "1")?;
    let hb = pipeline(b.path(), "4")?;
    let weights_a = findbench::dataset::tree_hash(&a.path().join("ds")).map_err(|e| e.to_string())?;
    let weights_b = findbench::dataset::tree_hash(&b.path().join("ds")).map_err(|e| e.to_string())?;
    check(ha == hb && weights_a == weights_b, format!("{} files and the dataset tree compared", ha.len()))
}

fn agent_conformance() -> Outcome {
    #[derive(serde::Deserialize)]
    struct Expect {
        commands: Vec<Vec<String>>,
        description: Option<String>,
        domain: Option<String>,
        code: Option<String>,
    }
    #[derive(serde::Deserialize)]
    struct Dialogue {
        function: String,
        mode: Mode,
        replies: Vec<String>,
        fail_after: Option<usize>,
        max_turns: usize,
        expect: Expect,
    }
    let text = std::fs::read_to_string(fixtures().join("dialogues.json")).map_err(|e| e.to_string())?;
    let dialogues: Vec<Dialogue> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let ds = Dataset::read(&fixtures().join("golden")).map_err(|e| e.to_string())?;
    let mut bad = 0;
    for d in &dialogues {
        let func = ds.bind_id(&d.function).map_err(|e| e.to_string())?;
        let mut replies: Vec<Result<String, String>> = d.replies.iter().cloned().map(Ok).collect();
        if let Some(n) = d.fail_after {
            replies.truncate(n);
        }
        let mut client = ScriptedClient::with_results(replies);
        let cfg = AgentConfig { mode: d.mode, max_turns: d.max_turns, retry_delay_ms: 0, ..AgentConfig::default() };
        let t = agent::run_agent(&cfg, &mut client, &func, ds.exemplars.get(&d.function).map(Vec::as_slice))
            .map_err(|e| e.to_string())?;
        let ran: Vec<Vec<String>> = t.commands.iter().map(|c| c.inputs.clone()).collect();
        let replayed = agent::replay(&t, &func, cfg.budget).map_err(|e| e.to_string())?;
        let ok = ran == d.expect.commands
            && replayed == agent::recorded_responses(&t)
            && t.sections.description == d.expect.description
            && t.sections.domain == d.expect.domain
            && t.sections.code == d.expect.code;
        bad += usize::from(!ok);
    }
    check(
        dialogues.len() >= 10 && bad == 0,
        format!("{} of {} dialogues conform", dialogues.len() - bad, dialogues.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dataset composition", dataset_composition),
        ("metric identities", metric_identities),
        ("exec golden files", golden_exec),
        ("reference-interpreter skyline", skyline),
        ("string oracle equivalence", oracle_equivalence),
        ("unit-test harness soundness", harness_soundness),
        ("relation corruption detection", relation_corruption),
        ("MLP approximation quality", mlp_quality),
        ("reproducibility", reproducibility),
        ("agent protocol conformance", agent_conformance),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate().map(|(i, c)| (i + 1, c)) {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
