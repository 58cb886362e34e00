//! Scoring interpretations against the manifest and writing reports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use findbench_core::blackbox::{format_value, BoundFunction};
use findbench_core::interpret::Interpretation;
use findbench_core::interval::iou;
use findbench_core::metrics::{
    aggregate, aggregate_key, build_unit_test, exact_match, judge_prompt, nmse, parse_verdict, unit_test, Aggregate,
    Indicator, Judge, RandomJudge, Record, SimulationJudge, UnitTestItem,
};
use findbench_core::rng::{derive, label};
use findbench_core::{grid, Category, FactTable, Payload};

use crate::agent::client::{complete_with_retries, ChatClient, HttpClient, Message, RateLimiter};
use crate::dataset::{Dataset, Provenance};

pub const TRIALS: usize = 10;

/// Stored NMSE values are capped so reports stay valid JSON and means stay finite.
pub const NMSE_CAP: f64 = 1e12;

/// Asks a chat endpoint to pick the matching pair; abstains on failure or no digit.
pub struct EndpointJudge {
    pub client: Box<dyn ChatClient>,
    pub attempts: usize,
    pub delay: Duration,
    pub label: String,
}

impl Judge for EndpointJudge {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn choose(&mut self, description: &str, item: &UnitTestItem) -> Option<usize> {
        let msgs = [Message::user(judge_prompt(description, item))];
        complete_with_retries(self.client.as_mut(), &msgs, self.attempts, self.delay).ok().and_then(|r| parse_verdict(&r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSettings {
    pub url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub rate_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JudgeChoice {
    Simulation,
    Random,
    Endpoint(EndpointSettings),
}

impl JudgeChoice {
    pub fn name(&self) -> String {
        match self {
            JudgeChoice::Simulation => "simulation".into(),
            JudgeChoice::Random => "random".into(),
            JudgeChoice::Endpoint(e) => format!("endpoint:{}", e.model),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub judge: JudgeChoice,
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub dataset_id: String,
    pub judge: String,
    pub records: Vec<Record>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

/// Evaluates a structured program on one raw input, as the black box would print it.
pub fn program_output(program: &Payload, tables: &[FactTable], input: &str) -> Option<String> {
    match program {
        Payload::Numeric(e) => input.trim().parse::<f64>().ok().and_then(|x| e.eval(x)).map(format_value),
        Payload::Strings(p) => p.eval(input).ok(),
        Payload::Relation(r) => tables.iter().find(|t| t.name == r.relation).map(|t| r.eval(t, input)),
    }
}

fn note(parts: &[String]) -> Option<String> {
    (!parts.is_empty()).then(|| parts.join("; "))
}

/// Scores one interpretation with the category's indicators and the unit test.
pub fn score(
    func: &BoundFunction,
    interp: &Interpretation,
    pool: &[BoundFunction],
    tables: &[FactTable],
    judge: &mut dyn Judge,
    trials: usize,
    seed: u64,
) -> Result<Vec<Record>> {
    let spec = &func.spec;
    let program = interp.program.as_ref().filter(|p| p.category() == spec.category);
    let record = |indicator, score: f64, success, note| Record {
        id: spec.id.clone(),
        category: spec.category,
        subcategory: spec.subcategory,
        indicator,
        score,
        success,
        note,
    };
    let mut out = Vec::new();
    match spec.category {
        Category::Numeric => {
            let cand = |x: f64| match program {
                Some(Payload::Numeric(e)) => e.eval(x),
                _ => None,
            };
            let n = nmse(|x| func.base(x), cand).with_context(|| format!("scoring {}", spec.id))?;
            let mut parts = vec![format!("skipped={}", n.skipped)];
            if !(n.value <= NMSE_CAP) {
                parts.push("capped".into());
            }
            if let Some(c) = spec.corruption() {
                parts.push(format!("interval_iou={}", iou(&interp.corrupted, &c.region(), grid::LO, grid::HI)));
            }
            out.push(record(Indicator::Nmse, n.value.min(NMSE_CAP), n.success(), note(&parts)));
        }
        Category::Strings | Category::Relations => {
            let inputs = spec.test_set.inputs();
            let frac = exact_match(inputs, |i| func.respond(i, 0, 0), |i| program.and_then(|p| program_output(p, tables, i)));
            out.push(record(Indicator::ExactMatch, frac, frac == 1.0, None));
        }
    }
    let items = build_unit_test(func, pool, trials, seed)?;
    let run = |i: &str| program.and_then(|p| program_output(p, tables, i));
    let outcome = match judge.name().as_str() {
        "simulation" => {
            let mut sim = SimulationJudge { program: &run, numeric: spec.category == Category::Numeric };
            unit_test(&interp.description, &items, &mut sim)
        }
        _ => unit_test(&interp.description, &items, judge),
    };
    let parts = if outcome.abstained > 0 { vec![format!("abstained={}", outcome.abstained)] } else { Vec::new() };
    out.push(record(Indicator::UnitTest, outcome.score, outcome.success(), note(&parts)));
    Ok(out)
}

fn make_judge(choice: &JudgeChoice, id: &str, seed: u64, limiter: &Option<Arc<RateLimiter>>) -> Box<dyn Judge> {
    match choice {
        JudgeChoice::Random => Box::new(RandomJudge::new(derive(seed, label(id)))),
        JudgeChoice::Endpoint(e) => Box::new(EndpointJudge {
            client: Box::new(HttpClient::new(&e.url, &e.model, 0.0, e.api_key_env.as_deref(), limiter.clone())),
            attempts: 3,
            delay: Duration::from_millis(1000),
            label: format!("endpoint:{}", e.model),
        }),
        JudgeChoice::Simulation => Box::new(Simulation),
    }
}

/// Marker judge: `score` swaps in a simulation judge bound to the interpretation's program.
struct Simulation;

impl Judge for Simulation {
    fn name(&self) -> String {
        "simulation".into()
    }
    fn choose(&mut self, _: &str, _: &UnitTestItem) -> Option<usize> {
        None
    }
}

/// Matches interpretations to the manifest and scores them all.
pub fn evaluate(ds: &Dataset, interps: &[Interpretation], cfg: &EvalConfig) -> Result<Report> {
    if interps.is_empty() {
        bail!("no interpretations to evaluate");
    }
    let mut seen = BTreeSet::new();
    for i in interps {
        if ds.spec(&i.id).is_none() {
            bail!("interpretation {:?} does not match any manifest id", i.id);
        }
        if !seen.insert(i.id.as_str()) {
            bail!("interpretation {:?} appears twice", i.id);
        }
    }
    let pool = ds.bind_all()?;
    let limiter = match &cfg.judge {
        JudgeChoice::Endpoint(e) if e.rate_limit > 0.0 => Some(RateLimiter::new(e.rate_limit)),
        _ => None,
    };
    let workers = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let per: Vec<Result<Vec<Record>>> = workers.install(|| {
        interps
            .par_iter()
            .map(|i| {
                let func = pool.iter().find(|f| f.spec.id == i.id).expect("checked above");
                let mut judge = make_judge(&cfg.judge, &i.id, cfg.seed, &limiter);
                score(func, i, &pool, &ds.tables, judge.as_mut(), cfg.trials, cfg.seed)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in per {
        records.extend(r?);
    }
    records.sort_by(|a, b| a.id.cmp(&b.id).then(a.indicator.cmp(&b.indicator)));
    let aggregates = aggregates_of(&records)?;
    Ok(Report {
        provenance: Provenance::new(cfg.seed),
        dataset_id: ds.meta.dataset_id.clone(),
        judge: cfg.judge.name(),
        records,
        aggregates,
    })
}

pub fn aggregates_of(records: &[Record]) -> Result<BTreeMap<String, Aggregate>> {
    Ok(aggregate(records)?.into_iter().map(|a| (aggregate_key(&a), a)).collect())
}

/// Recomputes aggregates from the records and compares them with the stored ones.
pub fn check_aggregates(report: &Report) -> Result<()> {
    let fresh = aggregates_of(&report.records)?;
    if fresh.len() != report.aggregates.len() {
        bail!("report has {} aggregates, records give {}", report.aggregates.len(), fresh.len());
    }
    for (k, a) in &fresh {
        let stored = report.aggregates.get(k).with_context(|| format!("aggregate {k} is missing"))?;
        let same_mean = (a.mean_score.is_nan() && stored.mean_score.is_nan()) || a.mean_score == stored.mean_score;
        if a.count != stored.count || a.successes != stored.successes || a.rate != stored.rate || !same_mean {
            bail!("aggregate {k} does not match its records");
        }
    }
    Ok(())
}

const INDICATORS: [Indicator; 3] = [Indicator::Nmse, Indicator::ExactMatch, Indicator::UnitTest];

/// Success rates, one row per category and subcategory, one column per indicator.
pub fn table_rows(report: &Report) -> Vec<Vec<String>> {
    let mut rows: BTreeMap<(String, String), BTreeMap<Indicator, (f64, usize)>> = BTreeMap::new();
    for a in report.aggregates.values() {
        let sub = a.subcategory.map_or("all", |s| s.name()).to_string();
        rows.entry((a.category.name().to_string(), sub)).or_default().insert(a.indicator, (a.rate, a.count));
    }
    let mut out = Vec::new();
    for ((cat, sub), cells) in rows {
        let count = cells.values().map(|c| c.1).max().unwrap_or(0);
        let mut row = vec![cat, sub, count.to_string()];
        for ind in INDICATORS {
            row.push(cells.get(&ind).map_or(String::new(), |(r, _)| format!("{r:.4}")));
        }
        out.push(row);
    }
    out
}

pub fn table_header() -> Vec<String> {
    let mut h = vec!["category".to_string(), "subcategory".into(), "functions".into()];
    h.extend(INDICATORS.iter().map(|i| i.name().to_string()));
    h
}

pub fn write_csv(report: &Report, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(table_header())?;
    for row in table_rows(report) {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table for terminals.
pub fn render_table(report: &Report) -> String {
    let header = table_header();
    let rows = table_rows(report);
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let fmt = |r: &[String]| {
        r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = format!("judge: {}  seed: {}\n{}\n", report.judge, report.provenance.seed, fmt(&header));
    for r in &rows {
        out.push_str(&fmt(r));
        out.push('\n');
    }
    out
}
