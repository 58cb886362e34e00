//! Success indicators and their aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blackbox::{format_value, BoundFunction};
use crate::error::{Error, Result};
use crate::grid;
use crate::rng::{derive, label, stream};
use crate::spec::{Category, Subcategory, TestSet};

pub const NMSE_THRESHOLD: f64 = 0.1;
pub const CHANCE: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub value: f64,
    /// Grid points skipped because the truth is undefined there.
    pub skipped: usize,
}

impl Nmse {
    pub fn success(&self) -> bool {
        self.value < NMSE_THRESHOLD
    }
}

/// `E[(f - g)^2] / E[f^2]` over the 513-point grid. Points where the truth
/// is undefined are skipped; where only the candidate is undefined the
/// truth's square is charged.
pub fn nmse(truth: impl Fn(f64) -> Option<f64>, candidate: impl Fn(f64) -> Option<f64>) -> Result<Nmse> {
    let (mut num, mut den, mut skipped) = (0.0, 0.0, 0usize);
    for x in grid::points() {
        let Some(f) = truth(x) else {
            skipped += 1;
            continue;
        };
        let e = match candidate(x) {
            Some(g) if g.is_finite() => f - g,
            _ => f,
        };
        num += e * e;
        den += f * f;
    }
    if skipped == grid::LEN {
        return Err(Error::UndefinedOnGrid);
    }
    let value = if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Nmse { value, skipped })
}

/// Fraction of inputs whose candidate output equals the truth byte for byte.
/// A candidate failure (`None`) counts as a mismatch.
pub fn exact_match<S: AsRef<str>>(
    inputs: &[S],
    truth: impl Fn(&str) -> String,
    candidate: impl Fn(&str) -> Option<String>,
) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    let hits = inputs.iter().filter(|i| candidate(i.as_ref()).is_some_and(|c| c == truth(i.as_ref()))).count();
    hits as f64 / inputs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub input: String,
    pub output: String,
    /// Function the pair was drawn from.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTestItem {
    pub candidates: [Candidate; 3],
    pub truth: usize,
}

impl UnitTestItem {
    /// The item with candidates reordered so that new position `k` holds old `perm[k]`.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let c = &self.candidates;
        let candidates = [c[perm[0]].clone(), c[perm[1]].clone(), c[perm[2]].clone()];
        let truth = perm.iter().position(|&p| p == self.truth).unwrap_or(0);
        UnitTestItem { candidates, truth }
    }
}

/// Inputs for ground-truth unit-test pairs: the string/relation test set,
/// or for numeric functions grid points with two corrupted points first.
fn truth_inputs(func: &BoundFunction, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    match &func.spec.test_set {
        TestSet::Inputs { inputs } => inputs.iter().take(n).cloned().collect(),
        TestSet::Grid { extra } => {
            let mut xs: Vec<f64> = extra.choose_multiple(rng, 2.min(extra.len())).copied().collect();
            while xs.len() < n {
                let x = grid::point(rng.random_range(0..grid::LEN));
                if func.base(x).is_some() && !xs.contains(&x) {
                    xs.push(x);
                }
                if xs.len() < n && (0..grid::LEN).all(|i| func.base(grid::point(i)).is_none()) {
                    break;
                }
            }
            xs.into_iter().map(format_value).collect()
        }
    }
}

fn sample_input(func: &BoundFunction, rng: &mut ChaCha8Rng) -> String {
    match &func.spec.test_set {
        TestSet::Inputs { inputs } => inputs.choose(rng).cloned().unwrap_or_default(),
        TestSet::Grid { .. } => format_value(grid::point(rng.random_range(0..grid::LEN))),
    }
}

/// Builds `trials` items for `target`. Distractors come from other
/// functions in `pool` with the target's category; a distractor pair that the
/// target itself would produce is redrawn.
pub fn build_unit_test(target: &BoundFunction, pool: &[BoundFunction], trials: usize, seed: u64) -> Result<Vec<UnitTestItem>> {
    let others: Vec<&BoundFunction> =
        pool.iter().filter(|f| f.spec.category == target.spec.category && f.spec.id != target.spec.id).collect();
    if others.is_empty() {
        return Err(Error::Invalid(format!("{}: no same-category distractors available", target.spec.id)));
    }
    let mut rng = stream(derive(seed, label(&target.spec.id)), label("unit-test"));
    let inputs = truth_inputs(target, trials, &mut rng);
    let mut items = Vec::with_capacity(trials);
    for (i, input) in inputs.iter().enumerate() {
        let truth = Candidate {
            input: input.clone(),
            output: target.respond(input, 0, i as u64),
            source: target.spec.id.clone(),
        };
        let mut cands = vec![truth];
        let mut attempts = 0;
        while cands.len() < 3 {
            attempts += 1;
            let f = others.choose(&mut rng).copied().unwrap_or(others[0]);
            let x = sample_input(f, &mut rng);
            let out = f.respond(&x, 0, (trials + 2 * i + cands.len()) as u64);
            let consistent = target.respond(&x, 0, i as u64) == out;
            let duplicate = cands.iter().any(|c| c.source == f.spec.id);
            if (consistent || duplicate) && attempts < 64 {
                continue;
            }
            cands.push(Candidate { input: x, output: out, source: f.spec.id.clone() });
        }
        let mut order = [0usize, 1, 2];
        order.shuffle(&mut rng);
        let base = UnitTestItem {
            candidates: [cands[0].clone(), cands[1].clone(), cands[2].clone()],
            truth: 0,
        };
        items.push(base.permuted(order));
    }
    Ok(items)
}

/// A judge picks the candidate matching a description, or abstains.
pub trait Judge {
    fn name(&self) -> String;
    fn choose(&mut self, description: &str, item: &UnitTestItem) -> Option<usize>;
}

/// Executes a structured interpretation on each candidate input and picks
/// the unique candidate whose output it reproduces.
pub struct SimulationJudge<'a> {
    pub program: &'a dyn Fn(&str) -> Option<String>,
    pub numeric: bool,
}

/// Numeric outputs match within 5% of the larger magnitude plus 0.05.
pub fn numeric_outputs_match(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => libm::fabs(x - y) <= 0.05 * (1.0 + libm::fabs(x).max(libm::fabs(y))),
        _ => a == b,
    }
}

impl Judge for SimulationJudge<'_> {
    fn name(&self) -> String {
        "simulation".into()
    }

    fn choose(&mut self, _description: &str, item: &UnitTestItem) -> Option<usize> {
        let mut hit = None;
        for (k, c) in item.candidates.iter().enumerate() {
            let Some(pred) = (self.program)(&c.input) else { continue };
            let ok = if self.numeric { numeric_outputs_match(&pred, &c.output) } else { pred == c.output };
            if ok {
                if hit.is_some() {
                    return None;
                }
                hit = Some(k);
            }
        }
        hit
    }
}

/// Uniform guessing; the chance baseline.
pub struct RandomJudge {
    rng: ChaCha8Rng,
}

impl RandomJudge {
    pub fn new(seed: u64) -> Self {
        RandomJudge { rng: stream(seed, label("random-judge")) }
    }
}

impl Judge for RandomJudge {
    fn name(&self) -> String {
        "random".into()
    }

    fn choose(&mut self, _description: &str, _item: &UnitTestItem) -> Option<usize> {
        Some(self.rng.random_range(0..3))
    }
}

/// Single-turn prompt for a language-model judge.
pub fn judge_prompt(description: &str, item: &UnitTestItem) -> String {
    let mut p = format!(
        "Here is a description of a function:\n{description}\n\n\
         Which of the following input-output pairs was produced by the described function? \
         Answer with the number of the pair (1, 2 or 3).\n"
    );
    for (k, c) in item.candidates.iter().enumerate() {
        p.push_str(&format!("{}. input: {}, output: {}\n", k + 1, c.input, c.output));
    }
    p
}

/// The first digit in a judge reply, as a candidate index; other digits abstain.
pub fn parse_verdict(reply: &str) -> Option<usize> {
    let d = reply.chars().find(char::is_ascii_digit)?;
    match d {
        '1'..='3' => Some(d as usize - '1' as usize),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitTestOutcome {
    pub score: f64,
    pub verdicts: Vec<Option<usize>>,
    /// Items the judge abstained on.
    pub abstained: usize,
}

impl UnitTestOutcome {
    pub fn success(&self) -> bool {
        self.score > CHANCE
    }
}

pub fn unit_test(description: &str, items: &[UnitTestItem], judge: &mut dyn Judge) -> UnitTestOutcome {
    let verdicts: Vec<Option<usize>> = items.iter().map(|it| judge.choose(description, it)).collect();
    let correct = items.iter().zip(&verdicts).filter(|(it, v)| **v == Some(it.truth)).count();
    let abstained = verdicts.iter().filter(|v| v.is_none()).count();
    let score = if items.is_empty() { 0.0 } else { correct as f64 / items.len() as f64 };
    UnitTestOutcome { score, verdicts, abstained }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Nmse,
    ExactMatch,
    UnitTest,
}

impl Indicator {
    pub fn name(self) -> &'static str {
        match self {
            Indicator::Nmse => "nmse",
            Indicator::ExactMatch => "exact_match",
            Indicator::UnitTest => "unit_test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub category: Category,
    pub subcategory: Subcategory,
    pub indicator: Indicator,
    pub score: f64,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub category: Category,
    /// `None` aggregates the whole category.
    pub subcategory: Option<Subcategory>,
    pub indicator: Indicator,
    pub count: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_score: f64,
}

/// Aggregates one cell; all records must share category and indicator.
pub fn aggregate_cell(records: &[&Record], subcategory: Option<Subcategory>) -> Result<Aggregate> {
    let first = records.first().ok_or_else(|| Error::Invalid("empty aggregate cell".into()))?;
    if records.iter().any(|r| r.indicator != first.indicator || r.category != first.category) {
        return Err(Error::Invalid("aggregate cell mixes indicator kinds or categories".into()));
    }
    if let Some(s) = subcategory {
        if records.iter().any(|r| r.subcategory != s) {
            return Err(Error::Invalid("aggregate cell mixes subcategories".into()));
        }
    }
    let count = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let finite: Vec<f64> = records.iter().map(|r| r.score).filter(|s| s.is_finite()).collect();
    Ok(Aggregate {
        category: first.category,
        subcategory,
        indicator: first.indicator,
        count,
        successes,
        rate: successes as f64 / count as f64,
        mean_score: if finite.is_empty() { f64::NAN } else { finite.iter().sum::<f64>() / finite.len() as f64 },
    })
}

/// Success rates per (category, indicator), overall and per subcategory,
/// in a fixed order.
pub fn aggregate(records: &[Record]) -> Result<Vec<Aggregate>> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to aggregate".into()));
    }
    let mut cells: BTreeMap<(Category, Indicator), BTreeMap<Subcategory, Vec<&Record>>> = BTreeMap::new();
    for r in records {
        cells.entry((r.category, r.indicator)).or_default().entry(r.subcategory).or_default().push(r);
    }
    let mut out = Vec::new();
    for subs in cells.values() {
        let all: Vec<&Record> = subs.values().flatten().copied().collect();
        out.push(aggregate_cell(&all, None)?);
        for (sub, rs) in subs {
            out.push(aggregate_cell(rs, Some(*sub))?);
        }
    }
    Ok(out)
}

/// Stable key for an aggregate, e.g. `numeric/all/nmse`.
pub fn aggregate_key(a: &Aggregate) -> String {
    format!("{}/{}/{}", a.category, a.subcategory.map_or("all", Subcategory::name), a.indicator.name())
}
