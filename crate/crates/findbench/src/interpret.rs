//! Running interpreters over a dataset.

use std::path::Path;

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use findbench_core::blackbox::{Budget, BoundFunction, Exchange, Session};
use findbench_core::interpret::{
    interpret_numeric, interpret_relation, interpret_string, Interpretation, NoiseVerdict, NumericConfig,
    StringConfig,
};
use findbench_core::modifiers::NoiseKind;
use findbench_core::{Category, FunctionSpec};

use crate::dataset::{read_jsonl, write_jsonl, Dataset, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpreterKind {
    NumericRef,
    StringRef,
    RelationRef,
    /// The reference interpreter matching each function's category.
    Reference,
    /// The manifest's own answer; an oracle for checking the evaluator.
    GroundTruth,
    LmAgent,
}

impl InterpreterKind {
    pub const NAMES: [&'static str; 6] = ["numeric-ref", "string-ref", "relation-ref", "reference", "ground-truth", "lm-agent"];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "numeric-ref" => InterpreterKind::NumericRef,
            "string-ref" => InterpreterKind::StringRef,
            "relation-ref" => InterpreterKind::RelationRef,
            "reference" => InterpreterKind::Reference,
            "ground-truth" => InterpreterKind::GroundTruth,
            "lm-agent" => InterpreterKind::LmAgent,
            _ => return None,
        })
    }

    /// The one category a category-specific interpreter handles.
    pub fn category(self) -> Option<Category> {
        match self {
            InterpreterKind::NumericRef => Some(Category::Numeric),
            InterpreterKind::StringRef => Some(Category::Strings),
            InterpreterKind::RelationRef => Some(Category::Relations),
            _ => None,
        }
    }
}

/// First line of an interpretations or transcripts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub provenance: Provenance,
    pub interpreter: String,
    pub dataset_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Line<T> {
    Header(Header),
    Item(T),
}

pub fn write_with_header<T: Serialize>(path: &Path, header: &Header, items: &[T]) -> Result<()> {
    let lines = std::iter::once(Line::Header(header.clone())).chain(items.iter().map(Line::Item));
    write_jsonl(path, lines)
}

/// Reads a file written by [`write_with_header`]; the header is optional.
pub fn read_with_header<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Option<Header>, Vec<T>)> {
    let lines: Vec<Line<T>> = read_jsonl(path)?;
    let mut header = None;
    let mut items = Vec::new();
    for l in lines {
        match l {
            Line::Header(h) if header.is_none() && items.is_empty() => header = Some(h),
            Line::Header(_) => bail!("{}: header line out of place", path.display()),
            Line::Item(i) => items.push(i),
        }
    }
    Ok((header, items))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub numeric: usize,
    pub strings: usize,
    pub relations: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { numeric: 500, strings: 100, relations: 500 }
    }
}

impl Budgets {
    pub fn uniform(n: usize) -> Self {
        Budgets { numeric: n, strings: n, relations: n }
    }

    pub fn for_category(&self, c: Category) -> usize {
        match c {
            Category::Numeric => self.numeric,
            Category::Strings => self.strings,
            Category::Relations => self.relations,
        }
    }
}

pub fn ground_truth(spec: &FunctionSpec) -> Interpretation {
    let mut i = Interpretation::new(&spec.id, "ground-truth");
    i.description = spec.description.clone();
    i.domain_note = spec.domain_note.clone();
    i.program = Some(spec.ast.clone());
    if let Some(c) = spec.corruption() {
        i.corrupted = c.region();
    }
    i.corrupted_tag = spec.relation().and_then(|r| r.corrupted_tag.clone());
    i.noise = match spec.noise().map(|n| &n.kind) {
        None => NoiseVerdict::None,
        Some(NoiseKind::Normal { .. }) => NoiseVerdict::Normal,
        Some(NoiseKind::Uniform { .. }) => NoiseVerdict::Uniform,
        Some(NoiseKind::Poisson { .. }) => NoiseVerdict::Poisson,
    };
    i
}

/// Runs a reference interpreter (or the oracle) on one function with a nonce-0 session.
pub fn interpret_reference(
    ds: &Dataset,
    func: &BoundFunction,
    kind: InterpreterKind,
    budgets: &Budgets,
) -> Result<(Interpretation, Vec<Exchange>)> {
    let cat = func.spec.category;
    if let Some(c) = kind.category() {
        if c != cat {
            bail!("{} cannot interpret {} function {}", InterpreterKind::NAMES[kind as usize], cat, func.spec.id);
        }
    }
    let mut session = Session::open(func, 0, Budget::evaluations(budgets.for_category(cat)));
    let interp = match kind {
        InterpreterKind::GroundTruth => ground_truth(&func.spec),
        InterpreterKind::LmAgent => bail!("the language-model agent is run through the agent module"),
        _ => match cat {
            Category::Numeric => interpret_numeric(&mut session, &NumericConfig::default()),
            Category::Strings => interpret_string(&mut session, &StringConfig::default()),
            Category::Relations => interpret_relation(&mut session, &ds.tables, &ds.lexicon),
        },
    };
    Ok((interp, session.into_transcript()))
}

/// Selects functions: by interpreter category, optional category filter,
/// optional explicit ids, then at most `limit`.
pub fn select<'a>(
    ds: &'a Dataset,
    kind: InterpreterKind,
    categories: &[Category],
    ids: &[String],
    limit: Option<usize>,
) -> Result<Vec<&'a FunctionSpec>> {
    for id in ids {
        if ds.spec(id).is_none() {
            return Err(anyhow!("function {id:?} is not in the manifest"));
        }
    }
    let chosen: Vec<&FunctionSpec> = ds
        .specs
        .iter()
        .filter(|s| kind.category().is_none_or(|c| c == s.category))
        .filter(|s| categories.is_empty() || categories.contains(&s.category))
        .filter(|s| ids.is_empty() || ids.contains(&s.id))
        .take(limit.unwrap_or(usize::MAX))
        .collect();
    Ok(chosen)
}

/// Interprets `specs` on `jobs` workers; results are in the order of `specs`.
pub fn interpret_all(
    ds: &Dataset,
    specs: &[&FunctionSpec],
    kind: InterpreterKind,
    budgets: &Budgets,
    jobs: usize,
) -> Result<Vec<(Interpretation, Vec<Exchange>)>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    pool.install(|| {
        specs
            .par_iter()
            .map(|s| {
                let f = ds.bind(s)?;
                interpret_reference(ds, &f, kind, budgets)
            })
            .collect()
    })
}
