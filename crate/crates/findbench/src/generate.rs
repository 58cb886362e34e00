//! Dataset generation: sampling, network training and exemplar sets.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;

use findbench_core::blackbox::{format_value, BoundFunction};
use findbench_core::generator::{relation_dataset, sample_numeric_dataset, sample_string_dataset};
use findbench_core::interpret::relations::Lexicon;
use findbench_core::mlp::{self, Mlp, TrainConfig};
use findbench_core::rng::{derive, label, stream};
use findbench_core::words::WORDS;
use findbench_core::{grid, Category, FactTable, FunctionSpec};

use crate::dataset::{counts, Dataset, DatasetMeta, Provenance};

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub categories: Vec<Category>,
    pub numeric_count: usize,
    pub string_count: usize,
    pub seed: u64,
    pub tables: Vec<FactTable>,
    pub lexicon: Lexicon,
    pub train: TrainConfig,
    /// Worker threads for network training; 0 lets the pool decide.
    pub jobs: usize,
}

/// Samples every spec. Numeric ids come first, then strings, then relations.
pub fn sample_specs(cfg: &GenerateConfig) -> Result<Vec<FunctionSpec>> {
    if cfg.categories.is_empty() {
        bail!("no category selected");
    }
    let mut specs = Vec::new();
    for cat in [Category::Numeric, Category::Strings, Category::Relations] {
        if !cfg.categories.contains(&cat) {
            continue;
        }
        let first = specs.len();
        let batch = match cat {
            Category::Numeric => sample_numeric_dataset(cfg.numeric_count, cfg.seed, first)?,
            Category::Strings => sample_string_dataset(cfg.string_count, cfg.seed, first)?,
            Category::Relations => relation_dataset(&cfg.tables, cfg.seed, first)?,
        };
        specs.extend(batch);
    }
    Ok(specs)
}

/// Trains the networks of all approximated specs, in parallel, keyed by id.
pub fn train_networks(specs: &[FunctionSpec], train: &TrainConfig, jobs: usize) -> Result<BTreeMap<String, Mlp>> {
    let todo: Vec<&FunctionSpec> = specs.iter().filter(|s| s.approximation().is_some()).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let nets: Vec<Result<(String, Mlp)>> = pool.install(|| {
        todo.par_iter()
            .map(|s| {
                let (expr, a) = (s.numeric().expect("numeric payload"), s.approximation().expect("approximated"));
                let cfg = TrainConfig { width: a.hidden_width, ..*train };
                let net = mlp::train(expr, a.seed, &cfg).with_context(|| format!("training {}", s.id))?;
                Ok((s.id.clone(), net))
            })
            .collect()
    });
    nets.into_iter().collect()
}

fn numeric_exemplars(f: &BoundFunction, rng: &mut impl Rng) -> Vec<String> {
    let mut xs: Vec<f64> = match &f.spec.test_set {
        findbench_core::TestSet::Grid { extra } if !extra.is_empty() => extra.choose_multiple(rng, 2).copied().collect(),
        _ => Vec::new(),
    };
    while xs.len() < 10 {
        let x = grid::point(rng.random_range(0..grid::LEN));
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs.into_iter().map(format_value).collect()
}

/// Two words the function changes, eight plain words.
fn string_exemplars(f: &BoundFunction, rng: &mut impl Rng) -> Vec<String> {
    let mut pool: Vec<&str> = WORDS.to_vec();
    pool.sort_unstable();
    pool.dedup();
    pool.shuffle(rng);
    let program = f.spec.program().expect("string payload");
    let (related, rest): (Vec<&str>, Vec<&str>) = pool.iter().partition(|w| program.run(w) != **w);
    let mut out: Vec<String> = related.iter().take(2).chain(rest.iter().take(8)).map(|s| s.to_string()).collect();
    out.extend(related.iter().skip(2).take(10 - out.len()).map(|s| s.to_string()));
    out.shuffle(rng);
    out
}

/// Two table keys (from the corrupted tag when there is one), eight words of other input types.
fn relation_exemplars(f: &BoundFunction, lexicon: &Lexicon, rng: &mut impl Rng) -> Vec<String> {
    let (table, spec) = (f.table.as_ref().expect("relation table"), f.spec.relation().expect("relation payload"));
    let keys: Vec<&str> = match spec.corrupted_tag.as_deref().and_then(|t| table.tag_members(t)) {
        Some(m) => m.iter().map(String::as_str).collect(),
        None => table.keys().collect(),
    };
    let mut out: Vec<String> = keys.choose_multiple(rng, 2).map(|s| s.to_string()).collect();
    let mut others: Vec<&String> =
        lexicon.values().flatten().filter(|w| table.lookup(w).is_none() && !out.contains(w)).collect();
    others.sort();
    others.dedup();
    out.extend(others.choose_multiple(rng, 10 - out.len()).map(|s| s.to_string()));
    let extra: Vec<String> = table.keys().filter(|k| !out.iter().any(|o| o == k)).map(str::to_string).collect();
    let room = 10usize.saturating_sub(out.len());
    out.extend(extra.into_iter().take(room));
    out.shuffle(rng);
    out
}

/// Ten fixed probe inputs per function for exemplar-initialized agents.
pub fn exemplars(funcs: &[BoundFunction], lexicon: &Lexicon, seed: u64) -> BTreeMap<String, Vec<String>> {
    funcs
        .iter()
        .map(|f| {
            let mut rng = stream(derive(seed, label(&f.spec.id)), label("exemplars"));
            let list = match f.spec.category {
                Category::Numeric => numeric_exemplars(f, &mut rng),
                Category::Strings => string_exemplars(f, &mut rng),
                Category::Relations => relation_exemplars(f, lexicon, &mut rng),
            };
            (f.spec.id.clone(), list)
        })
        .collect()
}

/// Builds a complete dataset in memory.
pub fn generate(cfg: &GenerateConfig) -> Result<Dataset> {
    let specs = sample_specs(cfg)?;
    let nets = train_networks(&specs, &cfg.train, cfg.jobs)?;
    let used: Vec<FactTable> = if cfg.categories.contains(&Category::Relations) { cfg.tables.clone() } else { Vec::new() };
    let mut ds = Dataset {
        meta: DatasetMeta {
            dataset_id: format!("findbench-{}", cfg.seed),
            provenance: Provenance::new(cfg.seed),
            total: specs.len(),
            counts: counts(&specs),
            tables: used.iter().map(|t| t.name.clone()).collect(),
        },
        specs,
        nets,
        tables: used,
        lexicon: cfg.lexicon.clone(),
        exemplars: BTreeMap::new(),
    };
    let funcs = ds.bind_all()?;
    ds.exemplars = exemplars(&funcs, &ds.lexicon, cfg.seed);
    Ok(ds)
}
