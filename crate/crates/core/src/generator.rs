//! Seeded sampling of benchmark functions and their test sets.
//!
//! Every function draws from its own stream derived from
//! `(dataset seed, global index)`, so functions can be generated in any
//! order or in parallel and still come out identical.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid;
use crate::interval::Interval;
use crate::modifiers::{
    ApproximationRef, CorruptionSpec, Modifier, NoiseKind, NoiseSpec, Polarity, CORRUPTION_VARIANCE,
};
use crate::numeric::{Atom, ComposeOp, Family, NumericExpr, Shape};
use crate::relations::{FactTable, RelationSpec};
use crate::rng::{derive, label, stream};
use crate::spec::{describe, Category, FunctionSpec, Payload, Subcategory, TestSet};
use crate::strings::{StringOp, StringProgram};
use crate::words::{PROBES, WORDS};

/// `round(count * percent / 100)` with halves rounded up.
pub fn round_share(count: usize, percent: usize) -> usize {
    (count * percent + 50) / 100
}

/// Class sizes for a numeric dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NumericPlan {
    pub composed: usize,
    pub noisy: usize,
    pub corrupted: usize,
    pub approximated: usize,
    /// Plain atomics: the remainder.
    pub atomic: usize,
}

impl NumericPlan {
    pub const MIN_COUNT: usize = 5;

    pub fn new(count: usize) -> Result<Self> {
        let composed = round_share(count, 15);
        let atomics = count - composed;
        let each = round_share(atomics, 15);
        if composed == 0 || each == 0 {
            return Err(Error::CountTooSmall { count, minimum: Self::MIN_COUNT });
        }
        Ok(NumericPlan { composed, noisy: each, corrupted: each, approximated: each, atomic: atomics - 3 * each })
    }

    pub fn atomics(&self) -> usize {
        self.atomic + self.noisy + self.corrupted + self.approximated
    }
}

/// Class sizes for a string dataset: `(atomic, composed)`.
pub fn string_plan(count: usize) -> Result<(usize, usize)> {
    let atomic = round_share(count, 30);
    if atomic == 0 || atomic == count {
        return Err(Error::CountTooSmall { count, minimum: 2 });
    }
    Ok((atomic, count - atomic))
}

pub fn function_id(index: usize) -> String {
    format!("f{index:05}")
}

/// Seeded assignment of subcategories to `count` numeric slots.
pub fn numeric_slots(count: usize, seed: u64) -> Result<Vec<Subcategory>> {
    let plan = NumericPlan::new(count)?;
    let mut slots = Vec::with_capacity(count);
    for (sub, n) in [
        (Subcategory::Composed, plan.composed),
        (Subcategory::Noisy, plan.noisy),
        (Subcategory::Corrupted, plan.corrupted),
        (Subcategory::Approximated, plan.approximated),
        (Subcategory::Atomic, plan.atomic),
    ] {
        slots.extend(core::iter::repeat_n(sub, n));
    }
    slots.shuffle(&mut stream(seed, label("numeric-slots")));
    Ok(slots)
}

pub fn string_slots(count: usize, seed: u64) -> Result<Vec<Subcategory>> {
    let (atomic, composed) = string_plan(count)?;
    let mut slots = vec![Subcategory::Atomic; atomic];
    slots.extend(core::iter::repeat_n(Subcategory::Composed, composed));
    slots.shuffle(&mut stream(seed, label("string-slots")));
    Ok(slots)
}

fn snap(v: f64, step: f64) -> f64 {
    let k = libm::round(v / step);
    // Dividing by the reciprocal keeps one-decimal values at their nearest double.
    k / libm::round(1.0 / step)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, step: f64) -> f64 {
    snap(rng.random_range(lo..=hi), step)
}

fn nonzero_int(rng: &mut ChaCha8Rng) -> f64 {
    let v: i32 = rng.random_range(1..=30);
    f64::from(if rng.random::<bool>() { v } else { -v })
}

fn int(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.random_range(-30..=30i32))
}

/// Samples native parameters for `family`.
pub fn sample_shape(family: Family, rng: &mut ChaCha8Rng) -> Shape {
    match family {
        Family::Linear => Shape::Linear,
        Family::Polynomial => {
            let degree = rng.random_range(2..=5usize);
            let mut coeffs: Vec<f64> = (0..=degree).map(|_| uniform(rng, -5.0, 5.0, 0.1)).collect();
            while coeffs[degree] == 0.0 {
                coeffs[degree] = uniform(rng, -5.0, 5.0, 0.1);
            }
            Shape::Polynomial { coeffs }
        }
        Family::Absolute => Shape::Absolute,
        Family::Root => Shape::Root { degree: rng.random_range(2..=3) },
        Family::Logarithm => Shape::Logarithm,
        Family::Step => Shape::Step { threshold: uniform(rng, -50.0, 50.0, 0.1) },
        Family::Relu => {
            let leak = if rng.random::<bool>() { 0.0 } else { f64::from(rng.random_range(1..=5u8)) / 10.0 };
            Shape::Relu { leak }
        }
        Family::Sigmoid => Shape::Sigmoid { center: uniform(rng, -50.0, 50.0, 0.1), width: uniform(rng, 1.0, 10.0, 0.1) },
        Family::Tanh => Shape::Tanh { center: uniform(rng, -50.0, 50.0, 0.1), width: uniform(rng, 1.0, 10.0, 0.1) },
        Family::Erf => Shape::Erf { center: uniform(rng, -50.0, 50.0, 0.1), width: uniform(rng, 1.0, 10.0, 0.1) },
        Family::Constant => Shape::Constant,
        Family::Power => Shape::Power { exponent: *[2.0, 3.0, 4.0, 0.5, 1.5].choose(rng).unwrap_or(&2.0) },
        Family::Sin | Family::Cos | Family::Tan | Family::SquareWave => {
            let period = uniform(rng, 5.0, 50.0, 0.1);
            let phase = snap(rng.random_range(0.0..period), 0.1);
            let phase = if phase >= period { 0.0 } else { phase };
            match family {
                Family::Sin => Shape::Sin { period, phase },
                Family::Cos => Shape::Cos { period, phase },
                Family::Tan => Shape::Tan { period, phase },
                _ => Shape::SquareWave { period, phase },
            }
        }
        Family::Reciprocal => Shape::Reciprocal,
        Family::Gaussian => Shape::Gaussian { mean: uniform(rng, -50.0, 50.0, 0.1), std_dev: uniform(rng, 2.0, 20.0, 0.1) },
        Family::StudentT => Shape::StudentT {
            dof: f64::from(rng.random_range(1..=5u8)),
            center: uniform(rng, -50.0, 50.0, 0.1),
            width: uniform(rng, 2.0, 20.0, 0.1),
        },
        Family::Rational => {
            let n0 = f64::from(rng.random_range(-5..=5i32));
            let mut d0 = f64::from(rng.random_range(-20..=20i32));
            while d0 == n0 {
                d0 = f64::from(rng.random_range(-20..=20i32));
            }
            Shape::Rational { numerator: vec![n0, 1.0], denominator: vec![d0, 1.0] }
        }
        Family::Rectangle => Shape::Rectangle { start: uniform(rng, -60.0, 40.0, 0.1), width: uniform(rng, 5.0, 60.0, 0.1) },
        Family::Exponential => {
            let r = uniform(rng, 0.01, 0.05, 0.001);
            Shape::Exponential { rate: if rng.random::<bool>() { r } else { -r } }
        }
        Family::Ceiling => Shape::Ceiling,
        Family::Floor => Shape::Floor,
    }
}

/// Samples an atom of `family` with integer scale and bias in [-30, 30].
pub fn sample_atom(family: Family, rng: &mut ChaCha8Rng) -> Atom {
    let shape = sample_shape(family, rng);
    match family {
        Family::Constant => return Atom::constant(nonzero_int(rng)),
        // Coefficients already carry the scale, as in the published samples.
        Family::Polynomial => return Atom::new(shape, 1.0, 0.0),
        _ => {}
    }
    let scale = nonzero_int(rng);
    Atom::new(shape, scale, int(rng))
}

pub fn sample_composition(rng: &mut ChaCha8Rng) -> NumericExpr {
    let left = sample_atom(*Family::COMPOSABLE.choose(rng).unwrap_or(&Family::Linear), rng);
    let right = sample_atom(*Family::COMPOSABLE.choose(rng).unwrap_or(&Family::Linear), rng);
    let op = if rng.random::<bool>() { ComposeOp::Sum } else { ComposeOp::Product };
    NumericExpr::compose(op, left, right)
}

/// Mean of `expr` over the evaluation grid, skipping undefined points.
pub fn grid_mean(expr: &NumericExpr) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in grid::points() {
        if let Some(y) = expr.eval(x) {
            sum += y;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn sample_noise(rng: &mut ChaCha8Rng, seed: u64) -> NoiseSpec {
    let kind = match rng.random_range(0..3u8) {
        0 => NoiseKind::Normal { sigma: uniform(rng, 0.5, 5.0, 0.1) },
        1 => NoiseKind::Uniform { half_width: uniform(rng, 0.5, 5.0, 0.1) },
        _ => NoiseKind::Poisson { rate: uniform(rng, 1.0, 10.0, 0.1) },
    };
    NoiseSpec { kind, seed }
}

pub fn sample_corruption(rng: &mut ChaCha8Rng, expr: &NumericExpr, seed: u64) -> CorruptionSpec {
    let a = uniform(rng, -100.0, 100.0, 0.1);
    let interval = match rng.random_range(0..3u8) {
        0 => Interval::bounded(a, snap(a + uniform(rng, 5.0, 20.0, 0.1), 0.1)),
        1 => Interval::at_least(a),
        _ => Interval::at_most(a),
    };
    let polarity = if rng.random::<bool>() { Polarity::Inside } else { Polarity::Outside };
    CorruptionSpec { interval, polarity, mean: grid_mean(expr), variance: CORRUPTION_VARIANCE, seed }
}

/// Sixteen points inside the corrupted region, clipped to the grid window.
pub fn corrupted_test_points(c: &CorruptionSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pieces: Vec<(f64, f64)> = c.region().iter().filter_map(|i| i.clip(grid::LO, grid::HI)).collect();
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(16);
    while out.len() < 16 {
        let mut u = rng.random_range(0.0..total);
        for &(a, b) in &pieces {
            if u <= b - a {
                let x = snap(a + u, 0.01).clamp(a, b);
                if c.corrupts(x) {
                    out.push(x);
                }
                break;
            }
            u -= b - a;
        }
    }
    out
}

/// One numeric function of the given subcategory.
pub fn numeric_function(dataset_seed: u64, index: usize, sub: Subcategory) -> FunctionSpec {
    let seed = derive(dataset_seed, index as u64);
    let mut rng = stream(seed, label("numeric"));
    let id = function_id(index);
    let expr = if sub == Subcategory::Composed {
        sample_composition(&mut rng)
    } else {
        let family = *Family::ATOMIC.choose(&mut rng).unwrap_or(&Family::Linear);
        NumericExpr::Atom(sample_atom(family, &mut rng))
    };
    let mut modifiers = Vec::new();
    let mut extra = Vec::new();
    match sub {
        Subcategory::Noisy => modifiers.push(Modifier::Noise(sample_noise(&mut rng, derive(seed, label("noise"))))),
        Subcategory::Corrupted => {
            let c = sample_corruption(&mut rng, &expr, derive(seed, label("corruption")));
            extra = corrupted_test_points(&c, &mut rng);
            modifiers.push(Modifier::Corruption(c));
        }
        Subcategory::Approximated => modifiers.push(Modifier::Approximation(ApproximationRef {
            weights: format!("weights/{id}.json"),
            hidden_width: 64,
            seed: derive(seed, label("mlp")),
        })),
        _ => {}
    }
    let ast = Payload::Numeric(expr);
    let (description, domain_note) = describe(&ast, &modifiers, None);
    FunctionSpec {
        id,
        category: Category::Numeric,
        subcategory: sub,
        ast,
        modifiers,
        seed,
        description,
        domain_note,
        test_set: TestSet::Grid { extra },
    }
}

pub fn sample_numeric_dataset(count: usize, seed: u64, first_index: usize) -> Result<Vec<FunctionSpec>> {
    let slots = numeric_slots(count, seed)?;
    Ok(slots.into_iter().enumerate().map(|(i, sub)| numeric_function(seed, first_index + i, sub)).collect())
}

fn letter(rng: &mut ChaCha8Rng) -> char {
    char::from(b'a' + rng.random_range(0..26u8))
}

fn letters(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| letter(rng)).collect()
}

/// Operation kinds used for generation: every op except `lowercase`, which
/// is the identity on the a-z input alphabet.
pub const GENERATED_OPS: [&str; 14] = [
    "capitalize",
    "concatenate",
    "drop_first",
    "drop_last",
    "duplicate_last",
    "prepend",
    "remove_duplicates",
    "remove_vowels",
    "replace",
    "reverse",
    "rotate_left",
    "shift_first",
    "shift_last",
    "swap_halves",
];

pub fn sample_op(rng: &mut ChaCha8Rng) -> StringOp {
    let name = *GENERATED_OPS.choose(rng).unwrap_or(&"reverse");
    match name {
        "concatenate" => StringOp::Concatenate { suffix: letters(rng, 1, 2) },
        "prepend" => StringOp::Prepend { prefix: letters(rng, 1, 2) },
        "replace" => {
            let from = letter(rng);
            let mut to = letter(rng);
            while to == from {
                to = letter(rng);
            }
            StringOp::Replace { from, to }
        }
        "rotate_left" => StringOp::RotateLeft { k: rng.random_range(1..=3) },
        _ => StringOp::NULLARY.iter().find(|o| o.name() == name).cloned().unwrap_or(StringOp::Reverse),
    }
}

/// Whether a composition should be rejected: identity on the probes, or
/// indistinguishable on the probes from one of its own components.
pub fn degenerate_pair(first: &StringOp, second: &StringOp) -> bool {
    let pair = StringProgram::pair(first.clone(), second.clone());
    let a = StringProgram::atomic(first.clone());
    let b = StringProgram::atomic(second.clone());
    pair.is_identity_on(&PROBES)
        || PROBES.iter().all(|p| pair.run(p) == a.run(p))
        || PROBES.iter().all(|p| pair.run(p) == b.run(p))
}

pub fn string_test_inputs(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(10);
    while out.len() < 7 {
        let w = (*WORDS.choose(rng).unwrap_or(&"apple")).to_string();
        if !out.contains(&w) {
            out.push(w);
        }
    }
    while out.len() < 10 {
        let w = letters(rng, 3, 8);
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

pub fn string_function(dataset_seed: u64, index: usize, sub: Subcategory) -> FunctionSpec {
    let seed = derive(dataset_seed, index as u64);
    let mut rng = stream(seed, label("strings"));
    let program = if sub == Subcategory::Composed {
        loop {
            let first = sample_op(&mut rng);
            let second = sample_op(&mut rng);
            if !degenerate_pair(&first, &second) {
                break StringProgram::pair(first, second);
            }
        }
    } else {
        StringProgram::atomic(sample_op(&mut rng))
    };
    let inputs = string_test_inputs(&mut rng);
    let ast = Payload::Strings(program);
    let (description, domain_note) = describe(&ast, &[], None);
    FunctionSpec {
        id: function_id(index),
        category: Category::Strings,
        subcategory: sub,
        ast,
        modifiers: Vec::new(),
        seed,
        description,
        domain_note,
        test_set: TestSet::Inputs { inputs },
    }
}

pub fn sample_string_dataset(count: usize, seed: u64, first_index: usize) -> Result<Vec<FunctionSpec>> {
    let slots = string_slots(count, seed)?;
    Ok(slots.into_iter().enumerate().map(|(i, sub)| string_function(seed, first_index + i, sub)).collect())
}

/// Ten distinct table keys; two from the corrupted tag when there is one.
pub fn relation_test_inputs(table: &FactTable, spec: &RelationSpec, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    let too_small = || Error::FactTable { table: table.name.clone(), msg: "too few keys for 10 test inputs".into() };
    let (mut inside, mut outside): (Vec<&str>, Vec<&str>) =
        table.keys().partition(|k| spec.is_corrupted_key(table, k));
    inside.shuffle(rng);
    outside.shuffle(rng);
    let n_in = if spec.corrupted_tag.is_some() { 2 } else { 0 };
    if inside.len() < n_in || outside.len() < 10 - n_in {
        return Err(too_small());
    }
    let mut out: Vec<String> =
        inside.iter().take(n_in).chain(outside.iter().take(10 - n_in)).map(|s| s.to_string()).collect();
    out.shuffle(rng);
    Ok(out)
}

/// One uncorrupted relation per table plus one corrupted relation per tag,
/// in table-name then tag order.
pub fn relation_dataset(tables: &[FactTable], seed: u64, first_index: usize) -> Result<Vec<FunctionSpec>> {
    let mut sorted: Vec<&FactTable> = tables.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = Vec::new();
    for table in sorted {
        let variants = core::iter::once(None).chain(table.tags.keys().map(|t| Some(t.as_str())));
        for tag in variants {
            let index = first_index + out.len();
            let fseed = derive(seed, index as u64);
            let spec = RelationSpec::new(&table.name, tag);
            spec.validate_against(table)?;
            let inputs = relation_test_inputs(table, &spec, &mut stream(fseed, label("relations")))?;
            let ast = Payload::Relation(spec);
            let (description, domain_note) = describe(&ast, &[], Some(table));
            out.push(FunctionSpec {
                id: function_id(index),
                category: Category::Relations,
                subcategory: if tag.is_some() { Subcategory::Corrupted } else { Subcategory::Atomic },
                ast,
                modifiers: Vec::new(),
                seed: fseed,
                description,
                domain_note,
                test_set: TestSet::Inputs { inputs },
            });
        }
    }
    Ok(out)
}
