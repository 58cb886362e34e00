//! Naming fact-table relations and their undefined subdomains.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Interpretation, NoiseVerdict};
use crate::blackbox::Session;
use crate::relations::{FactTable, RelationSpec, UNDEFINED};
use crate::spec::Payload;

pub const NAME: &str = "relation-ref";
/// Minimum agreement with a table for the relation to be named.
pub const MIN_AGREEMENT: f64 = 0.6;
/// Words tried per input type before committing to one type.
const SCOUTS: usize = 6;

/// Word lists keyed by input type, e.g. `"country"`.
pub type Lexicon = BTreeMap<String, Vec<String>>;

fn ask(session: &mut Session, words: &[String], obs: &mut Vec<(String, String)>, partial: &mut bool) {
    let fresh: Vec<&String> = words.iter().filter(|w| !obs.iter().any(|(i, _)| i == *w)).collect();
    let n = fresh.len().min(session.remaining());
    if n < fresh.len() {
        *partial = true;
    }
    let chunk = session.budget().max_inputs.max(1);
    for part in fresh[..n].chunks(chunk) {
        match session.query_texts(part) {
            Ok(outs) => obs.extend(part.iter().map(|s| s.to_string()).zip(outs)),
            Err(_) => {
                *partial = true;
                return;
            }
        }
    }
}

/// Fraction of observed table keys whose output equals the table value.
pub fn agreement(table: &FactTable, obs: &[(String, String)]) -> f64 {
    let mut seen = 0usize;
    let mut hits = 0usize;
    for (i, o) in obs {
        if let Some(v) = table.lookup(i) {
            seen += 1;
            hits += usize::from(v == o);
        }
    }
    if seen == 0 {
        0.0
    } else {
        hits as f64 / seen as f64
    }
}

/// The tag whose members are undefined (at least two seen) while every other
/// observed key of the table is defined.
pub fn corrupted_tag(table: &FactTable, obs: &[(String, String)]) -> Option<String> {
    let keyed: Vec<(&str, bool)> = obs
        .iter()
        .filter_map(|(i, o)| table.canonical_key(i).map(|k| (k, o == UNDEFINED)))
        .collect();
    let mut best: Option<(usize, &String)> = None;
    for (tag, members) in &table.tags {
        let inside = keyed.iter().filter(|(k, u)| *u && members.iter().any(|m| m == k)).count();
        let outside = keyed.iter().filter(|(k, u)| *u && !members.iter().any(|m| m == k)).count();
        let defined_inside = keyed.iter().filter(|(k, u)| !*u && members.iter().any(|m| m == k)).count();
        if inside >= 2 && outside == 0 && defined_inside == 0 && best.is_none_or(|(b, _)| inside > b) {
            best = Some((inside, tag));
        }
    }
    best.map(|(_, t)| t.clone())
}

/// Agreement with `table` once the keys of a detected corrupted tag are set aside.
pub fn explained_agreement(table: &FactTable, obs: &[(String, String)]) -> (f64, Option<String>) {
    let tag = corrupted_tag(table, obs);
    let members = tag.as_ref().and_then(|t| table.tag_members(t)).unwrap_or(&[]);
    let rest: Vec<(String, String)> = obs
        .iter()
        .filter(|(i, _)| !table.canonical_key(i).is_some_and(|k| members.iter().any(|m| m == k)))
        .cloned()
        .collect();
    (agreement(table, &rest), tag)
}

/// Identifies which shipped table a relation black box reads from.
pub fn interpret_relation(session: &mut Session, tables: &[FactTable], lexicon: &Lexicon) -> Interpretation {
    let mut interp = Interpretation::new(session.function_id(), NAME);
    interp.noise = NoiseVerdict::None;
    let mut obs: Vec<(String, String)> = Vec::new();
    let mut partial = false;

    // Scout every input type, then spend the budget on the most responsive one.
    for words in lexicon.values() {
        let n = SCOUTS.min(words.len());
        ask(session, &words[..n], &mut obs, &mut partial);
    }
    let defined = |words: &Vec<String>, obs: &[(String, String)]| {
        obs.iter().filter(|(i, o)| o != UNDEFINED && words.contains(i)).count()
    };
    // A corrupted tag can swallow every scout of the right type; widen until something answers.
    if lexicon.values().all(|w| defined(w, &obs) == 0) {
        for words in lexicon.values() {
            ask(session, words, &mut obs, &mut partial);
            if defined(words, &obs) > 0 {
                break;
            }
        }
    }
    let best_type = lexicon.iter().max_by_key(|(_, w)| defined(w, &obs)).map(|(t, _)| t.clone());
    if let Some(t) = &best_type {
        ask(session, &lexicon[t], &mut obs, &mut partial);
    }

    let mut ranked: Vec<(f64, Option<String>, &FactTable)> = tables
        .iter()
        .map(|t| {
            let (score, tag) = explained_agreement(t, &obs);
            (score, tag, t)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.2.name.cmp(&b.2.name)));
    interp.queries = session.query_count();
    interp.evaluations = session.evaluations();
    interp.partial = partial;
    match ranked.first() {
        Some((score, tag, table)) if *score > MIN_AGREEMENT => {
            let (score, tag) = (*score, tag.clone());
            let spec = RelationSpec::new(&table.name, tag.as_deref());
            interp.description = spec.describe(table);
            if let Some(t) = &tag {
                interp.domain_note = format!("inputs in the subdomain \"{t}\" return undefined");
            }
            interp.corrupted_tag = tag;
            interp.fit_score = Some(score);
            interp.program = Some(Payload::Relation(spec));
        }
        other => {
            interp.description = "unknown relation".to_string();
            interp.fit_score = other.map(|r| r.0);
            interp.out_of_grammar = true;
        }
    }
    interp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{BoundFunction, Budget};
    use crate::spec::{Category, FunctionSpec, Subcategory, TestSet};
    use alloc::vec;

    fn table(name: &str, f: fn(usize) -> String) -> FactTable {
        let pairs = (0..20).map(|i| (format!("land{i}"), f(i)));
        let mut tags = BTreeMap::new();
        tags.insert("east".to_string(), (0..6).map(|i| format!("land{i}")).collect());
        tags.insert("west".to_string(), (6..12).map(|i| format!("land{i}")).collect());
        FactTable::new(name, "country", "value", pairs, tags).unwrap()
    }

    fn tables() -> Vec<FactTable> {
        vec![table("capital", |i| format!("city{i}")), table("currency", |i| format!("coin{}", i % 3))]
    }

    fn run(rel: &str, tag: Option<&str>, lex: &Lexicon) -> Interpretation {
        let ts = tables();
        let t = ts.iter().find(|t| t.name == rel).unwrap().clone();
        let spec = FunctionSpec {
            id: "r".into(),
            category: Category::Relations,
            subcategory: Subcategory::Atomic,
            ast: Payload::Relation(RelationSpec::new(rel, tag)),
            modifiers: Vec::new(),
            seed: 0,
            description: String::new(),
            domain_note: "none".into(),
            test_set: TestSet::Inputs { inputs: Vec::new() },
        };
        let f = BoundFunction::new(spec, None, Some(t)).unwrap();
        let mut s = Session::open(&f, 0, Budget::evaluations(200));
        interpret_relation(&mut s, &ts, lex)
    }

    fn lexicon() -> Lexicon {
        let mut l = Lexicon::new();
        l.insert("country".into(), (0..20).map(|i| format!("land{i}")).collect());
        l.insert("animal".into(), vec!["cat".into(), "dog".into()]);
        l
    }

    #[test]
    fn names_uncorrupted_relation() {
        let i = run("capital", None, &lexicon());
        assert_eq!(i.program, Some(Payload::Relation(RelationSpec::new("capital", None))));
        assert_eq!(i.domain_note, "none");
    }

    #[test]
    fn finds_corrupted_tag() {
        let i = run("currency", Some("west"), &lexicon());
        assert_eq!(i.corrupted_tag.as_deref(), Some("west"));
        assert!(i.domain_note.contains("west"));
    }

    #[test]
    fn tag_covering_every_scout_is_found() {
        // land0..land5 are the first scouts and all sit in "east".
        let i = run("capital", Some("east"), &lexicon());
        assert_eq!(i.corrupted_tag.as_deref(), Some("east"));
        assert_eq!(i.program, Some(Payload::Relation(RelationSpec::new("capital", Some("east")))));
    }

    #[test]
    fn disjoint_lexicon_is_unknown() {
        let mut l = Lexicon::new();
        l.insert("animal".into(), vec!["cat".into(), "dog".into()]);
        let i = run("capital", None, &l);
        assert!(i.out_of_grammar && i.program.is_none());
        assert_eq!(i.description, "unknown relation");
    }
}
