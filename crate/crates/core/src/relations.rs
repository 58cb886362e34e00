//! Factual relation functions backed by static key/value tables, with
//! optional corruption of a tagged subdomain.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;
use core::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Output for corrupted or unknown inputs.
pub const UNDEFINED: &str = "undefined";

/// Key/value map that rejects duplicate keys while deserializing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Pairs(pub BTreeMap<String, String>);

impl<'de> Deserialize<'de> for Pairs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Pairs;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of string keys to string values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> core::result::Result<Pairs, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    if out.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate key {k:?}")));
                    }
                    out.insert(k, v);
                }
                Ok(Pairs(out))
            }
        }
        d.deserialize_map(V)
    }
}

/// Static data behind one relation: `name`, `pairs`, and tagged key subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactTable {
    pub name: String,
    /// Noun for the inputs, e.g. "country".
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub input: String,
    /// Phrase for the outputs, e.g. "capital city".
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub output: String,
    pub pairs: Pairs,
    #[serde(default)]
    pub tags: BTreeMap<String, Vec<String>>,
    #[serde(skip)]
    index: BTreeMap<String, String>,
}

impl FactTable {
    pub fn new(
        name: &str,
        input: &str,
        output: &str,
        pairs: impl IntoIterator<Item = (String, String)>,
        tags: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let mut t = FactTable {
            name: name.to_string(),
            input: input.to_string(),
            output: output.to_string(),
            pairs: Pairs(pairs.into_iter().collect()),
            tags,
            index: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Checks invariants and builds the case-insensitive index.
    /// Must be called after deserializing.
    pub fn validate(&mut self) -> Result<()> {
        let err = |msg: String| Error::FactTable { table: self.name.clone(), msg };
        if self.name.is_empty() {
            return Err(err("empty table name".into()));
        }
        if self.pairs.0.is_empty() {
            return Err(err("table has no pairs".into()));
        }
        let mut index = BTreeMap::new();
        for (k, v) in &self.pairs.0 {
            if k.trim().is_empty() || v.trim().is_empty() {
                return Err(err(format!("empty key or value at key {k:?}")));
            }
            if index.insert(k.to_lowercase(), k.clone()).is_some() {
                return Err(err(format!("key {k:?} duplicates another key up to case")));
            }
        }
        for (tag, keys) in &self.tags {
            if keys.is_empty() {
                return Err(err(format!("tag {tag:?} is empty")));
            }
            for k in keys {
                if !self.pairs.0.contains_key(k) {
                    return Err(err(format!("tag {tag:?} references missing key {k:?}")));
                }
            }
        }
        self.index = index;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.0.is_empty()
    }

    /// Canonical key for an input, matched case-insensitively.
    pub fn canonical_key(&self, input: &str) -> Option<&str> {
        self.index.get(&input.trim().to_lowercase()).map(String::as_str)
    }

    pub fn lookup(&self, input: &str) -> Option<&str> {
        self.canonical_key(input).and_then(|k| self.pairs.0.get(k)).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.0.keys().map(String::as_str)
    }

    pub fn tag_members(&self, tag: &str) -> Option<&[String]> {
        self.tags.get(tag).map(Vec::as_slice)
    }

    pub fn has_tag(&self, tag: &str, key: &str) -> bool {
        self.canonical_key(key)
            .is_some_and(|k| self.tags.get(tag).is_some_and(|ks| ks.iter().any(|m| m == k)))
    }
}

/// A relation function: a fact table, optionally corrupted on one tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted_tag: Option<String>,
}

impl RelationSpec {
    pub fn new(relation: &str, corrupted_tag: Option<&str>) -> Self {
        RelationSpec { relation: relation.to_string(), corrupted_tag: corrupted_tag.map(str::to_string) }
    }

    pub fn validate_against(&self, table: &FactTable) -> Result<()> {
        if table.name != self.relation {
            return Err(Error::FactTable {
                table: table.name.clone(),
                msg: format!("relation {:?} bound to the wrong table", self.relation),
            });
        }
        if let Some(tag) = &self.corrupted_tag {
            if table.tag_members(tag).is_none_or(|m| m.is_empty()) {
                return Err(Error::FactTable { table: table.name.clone(), msg: format!("no members for tag {tag:?}") });
            }
        }
        Ok(())
    }

    pub fn is_corrupted_key(&self, table: &FactTable, input: &str) -> bool {
        self.corrupted_tag.as_deref().is_some_and(|t| table.has_tag(t, input))
    }

    /// Table value for known keys; [`UNDEFINED`] for corrupted or unknown inputs.
    pub fn eval(&self, table: &FactTable, input: &str) -> String {
        if self.is_corrupted_key(table, input) {
            return UNDEFINED.to_string();
        }
        table.lookup(input).unwrap_or(UNDEFINED).to_string()
    }

    pub fn describe(&self, table: &FactTable) -> String {
        let input = if table.input.is_empty() { "input" } else { table.input.as_str() };
        let output = if table.output.is_empty() { "associated value" } else { table.output.as_str() };
        let mut d = format!("maps each {input} to its {output}");
        if let Some(tag) = &self.corrupted_tag {
            d.push_str(&format!(", except that inputs in the subdomain \"{tag}\" return undefined"));
        }
        d
    }
}
