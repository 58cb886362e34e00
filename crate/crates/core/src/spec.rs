//! The full recipe for one benchmark function and its templated
//! ground-truth description.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::interval::describe_set;
use crate::modifiers::{ApproximationRef, CorruptionSpec, Modifier, NoiseKind, NoiseSpec};
use crate::numeric::{fmt_num, ComposeOp, Family, NumericExpr};
use crate::relations::{FactTable, RelationSpec};
use crate::sexpr::{sym, Sexp};
use crate::strings::StringProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Numeric,
    Strings,
    Relations,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Numeric, Category::Strings, Category::Relations];

    pub fn name(self) -> &'static str {
        match self {
            Category::Numeric => "numeric",
            Category::Strings => "strings",
            Category::Relations => "relations",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Category::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcategory {
    Atomic,
    Composed,
    Noisy,
    Corrupted,
    Approximated,
}

impl Subcategory {
    pub const ALL: [Subcategory; 5] = [
        Subcategory::Atomic,
        Subcategory::Composed,
        Subcategory::Noisy,
        Subcategory::Corrupted,
        Subcategory::Approximated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcategory::Atomic => "atomic",
            Subcategory::Composed => "composed",
            Subcategory::Noisy => "noisy",
            Subcategory::Corrupted => "corrupted",
            Subcategory::Approximated => "approximated",
        }
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The evaluable core of a function. Serialized as its s-expression text.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Numeric(NumericExpr),
    Strings(StringProgram),
    Relation(RelationSpec),
}

impl Payload {
    pub fn category(&self) -> Category {
        match self {
            Payload::Numeric(_) => Category::Numeric,
            Payload::Strings(_) => Category::Strings,
            Payload::Relation(_) => Category::Relations,
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        match self {
            Payload::Numeric(e) => e.to_sexp(),
            Payload::Strings(p) => p.to_sexp(),
            Payload::Relation(r) => {
                let mut items = vec![sym("relation"), Sexp::Str(r.relation.clone())];
                if let Some(tag) = &r.corrupted_tag {
                    items.extend([sym(":corrupted"), Sexp::Str(tag.clone())]);
                }
                Sexp::List(items)
            }
        }
    }

    /// Parses any payload form; the head symbol decides the grammar.
    pub fn parse(src: &str) -> Result<Self> {
        let s = Sexp::parse(src)?;
        let head = s.as_list().and_then(|l| l.first()).and_then(Sexp::as_atom).unwrap_or("");
        if head == "relation" {
            let items = s.as_list().unwrap_or(&[]);
            let bad = || Error::Parse { offset: 0, msg: "expected (relation \"name\" [:corrupted \"tag\"])".into() };
            let name = items.get(1).and_then(Sexp::as_str).ok_or_else(bad)?;
            let tag = match items.get(2..) {
                Some([]) | None => None,
                Some([k, v]) if k.as_atom() == Some(":corrupted") => Some(v.as_str().ok_or_else(bad)?),
                _ => return Err(bad()),
            };
            return Ok(Payload::Relation(RelationSpec::new(name, tag)));
        }
        if head == "sum" || head == "product" || Family::from_name(head).is_some() {
            return Ok(Payload::Numeric(NumericExpr::from_sexp(&s)?));
        }
        Ok(Payload::Strings(StringProgram::from_sexp(&s)?))
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Payload {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Payload::parse(&text).map_err(D::Error::custom)
    }
}

/// Inputs used to score an interpretation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSet {
    /// The canonical 513-point grid, plus extra points inside a corrupted region.
    Grid { extra: Vec<f64> },
    Inputs { inputs: Vec<String> },
}

impl TestSet {
    pub fn inputs(&self) -> &[String] {
        match self {
            TestSet::Inputs { inputs } => inputs,
            TestSet::Grid { .. } => &[],
        }
    }
}

/// One benchmark function. Field order is the manifest record layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub id: String,
    pub category: Category,
    pub subcategory: Subcategory,
    pub ast: Payload,
    pub modifiers: Vec<Modifier>,
    pub seed: u64,
    pub description: String,
    pub domain_note: String,
    pub test_set: TestSet,
}

impl FunctionSpec {
    pub fn numeric(&self) -> Option<&NumericExpr> {
        match &self.ast {
            Payload::Numeric(e) => Some(e),
            _ => None,
        }
    }

    pub fn program(&self) -> Option<&StringProgram> {
        match &self.ast {
            Payload::Strings(p) => Some(p),
            _ => None,
        }
    }

    pub fn relation(&self) -> Option<&RelationSpec> {
        match &self.ast {
            Payload::Relation(r) => Some(r),
            _ => None,
        }
    }

    pub fn noise(&self) -> Option<&NoiseSpec> {
        self.modifiers.iter().find_map(|m| match m {
            Modifier::Noise(n) => Some(n),
            _ => None,
        })
    }

    pub fn corruption(&self) -> Option<&CorruptionSpec> {
        self.modifiers.iter().find_map(|m| match m {
            Modifier::Corruption(c) => Some(c),
            _ => None,
        })
    }

    pub fn approximation(&self) -> Option<&ApproximationRef> {
        self.modifiers.iter().find_map(|m| match m {
            Modifier::Approximation(a) => Some(a),
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.category != self.ast.category() {
            return Err(Error::Invalid(format!("{}: category does not match payload", self.id)));
        }
        let count = |pred: fn(&Modifier) -> bool| self.modifiers.iter().filter(|m| pred(m)).count();
        let n = count(|m| matches!(m, Modifier::Noise(_)));
        let c = count(|m| matches!(m, Modifier::Corruption(_)));
        let a = count(|m| matches!(m, Modifier::Approximation(_)));
        if n > 1 || c > 1 || a > 1 {
            return Err(Error::Invalid(format!("{}: repeated modifier", self.id)));
        }
        if self.category != Category::Numeric && !self.modifiers.is_empty() {
            return Err(Error::Invalid(format!("{}: modifiers apply only to numeric functions", self.id)));
        }
        if let Some(n) = self.noise() {
            n.validate()?;
        }
        if let Some(c) = self.corruption() {
            c.validate()?;
        }
        match &self.ast {
            Payload::Numeric(e) => e.validate(),
            Payload::Strings(p) => p.validate(),
            Payload::Relation(_) => Ok(()),
        }
    }
}

fn family_phrase(f: Family) -> &'static str {
    match f {
        Family::Linear => "linear",
        Family::Polynomial => "polynomial",
        Family::Absolute => "absolute value",
        Family::Root => "root",
        Family::Logarithm => "logarithmic",
        Family::Step => "step",
        Family::Relu => "ReLU",
        Family::Sigmoid => "sigmoid",
        Family::Tanh => "tanh",
        Family::Constant => "constant",
        Family::Power => "power",
        Family::Sin => "sine",
        Family::Cos => "cosine",
        Family::Tan => "tangent",
        Family::Reciprocal => "reciprocal",
        Family::Gaussian => "gaussian",
        Family::StudentT => "student-t",
        Family::Rational => "rational",
        Family::Rectangle => "rectangle",
        Family::SquareWave => "square wave",
        Family::Exponential => "exponential",
        Family::Ceiling => "ceiling",
        Family::Floor => "floor",
        Family::Erf => "error",
    }
}

/// Templated description of a numeric expression, e.g.
/// `linear function f(x) = 2x + 3`.
pub fn describe_expr(expr: &NumericExpr) -> String {
    match expr {
        NumericExpr::Atom(a) => format!("{} function f(x) = {}", family_phrase(a.family()), expr.formula()),
        NumericExpr::Compose(c) => {
            let op = match c.op {
                ComposeOp::Sum => "sum",
                ComposeOp::Product => "product",
            };
            format!(
                "{op} of a {} function and a {} function, f(x) = {}",
                family_phrase(c.left.family()),
                family_phrase(c.right.family()),
                expr.formula()
            )
        }
    }
}

pub fn describe_noise(n: &NoiseSpec) -> String {
    match n.kind {
        NoiseKind::Normal { sigma } => format!("with additive normal noise of standard deviation {}", fmt_num(sigma)),
        NoiseKind::Uniform { half_width } => {
            format!("with additive uniform noise on [-{0}, {0}]", fmt_num(half_width))
        }
        NoiseKind::Poisson { rate } => format!("with additive poisson noise of rate {}", fmt_num(rate)),
    }
}

/// Domain note for a corrupted region, or `"none"`.
pub fn corruption_note(c: Option<&CorruptionSpec>) -> String {
    match c {
        Some(c) => format!("values are replaced by noise around {} on {}", fmt_num(round2(c.mean)), describe_set(&c.region())),
        None => "none".to_string(),
    }
}

fn round2(v: f64) -> f64 {
    libm::round(v * 100.0) / 100.0
}

/// Ground-truth description and domain note. Relations need their table.
pub fn describe(payload: &Payload, modifiers: &[Modifier], table: Option<&FactTable>) -> (String, String) {
    match payload {
        Payload::Numeric(e) => {
            let mut d = describe_expr(e);
            let mut corruption = None;
            for m in modifiers {
                match m {
                    Modifier::Noise(n) => {
                        d.push_str(", ");
                        d.push_str(&describe_noise(n));
                    }
                    Modifier::Corruption(c) => {
                        corruption = Some(c);
                        d.push_str(&format!(", corrupted with noise on {}", describe_set(&c.region())));
                    }
                    Modifier::Approximation(_) => d.push_str(", approximated by a neural network"),
                }
            }
            (d, corruption_note(corruption))
        }
        Payload::Strings(p) => (p.describe(), "none".to_string()),
        Payload::Relation(r) => {
            let d = match table {
                Some(t) => r.describe(t),
                None => format!("maps each input to its {} value", r.relation),
            };
            let note = match &r.corrupted_tag {
                Some(tag) => format!("inputs in the subdomain \"{tag}\" return undefined"),
                None => "none".to_string(),
            };
            (d, note)
        }
    }
}
