//! String program grammar: an ordered list of one or two atomic operations,
//! applied left to right.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sexpr::{sym, Sexp};

/// One atomic string operation.
///
/// Letters are shifted within their case with wraparound (`z -> a`,
/// `Z -> A`); other characters pass through shifting untouched.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StringOp {
    Capitalize,
    Concatenate { suffix: String },
    DropFirst,
    DropLast,
    DuplicateLast,
    Lowercase,
    Prepend { prefix: String },
    RemoveDuplicates,
    RemoveVowels,
    Replace { from: char, to: char },
    Reverse,
    RotateLeft { k: usize },
    ShiftFirst,
    ShiftLast,
    SwapHalves,
}

fn shift_char(c: char) -> char {
    match c {
        'z' => 'a',
        'Z' => 'A',
        'a'..='y' | 'A'..='Y' => (c as u8 + 1) as char,
        _ => c,
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u')
}

impl StringOp {
    /// Parameter-free operations, in canonical order.
    pub const NULLARY: [StringOp; 11] = [
        StringOp::Capitalize,
        StringOp::DropFirst,
        StringOp::DropLast,
        StringOp::DuplicateLast,
        StringOp::Lowercase,
        StringOp::RemoveDuplicates,
        StringOp::RemoveVowels,
        StringOp::Reverse,
        StringOp::ShiftFirst,
        StringOp::ShiftLast,
        StringOp::SwapHalves,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StringOp::Capitalize => "capitalize",
            StringOp::Concatenate { .. } => "concatenate",
            StringOp::DropFirst => "drop_first",
            StringOp::DropLast => "drop_last",
            StringOp::DuplicateLast => "duplicate_last",
            StringOp::Lowercase => "lowercase",
            StringOp::Prepend { .. } => "prepend",
            StringOp::RemoveDuplicates => "remove_duplicates",
            StringOp::RemoveVowels => "remove_vowels",
            StringOp::Replace { .. } => "replace",
            StringOp::Reverse => "reverse",
            StringOp::RotateLeft { .. } => "rotate_left",
            StringOp::ShiftFirst => "shift_first",
            StringOp::ShiftLast => "shift_last",
            StringOp::SwapHalves => "swap_halves",
        }
    }

    /// Canonical parameter text used for ordering and size.
    pub fn param_text(&self) -> String {
        match self {
            StringOp::Concatenate { suffix } => suffix.clone(),
            StringOp::Prepend { prefix } => prefix.clone(),
            StringOp::Replace { from, to } => format!("{from}{to}"),
            StringOp::RotateLeft { k } => k.to_string(),
            _ => String::new(),
        }
    }

    pub fn apply(&self, s: &str) -> String {
        match self {
            StringOp::Capitalize => s.to_ascii_uppercase(),
            StringOp::Lowercase => s.to_ascii_lowercase(),
            StringOp::Concatenate { suffix } => format!("{s}{suffix}"),
            StringOp::Prepend { prefix } => format!("{prefix}{s}"),
            StringOp::DropFirst => s.chars().skip(1).collect(),
            StringOp::DropLast => {
                let mut out = s.to_string();
                out.pop();
                out
            }
            StringOp::DuplicateLast => match s.chars().last() {
                Some(c) => format!("{s}{c}"),
                None => String::new(),
            },
            StringOp::RemoveDuplicates => {
                let mut seen = Vec::new();
                s.chars()
                    .filter(|c| {
                        if seen.contains(c) {
                            false
                        } else {
                            seen.push(*c);
                            true
                        }
                    })
                    .collect()
            }
            StringOp::RemoveVowels => s.chars().filter(|c| !is_vowel(*c)).collect(),
            StringOp::Replace { from, to } => s.chars().map(|c| if c == *from { *to } else { c }).collect(),
            StringOp::Reverse => s.chars().rev().collect(),
            StringOp::RotateLeft { k } => {
                let chars: Vec<char> = s.chars().collect();
                if chars.is_empty() {
                    return String::new();
                }
                let k = k % chars.len();
                chars[k..].iter().chain(&chars[..k]).collect()
            }
            StringOp::ShiftFirst => {
                let mut chars = s.chars();
                match chars.next() {
                    Some(c) => core::iter::once(shift_char(c)).chain(chars).collect(),
                    None => String::new(),
                }
            }
            StringOp::ShiftLast => {
                let mut chars: Vec<char> = s.chars().collect();
                if let Some(c) = chars.last_mut() {
                    *c = shift_char(*c);
                }
                chars.into_iter().collect()
            }
            StringOp::SwapHalves => {
                let chars: Vec<char> = s.chars().collect();
                let mid = chars.len() / 2;
                chars[mid..].iter().chain(&chars[..mid]).collect()
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            StringOp::Capitalize => "converts every letter to uppercase".into(),
            StringOp::Lowercase => "converts every letter to lowercase".into(),
            StringOp::Concatenate { suffix } => format!("appends \"{suffix}\" to the end of the string"),
            StringOp::Prepend { prefix } => format!("prepends \"{prefix}\" to the start of the string"),
            StringOp::DropFirst => "removes the first character".into(),
            StringOp::DropLast => "removes the last character".into(),
            StringOp::DuplicateLast => "repeats the last character once more".into(),
            StringOp::RemoveDuplicates => "keeps only the first occurrence of each character".into(),
            StringOp::RemoveVowels => "removes all vowels".into(),
            StringOp::Replace { from, to } => format!("replaces every '{from}' with '{to}'"),
            StringOp::Reverse => "reverses the input string".into(),
            StringOp::RotateLeft { k } => format!("rotates the string left by {k} characters"),
            StringOp::ShiftFirst => "shifts the first letter forward by one in the alphabet (z wraps to a)".into(),
            StringOp::ShiftLast => "shifts the last letter forward by one in the alphabet (z wraps to a)".into(),
            StringOp::SwapHalves => "swaps the first and second halves of the string".into(),
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        let mut items = vec![sym(self.name())];
        match self {
            StringOp::Concatenate { suffix } => items.push(Sexp::Str(suffix.clone())),
            StringOp::Prepend { prefix } => items.push(Sexp::Str(prefix.clone())),
            StringOp::Replace { from, to } => {
                items.push(Sexp::Str(from.to_string()));
                items.push(Sexp::Str(to.to_string()));
            }
            StringOp::RotateLeft { k } => items.push(sym(&k.to_string())),
            _ => {}
        }
        Sexp::List(items)
    }

    pub fn from_sexp(s: &Sexp) -> Result<StringOp> {
        let perr = |m: String| Error::Parse { offset: 0, msg: m };
        let items = s.as_list().ok_or_else(|| perr("expected op list".into()))?;
        let name = items.first().and_then(Sexp::as_atom).unwrap_or("");
        let arity = |n: usize| {
            if items.len() == n + 1 {
                Ok(())
            } else {
                Err(perr(format!("{name} takes {n} argument(s)")))
            }
        };
        let text = |i: usize| items[i].as_str().map(str::to_string).ok_or_else(|| perr("expected string".into()));
        let one_char = |i: usize| -> Result<char> {
            let t = text(i)?;
            let mut cs = t.chars();
            match (cs.next(), cs.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(perr("expected a single character".into())),
            }
        };
        if let Some(op) = Self::NULLARY.iter().find(|o| o.name() == name) {
            arity(0)?;
            return Ok(op.clone());
        }
        match name {
            "concatenate" => {
                arity(1)?;
                Ok(StringOp::Concatenate { suffix: text(1)? })
            }
            "prepend" => {
                arity(1)?;
                Ok(StringOp::Prepend { prefix: text(1)? })
            }
            "replace" => {
                arity(2)?;
                Ok(StringOp::Replace { from: one_char(1)?, to: one_char(2)? })
            }
            "rotate_left" => {
                arity(1)?;
                let k = items[1].as_atom().and_then(|a| a.parse().ok()).ok_or_else(|| perr("expected k".into()))?;
                Ok(StringOp::RotateLeft { k })
            }
            _ => Err(perr(format!("unknown string op {name:?}"))),
        }
    }
}

impl Ord for StringOp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.name().cmp(other.name()).then_with(|| self.param_text().cmp(&other.param_text()))
    }
}

impl PartialOrd for StringOp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Checks a black-box input against the engine's input alphabet.
pub fn validate_input(s: &str) -> Result<()> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_lowercase()) {
        return Err(Error::Domain { input: s.to_string() });
    }
    Ok(())
}

/// An atomic operation or a depth-2 composition (first op applied first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StringProgram {
    pub ops: Vec<StringOp>,
}

impl StringProgram {
    pub fn new(ops: Vec<StringOp>) -> Result<Self> {
        let p = StringProgram { ops };
        p.validate()?;
        Ok(p)
    }

    pub fn atomic(op: StringOp) -> Self {
        StringProgram { ops: vec![op] }
    }

    pub fn pair(first: StringOp, second: StringOp) -> Self {
        StringProgram { ops: vec![first, second] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.ops.len()) {
            return Err(Error::InvalidExpr(format!("string program has {} ops (expected 1 or 2)", self.ops.len())));
        }
        Ok(())
    }

    pub fn is_composed(&self) -> bool {
        self.ops.len() == 2
    }

    /// Applies the program without input-alphabet checks.
    pub fn run(&self, s: &str) -> String {
        let mut cur = s.to_string();
        for op in &self.ops {
            cur = op.apply(&cur);
        }
        cur
    }

    /// Evaluates on a black-box input, rejecting characters outside a-z.
    pub fn eval(&self, s: &str) -> Result<String> {
        validate_input(s)?;
        Ok(self.run(s))
    }

    /// Size used for minimum-description selection: op count, then parameter length.
    pub fn size(&self) -> (usize, usize) {
        (self.ops.len(), self.ops.iter().map(|o| o.param_text().len()).sum())
    }

    /// Whether the program computes the identity on every probe string.
    pub fn is_identity_on(&self, probes: &[&str]) -> bool {
        probes.iter().all(|p| self.run(p) == *p)
    }

    pub fn describe(&self) -> String {
        match self.ops.as_slice() {
            [op] => op.describe(),
            [first, second] => format!("{}, then {}", first.describe(), second.describe()),
            _ => String::new(),
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        match self.ops.as_slice() {
            [op] => op.to_sexp(),
            ops => {
                let mut items = vec![sym("then")];
                items.extend(ops.iter().map(StringOp::to_sexp));
                Sexp::List(items)
            }
        }
    }

    pub fn from_sexp(s: &Sexp) -> Result<Self> {
        let items = s.as_list().ok_or_else(|| Error::Parse { offset: 0, msg: "expected list".into() })?;
        if items.first().and_then(Sexp::as_atom) == Some("then") {
            let ops = items[1..].iter().map(StringOp::from_sexp).collect::<Result<Vec<_>>>()?;
            StringProgram::new(ops)
        } else {
            Ok(StringProgram::atomic(StringOp::from_sexp(s)?))
        }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Self::from_sexp(&Sexp::parse(src)?)
    }
}

impl Ord for StringProgram {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size().cmp(&other.size()).then_with(|| self.ops.cmp(&other.ops))
    }
}

impl PartialOrd for StringProgram {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for StringProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(ops: Vec<StringOp>, s: &str) -> String {
        StringProgram::new(ops).unwrap().eval(s).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(run(vec![StringOp::Reverse], "apple"), "elppa");
        assert_eq!(run(vec![StringOp::Capitalize], "apple"), "APPLE");
        assert_eq!(run(vec![StringOp::Replace { from: 'a', to: 'b' }], "apple"), "bpple");
        assert_eq!(run(vec![StringOp::Replace { from: 'a', to: 'b' }, StringOp::Reverse], "apple"), "elppb");
        assert_eq!(run(vec![StringOp::ShiftLast, StringOp::Reverse], "apple"), "flppa");
        assert_eq!(run(vec![StringOp::Replace { from: 'a', to: 'b' }, StringOp::Capitalize], "apple"), "BPPLE");
    }

    #[test]
    fn shift_last_moves_forward_with_wrap() {
        assert_eq!(run(vec![StringOp::ShiftLast], "apple"), "applf");
        assert_eq!(run(vec![StringOp::ShiftLast], "abc"), "abd");
        assert_eq!(run(vec![StringOp::ShiftLast], "jazz"), "jaza");
        assert_eq!(run(vec![StringOp::Capitalize, StringOp::ShiftFirst], "zoo"), "AOO");
    }

    #[test]
    fn remaining_ops() {
        assert_eq!(run(vec![StringOp::Concatenate { suffix: "ly".into() }], "quick"), "quickly");
        assert_eq!(run(vec![StringOp::Prepend { prefix: "un".into() }], "do"), "undo");
        assert_eq!(run(vec![StringOp::DropFirst], "apple"), "pple");
        assert_eq!(run(vec![StringOp::DropLast], "apple"), "appl");
        assert_eq!(run(vec![StringOp::DuplicateLast], "apple"), "applee");
        assert_eq!(run(vec![StringOp::RemoveDuplicates], "banana"), "ban");
        assert_eq!(run(vec![StringOp::RemoveVowels], "apple"), "ppl");
        assert_eq!(run(vec![StringOp::RemoveVowels], "aeiou"), "");
        assert_eq!(run(vec![StringOp::SwapHalves], "abcde"), "cdeab");
        assert_eq!(run(vec![StringOp::RotateLeft { k: 2 }], "apple"), "pleap");
        assert_eq!(run(vec![StringOp::RotateLeft { k: 3 }], "ab"), "ba");
        assert_eq!(run(vec![StringOp::Capitalize, StringOp::Lowercase], "apple"), "apple");
    }

    #[test]
    fn rejects_out_of_alphabet() {
        let p = StringProgram::atomic(StringOp::Reverse);
        assert!(matches!(p.eval("Apple"), Err(Error::Domain { .. })));
        assert!(p.eval("ap ple").is_err());
        assert!(p.eval("").is_err());
        assert!(p.eval("caf\u{e9}").is_err());
    }

    #[test]
    fn program_length_enforced() {
        assert!(StringProgram::new(vec![]).is_err());
        assert!(StringProgram::new(vec![StringOp::Reverse; 3]).is_err());
    }

    #[test]
    fn identity_detection() {
        let probes = crate::words::PROBES;
        assert!(StringProgram::pair(StringOp::Reverse, StringOp::Reverse).is_identity_on(&probes));
        assert!(StringProgram::pair(StringOp::Capitalize, StringOp::Lowercase).is_identity_on(&probes));
        assert!(!StringProgram::pair(StringOp::Reverse, StringOp::ShiftLast).is_identity_on(&probes));
    }

    #[test]
    fn sexp_round_trip_and_order() {
        let p = StringProgram::pair(StringOp::Replace { from: 'a', to: 'b' }, StringOp::Reverse);
        assert_eq!(p.to_string(), r#"(then (replace "a" "b") (reverse))"#);
        assert_eq!(StringProgram::parse(&p.to_string()).unwrap(), p);
        let q = StringProgram::atomic(StringOp::RotateLeft { k: 2 });
        assert_eq!(StringProgram::parse(&q.to_string()).unwrap(), q);
        assert!(StringProgram::atomic(StringOp::Reverse) < p);
        assert!(StringOp::Capitalize < StringOp::Reverse);
        assert!(StringProgram::parse("(replace \"ab\" \"c\")").is_err());
    }
}
