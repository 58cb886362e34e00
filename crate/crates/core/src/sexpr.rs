//! Minimal s-expression reader used for the canonical text form of programs.
//!
//! Grammar: lists `( ... )`, double-quoted strings with `\"` and `\\`
//! escapes, and bare atoms (symbols, `:keywords`, numbers).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Sexp {
    Atom(String),
    Str(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn parse(src: &str) -> Result<Sexp> {
        let mut p = Reader { src: src.as_bytes(), pos: 0 };
        let v = p.value()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(v)
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Sexp::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_atom().and_then(|a| a.parse().ok())
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::Str(s) => {
                f.write_char('"')?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_char('\\')?;
                    }
                    f.write_char(c)?;
                }
                f.write_char('"')
            }
            Sexp::List(items) => {
                f.write_char('(')?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_char(' ')?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_char(')')
            }
        }
    }
}

/// Shortest round-trip rendering of a float, always with a decimal point or
/// exponent so it reads back as a float.
pub fn num(x: f64) -> Sexp {
    Sexp::Atom(alloc::format!("{x:?}"))
}

pub fn sym(s: &str) -> Sexp {
    Sexp::Atom(s.to_string())
}

/// Looks up `:key value` pairs in a list tail.
pub fn keyword<'a>(items: &'a [Sexp], key: &str) -> Option<&'a Sexp> {
    items
        .windows(2)
        .find(|w| w[0].as_atom().is_some_and(|a| a.strip_prefix(':') == Some(key)))
        .map(|w| &w[1])
}

pub fn keyword_f64(items: &[Sexp], key: &str) -> Result<f64> {
    keyword(items, key)
        .and_then(Sexp::as_f64)
        .ok_or_else(|| Error::Parse { offset: 0, msg: alloc::format!("missing numeric :{key}") })
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { offset: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn value(&mut self) -> Result<Sexp> {
        self.skip_ws();
        match self.src.get(self.pos) {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        None => return Err(self.err("unclosed list")),
                        Some(b')') => {
                            self.pos += 1;
                            return Ok(Sexp::List(items));
                        }
                        Some(_) => items.push(self.value()?),
                    }
                }
            }
            Some(b')') => Err(self.err("unexpected ')'")),
            Some(b'"') => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.src.get(self.pos) {
                        None => return Err(self.err("unterminated string")),
                        Some(b'"') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b'\\') => {
                            let c = *self.src.get(self.pos + 1).ok_or_else(|| self.err("dangling escape"))?;
                            out.push(c);
                            self.pos += 2;
                        }
                        Some(&c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                String::from_utf8(out).map(Sexp::Str).map_err(|_| self.err("invalid utf-8"))
            }
            Some(_) => {
                let start = self.pos;
                while self.pos < self.src.len() {
                    let c = self.src[self.pos];
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b'"' {
                        break;
                    }
                    self.pos += 1;
                }
                let s = core::str::from_utf8(&self.src[start..self.pos]).map_err(|_| self.err("invalid utf-8"))?;
                Ok(Sexp::Atom(s.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_and_strings() {
        let s = Sexp::parse(r#"(then (replace "a" "b") (reverse) :k -2.5)"#).unwrap();
        let items = s.as_list().unwrap();
        assert_eq!(items[0].as_atom(), Some("then"));
        assert_eq!(keyword_f64(items, "k").unwrap(), -2.5);
        assert_eq!(alloc::format!("{s}"), r#"(then (replace "a" "b") (reverse) :k -2.5)"#);
    }

    #[test]
    fn escapes_round_trip() {
        let s = Sexp::Str("a\"b\\c".into());
        assert_eq!(Sexp::parse(&alloc::format!("{s}")).unwrap(), s);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Sexp::parse("(a b").is_err());
        assert!(Sexp::parse("a)").is_err());
        assert!(Sexp::parse("\"x").is_err());
        assert!(Sexp::parse("").is_err());
    }
}
