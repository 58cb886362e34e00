//! Black-box access to a function: formatted query responses, budgets and
//! an append-only transcript.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::relations::{FactTable, UNDEFINED};
use crate::spec::{FunctionSpec, Payload};

/// Prefix of every response line.
pub const RESPONSE_PREFIX: &str = "Function input - output pairs: ";
/// Output token for undefined numeric values and invalid inputs.
pub const NONE: &str = "None";

/// Shortest decimal that round-trips, in the style of a Python float repr.
pub fn format_value(v: f64) -> String {
    let s = format!("{v:?}");
    // Python writes exponents with a sign and at least two digits.
    match s.split_once('e') {
        Some((m, e)) => {
            let (sign, digits) = e.strip_prefix('-').map_or(("+", e), |d| ("-", d));
            format!("{m}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

/// Formats a complete response line from `(input, output)` pairs.
pub fn format_line<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut line = String::from(RESPONSE_PREFIX);
    for (i, o) in pairs {
        line.push('(');
        line.push_str(i);
        line.push_str(", ");
        line.push_str(o);
        line.push(')');
    }
    line
}

/// A spec bound to the data it needs at query time.
#[derive(Debug, Clone)]
pub struct BoundFunction {
    pub spec: FunctionSpec,
    pub net: Option<Mlp>,
    pub table: Option<FactTable>,
}

impl BoundFunction {
    /// Binds a spec; approximated specs need their network, relations their table.
    pub fn new(spec: FunctionSpec, net: Option<Mlp>, table: Option<FactTable>) -> Result<Self> {
        spec.validate()?;
        if spec.approximation().is_some() && net.is_none() {
            return Err(Error::Invalid(format!("{}: approximated function needs its network weights", spec.id)));
        }
        if let Payload::Relation(r) = &spec.ast {
            match &table {
                Some(t) => r.validate_against(t)?,
                None => return Err(Error::Invalid(format!("{}: relation needs its fact table", spec.id))),
            }
        }
        Ok(BoundFunction { spec, net, table })
    }

    pub fn plain(spec: FunctionSpec) -> Result<Self> {
        Self::new(spec, None, None)
    }

    /// Noiseless, uncorrupted value: the network if present, else the expression.
    pub fn base(&self, x: f64) -> Option<f64> {
        match (&self.net, self.spec.numeric()) {
            (Some(net), _) => {
                let v = net.forward(x);
                v.is_finite().then_some(v)
            }
            (None, Some(e)) => e.eval(x),
            _ => None,
        }
    }

    /// Observed numeric value: corruption replaces the base value on the
    /// corrupted side, then additive noise applies. `draw` indexes the
    /// random stream within session `nonce`.
    pub fn observe(&self, x: f64, nonce: u64, draw: u64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        let mut v = match self.spec.corruption() {
            Some(c) if c.corrupts(x) => Some(c.draw(nonce, draw)),
            _ => self.base(x),
        }?;
        if let Some(n) = self.spec.noise() {
            v += n.draw(nonce, draw);
        }
        v.is_finite().then_some(v)
    }

    /// The output token for one raw input argument.
    pub fn respond(&self, input: &str, nonce: u64, draw: u64) -> String {
        match &self.spec.ast {
            Payload::Numeric(_) => match input.trim().parse::<f64>() {
                Ok(x) => self.observe(x, nonce, draw).map_or_else(|| NONE.to_string(), format_value),
                Err(_) => NONE.to_string(),
            },
            Payload::Strings(p) => p.eval(input).unwrap_or_else(|_| NONE.to_string()),
            Payload::Relation(r) => match &self.table {
                Some(t) => r.eval(t, input),
                None => UNDEFINED.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum number of calls.
    pub max_queries: Option<usize>,
    /// Maximum number of inputs evaluated over the whole session.
    pub max_evaluations: Option<usize>,
    /// Maximum number of inputs in one call.
    pub max_inputs: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_queries: None, max_evaluations: None, max_inputs: 1024 }
    }
}

impl Budget {
    pub fn evaluations(n: usize) -> Self {
        Budget { max_evaluations: Some(n), ..Budget::default() }
    }

    pub fn queries(n: usize) -> Self {
        Budget { max_queries: Some(n), ..Budget::default() }
    }
}

/// One call: raw arguments joined by spaces, the response line, and a timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub input: String,
    pub output: String,
    pub timestamp_ms: u64,
}

fn zero_clock() -> u64 {
    0
}

pub struct Session<'a> {
    func: &'a BoundFunction,
    nonce: u64,
    budget: Budget,
    draws: u64,
    transcript: Vec<Exchange>,
    /// Observed `(input, output)` pairs in query order.
    observations: Vec<(String, String)>,
    clock: fn() -> u64,
}

impl<'a> Session<'a> {
    /// Opens a session. Nonce 0 gives the reproducible benchmark stream.
    pub fn open(func: &'a BoundFunction, nonce: u64, budget: Budget) -> Self {
        Session {
            func,
            nonce,
            budget,
            draws: 0,
            transcript: Vec::new(),
            observations: Vec::new(),
            clock: zero_clock,
        }
    }

    /// Sets the timestamp source (milliseconds); the default always reports 0.
    pub fn with_clock(mut self, clock: fn() -> u64) -> Self {
        self.clock = clock;
        self
    }

    pub fn function_id(&self) -> &str {
        &self.func.spec.id
    }

    pub fn category(&self) -> crate::spec::Category {
        self.func.spec.category
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn query_count(&self) -> usize {
        self.transcript.len()
    }

    pub fn evaluations(&self) -> usize {
        self.observations.len()
    }

    /// Inputs still allowed by the evaluation budget.
    pub fn remaining(&self) -> usize {
        let by_calls = match self.budget.max_queries {
            Some(m) if self.transcript.len() >= m => 0,
            _ => usize::MAX,
        };
        let by_evals = self.budget.max_evaluations.map_or(usize::MAX, |m| m.saturating_sub(self.observations.len()));
        by_calls.min(by_evals)
    }

    pub fn transcript(&self) -> &[Exchange] {
        &self.transcript
    }

    pub fn observations(&self) -> &[(String, String)] {
        &self.observations
    }

    pub fn into_transcript(self) -> Vec<Exchange> {
        self.transcript
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyQuery);
        }
        if n > self.budget.max_inputs {
            return Err(Error::TooManyInputs { limit: self.budget.max_inputs, got: n });
        }
        if let Some(m) = self.budget.max_queries {
            if self.transcript.len() >= m {
                return Err(Error::BudgetExhausted { budget: m });
            }
        }
        if let Some(m) = self.budget.max_evaluations {
            if self.observations.len() + n > m {
                return Err(Error::BudgetExhausted { budget: m });
            }
        }
        Ok(())
    }

    /// Evaluates `inputs` and returns the formatted response line.
    pub fn query<S: AsRef<str>>(&mut self, inputs: &[S]) -> Result<String> {
        self.check(inputs.len())?;
        let start = self.observations.len();
        for input in inputs {
            let input = input.as_ref();
            let out = self.func.respond(input, self.nonce, self.draws);
            self.draws += 1;
            self.observations.push((input.to_string(), out));
        }
        let line = format_line(self.observations[start..].iter().map(|(i, o)| (i.as_str(), o.as_str())));
        let raw: Vec<&str> = inputs.iter().map(AsRef::as_ref).collect();
        self.transcript.push(Exchange { input: raw.join(" "), output: line.clone(), timestamp_ms: (self.clock)() });
        Ok(line)
    }

    /// Queries numeric points and returns parsed values.
    pub fn query_values(&mut self, xs: &[f64]) -> Result<Vec<Option<f64>>> {
        let args: Vec<String> = xs.iter().map(|&x| format_value(x)).collect();
        self.query(&args)?;
        let start = self.observations.len() - xs.len();
        Ok(self.observations[start..].iter().map(|(_, o)| o.parse::<f64>().ok()).collect())
    }

    /// Queries text inputs and returns the raw output tokens.
    pub fn query_texts<S: AsRef<str>>(&mut self, inputs: &[S]) -> Result<Vec<String>> {
        self.query(inputs)?;
        let start = self.observations.len() - inputs.len();
        Ok(self.observations[start..].iter().map(|(_, o)| o.clone()).collect())
    }
}

/// Parses a response line back into `(input, output)` pairs. Inputs that
/// contain `", "` or parentheses are not recoverable and yield `None`.
pub fn parse_line(line: &str) -> Option<Vec<(String, String)>> {
    let mut rest = line.trim_end().strip_prefix(RESPONSE_PREFIX)?;
    let mut out = Vec::new();
    while !rest.is_empty() {
        rest = rest.strip_prefix('(')?;
        let close = rest.find(')')?;
        let (body, tail) = rest.split_at(close);
        let (i, o) = body.split_once(", ")?;
        out.push((i.to_string(), o.to_string()));
        rest = &tail[1..];
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modifiers::{Modifier, NoiseKind, NoiseSpec};
    use crate::numeric::{Atom, NumericExpr, Shape};
    use crate::spec::{Category, Subcategory, TestSet};
    use crate::strings::{StringOp, StringProgram};
    use alloc::vec;

    #[test]
    fn values_print_like_python_floats() {
        let cases = [
            (1e16, "1e+16"),
            (1.5e-5, "1.5e-05"),
            (-2.5e-300, "-2.5e-300"),
            (0.0001, "0.0001"),
            (123456789012345.6, "123456789012345.6"),
            (1e22, "1e+22"),
            (-0.0, "-0.0"),
            (0.1 + 0.2, "0.30000000000000004"),
        ];
        for (v, want) in cases {
            assert_eq!(format_value(v), want);
        }
    }

    fn spec(ast: Payload, modifiers: Vec<Modifier>) -> FunctionSpec {
        FunctionSpec {
            id: "f00001".into(),
            category: ast.category(),
            subcategory: Subcategory::Atomic,
            ast,
            modifiers,
            seed: 1,
            description: String::new(),
            domain_note: String::new(),
            test_set: TestSet::Grid { extra: vec![] },
        }
    }

    #[test]
    fn appendix_sample_line() {
        let e = NumericExpr::parse(
            "(product (polynomial :coeffs (3.9 0.4 -2.6 -0.7 -4.5) :scale 1.0 :bias 0.0) \
             (relu :leak 0.3 :scale -25.3 :bias 5.2))",
        )
        .unwrap();
        let f = BoundFunction::plain(spec(Payload::Numeric(e), vec![])).unwrap();
        let mut s = Session::open(&f, 0, Budget::default());
        assert_eq!(s.query(&["0"]).unwrap(), "Function input - output pairs: (0, 20.28)");
    }

    #[test]
    fn string_and_undefined_lines() {
        let f = BoundFunction::plain(spec(Payload::Strings(StringProgram::atomic(StringOp::Reverse)), vec![])).unwrap();
        let mut s = Session::open(&f, 0, Budget::default());
        assert_eq!(s.query(&["apple", "cat"]).unwrap(), "Function input - output pairs: (apple, elppa)(cat, tac)");
        let r = BoundFunction::plain(spec(Payload::Numeric(Atom::new(Shape::Reciprocal, 1.0, 0.0).into()), vec![]))
            .unwrap();
        let mut s = Session::open(&r, 0, Budget::default());
        assert_eq!(s.query(&["0", "abc", "4"]).unwrap(), "Function input - output pairs: (0, None)(abc, None)(4, 0.25)");
        assert_eq!(s.category(), Category::Numeric);
    }

    #[test]
    fn budget_and_empty_queries() {
        let f = BoundFunction::plain(spec(Payload::Numeric(Atom::linear(1.0, 0.0).into()), vec![])).unwrap();
        let mut s = Session::open(&f, 0, Budget::queries(5));
        assert!(s.transcript().is_empty());
        for i in 0..5 {
            s.query(&[format!("{i}")]).unwrap();
        }
        assert!(matches!(s.query(&["6"]), Err(Error::BudgetExhausted { budget: 5 })));
        assert_eq!(s.query_count(), 5);
        let empty: [&str; 0] = [];
        assert!(matches!(s.query(&empty), Err(Error::EmptyQuery)));
        let mut e = Session::open(&f, 0, Budget::evaluations(3));
        assert!(e.query(&["1", "2", "3", "4"]).is_err());
        e.query(&["1", "2", "3"]).unwrap();
        assert_eq!(e.remaining(), 0);
    }

    #[test]
    fn nonce_zero_sessions_repeat() {
        let noise = Modifier::Noise(NoiseSpec { kind: NoiseKind::Normal { sigma: 2.0 }, seed: 77 });
        let f = BoundFunction::plain(spec(Payload::Numeric(Atom::linear(1.0, 0.0).into()), vec![noise])).unwrap();
        let run = |nonce| {
            let mut s = Session::open(&f, nonce, Budget::default());
            s.query(&["1", "1", "2"]).unwrap();
            s.query(&["1"]).unwrap();
            s.into_transcript()
        };
        assert_eq!(run(0), run(0));
        assert_ne!(run(0), run(1));
        let t = run(0);
        let pairs = parse_line(&t[0].output).unwrap();
        assert_ne!(pairs[0].1, pairs[1].1, "repeated inputs get fresh noise");
    }

    #[test]
    fn parse_round_trip() {
        let line = format_line([("1", "2.0"), ("x", "None")]);
        assert_eq!(parse_line(&line).unwrap(), vec![("1".to_string(), "2.0".to_string()), ("x".into(), "None".into())]);
        assert!(parse_line("garbage").is_none());
    }
}
