//! Numeric expression grammar and its exact evaluation semantics.
//!
//! Every atom computes `scale * g(x; native) + bias` where `g` is the
//! family's native shape. Compositions combine two atoms from the
//! restricted composition subset with pointwise `+` or `*`.
//!
//! All transcendental functions go through `libm`, so results are
//! bit-identical across platforms and independent of the host libc.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sexpr::{keyword, keyword_f64, num, sym, Sexp};

/// Family of an atomic numeric function, without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Polynomial,
    Absolute,
    Root,
    Logarithm,
    Step,
    Relu,
    Sigmoid,
    Tanh,
    Constant,
    Power,
    Sin,
    Cos,
    Tan,
    Reciprocal,
    Gaussian,
    StudentT,
    Rational,
    Rectangle,
    SquareWave,
    Exponential,
    Ceiling,
    Floor,
    Erf,
}

impl Family {
    pub const ALL: [Family; 24] = [
        Family::Linear,
        Family::Polynomial,
        Family::Absolute,
        Family::Root,
        Family::Logarithm,
        Family::Step,
        Family::Relu,
        Family::Sigmoid,
        Family::Tanh,
        Family::Constant,
        Family::Power,
        Family::Sin,
        Family::Cos,
        Family::Tan,
        Family::Reciprocal,
        Family::Gaussian,
        Family::StudentT,
        Family::Rational,
        Family::Rectangle,
        Family::SquareWave,
        Family::Exponential,
        Family::Ceiling,
        Family::Floor,
        Family::Erf,
    ];

    /// Families sampled as standalone atomic functions.
    pub const ATOMIC: [Family; 21] = [
        Family::Linear,
        Family::Polynomial,
        Family::Absolute,
        Family::Root,
        Family::Logarithm,
        Family::Step,
        Family::Relu,
        Family::Sigmoid,
        Family::Tanh,
        Family::Constant,
        Family::Power,
        Family::Sin,
        Family::Cos,
        Family::Tan,
        Family::Reciprocal,
        Family::Gaussian,
        Family::StudentT,
        Family::Rational,
        Family::Rectangle,
        Family::SquareWave,
        Family::Exponential,
    ];

    /// The restricted subset allowed as children of a composition.
    pub const COMPOSABLE: [Family; 9] = [
        Family::Linear,
        Family::Polynomial,
        Family::Step,
        Family::Relu,
        Family::Constant,
        Family::Ceiling,
        Family::Floor,
        Family::Rectangle,
        Family::SquareWave,
    ];

    pub fn is_composable(self) -> bool {
        Self::COMPOSABLE.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Polynomial => "polynomial",
            Family::Absolute => "absolute",
            Family::Root => "root",
            Family::Logarithm => "logarithm",
            Family::Step => "step",
            Family::Relu => "relu",
            Family::Sigmoid => "sigmoid",
            Family::Tanh => "tanh",
            Family::Constant => "constant",
            Family::Power => "power",
            Family::Sin => "sin",
            Family::Cos => "cos",
            Family::Tan => "tan",
            Family::Reciprocal => "reciprocal",
            Family::Gaussian => "gaussian",
            Family::StudentT => "student_t",
            Family::Rational => "rational",
            Family::Rectangle => "rectangle",
            Family::SquareWave => "square_wave",
            Family::Exponential => "exponential",
            Family::Ceiling => "ceiling",
            Family::Floor => "floor",
            Family::Erf => "erf",
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Native shape of an atom together with its family-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Shape {
    Linear,
    /// Coefficients in ascending order of power.
    Polynomial { coeffs: Vec<f64> },
    Absolute,
    Root { degree: u32 },
    Logarithm,
    Step { threshold: f64 },
    /// Leaky ReLU; `leak = 0` is the plain rectifier.
    Relu { leak: f64 },
    Sigmoid { center: f64, width: f64 },
    Tanh { center: f64, width: f64 },
    Constant,
    Power { exponent: f64 },
    Sin { period: f64, phase: f64 },
    Cos { period: f64, phase: f64 },
    Tan { period: f64, phase: f64 },
    Reciprocal,
    /// Unnormalized bell with peak 1.
    Gaussian { mean: f64, std_dev: f64 },
    /// Student-t kernel with peak 1.
    StudentT { dof: f64, center: f64, width: f64 },
    /// Ratio of two polynomials, coefficients ascending.
    Rational { numerator: Vec<f64>, denominator: Vec<f64> },
    /// Indicator of `[start, start + width]`.
    Rectangle { start: f64, width: f64 },
    /// +1 on the first half of each period, -1 on the second.
    SquareWave { period: f64, phase: f64 },
    Exponential { rate: f64 },
    Ceiling,
    Floor,
    Erf { center: f64, width: f64 },
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|&c| c != 0.0)
}

impl Shape {
    pub fn family(&self) -> Family {
        match self {
            Shape::Linear => Family::Linear,
            Shape::Polynomial { .. } => Family::Polynomial,
            Shape::Absolute => Family::Absolute,
            Shape::Root { .. } => Family::Root,
            Shape::Logarithm => Family::Logarithm,
            Shape::Step { .. } => Family::Step,
            Shape::Relu { .. } => Family::Relu,
            Shape::Sigmoid { .. } => Family::Sigmoid,
            Shape::Tanh { .. } => Family::Tanh,
            Shape::Constant => Family::Constant,
            Shape::Power { .. } => Family::Power,
            Shape::Sin { .. } => Family::Sin,
            Shape::Cos { .. } => Family::Cos,
            Shape::Tan { .. } => Family::Tan,
            Shape::Reciprocal => Family::Reciprocal,
            Shape::Gaussian { .. } => Family::Gaussian,
            Shape::StudentT { .. } => Family::StudentT,
            Shape::Rational { .. } => Family::Rational,
            Shape::Rectangle { .. } => Family::Rectangle,
            Shape::SquareWave { .. } => Family::SquareWave,
            Shape::Exponential { .. } => Family::Exponential,
            Shape::Ceiling => Family::Ceiling,
            Shape::Floor => Family::Floor,
            Shape::Erf { .. } => Family::Erf,
        }
    }

    /// Number of native (shape) parameters, counted as free parameters.
    pub fn native_count(&self) -> usize {
        match self {
            Shape::Linear
            | Shape::Absolute
            | Shape::Logarithm
            | Shape::Constant
            | Shape::Reciprocal
            | Shape::Ceiling
            | Shape::Floor => 0,
            Shape::Root { .. } | Shape::Step { .. } | Shape::Relu { .. } | Shape::Power { .. } => 1,
            Shape::Exponential { .. } => 1,
            Shape::Polynomial { coeffs } => coeffs.len().saturating_sub(1),
            Shape::Rational { numerator, denominator } => numerator.len() + denominator.len() - 1,
            Shape::StudentT { .. } => 3,
            _ => 2,
        }
    }

    /// The native shape `g(x)`, or `None` where it is undefined over the reals.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let v = match *self {
            Shape::Linear => x,
            Shape::Polynomial { ref coeffs } => horner(coeffs, x),
            Shape::Absolute => libm::fabs(x),
            Shape::Root { degree } => {
                if degree % 2 == 0 {
                    if x < 0.0 {
                        return None;
                    }
                    if degree == 2 {
                        libm::sqrt(x)
                    } else {
                        libm::pow(x, 1.0 / f64::from(degree))
                    }
                } else if degree == 3 {
                    libm::cbrt(x)
                } else {
                    let r = libm::pow(libm::fabs(x), 1.0 / f64::from(degree));
                    if x < 0.0 {
                        -r
                    } else {
                        r
                    }
                }
            }
            Shape::Logarithm => {
                if x <= 0.0 {
                    return None;
                }
                libm::log(x)
            }
            Shape::Step { threshold } => {
                if x >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Relu { leak } => {
                if x > 0.0 {
                    x
                } else {
                    leak * x
                }
            }
            Shape::Sigmoid { center, width } => 1.0 / (1.0 + libm::exp(-(x - center) / width)),
            Shape::Tanh { center, width } => libm::tanh((x - center) / width),
            Shape::Constant => 1.0,
            Shape::Power { exponent } => {
                if x < 0.0 && libm::trunc(exponent) != exponent {
                    return None;
                }
                if x == 0.0 && exponent < 0.0 {
                    return None;
                }
                libm::pow(x, exponent)
            }
            Shape::Sin { period, phase } => libm::sin(2.0 * PI / period * (x - phase)),
            Shape::Cos { period, phase } => libm::cos(2.0 * PI / period * (x - phase)),
            Shape::Tan { period, phase } => {
                let t = 2.0 * PI / period * (x - phase);
                if libm::fabs(libm::cos(t)) < 1e-12 {
                    return None;
                }
                libm::tan(t)
            }
            Shape::Reciprocal => {
                if x == 0.0 {
                    return None;
                }
                1.0 / x
            }
            Shape::Gaussian { mean, std_dev } => {
                let z = (x - mean) / std_dev;
                libm::exp(-0.5 * z * z)
            }
            Shape::StudentT { dof, center, width } => {
                let z = (x - center) / width;
                libm::pow(1.0 + z * z / dof, -(dof + 1.0) / 2.0)
            }
            Shape::Rational { ref numerator, ref denominator } => {
                let q = horner(denominator, x);
                if q == 0.0 {
                    return None;
                }
                horner(numerator, x) / q
            }
            Shape::Rectangle { start, width } => {
                if x >= start && x <= start + width {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::SquareWave { period, phase } => {
                let t = (x - phase) / period;
                if t - libm::floor(t) < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
            Shape::Exponential { rate } => libm::exp(rate * x),
            Shape::Ceiling => libm::ceil(x),
            Shape::Floor => libm::floor(x),
            Shape::Erf { center, width } => libm::erf((x - center) / width),
        };
        v.is_finite().then_some(v)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidExpr(format!("{}: {m}", self.family())));
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            Shape::Polynomial { coeffs } => {
                if !finite(coeffs) {
                    return bad("non-finite coefficient");
                }
                if degree(coeffs).unwrap_or(0) < 1 {
                    return bad("degree must be at least 1");
                }
            }
            Shape::Root { degree } if *degree < 2 => return bad("root degree must be at least 2"),
            Shape::Rational { numerator, denominator } => {
                if !finite(numerator) || !finite(denominator) {
                    return bad("non-finite coefficient");
                }
                if degree(denominator).is_none() {
                    return bad("denominator is identically zero");
                }
            }
            Shape::Sigmoid { width, center }
            | Shape::Tanh { width, center }
            | Shape::Erf { width, center } => {
                if !(*width > 0.0) || !center.is_finite() || !width.is_finite() {
                    return bad("width must be positive");
                }
            }
            Shape::Sin { period, phase }
            | Shape::Cos { period, phase }
            | Shape::Tan { period, phase }
            | Shape::SquareWave { period, phase } => {
                if !(*period > 0.0) || !period.is_finite() || !phase.is_finite() {
                    return bad("period must be positive");
                }
            }
            Shape::Gaussian { mean, std_dev } => {
                if !(*std_dev > 0.0) || !mean.is_finite() || !std_dev.is_finite() {
                    return bad("std_dev must be positive");
                }
            }
            Shape::StudentT { dof, center, width } => {
                if !(*dof > 0.0) || !(*width > 0.0) || !center.is_finite() || !width.is_finite() {
                    return bad("dof and width must be positive");
                }
            }
            Shape::Rectangle { start, width } => {
                if !(*width > 0.0) || !start.is_finite() || !width.is_finite() {
                    return bad("width must be positive");
                }
            }
            Shape::Step { threshold } if !threshold.is_finite() => return bad("non-finite threshold"),
            Shape::Relu { leak } if !leak.is_finite() => return bad("non-finite leak"),
            Shape::Power { exponent } if !exponent.is_finite() => return bad("non-finite exponent"),
            Shape::Exponential { rate } if !rate.is_finite() => return bad("non-finite rate"),
            _ => {}
        }
        Ok(())
    }

    fn natives_sexp(&self) -> Vec<Sexp> {
        let kw = |k: &str| sym(&format!(":{k}"));
        let list = |v: &[f64]| Sexp::List(v.iter().copied().map(num).collect());
        match self {
            Shape::Polynomial { coeffs } => vec![kw("coeffs"), list(coeffs)],
            Shape::Root { degree } => vec![kw("degree"), sym(&degree.to_string())],
            Shape::Step { threshold } => vec![kw("threshold"), num(*threshold)],
            Shape::Relu { leak } => vec![kw("leak"), num(*leak)],
            Shape::Sigmoid { center, width } | Shape::Tanh { center, width } | Shape::Erf { center, width } => {
                vec![kw("center"), num(*center), kw("width"), num(*width)]
            }
            Shape::Power { exponent } => vec![kw("exponent"), num(*exponent)],
            Shape::Sin { period, phase }
            | Shape::Cos { period, phase }
            | Shape::Tan { period, phase }
            | Shape::SquareWave { period, phase } => vec![kw("period"), num(*period), kw("phase"), num(*phase)],
            Shape::Gaussian { mean, std_dev } => vec![kw("mean"), num(*mean), kw("std_dev"), num(*std_dev)],
            Shape::StudentT { dof, center, width } => {
                vec![kw("dof"), num(*dof), kw("center"), num(*center), kw("width"), num(*width)]
            }
            Shape::Rational { numerator, denominator } => {
                vec![kw("numerator"), list(numerator), kw("denominator"), list(denominator)]
            }
            Shape::Rectangle { start, width } => vec![kw("start"), num(*start), kw("width"), num(*width)],
            Shape::Exponential { rate } => vec![kw("rate"), num(*rate)],
            _ => Vec::new(),
        }
    }

    fn from_sexp(family: Family, items: &[Sexp]) -> Result<Shape> {
        let f = |k: &str| keyword_f64(items, k);
        let list = |k: &str| -> Result<Vec<f64>> {
            keyword(items, k)
                .and_then(Sexp::as_list)
                .and_then(|l| l.iter().map(Sexp::as_f64).collect::<Option<Vec<_>>>())
                .ok_or_else(|| Error::Parse { offset: 0, msg: format!("missing list :{k}") })
        };
        Ok(match family {
            Family::Linear => Shape::Linear,
            Family::Polynomial => Shape::Polynomial { coeffs: list("coeffs")? },
            Family::Absolute => Shape::Absolute,
            Family::Root => {
                let d = f("degree")?;
                if d < 2.0 || libm::trunc(d) != d || d > 64.0 {
                    return Err(Error::Parse { offset: 0, msg: "root degree must be an integer >= 2".into() });
                }
                Shape::Root { degree: d as u32 }
            }
            Family::Logarithm => Shape::Logarithm,
            Family::Step => Shape::Step { threshold: f("threshold")? },
            Family::Relu => Shape::Relu { leak: f("leak")? },
            Family::Sigmoid => Shape::Sigmoid { center: f("center")?, width: f("width")? },
            Family::Tanh => Shape::Tanh { center: f("center")?, width: f("width")? },
            Family::Constant => Shape::Constant,
            Family::Power => Shape::Power { exponent: f("exponent")? },
            Family::Sin => Shape::Sin { period: f("period")?, phase: f("phase")? },
            Family::Cos => Shape::Cos { period: f("period")?, phase: f("phase")? },
            Family::Tan => Shape::Tan { period: f("period")?, phase: f("phase")? },
            Family::Reciprocal => Shape::Reciprocal,
            Family::Gaussian => Shape::Gaussian { mean: f("mean")?, std_dev: f("std_dev")? },
            Family::StudentT => Shape::StudentT { dof: f("dof")?, center: f("center")?, width: f("width")? },
            Family::Rational => Shape::Rational { numerator: list("numerator")?, denominator: list("denominator")? },
            Family::Rectangle => Shape::Rectangle { start: f("start")?, width: f("width")? },
            Family::SquareWave => Shape::SquareWave { period: f("period")?, phase: f("phase")? },
            Family::Exponential => Shape::Exponential { rate: f("rate")? },
            Family::Ceiling => Shape::Ceiling,
            Family::Floor => Shape::Floor,
            Family::Erf => Shape::Erf { center: f("center")?, width: f("width")? },
        })
    }
}

/// A parameterized atomic function `scale * g(x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub shape: Shape,
    pub scale: f64,
    pub bias: f64,
}

impl Atom {
    pub fn new(shape: Shape, scale: f64, bias: f64) -> Self {
        Atom { shape, scale, bias }
    }

    pub fn linear(scale: f64, bias: f64) -> Self {
        Atom::new(Shape::Linear, scale, bias)
    }

    /// The constant function `x -> value`.
    pub fn constant(value: f64) -> Self {
        Atom::new(Shape::Constant, value, 0.0)
    }

    pub fn family(&self) -> Family {
        self.shape.family()
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let v = self.scale * self.shape.eval(x)? + self.bias;
        v.is_finite().then_some(v)
    }

    /// Free parameters: natives plus scale and bias (constants only count one).
    pub fn param_count(&self) -> usize {
        match self.shape {
            Shape::Constant => 1,
            _ => self.shape.native_count() + 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() || !self.bias.is_finite() {
            return Err(Error::InvalidExpr("non-finite scale or bias".into()));
        }
        self.shape.validate()
    }

    fn to_sexp(&self) -> Sexp {
        let mut items = vec![sym(self.family().name())];
        items.extend(self.shape.natives_sexp());
        items.extend([sym(":scale"), num(self.scale), sym(":bias"), num(self.bias)]);
        Sexp::List(items)
    }

    fn from_sexp(s: &Sexp) -> Result<Atom> {
        let items = s.as_list().ok_or_else(|| Error::Parse { offset: 0, msg: "expected atom list".into() })?;
        let head = items.first().and_then(Sexp::as_atom).unwrap_or("");
        let family = Family::from_name(head)
            .ok_or_else(|| Error::Parse { offset: 0, msg: format!("unknown family {head:?}") })?;
        let shape = Shape::from_sexp(family, &items[1..])?;
        Ok(Atom { shape, scale: keyword_f64(items, "scale")?, bias: keyword_f64(items, "bias")? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeOp {
    Sum,
    Product,
}

impl ComposeOp {
    pub fn name(self) -> &'static str {
        match self {
            ComposeOp::Sum => "sum",
            ComposeOp::Product => "product",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub op: ComposeOp,
    pub left: Atom,
    pub right: Atom,
}

/// An evaluable numeric expression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericExpr {
    Atom(Atom),
    Compose(Composition),
}

impl From<Atom> for NumericExpr {
    fn from(a: Atom) -> Self {
        NumericExpr::Atom(a)
    }
}

impl NumericExpr {
    pub fn compose(op: ComposeOp, left: Atom, right: Atom) -> Self {
        NumericExpr::Compose(Composition { op, left, right })
    }

    /// Evaluates the expression; `None` marks a point where it is undefined.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            NumericExpr::Atom(a) => a.eval(x),
            NumericExpr::Compose(c) => {
                let l = c.left.eval(x)?;
                let r = c.right.eval(x)?;
                let v = match c.op {
                    ComposeOp::Sum => l + r,
                    ComposeOp::Product => l * r,
                };
                v.is_finite().then_some(v)
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            NumericExpr::Atom(a) => a.param_count(),
            NumericExpr::Compose(c) => c.left.param_count() + c.right.param_count(),
        }
    }

    pub fn is_composed(&self) -> bool {
        matches!(self, NumericExpr::Compose(_))
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            NumericExpr::Atom(a) => vec![a],
            NumericExpr::Compose(c) => vec![&c.left, &c.right],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NumericExpr::Atom(a) => a.validate(),
            NumericExpr::Compose(c) => {
                for child in [&c.left, &c.right] {
                    if !child.family().is_composable() {
                        return Err(Error::InvalidExpr(format!(
                            "{} is not allowed inside a composition",
                            child.family()
                        )));
                    }
                    child.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        match self {
            NumericExpr::Atom(a) => a.to_sexp(),
            NumericExpr::Compose(c) => Sexp::List(vec![sym(c.op.name()), c.left.to_sexp(), c.right.to_sexp()]),
        }
    }

    pub fn from_sexp(s: &Sexp) -> Result<Self> {
        let items = s.as_list().ok_or_else(|| Error::Parse { offset: 0, msg: "expected list".into() })?;
        let op = match items.first().and_then(Sexp::as_atom) {
            Some("sum") => Some(ComposeOp::Sum),
            Some("product") => Some(ComposeOp::Product),
            _ => None,
        };
        let expr = match op {
            Some(op) if items.len() == 3 => {
                NumericExpr::compose(op, Atom::from_sexp(&items[1])?, Atom::from_sexp(&items[2])?)
            }
            Some(_) => {
                return Err(Error::Parse { offset: 0, msg: "a composition takes exactly two children".into() })
            }
            None => NumericExpr::Atom(Atom::from_sexp(s)?),
        };
        expr.validate()?;
        Ok(expr)
    }

    /// Parses the canonical s-expression text form.
    pub fn parse(src: &str) -> Result<Self> {
        Self::from_sexp(&Sexp::parse(src)?)
    }

    /// Human-readable formula, e.g. `2x + 3`.
    pub fn formula(&self) -> String {
        match self {
            NumericExpr::Atom(a) => atom_formula(a),
            NumericExpr::Compose(c) => {
                let sep = match c.op {
                    ComposeOp::Sum => " + ",
                    ComposeOp::Product => " * ",
                };
                format!("({}){sep}({})", atom_formula(&c.left), atom_formula(&c.right))
            }
        }
    }
}

impl fmt::Display for NumericExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}

/// Compact decimal for formulas: integers print without a fraction.
pub(crate) fn fmt_num(v: f64) -> String {
    if v == libm::trunc(v) && libm::fabs(v) < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn poly_formula(coeffs: &[f64]) -> String {
    let mut terms = Vec::new();
    for (k, &c) in coeffs.iter().enumerate().rev() {
        if c == 0.0 {
            continue;
        }
        let mag = fmt_num(libm::fabs(c));
        let body = match k {
            0 => mag,
            1 => format!("{}x", if libm::fabs(c) == 1.0 { String::new() } else { mag }),
            _ => format!("{}x^{k}", if libm::fabs(c) == 1.0 { String::new() } else { mag }),
        };
        let sign = if c < 0.0 { "-" } else { "+" };
        terms.push((sign, body));
    }
    if terms.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (i, (sign, body)) in terms.iter().enumerate() {
        if i == 0 {
            if *sign == "-" {
                out.push('-');
            }
        } else {
            out.push_str(if *sign == "-" { " - " } else { " + " });
        }
        out.push_str(body);
    }
    out
}

fn shape_formula(shape: &Shape) -> String {
    let shifted = |c: f64| {
        if c == 0.0 {
            "x".to_string()
        } else if c < 0.0 {
            format!("x + {}", fmt_num(-c))
        } else {
            format!("x - {}", fmt_num(c))
        }
    };
    match shape {
        Shape::Linear => "x".into(),
        Shape::Polynomial { coeffs } => poly_formula(coeffs),
        Shape::Absolute => "|x|".into(),
        Shape::Root { degree: 2 } => "sqrt(x)".into(),
        Shape::Root { degree } => format!("x^(1/{degree})"),
        Shape::Logarithm => "ln(x)".into(),
        Shape::Step { threshold } => format!("[x >= {}]", fmt_num(*threshold)),
        Shape::Relu { leak } if *leak == 0.0 => "max(x, 0)".into(),
        Shape::Relu { leak } => format!("leaky_relu(x, {})", fmt_num(*leak)),
        Shape::Sigmoid { center, width } => format!("sigmoid(({}) / {})", shifted(*center), fmt_num(*width)),
        Shape::Tanh { center, width } => format!("tanh(({}) / {})", shifted(*center), fmt_num(*width)),
        Shape::Erf { center, width } => format!("erf(({}) / {})", shifted(*center), fmt_num(*width)),
        Shape::Constant => "1".into(),
        Shape::Power { exponent } => format!("x^{}", fmt_num(*exponent)),
        Shape::Sin { period, phase } => format!("sin(2pi/{} * ({}))", fmt_num(*period), shifted(*phase)),
        Shape::Cos { period, phase } => format!("cos(2pi/{} * ({}))", fmt_num(*period), shifted(*phase)),
        Shape::Tan { period, phase } => format!("tan(2pi/{} * ({}))", fmt_num(*period), shifted(*phase)),
        Shape::Reciprocal => "1/x".into(),
        Shape::Gaussian { mean, std_dev } => {
            format!("exp(-({})^2 / (2*{}^2))", shifted(*mean), fmt_num(*std_dev))
        }
        Shape::StudentT { dof, center, width } => format!(
            "(1 + (({}) / {})^2 / {})^(-{})",
            shifted(*center),
            fmt_num(*width),
            fmt_num(*dof),
            fmt_num((dof + 1.0) / 2.0)
        ),
        Shape::Rational { numerator, denominator } => {
            format!("({}) / ({})", poly_formula(numerator), poly_formula(denominator))
        }
        Shape::Rectangle { start, width } => {
            format!("[{} <= x <= {}]", fmt_num(*start), fmt_num(start + width))
        }
        Shape::SquareWave { period, phase } => {
            format!("square(2pi/{} * ({}))", fmt_num(*period), shifted(*phase))
        }
        Shape::Exponential { rate } => format!("exp({}x)", fmt_num(*rate)),
        Shape::Ceiling => "ceil(x)".into(),
        Shape::Floor => "floor(x)".into(),
    }
}

fn atom_formula(a: &Atom) -> String {
    if let Shape::Constant = a.shape {
        return fmt_num(a.scale + a.bias);
    }
    let mut g = shape_formula(&a.shape);
    if a.scale != 1.0 && matches!(a.shape, Shape::Polynomial { .. } | Shape::Rational { .. }) {
        g = format!("({g})");
    }
    let head = if a.scale == 1.0 {
        g
    } else if a.scale == -1.0 {
        format!("-{g}")
    } else {
        format!("{}{}{g}", fmt_num(a.scale), if matches!(a.shape, Shape::Linear) { "" } else { "*" })
    };
    match a.bias {
        b if b == 0.0 => head,
        b if b < 0.0 => format!("{head} - {}", fmt_num(-b)),
        b => format!("{head} + {}", fmt_num(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f00470() -> NumericExpr {
        NumericExpr::compose(
            ComposeOp::Product,
            Atom::new(Shape::Polynomial { coeffs: vec![3.9, 0.4, -2.6, -0.7, -4.5] }, 1.0, 0.0),
            Atom::new(Shape::Relu { leak: 0.3 }, -25.3, 5.2),
        )
    }

    #[test]
    fn linear_hand_evaluation() {
        assert_eq!(NumericExpr::from(Atom::linear(2.0, 3.0)).eval(4.0), Some(11.0));
    }

    #[test]
    fn absolute_at_zero() {
        assert_eq!(Atom::new(Shape::Absolute, 1.0, 0.0).eval(0.0), Some(0.0));
    }

    #[test]
    fn undefined_points() {
        assert_eq!(Atom::new(Shape::Reciprocal, 1.0, 0.0).eval(0.0), None);
        assert_eq!(Atom::new(Shape::Logarithm, 1.0, 0.0).eval(0.0), None);
        assert_eq!(Atom::new(Shape::Logarithm, 1.0, 0.0).eval(-1.0), None);
        assert_eq!(Atom::new(Shape::Root { degree: 2 }, 1.0, 0.0).eval(-4.0), None);
        assert_eq!(Atom::new(Shape::Root { degree: 3 }, 1.0, 0.0).eval(-8.0), Some(-2.0));
        assert_eq!(Atom::new(Shape::Power { exponent: 0.5 }, 1.0, 0.0).eval(-1.0), None);
        assert_eq!(Atom::new(Shape::Power { exponent: 3.0 }, 1.0, 0.0).eval(-2.0), Some(-8.0));
        let r = Shape::Rational { numerator: vec![0.0, 1.0], denominator: vec![2.0, 1.0] };
        assert_eq!(Atom::new(r, 1.0, 0.0).eval(-2.0), None);
    }

    #[test]
    fn appendix_sample_at_zero() {
        // (3.9)(5.2) with every other term vanishing at x = 0.
        assert_eq!(f00470().eval(0.0), Some(3.9 * 5.2));
        assert_eq!(format!("{:?}", f00470().eval(0.0).unwrap()), "20.28");
        // Leaky branch: x = -1 -> (-4.5 + 0.7 - 2.6 - 0.4 + 3.9) * (-25.3 * -0.3 + 5.2)
        let want = (-4.5 + 0.7 - 2.6 - 0.4 + 3.9) * (-25.3 * (-1.0 * 0.3) + 5.2);
        assert!((f00470().eval(-1.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn periodic_table_row() {
        let s = Atom::new(Shape::Sin { period: 8.0, phase: 2.0 }, 1.0, 0.0);
        assert!(s.eval(2.0).unwrap().abs() < 1e-15);
        assert!((s.eval(4.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_wave_and_rectangle() {
        let sq = Shape::SquareWave { period: 4.0, phase: 0.0 };
        assert_eq!(sq.eval(0.5), Some(1.0));
        assert_eq!(sq.eval(2.5), Some(-1.0));
        assert_eq!(sq.eval(-1.0), Some(-1.0));
        let r = Shape::Rectangle { start: -1.0, width: 2.0 };
        assert_eq!(r.eval(1.0), Some(1.0));
        assert_eq!(r.eval(1.01), Some(0.0));
    }

    #[test]
    fn composition_children_restricted() {
        let bad = NumericExpr::compose(ComposeOp::Sum, Atom::linear(1.0, 0.0), Atom::new(Shape::Logarithm, 1.0, 0.0));
        assert!(bad.validate().is_err());
        assert!(f00470().validate().is_ok());
    }

    #[test]
    fn degenerate_shapes_rejected() {
        let p = Atom::new(Shape::Polynomial { coeffs: vec![1.0, 0.0] }, 1.0, 0.0);
        assert!(p.validate().is_err());
        let q = Atom::new(Shape::Rational { numerator: vec![1.0], denominator: vec![0.0, 0.0] }, 1.0, 0.0);
        assert!(q.validate().is_err());
    }

    #[test]
    fn sexp_round_trip() {
        let e = f00470();
        let text = e.to_string();
        assert_eq!(NumericExpr::parse(&text).unwrap(), e);
        assert!(text.starts_with("(product (polynomial :coeffs (3.9 0.4 -2.6 -0.7 -4.5)"));
    }

    #[test]
    fn formulas() {
        assert_eq!(NumericExpr::from(Atom::linear(2.0, 3.0)).formula(), "2x + 3");
        assert_eq!(NumericExpr::from(Atom::constant(5.0)).formula(), "5");
        assert_eq!(f00470().formula(), "(-4.5x^4 - 0.7x^3 - 2.6x^2 + 0.4x + 3.9) * (-25.3*leaky_relu(x, 0.3) + 5.2)");
    }
}
