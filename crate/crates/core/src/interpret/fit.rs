//! Model search over the numeric grammar.
//!
//! Every candidate is a family with fixed native parameters whose linear
//! coefficients (scale, bias, polynomial coefficients) are solved by least
//! squares. Nonlinear natives come from parameter grids, jump detection or
//! Levenberg-Marquardt refinement. Candidates are ranked by penalized NMSE.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use super::linalg::{lstsq, rank_one};
use super::lm;
use crate::numeric::{Atom, ComposeOp, Family, NumericExpr, Shape};

/// Relative error below which fits count as exact.
pub const NMSE_FLOOR: f64 = 1e-9;
/// Multiplicative penalty per free parameter.
pub const PARAM_PENALTY: f64 = 0.02;
/// Additive penalty for the fraction of points with mismatched definedness.
pub const DOMAIN_PENALTY: f64 = 0.01;

/// Observations with replicates averaged, sorted by input.
#[derive(Debug, Clone, Default)]
pub struct Points {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Inputs where the function was observed to be undefined.
    pub undefined: Vec<f64>,
    pub energy: f64,
}

impl Points {
    pub fn new(mut obs: Vec<(f64, Option<f64>)>) -> Self {
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut p = Points::default();
        let mut i = 0;
        while i < obs.len() {
            let x = obs[i].0;
            let (mut sum, mut n, mut undef) = (0.0, 0usize, false);
            while i < obs.len() && obs[i].0 == x {
                match obs[i].1 {
                    Some(y) => {
                        sum += y;
                        n += 1;
                    }
                    None => undef = true,
                }
                i += 1;
            }
            if n > 0 {
                p.xs.push(x);
                p.ys.push(sum / n as f64);
            } else if undef {
                p.undefined.push(x);
            }
        }
        p.energy = p.ys.iter().map(|y| y * y).sum();
        p
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn total(&self) -> usize {
        self.xs.len() + self.undefined.len()
    }

    pub fn nmse(&self, sse: f64) -> f64 {
        if self.energy > 0.0 {
            sse / self.energy
        } else if sse == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// A scored candidate.
#[derive(Debug, Clone)]
pub struct Fit {
    pub expr: NumericExpr,
    pub sse: f64,
    pub mismatches: usize,
    pub score: f64,
}

impl Fit {
    pub fn new(expr: NumericExpr, d: &Points) -> Self {
        let (sse, mismatches) = assess(&expr, d);
        let score = score(d, sse, mismatches, expr.param_count());
        Fit { expr, sse, mismatches, score }
    }

    pub fn nmse(&self, d: &Points) -> f64 {
        d.nmse(self.sse)
    }
}

/// Orders fits by score, breaking ties by canonical text.
pub fn better(a: &Fit, b: &Fit) -> Ordering {
    a.score.total_cmp(&b.score).then_with(|| a.expr.to_string().cmp(&b.expr.to_string()))
}

/// Squared error on defined points (a candidate undefined there is charged
/// the full square) and the count of definedness mismatches.
pub fn assess(expr: &NumericExpr, d: &Points) -> (f64, usize) {
    let mut sse = 0.0;
    let mut mism = 0;
    for (&x, &y) in d.xs.iter().zip(&d.ys) {
        match expr.eval(x) {
            Some(v) => sse += (y - v) * (y - v),
            None => {
                sse += y * y;
                mism += 1;
            }
        }
    }
    mism += d.undefined.iter().filter(|&&x| expr.eval(x).is_some()).count();
    (if sse.is_finite() { sse } else { f64::INFINITY }, mism)
}

pub fn score(d: &Points, sse: f64, mismatches: usize, params: usize) -> f64 {
    let nmse = d.nmse(sse).max(NMSE_FLOOR);
    let dom = if d.total() > 0 { DOMAIN_PENALTY * mismatches as f64 / d.total() as f64 } else { 0.0 };
    nmse * (1.0 + PARAM_PENALTY * params as f64) + dom
}

/// A family with fixed natives; its value is `bias + sum(c_k * basis_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub shape: Shape,
}

fn wrap(v: f64, p: f64) -> f64 {
    let r = v - libm::floor(v / p) * p;
    if r >= p {
        0.0
    } else {
        r
    }
}

impl Term {
    pub fn new(shape: Shape) -> Self {
        Term { shape }
    }

    pub fn width(&self) -> usize {
        match &self.shape {
            Shape::Constant => 0,
            Shape::Polynomial { coeffs } => coeffs.len() - 1,
            Shape::Relu { .. } | Shape::Sin { .. } | Shape::Cos { .. } => 2,
            _ => 1,
        }
    }

    /// Writes the basis values at `x`; false where the family is undefined.
    pub fn basis(&self, x: f64, out: &mut Vec<f64>) -> bool {
        out.clear();
        match &self.shape {
            Shape::Constant => {}
            Shape::Linear => out.push(x),
            Shape::Polynomial { coeffs } => {
                let mut p = 1.0;
                for _ in 1..coeffs.len() {
                    p *= x;
                    out.push(p);
                }
            }
            Shape::Relu { .. } => {
                out.push(x.max(0.0));
                out.push(x.min(0.0));
            }
            Shape::Sin { period, .. } | Shape::Cos { period, .. } => {
                let w = 2.0 * PI / period;
                out.push(libm::sin(w * x));
                out.push(libm::cos(w * x));
            }
            s => match s.eval(x) {
                Some(v) => out.push(v),
                None => return false,
            },
        }
        true
    }

    /// The atom `bias + c . basis`, if representable.
    pub fn atom(&self, bias: f64, c: &[f64]) -> Option<Atom> {
        let atom = match &self.shape {
            Shape::Constant => Atom::constant(bias),
            Shape::Linear => Atom::linear(c[0], bias),
            Shape::Polynomial { .. } => {
                if c.iter().all(|v| *v == 0.0) {
                    return None;
                }
                let mut coeffs = vec![bias];
                coeffs.extend_from_slice(c);
                Atom::new(Shape::Polynomial { coeffs }, 1.0, 0.0)
            }
            Shape::Relu { .. } => {
                if c[0].abs() < 1e-12 * (1.0 + c[1].abs()) {
                    return None;
                }
                Atom::new(Shape::Relu { leak: c[1] / c[0] }, c[0], bias)
            }
            Shape::Sin { period, .. } => {
                let w = 2.0 * PI / period;
                let r = libm::hypot(c[0], c[1]);
                let phase = wrap(-libm::atan2(c[1], c[0]) / w, *period);
                Atom::new(Shape::Sin { period: *period, phase }, r, bias)
            }
            Shape::Cos { period, .. } => {
                let w = 2.0 * PI / period;
                let r = libm::hypot(c[0], c[1]);
                let phase = wrap(libm::atan2(c[0], c[1]) / w, *period);
                Atom::new(Shape::Cos { period: *period, phase }, r, bias)
            }
            s => Atom::new(s.clone(), c[0], bias),
        };
        atom.validate().ok()?;
        Some(atom)
    }
}

/// Basis columns of a term over the data; `None` rows are undefined.
fn columns(term: &Term, xs: &[f64]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let w = term.width();
    let mut cols = vec![Vec::with_capacity(xs.len()); w];
    let mut ok = Vec::with_capacity(xs.len());
    let mut buf = Vec::with_capacity(w);
    for &x in xs {
        let good = term.basis(x, &mut buf) && buf.iter().all(|v| v.is_finite());
        ok.push(good);
        for k in 0..w {
            cols[k].push(if good { buf[k] } else { 0.0 });
        }
    }
    (cols, ok)
}

/// Solves the linear coefficients of a single term; returns the atom and
/// the least-squares SSE (undefined rows charged in full).
pub fn solve_term(term: &Term, d: &Points) -> Option<(Atom, f64)> {
    let (cols, ok) = columns(term, &d.xs);
    let mut charged = 0.0;
    let mut y = Vec::with_capacity(d.len());
    let keep: Vec<usize> = (0..d.len()).filter(|&i| ok[i]).collect();
    for i in 0..d.len() {
        if ok[i] {
            y.push(d.ys[i]);
        } else {
            charged += d.ys[i] * d.ys[i];
        }
    }
    if keep.is_empty() {
        return None;
    }
    let mut a = vec![vec![1.0; keep.len()]];
    for c in &cols {
        a.push(keep.iter().map(|&i| c[i]).collect());
    }
    let sol = lstsq(&a, &y);
    let atom = term.atom(sol.coef[0], &sol.coef[1..])?;
    Some((atom, sol.sse + charged))
}

fn range(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = libm::round((hi - lo) / step) as usize;
    (0..=n).map(move |k| lo + step * k as f64)
}

/// Native parameter grids for families whose shape is nonlinear.
fn grid_terms(family: Family) -> Vec<Term> {
    let t = Term::new;
    match family {
        Family::Constant => vec![t(Shape::Constant)],
        Family::Linear => vec![t(Shape::Linear)],
        Family::Absolute => vec![t(Shape::Absolute)],
        Family::Logarithm => vec![t(Shape::Logarithm)],
        Family::Reciprocal => vec![t(Shape::Reciprocal)],
        Family::Ceiling => vec![t(Shape::Ceiling)],
        Family::Floor => vec![t(Shape::Floor)],
        Family::Relu => vec![t(Shape::Relu { leak: 0.0 })],
        Family::Polynomial => (2..=10).map(|d| t(Shape::Polynomial { coeffs: vec![0.0; d + 1] })).collect(),
        Family::Root => vec![t(Shape::Root { degree: 2 }), t(Shape::Root { degree: 3 })],
        Family::Power => [0.5, 1.5, 2.0, 3.0, 4.0].iter().map(|&e| t(Shape::Power { exponent: e })).collect(),
        Family::Sigmoid | Family::Tanh | Family::Erf => {
            let mut v = Vec::new();
            for center in range(-70.0, 70.0, 2.0) {
                for width in [0.7, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.5, 8.0, 10.0, 13.0] {
                    v.push(t(match family {
                        Family::Sigmoid => Shape::Sigmoid { center, width },
                        Family::Tanh => Shape::Tanh { center, width },
                        _ => Shape::Erf { center, width },
                    }));
                }
            }
            v
        }
        Family::Gaussian => {
            let mut v = Vec::new();
            for mean in range(-70.0, 70.0, 1.0) {
                for std_dev in [1.5, 2.0, 3.0, 4.0, 5.0, 6.5, 8.0, 10.0, 12.0, 15.0, 18.0, 22.0, 26.0] {
                    v.push(t(Shape::Gaussian { mean, std_dev }));
                }
            }
            v
        }
        Family::StudentT => {
            let mut v = Vec::new();
            for dof in 1..=5 {
                for center in range(-70.0, 70.0, 2.0) {
                    for width in [2.0, 3.0, 4.5, 6.0, 8.0, 10.0, 13.0, 16.0, 20.0, 24.0] {
                        v.push(t(Shape::StudentT { dof: f64::from(dof), center, width }));
                    }
                }
            }
            v
        }
        Family::Exponential => range(0.001, 0.12, 0.0005)
            .flat_map(|r| [t(Shape::Exponential { rate: r }), t(Shape::Exponential { rate: -r })])
            .collect(),
        Family::Rational => range(-30.0, 30.0, 0.5)
            .map(|d0| t(Shape::Rational { numerator: vec![d0 + 1.0, 1.0], denominator: vec![d0, 1.0] }))
            .collect(),
        Family::Sin => {
            // Angular frequencies covering periods from 4 to 64.
            let (lo, hi) = (2.0 * PI / 64.0, 2.0 * PI / 4.0);
            range(lo, hi, 4e-4).map(|w| t(Shape::Sin { period: 2.0 * PI / w, phase: 0.0 })).collect()
        }
        _ => Vec::new(),
    }
}

/// SSE of `y ~ a g + b` for a one-column term, without building the atom.
fn simple_sse(term: &Term, xs: &[f64], ys: &[f64]) -> f64 {
    let (mut n, mut sg, mut sy, mut sgg, mut sgy, mut syy, mut charged) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        match term.shape.eval(x) {
            Some(g) => {
                n += 1.0;
                sg += g;
                sy += y;
                sgg += g * g;
                sgy += g * y;
                syy += y * y;
            }
            None => charged += y * y,
        }
    }
    if n == 0.0 {
        return f64::INFINITY;
    }
    let vg = sgg - sg * sg / n;
    let vy = syy - sy * sy / n;
    let cov = sgy - sg * sy / n;
    let e = if vg > 1e-12 * sgg.max(1e-300) { vy - cov * cov / vg } else { vy };
    let e = e.max(0.0) + charged;
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

/// Best `keep` grid terms of a family by least-squares SSE.
fn best_of_grid(family: Family, d: &Points, keep: usize) -> Vec<(Atom, f64)> {
    let terms = grid_terms(family);
    let mut found: Vec<(Atom, f64)> = if terms.iter().all(|t| t.width() == 1) && terms.len() > 8 {
        let mut scored: Vec<(f64, usize)> =
            terms.iter().enumerate().map(|(i, t)| (simple_sse(t, &d.xs, &d.ys), i)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.iter().take(keep.max(1) * 2).filter_map(|&(_, i)| solve_term(&terms[i], d)).collect()
    } else {
        terms.iter().filter_map(|t| solve_term(t, d)).collect()
    };
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    found.truncate(keep);
    found
}

/// A detected discontinuity between two adjacent sample points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub lo: f64,
    pub hi: f64,
    pub size: f64,
}

impl Jump {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Finds gaps where neither one-sided linear extrapolation explains the
/// change in value, relative to the local level of such errors.
pub fn jumps(d: &Points) -> Vec<Jump> {
    let n = d.len();
    if n < 4 {
        return Vec::new();
    }
    let (x, y) = (&d.xs, &d.ys);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut s = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let h = x[i + 1] - x[i];
        let left = (i >= 1).then(|| {
            let slope = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            (y[i + 1] - (y[i] + slope * h)).abs()
        });
        let right = (i + 2 < n).then(|| {
            let slope = (y[i + 2] - y[i + 1]) / (x[i + 2] - x[i + 1]);
            (y[i] - (y[i + 1] - slope * h)).abs()
        });
        s[i] = match (left, right) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        };
    }
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let lo = i.saturating_sub(8);
        let hi = (i + 9).min(n - 1);
        let mut local: Vec<f64> = (lo..hi).filter(|&k| k != i).map(|k| s[k]).collect();
        let med = median(&mut local);
        let dy = y[i + 1] - y[i];
        if s[i] > 10.0 * med + 1e-7 * scale && dy.abs() > 1e-9 * scale {
            out.push(Jump { lo: x[i], hi: x[i + 1], size: dy });
        }
    }
    out
}

/// A value inside `(lo, hi]` on the 0.1 grid if one exists, else the midpoint.
fn snapped_cut(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let s = libm::round(mid * 10.0) / 10.0;
    if s > lo && s <= hi {
        return s;
    }
    let up = libm::ceil(lo * 10.0 + 1e-9) / 10.0;
    if up > lo && up <= hi {
        up
    } else {
        mid
    }
}

fn ssd(sum: f64, sq: f64, n: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        (sq - sum * sum / n).max(0.0)
    }
}

/// Step thresholds and rectangle edges from exhaustive two-level splits.
fn split_candidates(d: &Points) -> (Vec<Term>, Vec<Term>) {
    let n = d.len();
    if n < 3 {
        return (Vec::new(), Vec::new());
    }
    let mut ps = vec![0.0; n + 1];
    let mut pq = vec![0.0; n + 1];
    for i in 0..n {
        ps[i + 1] = ps[i] + d.ys[i];
        pq[i + 1] = pq[i] + d.ys[i] * d.ys[i];
    }
    let (ts, tq) = (ps[n], pq[n]);
    let mut steps: Vec<(f64, usize)> = (1..n)
        .map(|k| (ssd(ps[k], pq[k], k as f64) + ssd(ts - ps[k], tq - pq[k], (n - k) as f64), k))
        .collect();
    steps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step_terms = steps
        .iter()
        .take(3)
        .map(|&(_, k)| Term::new(Shape::Step { threshold: snapped_cut(d.xs[k - 1], d.xs[k]) }))
        .collect();
    let mut rects: Vec<(f64, usize, usize)> = Vec::new();
    for i in 1..n {
        for j in i..n - 1 {
            let (s_in, q_in) = (ps[j + 1] - ps[i], pq[j + 1] - pq[i]);
            let e = ssd(s_in, q_in, (j + 1 - i) as f64) + ssd(ts - s_in, tq - q_in, (n - (j + 1 - i)) as f64);
            rects.push((e, i, j));
        }
    }
    rects.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rect_terms = rects
        .iter()
        .take(3)
        .filter_map(|&(_, i, j)| {
            let start = snapped_cut(d.xs[i - 1], d.xs[i]);
            // The rectangle is closed, so its end lies in [x_j, x_{j+1}).
            let end = -snapped_cut(-d.xs[j + 1], -d.xs[j]);
            (end > start).then(|| Term::new(Shape::Rectangle { start, width: end - start }))
        })
        .collect();
    (step_terms, rect_terms)
}

/// Period and phase of a regular train of jumps, if the jumps look regular.
fn regular_train(marks: &[f64]) -> Option<(f64, f64)> {
    if marks.len() < 3 {
        return None;
    }
    let mut gaps: Vec<f64> = marks.windows(2).map(|w| w[1] - w[0]).collect();
    let h0 = median(&mut gaps);
    if !(h0 > 1.0) {
        return None;
    }
    let ks: Vec<f64> = marks.iter().map(|m| libm::round((m - marks[0]) / h0)).collect();
    let resid_ok = marks.iter().zip(&ks).all(|(m, k)| (m - marks[0] - k * h0).abs() < 0.3 * h0);
    if !resid_ok {
        return None;
    }
    let fit = lstsq(&[vec![1.0; ks.len()], ks.clone()], marks);
    let (a, h) = (fit.coef[0], fit.coef[1]);
    (h > 1.0).then_some((h, a))
}

/// Candidate square-wave terms from jump trains and dominant frequencies.
fn square_candidates(js: &[Jump], sines: &[(Atom, f64)]) -> Vec<Term> {
    let mut out = Vec::new();
    let marks: Vec<f64> = js.iter().map(Jump::mid).collect();
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    if let Some((h, a)) = regular_train(&marks) {
        let period = 2.0 * h;
        seeds.push((period, wrap(a, period)));
        seeds.push((period, wrap(a + h, period)));
    }
    for (atom, _) in sines.iter().take(2) {
        if let Shape::Sin { period, phase } = atom.shape {
            seeds.push((period, phase));
            seeds.push((period, wrap(phase + period / 2.0, period)));
        }
    }
    for (period, phase) in seeds {
        for p in [period, libm::round(period * 10.0) / 10.0] {
            let c = wrap(phase, p);
            for c in [c, libm::round(c * 10.0) / 10.0] {
                let t = Term::new(Shape::SquareWave { period: p, phase: wrap(c, p) });
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
    }
    out
}

/// Screens tangent periods and phases on the 0.1 grid, when the data shows
/// pole-like outliers.
fn tan_candidates(d: &Points) -> Vec<(Atom, f64)> {
    let n = d.len();
    if n < 16 {
        return Vec::new();
    }
    let mut vals = d.ys.clone();
    let med = median(&mut vals);
    let dev: Vec<f64> = d.ys.iter().map(|y| (y - med).abs()).collect();
    let mad = median(&mut dev.clone());
    let big = dev.iter().filter(|&&v| v > 20.0 * mad).count();
    if !(mad > 0.0) || big < 3 || big * 5 > n {
        return Vec::new();
    }
    // Screening subset: the most extreme points plus an even spread.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]));
    let mut sub: Vec<usize> = idx.iter().take(20).copied().collect();
    sub.extend((0..20).map(|k| k * (n - 1) / 19));
    sub.sort_unstable();
    sub.dedup();
    let sx: Vec<f64> = sub.iter().map(|&i| d.xs[i]).collect();
    let sy: Vec<f64> = sub.iter().map(|&i| d.ys[i]).collect();
    let mut screened: Vec<(f64, f64, f64)> = Vec::new();
    for p10 in 40..=600u32 {
        let period = f64::from(p10) / 10.0;
        let mut c10 = 0u32;
        while f64::from(c10) / 10.0 < period {
            let phase = f64::from(c10) / 10.0;
            c10 += 1;
            screened.push((simple_sse(&Term::new(Shape::Tan { period, phase }), &sx, &sy), period, phase));
        }
    }
    screened.sort_by(|a, b| a.0.total_cmp(&b.0));
    screened
        .iter()
        .take(12)
        .filter_map(|&(_, period, phase)| solve_term(&Term::new(Shape::Tan { period, phase }), d))
        .collect()
}

/// Continuous parameters of an atom for refinement.
fn atom_params(a: &Atom, out: &mut Vec<f64>) {
    match &a.shape {
        Shape::Polynomial { coeffs } => {
            out.extend_from_slice(coeffs);
            return;
        }
        Shape::Sigmoid { center, width } | Shape::Tanh { center, width } | Shape::Erf { center, width } => {
            out.extend([*center, *width])
        }
        Shape::Gaussian { mean, std_dev } => out.extend([*mean, *std_dev]),
        Shape::StudentT { dof, center, width } => out.extend([*dof, *center, *width]),
        Shape::Sin { period, phase } | Shape::Cos { period, phase } | Shape::Tan { period, phase } => {
            out.extend([*period, *phase])
        }
        Shape::Power { exponent } => out.push(*exponent),
        Shape::Exponential { rate } => out.push(*rate),
        Shape::Relu { leak } => out.push(*leak),
        Shape::Rational { numerator, denominator } => out.extend([numerator[0], denominator[0]]),
        _ => {}
    }
    if a.shape != Shape::Constant {
        out.push(a.scale);
    }
    out.push(a.bias);
}

fn atom_from(template: &Atom, p: &[f64], at: &mut usize) -> Atom {
    let mut take = || {
        let v = p[*at];
        *at += 1;
        v
    };
    let shape = match &template.shape {
        Shape::Polynomial { coeffs } => {
            let c: Vec<f64> = (0..coeffs.len()).map(|_| take()).collect();
            return Atom::new(Shape::Polynomial { coeffs: c }, 1.0, 0.0);
        }
        Shape::Sigmoid { .. } => Shape::Sigmoid { center: take(), width: take() },
        Shape::Tanh { .. } => Shape::Tanh { center: take(), width: take() },
        Shape::Erf { .. } => Shape::Erf { center: take(), width: take() },
        Shape::Gaussian { .. } => Shape::Gaussian { mean: take(), std_dev: take() },
        Shape::StudentT { .. } => Shape::StudentT { dof: take(), center: take(), width: take() },
        Shape::Sin { .. } => Shape::Sin { period: take(), phase: take() },
        Shape::Cos { .. } => Shape::Cos { period: take(), phase: take() },
        Shape::Tan { .. } => Shape::Tan { period: take(), phase: take() },
        Shape::Power { .. } => Shape::Power { exponent: take() },
        Shape::Exponential { .. } => Shape::Exponential { rate: take() },
        Shape::Relu { .. } => Shape::Relu { leak: take() },
        Shape::Rational { numerator, denominator } => {
            let (n0, d0) = (take(), take());
            let mut num = numerator.clone();
            let mut den = denominator.clone();
            num[0] = n0;
            den[0] = d0;
            Shape::Rational { numerator: num, denominator: den }
        }
        s => s.clone(),
    };
    if shape == Shape::Constant {
        return Atom::constant(take());
    }
    let scale = take();
    let bias = take();
    Atom::new(shape, scale, bias)
}

pub fn params(e: &NumericExpr) -> Vec<f64> {
    let mut v = Vec::new();
    for a in e.atoms() {
        atom_params(a, &mut v);
    }
    v
}

pub fn with_params(template: &NumericExpr, p: &[f64]) -> NumericExpr {
    let mut at = 0;
    match template {
        NumericExpr::Atom(a) => NumericExpr::Atom(atom_from(a, p, &mut at)),
        NumericExpr::Compose(c) => {
            let l = atom_from(&c.left, p, &mut at);
            let r = atom_from(&c.right, p, &mut at);
            NumericExpr::compose(c.op, l, r)
        }
    }
}

/// Levenberg-Marquardt polish of all continuous parameters.
pub fn refine(fit: &Fit, d: &Points, iters: usize) -> Fit {
    let p0 = params(&fit.expr);
    if p0.is_empty() || d.is_empty() {
        return fit.clone();
    }
    let template = fit.expr.clone();
    let resid = |p: &[f64], r: &mut [f64]| {
        let e = with_params(&template, p);
        let valid = e.validate().is_ok();
        for (i, (&x, &y)) in d.xs.iter().zip(&d.ys).enumerate() {
            r[i] = match e.eval(x) {
                Some(v) if valid => y - v,
                _ => 1e3 * (1.0 + y.abs()),
            };
        }
    };
    let (p, _) = lm::minimize(&p0, d.len(), &resid, iters);
    let e = with_params(&template, &p);
    if e.validate().is_err() {
        return fit.clone();
    }
    let cand = Fit::new(e, d);
    if better(&cand, fit) == Ordering::Less {
        cand
    } else {
        fit.clone()
    }
}

fn snap_to(v: f64, step: f64) -> f64 {
    let k = libm::round(v / step);
    let inv = libm::round(1.0 / step);
    if inv >= 1.0 && (1.0 / step - inv).abs() < 1e-9 {
        k / inv
    } else {
        k * step
    }
}

fn snap_atom(a: &Atom) -> Atom {
    let s = |v: f64| snap_to(v, 0.1);
    let shape = match &a.shape {
        Shape::Polynomial { coeffs } => Shape::Polynomial { coeffs: coeffs.iter().map(|&c| s(c)).collect() },
        Shape::Step { threshold } => Shape::Step { threshold: s(*threshold) },
        Shape::Relu { leak } => Shape::Relu { leak: s(*leak) },
        Shape::Sigmoid { center, width } => Shape::Sigmoid { center: s(*center), width: s(*width) },
        Shape::Tanh { center, width } => Shape::Tanh { center: s(*center), width: s(*width) },
        Shape::Erf { center, width } => Shape::Erf { center: s(*center), width: s(*width) },
        Shape::Gaussian { mean, std_dev } => Shape::Gaussian { mean: s(*mean), std_dev: s(*std_dev) },
        Shape::StudentT { dof, center, width } => {
            Shape::StudentT { dof: libm::round(*dof), center: s(*center), width: s(*width) }
        }
        Shape::Power { exponent } => Shape::Power { exponent: snap_to(*exponent, 0.5) },
        Shape::Sin { period, phase } => Shape::Sin { period: s(*period), phase: s(*phase) },
        Shape::Cos { period, phase } => Shape::Cos { period: s(*period), phase: s(*phase) },
        Shape::Tan { period, phase } => Shape::Tan { period: s(*period), phase: s(*phase) },
        Shape::SquareWave { period, phase } => Shape::SquareWave { period: s(*period), phase: s(*phase) },
        Shape::Rectangle { start, width } => Shape::Rectangle { start: s(*start), width: s(*width) },
        Shape::Exponential { rate } => Shape::Exponential { rate: snap_to(*rate, 0.001) },
        Shape::Rational { numerator, denominator } => Shape::Rational {
            numerator: numerator.iter().map(|&c| libm::round(c)).collect(),
            denominator: denominator.iter().map(|&c| libm::round(c)).collect(),
        },
        other => other.clone(),
    };
    Atom::new(shape, libm::round(a.scale), libm::round(a.bias))
}

fn scaled(a: &Atom, k: f64) -> Atom {
    match &a.shape {
        Shape::Polynomial { coeffs } => {
            Atom::new(Shape::Polynomial { coeffs: coeffs.iter().map(|c| c * k).collect() }, 1.0, 0.0)
        }
        Shape::Constant => Atom::constant(a.scale * k),
        s => Atom::new(s.clone(), a.scale * k, a.bias * k),
    }
}

/// Rounds parameters to the grids they are usually drawn from and keeps the
/// result when it explains the data about as well.
pub fn snap(fit: &Fit, d: &Points) -> Fit {
    let mut variants: Vec<NumericExpr> = Vec::new();
    match &fit.expr {
        NumericExpr::Atom(a) => {
            variants.push(snap_atom(a).into());
            // Constants are stored in the scale slot.
            if a.shape == Shape::Constant {
                variants.push(Atom::constant(libm::round(a.scale)).into());
            }
            if let Shape::Rational { numerator, denominator } = &a.shape {
                // Rewrite `s(x+n)/(x+d) + b` with integer n by moving the
                // constant part of the ratio into the bias.
                let (n0, d0) = (numerator[0], denominator[0]);
                let amp = a.scale * (n0 - d0);
                let base = a.bias + a.scale;
                for s in 1..=30 {
                    for sign in [1.0, -1.0] {
                        let sc = sign * f64::from(s);
                        let n = libm::round(d0 + amp / sc);
                        let shape = Shape::Rational {
                            numerator: vec![n, 1.0],
                            denominator: vec![libm::round(d0), 1.0],
                        };
                        variants.push(Atom::new(shape, sc, libm::round(base - sc)).into());
                    }
                }
            }
        }
        NumericExpr::Compose(c) => {
            let (l, r) = (&c.left, &c.right);
            variants.push(NumericExpr::compose(c.op, snap_atom(l), snap_atom(r)));
            match c.op {
                ComposeOp::Sum => {
                    let total = l.bias + r.bias;
                    let mut l2 = l.clone();
                    let mut r2 = r.clone();
                    if let Shape::Polynomial { coeffs } = &mut l2.shape {
                        coeffs[0] += r.bias;
                        r2.bias = 0.0;
                    } else {
                        l2.bias = total;
                        if !matches!(r2.shape, Shape::Polynomial { .. } | Shape::Constant) {
                            r2.bias = 0.0;
                        }
                    }
                    variants.push(NumericExpr::compose(c.op, snap_atom(&l2), snap_atom(&r2)));
                }
                ComposeOp::Product => {
                    // Spread the free common factor so one side gets an integer scale.
                    let (anchor, other_left) = if matches!(r.shape, Shape::Polynomial { .. }) { (l, false) } else { (r, true) };
                    if anchor.scale != 0.0 && !matches!(anchor.shape, Shape::Polynomial { .. }) {
                        for m in 1..=30 {
                            for sign in [1.0, -1.0] {
                                let k = anchor.scale / (sign * f64::from(m));
                                let (nl, nr) = if other_left {
                                    (scaled(l, k), scaled(r, 1.0 / k))
                                } else {
                                    (scaled(l, 1.0 / k), scaled(r, k))
                                };
                                variants.push(NumericExpr::compose(c.op, snap_atom(&nl), snap_atom(&nr)));
                            }
                        }
                    }
                }
            }
        }
    }
    let n = d.len().max(1) as f64;
    let k = fit.expr.param_count() as f64;
    let tol = 2.0 * k * fit.sse / n + 1e-13 * d.energy;
    let mut best: Option<Fit> = None;
    for v in variants {
        if v.validate().is_err() {
            continue;
        }
        let cand = Fit::new(v, d);
        if cand.mismatches <= fit.mismatches
            && cand.sse <= fit.sse + tol
            && best.as_ref().is_none_or(|b| cand.sse < b.sse)
        {
            best = Some(cand);
        }
    }
    match best {
        Some(mut b) => {
            // A snapped fit is preferred over an equally good unsnapped one.
            b.score = b.score.min(fit.score);
            b
        }
        None => fit.clone(),
    }
}

const ATOMIC_ORDER: [Family; 22] = [
    Family::Constant,
    Family::Linear,
    Family::Polynomial,
    Family::Absolute,
    Family::Root,
    Family::Logarithm,
    Family::Step,
    Family::Relu,
    Family::Sigmoid,
    Family::Tanh,
    Family::Erf,
    Family::Power,
    Family::Sin,
    Family::Tan,
    Family::Reciprocal,
    Family::Gaussian,
    Family::StudentT,
    Family::Rational,
    Family::Rectangle,
    Family::SquareWave,
    Family::Exponential,
    Family::Ceiling,
];

/// Candidate atoms per family before refinement.
fn atomic_seeds(d: &Points, js: &[Jump]) -> (Vec<(Atom, f64)>, Vec<(Atom, f64)>) {
    let mut seeds: Vec<(Atom, f64)> = Vec::new();
    let mut sines = Vec::new();
    let (steps, rects) = split_candidates(d);
    for family in ATOMIC_ORDER {
        let found = match family {
            Family::Step => steps.iter().filter_map(|t| solve_term(t, d)).collect(),
            Family::Rectangle => rects.iter().filter_map(|t| solve_term(t, d)).collect(),
            Family::Tan => tan_candidates(d),
            Family::SquareWave => continue,
            Family::Polynomial => best_of_grid(family, d, 9),
            Family::Sin => {
                let best = best_of_grid(family, d, 3);
                sines = best.clone();
                let mut v = best.clone();
                // The same least-squares solution written as a cosine.
                for (a, e) in &best {
                    if let Shape::Sin { period, .. } = a.shape {
                        let t = Term::new(Shape::Cos { period, phase: 0.0 });
                        if let Some((c, _)) = solve_term(&t, d) {
                            v.push((c, *e));
                        }
                    }
                }
                v
            }
            Family::Ceiling => {
                let mut v = best_of_grid(Family::Ceiling, d, 1);
                v.extend(best_of_grid(Family::Floor, d, 1));
                v
            }
            _ => best_of_grid(family, d, 2),
        };
        seeds.extend(found);
    }
    for t in square_candidates(js, &sines) {
        if let Some(s) = solve_term(&t, d) {
            seeds.push(s);
        }
    }
    (seeds, sines)
}

fn needs_refinement(a: &Atom) -> bool {
    !matches!(
        a.shape,
        Shape::Constant
            | Shape::Linear
            | Shape::Polynomial { .. }
            | Shape::Absolute
            | Shape::Logarithm
            | Shape::Reciprocal
            | Shape::Ceiling
            | Shape::Floor
            | Shape::Step { .. }
            | Shape::Rectangle { .. }
            | Shape::SquareWave { .. }
            | Shape::Root { .. }
    )
}

/// Terms usable inside compositions, with natives from the data.
fn composable_terms(d: &Points, js: &[Jump], sines: &[(Atom, f64)]) -> Vec<Term> {
    let mut v = vec![Term::new(Shape::Linear)];
    for deg in 2..=5 {
        v.push(Term::new(Shape::Polynomial { coeffs: vec![0.0; deg + 1] }));
    }
    v.push(Term::new(Shape::Relu { leak: 0.0 }));
    v.push(Term::new(Shape::Ceiling));
    v.push(Term::new(Shape::Floor));
    let mut big: Vec<Jump> = js.to_vec();
    big.sort_by(|a, b| b.size.abs().total_cmp(&a.size.abs()));
    big.truncate(8);
    big.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let (steps, rects) = split_candidates(d);
    for j in &big {
        let t = Term::new(Shape::Step { threshold: snapped_cut(j.lo, j.hi) });
        if !v.contains(&t) {
            v.push(t);
        }
    }
    for t in steps {
        if !v.contains(&t) {
            v.push(t);
        }
    }
    for (i, a) in big.iter().enumerate() {
        for b in &big[i + 1..] {
            let start = snapped_cut(a.lo, a.hi);
            let end = -snapped_cut(-b.hi, -b.lo);
            if end > start {
                v.push(Term::new(Shape::Rectangle { start, width: end - start }));
            }
        }
    }
    for t in rects {
        if !v.contains(&t) {
            v.push(t);
        }
    }
    for t in square_candidates(js, sines) {
        v.push(t);
    }
    v
}

fn is_poly_like(t: &Term) -> bool {
    matches!(t.shape, Shape::Linear | Shape::Polynomial { .. })
}

fn redundant(op: ComposeOp, a: &Term, b: &Term) -> bool {
    let relu = |t: &Term| matches!(t.shape, Shape::Relu { .. });
    match op {
        ComposeOp::Sum => {
            (is_poly_like(a) && is_poly_like(b))
                || (relu(a) && (relu(b) || matches!(b.shape, Shape::Linear)))
                || (relu(b) && matches!(a.shape, Shape::Linear))
        }
        ComposeOp::Product => is_poly_like(a) && is_poly_like(b),
    }
}

/// Least-squares fit of a composition with fixed natives.
fn solve_pair(op: ComposeOp, a: &Term, b: &Term, ca: &[Vec<f64>], cb: &[Vec<f64>], d: &Points) -> Option<Fit> {
    let n = d.len();
    let one = vec![1.0; n];
    match op {
        ComposeOp::Sum => {
            let mut cols = vec![one];
            cols.extend(ca.iter().cloned());
            cols.extend(cb.iter().cloned());
            let sol = lstsq(&cols, &d.ys);
            let wa = ca.len();
            let l = a.atom(sol.coef[0], &sol.coef[1..1 + wa])?;
            let r = b.atom(0.0, &sol.coef[1 + wa..])?;
            Some(Fit::new(NumericExpr::compose(op, l, r), d))
        }
        ComposeOp::Product => {
            let ea: Vec<&Vec<f64>> = core::iter::once(&one).chain(ca.iter()).collect();
            let eb: Vec<&Vec<f64>> = core::iter::once(&one).chain(cb.iter()).collect();
            let mut cols = Vec::with_capacity(ea.len() * eb.len());
            for u in &ea {
                for w in &eb {
                    cols.push(u.iter().zip(w.iter()).map(|(p, q)| p * q).collect::<Vec<f64>>());
                }
            }
            let sol = lstsq(&cols, &d.ys);
            let m: Vec<Vec<f64>> = (0..ea.len()).map(|i| sol.coef[i * eb.len()..(i + 1) * eb.len()].to_vec()).collect();
            let (u, w) = rank_one(&m);
            let l = a.atom(u[0], &u[1..])?;
            let r = b.atom(w[0], &w[1..])?;
            Some(Fit::new(NumericExpr::compose(op, l, r), d))
        }
    }
}

fn composition_search(d: &Points, js: &[Jump], sines: &[(Atom, f64)], keep: usize) -> Vec<Fit> {
    let terms = composable_terms(d, js, sines);
    let cols: Vec<Vec<Vec<f64>>> = terms.iter().map(|t| columns(t, &d.xs).0).collect();
    let mut fits: Vec<Fit> = Vec::new();
    for i in 0..terms.len() {
        for j in i..terms.len() {
            for op in [ComposeOp::Sum, ComposeOp::Product] {
                if redundant(op, &terms[i], &terms[j]) {
                    continue;
                }
                if let Some(f) = solve_pair(op, &terms[i], &terms[j], &cols[i], &cols[j], d) {
                    fits.push(f);
                }
            }
        }
    }
    fits.sort_by(better);
    fits.truncate(keep);
    fits
}

/// Search effort knobs.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    /// Levenberg-Marquardt iterations per refined candidate.
    pub lm_iters: usize,
    /// Candidates refined after the grid stage.
    pub refine_top: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { lm_iters: 60, refine_top: 14 }
    }
}

/// Best expression for the data, or `None` if there is nothing to fit.
pub fn search(d: &Points, cfg: &SearchConfig) -> Option<Fit> {
    if d.is_empty() {
        return None;
    }
    let js = jumps(d);
    let (seeds, sines) = atomic_seeds(d, &js);
    let mut fits: Vec<Fit> = seeds.into_iter().map(|(a, _)| Fit::new(a.into(), d)).collect();
    fits.sort_by(better);
    // Refine the best few per family so every shape gets a fair chance.
    let mut refined: Vec<Fit> = Vec::new();
    let mut per_family: Vec<(Family, usize)> = Vec::new();
    for f in &fits {
        let fam = f.expr.atoms()[0].family();
        let count = match per_family.iter_mut().find(|(g, _)| *g == fam) {
            Some((_, c)) => {
                *c += 1;
                *c
            }
            None => {
                per_family.push((fam, 1));
                1
            }
        };
        let take = count <= 1 || (count <= 2 && refined.len() < cfg.refine_top);
        let mut g = if take && needs_refinement(f.expr.atoms()[0]) { refine(f, d, cfg.lm_iters) } else { f.clone() };
        g = snap(&g, d);
        refined.push(g);
    }
    refined.sort_by(better);
    let mut best = refined.first().cloned()?;
    if d.nmse(best.sse) > NMSE_FLOOR || best.mismatches > 0 {
        let comps = composition_search(d, &js, &sines, 6);
        for c in comps {
            let mut g = snap(&c, d);
            if d.nmse(g.sse) > NMSE_FLOOR {
                g = snap(&refine(&g, d, cfg.lm_iters), d);
            }
            if better(&g, &best) == Ordering::Less {
                best = g;
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{sample_atom, sample_composition};
    use crate::rng::stream;

    fn sample(e: &NumericExpr) -> Points {
        let mut obs: Vec<(f64, Option<f64>)> = (-128..=128).map(|i| (f64::from(i), e.eval(f64::from(i)))).collect();
        obs.extend((0..32).map(|k| {
            let x = -127.5 + 8.0 * f64::from(k);
            (x, e.eval(x))
        }));
        Points::new(obs)
    }

    fn grid_nmse(truth: &NumericExpr, got: &NumericExpr) -> f64 {
        crate::metrics::nmse(|x| truth.eval(x), |x| got.eval(x)).unwrap().value
    }

    #[test]
    fn linear_is_exact() {
        let e: NumericExpr = Atom::linear(2.0, 3.0).into();
        let f = search(&sample(&e), &SearchConfig::default()).unwrap();
        assert_eq!(f.expr, e);
    }

    #[test]
    fn detects_step_jump() {
        let e: NumericExpr = Atom::new(Shape::Step { threshold: 12.3 }, 5.0, -2.0).into();
        let js = jumps(&sample(&e));
        assert_eq!(js.len(), 1);
        assert!(js[0].lo < 12.3 && js[0].hi >= 12.3);
    }

    #[test]
    fn recovers_sampled_atoms() {
        let mut rng = stream(99, 1);
        let mut fails = Vec::new();
        for family in Family::ATOMIC {
            for _ in 0..3 {
                let e: NumericExpr = sample_atom(family, &mut rng).into();
                let f = search(&sample(&e), &SearchConfig::default()).unwrap();
                let v = grid_nmse(&e, &f.expr);
                if !(v < 0.1) {
                    fails.push((e.to_string(), f.expr.to_string(), v));
                }
            }
        }
        assert!(fails.len() <= 3, "{fails:#?}");
    }

    #[test]
    fn recovers_sampled_compositions() {
        let mut rng = stream(7, 2);
        let mut fails = Vec::new();
        for _ in 0..30 {
            let e = sample_composition(&mut rng);
            let f = search(&sample(&e), &SearchConfig::default()).unwrap();
            let v = grid_nmse(&e, &f.expr);
            if !(v < 0.1) {
                fails.push((e.to_string(), f.expr.to_string(), v));
            }
        }
        assert!(fails.len() <= 3, "{fails:#?}");
    }
}
