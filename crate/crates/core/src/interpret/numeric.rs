//! Active identification of numeric functions.
//!
//! The probe schedule is fixed: a coarse grid, replicated anchors, the
//! integer grid (repeating the coarse points), and half-integers. Repeated
//! inputs separate three regimes: deterministic everywhere (clean),
//! random everywhere (noise), and random only on part of the domain
//! (corruption, whose edges are then located by bisection).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::fit::{self, Fit, Points, SearchConfig};
use super::noise::{classify, moments, on_integer_lattice, pooled_residuals, NoiseVerdict};
use super::Interpretation;
use crate::blackbox::Session;
use crate::grid;
use crate::interval::{describe_set, Interval};
use crate::modifiers::{NoiseKind, NoiseSpec};
use crate::numeric::{fmt_num, ComposeOp, NumericExpr, Shape};
use crate::spec::{describe_expr, describe_noise, Payload};

pub const NAME: &str = "numeric-ref";

#[derive(Debug, Clone, Copy)]
pub struct NumericConfig {
    pub search: SearchConfig,
    pub anchors: usize,
    pub repeats: usize,
    pub fractional: usize,
    /// Bisection stops once a corrupted-region edge is bracketed this tightly.
    pub edge_resolution: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { search: SearchConfig::default(), anchors: 5, repeats: 10, fractional: 32, edge_resolution: 0.5 }
    }
}

struct Probe<'s, 'a> {
    session: &'s mut Session<'a>,
    obs: Vec<(f64, Option<f64>)>,
    partial: bool,
}

impl Probe<'_, '_> {
    /// Queries as many of `xs` as the budget allows.
    fn ask(&mut self, xs: &[f64]) -> usize {
        let n = xs.len().min(self.session.remaining());
        if n < xs.len() {
            self.partial = true;
        }
        let mut done = 0;
        let chunk = self.session.budget().max_inputs.max(1);
        for part in xs[..n].chunks(chunk) {
            match self.session.query_values(part) {
                Ok(vals) => {
                    self.obs.extend(part.iter().copied().zip(vals));
                    done += part.len();
                }
                Err(_) => {
                    self.partial = true;
                    break;
                }
            }
        }
        done
    }

    fn samples(&self, x: f64) -> Vec<f64> {
        self.obs.iter().filter(|(u, _)| *u == x).filter_map(|(_, y)| *y).collect()
    }

    fn count(&self, x: f64) -> usize {
        self.obs.iter().filter(|(u, _)| *u == x).count()
    }

    /// Whether repeated queries at `x` disagree; `None` if the budget is out.
    fn unstable(&mut self, x: f64) -> Option<bool> {
        let have = self.count(x);
        if have < 2 {
            let need: Vec<f64> = core::iter::repeat_n(x, 2 - have).collect();
            if self.ask(&need) < need.len() {
                return None;
            }
        }
        let s = self.samples(x);
        Some(s.windows(2).any(|w| w[0] != w[1]))
    }
}

/// Replicate groups: every input observed at least twice with defined values.
fn groups(obs: &[(f64, Option<f64>)]) -> Vec<(f64, Vec<f64>)> {
    let mut sorted: Vec<(f64, f64)> = obs.iter().filter_map(|&(x, y)| y.map(|v| (x, v))).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for (x, y) in sorted {
        match out.last_mut() {
            Some((u, v)) if *u == x => v.push(y),
            _ => out.push((x, alloc::vec![y])),
        }
    }
    out.retain(|(_, v)| v.len() > 1);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Clean,
    Noise,
    Poisson,
    Corrupted,
}

fn regime(gs: &[(f64, Vec<f64>)]) -> Regime {
    let unstable = |v: &Vec<f64>| v.windows(2).any(|w| w[0] != w[1]);
    if !gs.iter().any(|(_, v)| unstable(v)) {
        return Regime::Clean;
    }
    let diffs: Vec<f64> = gs.iter().flat_map(|(_, v)| v.iter().map(move |y| y - v[0])).collect();
    if on_integer_lattice(&diffs) {
        Regime::Poisson
    } else if gs.iter().any(|(_, v)| !unstable(v)) {
        Regime::Corrupted
    } else {
        Regime::Noise
    }
}

fn coarse_points(n: usize) -> Vec<f64> {
    let full: Vec<f64> = (0..65).map(|k| grid::LO + 4.0 * f64::from(k)).collect();
    if n >= full.len() {
        return full;
    }
    if n <= 1 {
        return full[32..32 + n].to_vec();
    }
    let mut v: Vec<f64> = (0..n).map(|k| full[(k * 64 + (n - 1) / 2) / (n - 1)]).collect();
    v.dedup();
    v
}

fn anchors(obs: &[(f64, Option<f64>)], k: usize) -> Vec<f64> {
    let defined: Vec<f64> = obs.iter().filter(|(_, y)| y.is_some()).map(|(x, _)| *x).collect();
    let mut out = Vec::new();
    if defined.is_empty() || k == 0 {
        return out;
    }
    for i in 0..k {
        let target = -100.0 + 200.0 * i as f64 / (k.max(2) - 1) as f64;
        let best = defined
            .iter()
            .copied()
            .filter(|x| !out.contains(x))
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
        if let Some(x) = best {
            out.push(x);
        }
    }
    out
}

/// Integer grid order: coarse points again first, then midpoints, then odd integers.
fn dense_points() -> Vec<f64> {
    let mut v: Vec<f64> = (0..65).map(|k| grid::LO + 4.0 * f64::from(k)).collect();
    v.extend((0..64).map(|k| grid::LO + 2.0 + 4.0 * f64::from(k)));
    v.extend((0..128).map(|k| grid::LO + 1.0 + 2.0 * f64::from(k)));
    v
}

/// Locates the edges of unstable runs among replicated points.
fn corrupted_regions(p: &mut Probe, resolution: f64) -> Vec<Interval> {
    let gs = groups(&p.obs);
    let marks: Vec<(f64, bool)> = gs.iter().map(|(x, v)| (*x, v.windows(2).any(|w| w[0] != w[1]))).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < marks.len() {
        if !marks[i].1 {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < marks.len() && marks[j + 1].1 {
            j += 1;
        }
        let lo = (i > 0).then(|| edge(p, marks[i - 1].0, marks[i].0, resolution));
        let hi = (j + 1 < marks.len()).then(|| edge(p, marks[j + 1].0, marks[j].0, resolution));
        out.push(Interval { lo, hi });
        i = j + 1;
    }
    out
}

/// Bisects between a stable and an unstable input.
fn edge(p: &mut Probe, mut stable: f64, mut unstable: f64, resolution: f64) -> f64 {
    while (unstable - stable).abs() > resolution {
        let m = 0.5 * (stable + unstable);
        match p.unstable(m) {
            Some(true) => unstable = m,
            Some(false) => stable = m,
            None => break,
        }
    }
    let e = 0.5 * (stable + unstable);
    libm::round(e * 100.0) / 100.0
}

/// Bisects detected jumps so edges are known to half a grid step or better.
fn refine_jumps(p: &mut Probe, regions: &[Interval], reserve: usize) {
    for _round in 0..3 {
        let d = Points::new(clean_obs(&p.obs, regions));
        let mut js = fit::jumps(&d);
        js.retain(|j| j.hi - j.lo > 0.13);
        js.sort_by(|a, b| b.size.abs().total_cmp(&a.size.abs()));
        if js.is_empty() {
            return;
        }
        let room = p.session.remaining().saturating_sub(reserve);
        if room == 0 {
            return;
        }
        let xs: Vec<f64> = js.iter().take(room.min(24)).map(|j| 0.5 * (j.lo + j.hi)).collect();
        p.ask(&xs);
    }
}

fn in_regions(x: f64, regions: &[Interval]) -> bool {
    regions.iter().any(|r| r.contains(x))
}

fn clean_obs(obs: &[(f64, Option<f64>)], regions: &[Interval]) -> Vec<(f64, Option<f64>)> {
    obs.iter().copied().filter(|(x, _)| !in_regions(*x, regions)).collect()
}

/// Adds a constant to an expression when the grammar allows it.
fn shifted(e: &NumericExpr, delta: f64) -> Option<NumericExpr> {
    let mut e = e.clone();
    match &mut e {
        NumericExpr::Atom(a) => match &mut a.shape {
            Shape::Constant => a.scale += delta,
            Shape::Polynomial { coeffs } => coeffs[0] += delta,
            _ => a.bias += delta,
        },
        NumericExpr::Compose(c) if c.op == ComposeOp::Sum => match &mut c.left.shape {
            Shape::Polynomial { coeffs } => coeffs[0] += delta,
            _ => c.left.bias += delta,
        },
        NumericExpr::Compose(_) => return None,
    }
    Some(e)
}

/// Parameters rounded for display only.
fn rounded(e: &NumericExpr) -> NumericExpr {
    let p: Vec<f64> = fit::params(e).iter().map(|v| libm::round(v * 1000.0) / 1000.0).collect();
    let r = fit::with_params(e, &p);
    if r.validate().is_ok() {
        r
    } else {
        e.clone()
    }
}

fn noise_spec(verdict: NoiseVerdict, var: f64) -> Option<NoiseSpec> {
    let sd = libm::round(libm::sqrt(var) * 100.0) / 100.0;
    let kind = match verdict {
        NoiseVerdict::Normal => NoiseKind::Normal { sigma: sd },
        NoiseVerdict::Uniform => NoiseKind::Uniform { half_width: libm::round(sd * libm::sqrt(3.0) * 100.0) / 100.0 },
        NoiseVerdict::Poisson => NoiseKind::Poisson { rate: libm::round(var * 100.0) / 100.0 },
        _ => return None,
    };
    Some(NoiseSpec { kind, seed: 0 })
}

/// Identifies a numeric black box within the session's budget.
pub fn interpret_numeric(session: &mut Session, cfg: &NumericConfig) -> Interpretation {
    let id = session.function_id().to_string();
    let mut p = Probe { session, obs: Vec::new(), partial: false };

    let coarse = coarse_points(65.min(p.session.remaining()));
    p.ask(&coarse);
    let anchor_cost = cfg.anchors * cfg.repeats;
    if p.session.remaining() >= anchor_cost + 65 + 32 {
        let xs: Vec<f64> = anchors(&p.obs, cfg.anchors)
            .into_iter()
            .flat_map(|x| core::iter::repeat_n(x, cfg.repeats))
            .collect();
        p.ask(&xs);
    }
    let reserve = 32.min(p.session.remaining() / 8);
    let dense = dense_points();
    let take = dense.len().min(p.session.remaining().saturating_sub(reserve));
    p.ask(&dense[..take]);
    if take < dense.len() {
        p.partial = true;
    }
    let halves: Vec<f64> =
        (0..cfg.fractional).map(|k| grid::LO + 0.5 + (grid::HI - grid::LO) * k as f64 / cfg.fractional as f64).collect();
    p.ask(&halves);

    let gs = groups(&p.obs);
    let mode = regime(&gs);
    let regions = if mode == Regime::Corrupted { corrupted_regions(&mut p, cfg.edge_resolution) } else { Vec::new() };
    if mode == Regime::Clean || mode == Regime::Corrupted {
        refine_jumps(&mut p, &regions, 0);
    }

    let used = clean_obs(&p.obs, &regions);
    let d = Points::new(used.clone());
    let mut interp = Interpretation::new(&id, NAME);
    let Some(mut best) = fit::search(&d, &cfg.search) else {
        interp.description = "undefined on every probed input".to_string();
        interp.noise = NoiseVerdict::Unknown;
        interp.queries = p.session.query_count();
        interp.evaluations = p.session.evaluations();
        interp.partial = p.partial;
        interp.out_of_grammar = true;
        return interp;
    };

    // Noise: replicate spread, then the distribution of residuals.
    let pooled = pooled_residuals(&groups(&used).into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    let rep_var = moments(&pooled).1;
    let verdict = match mode {
        Regime::Clean | Regime::Corrupted => NoiseVerdict::None,
        Regime::Poisson => NoiseVerdict::Poisson,
        Regime::Noise => {
            let resid: Vec<f64> =
                used.iter().filter_map(|&(x, y)| Some(y? - best.expr.eval(x)?)).collect();
            let model_var = moments(&resid).1 + moments(&resid).0.powi(2);
            let v = if !resid.is_empty() && model_var < 1.5 * rep_var { classify(&resid) } else { classify(&pooled) };
            match v {
                NoiseVerdict::None | NoiseVerdict::Poisson => NoiseVerdict::Unknown,
                v => v,
            }
        }
    };
    if mode == Regime::Poisson {
        // Poisson noise has mean equal to its variance; remove that offset.
        if let Some(e) = shifted(&best.expr, -rep_var) {
            best = Fit::new(e, &d);
        }
    }

    let mut description = describe_expr(&rounded(&best.expr));
    if let Some(n) = noise_spec(verdict, rep_var) {
        description.push_str(", ");
        description.push_str(&describe_noise(&n));
    }
    if !regions.is_empty() {
        let vals: Vec<f64> =
            p.obs.iter().filter(|(x, _)| in_regions(*x, &regions)).filter_map(|(_, y)| *y).collect();
        let mean = moments(&vals).0;
        description.push_str(&format!(", corrupted with noise on {}", describe_set(&regions)));
        interp.domain_note =
            format!("values are replaced by noise around {} on {}", fmt_num(libm::round(mean * 100.0) / 100.0), describe_set(&regions));
    }
    interp.description = description;
    interp.fit_score = Some(best.nmse(&d)).filter(|v| v.is_finite());
    interp.program = Some(Payload::Numeric(best.expr));
    interp.corrupted = regions;
    interp.noise = verdict;
    interp.queries = p.session.query_count();
    interp.evaluations = p.session.evaluations();
    interp.partial = p.partial;
    interp
}

/// A one-line summary used in logs.
pub fn summary(i: &Interpretation) -> String {
    format!("{} {} [{}]", i.id, i.description, i.noise.name())
}
