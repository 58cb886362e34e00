//! Classification of observation noise from residual samples.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVerdict {
    None,
    Normal,
    Uniform,
    Poisson,
    Unknown,
}

impl NoiseVerdict {
    pub fn name(self) -> &'static str {
        match self {
            NoiseVerdict::None => "none",
            NoiseVerdict::Normal => "normal",
            NoiseVerdict::Uniform => "uniform",
            NoiseVerdict::Poisson => "poisson",
            NoiseVerdict::Unknown => "unknown",
        }
    }
}

/// Population moments of a sample: mean, variance, excess kurtosis.
pub fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    (mean, m2, kurt)
}

/// True if every value sits on a common unit lattice, i.e. all pairwise
/// differences are integers, and at least two values differ.
pub fn on_integer_lattice(xs: &[f64]) -> bool {
    let Some(&first) = xs.first() else { return false };
    let scale = xs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let mut spread = false;
    for &x in xs {
        let d = x - first;
        if (d - libm::round(d)).abs() > tol {
            return false;
        }
        spread |= d.abs() > 0.5;
    }
    spread
}

/// Classifies samples of `offset + noise` for an unknown offset.
///
/// Constant samples mean no noise. Samples on an integer lattice are Poisson.
/// Among continuous samples the uniform's short tails show up as a small
/// studentized range or a strongly negative excess kurtosis.
pub fn classify(samples: &[f64]) -> NoiseVerdict {
    if samples.len() < 2 {
        return NoiseVerdict::Unknown;
    }
    let (_, var, kurt) = moments(samples);
    let scale = samples.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if var.sqrt() <= 1e-9 * scale {
        return NoiseVerdict::None;
    }
    if on_integer_lattice(samples) {
        return NoiseVerdict::Poisson;
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let studentized_range = (hi - lo) / var.sqrt();
    if studentized_range < 3.8 || kurt < -1.05 {
        NoiseVerdict::Uniform
    } else {
        NoiseVerdict::Normal
    }
}

/// Pools replicate groups into centered residuals with the small-sample
/// shrinkage of each group undone, so they can be classified together.
pub fn pooled_residuals(groups: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in groups.iter().filter(|g| g.len() > 1) {
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let k = libm::sqrt(n / (n - 1.0));
        out.extend(g.iter().map(|v| (v - mean) * k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modifiers::{NoiseKind, NoiseSpec};

    fn accuracy(kind: NoiseKind, want: NoiseVerdict) -> usize {
        (0..100u64)
            .filter(|&trial| {
                let spec = NoiseSpec { kind: kind.clone(), seed: 1000 + trial };
                let xs: Vec<f64> = (0..50).map(|i| 17.25 + spec.draw(trial, i)).collect();
                classify(&xs) == want
            })
            .count()
    }

    #[test]
    fn classifies_each_distribution_at_least_ninety_percent() {
        let normal = accuracy(NoiseKind::Normal { sigma: 2.75 }, NoiseVerdict::Normal);
        let uniform = accuracy(NoiseKind::Uniform { half_width: 2.75 }, NoiseVerdict::Uniform);
        let poisson = accuracy(NoiseKind::Poisson { rate: 5.5 }, NoiseVerdict::Poisson);
        assert!(normal >= 90 && uniform >= 90 && poisson >= 90, "{normal} {uniform} {poisson}");
    }

    #[test]
    fn constant_samples_are_noiseless() {
        assert_eq!(classify(&[4.0; 20]), NoiseVerdict::None);
    }

    #[test]
    fn lattice_needs_spread() {
        assert!(!on_integer_lattice(&[2.5, 2.5]));
        assert!(on_integer_lattice(&[2.5, 4.5, 2.5]));
        assert!(!on_integer_lattice(&[2.5, 4.6]));
    }
}
