//! Modifier wrappers: additive observation noise, domain corruption, and
//! the reference to a trained network that replaces the base expression.
//!
//! Random draws come from a counter-based stream keyed by
//! `(modifier seed, session nonce, query index)`, so a query's value does not
//! depend on which worker evaluates it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::rng::counter_stream;

/// Distribution of additive observation noise. Poisson noise is not
/// mean-centred: it shifts outputs by `rate` on average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum NoiseKind {
    Normal { sigma: f64 },
    Uniform { half_width: f64 },
    Poisson { rate: f64 },
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::Normal { .. } => "normal",
            NoiseKind::Uniform { .. } => "uniform",
            NoiseKind::Poisson { .. } => "poisson",
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            NoiseKind::Poisson { rate } => rate,
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseKind::Normal { sigma } => sigma * sigma,
            NoiseKind::Uniform { half_width } => half_width * half_width / 3.0,
            NoiseKind::Poisson { rate } => rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let p = match self.kind {
            NoiseKind::Normal { sigma } => sigma,
            NoiseKind::Uniform { half_width } => half_width,
            NoiseKind::Poisson { rate } => rate,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Invalid(alloc::format!("{} noise parameter must be positive", self.kind.name())));
        }
        Ok(())
    }

    /// Noise draw for query number `counter` of session `nonce`.
    pub fn draw(&self, nonce: u64, counter: u64) -> f64 {
        let mut rng = counter_stream(self.seed, nonce, counter);
        match self.kind {
            NoiseKind::Normal { sigma } => Normal::new(0.0, sigma).map(|d| d.sample(&mut rng)).unwrap_or(0.0),
            NoiseKind::Uniform { half_width } => Uniform::new_inclusive(-half_width, half_width)
                .map(|d| d.sample(&mut rng))
                .unwrap_or(0.0),
            NoiseKind::Poisson { rate } => Poisson::new(rate).map(|d| d.sample(&mut rng)).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Inside,
    Outside,
}

/// Replacement of function values on (or off) an interval by draws from
/// `N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub interval: Interval,
    pub polarity: Polarity,
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
}

/// Replacement variance used by the generator.
pub const CORRUPTION_VARIANCE: f64 = 0.01;

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(alloc::format!("corruption: {m}")));
        match (self.interval.lo, self.interval.hi) {
            (Some(a), Some(b)) => {
                let len = b - a;
                if !(5.0..=20.0).contains(&len) {
                    return bad("bounded interval length must lie in [5, 20]");
                }
                if !(-100.0..=100.0).contains(&a) {
                    return bad("left endpoint must lie in [-100, 100]");
                }
            }
            (Some(a), None) | (None, Some(a)) => {
                if !(-100.0..=100.0).contains(&a) {
                    return bad("endpoint must lie in [-100, 100]");
                }
            }
            (None, None) => return bad("interval must have at least one finite end"),
        }
        if !(self.variance > 0.0) || !self.mean.is_finite() {
            return bad("variance must be positive and mean finite");
        }
        Ok(())
    }

    pub fn corrupts(&self, x: f64) -> bool {
        let inside = self.interval.contains(x);
        match self.polarity {
            Polarity::Inside => inside,
            Polarity::Outside => !inside,
        }
    }

    /// The corrupted region as a union of closed intervals.
    pub fn region(&self) -> Vec<Interval> {
        match self.polarity {
            Polarity::Inside => vec![self.interval],
            Polarity::Outside => {
                let mut out = Vec::new();
                if let Some(a) = self.interval.lo {
                    out.push(Interval::at_most(a));
                }
                if let Some(b) = self.interval.hi {
                    out.push(Interval::at_least(b));
                }
                out
            }
        }
    }

    pub fn draw(&self, nonce: u64, counter: u64) -> f64 {
        let mut rng = counter_stream(self.seed, nonce, counter);
        Normal::new(self.mean, libm::sqrt(self.variance)).map(|d| d.sample(&mut rng)).unwrap_or(self.mean)
    }
}

/// Points to trained network weights that stand in for the base expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproximationRef {
    /// Weight file path, relative to the dataset directory.
    pub weights: String,
    pub hidden_width: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modifier {
    Noise(NoiseSpec),
    Corruption(CorruptionSpec),
    Approximation(ApproximationRef),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    // Monte-Carlo oracle: mean and variance within 3-sigma bounds of the
    // configured distribution over 10^4 draws.
    #[test]
    fn noise_moments_match_distribution() {
        let n = 10_000usize;
        for kind in [
            NoiseKind::Normal { sigma: 2.0 },
            NoiseKind::Uniform { half_width: 3.0 },
            NoiseKind::Poisson { rate: 3.0 },
        ] {
            let spec = NoiseSpec { kind, seed: 11 };
            let xs: Vec<f64> = (0..n as u64).map(|i| spec.draw(0, i)).collect();
            let (m, v) = moments(&xs);
            let var = kind.variance();
            assert!((m - kind.mean()).abs() < 3.0 * libm::sqrt(var / n as f64), "{kind:?} mean {m}");
            // Var of the sample variance is (mu4 - var^2 (n-3)/(n-1)) / n; bound with mu4 <= 3 var^2 + var.
            let sd_v = libm::sqrt((2.0 * var * var + var) / n as f64);
            assert!((v - var).abs() < 3.0 * sd_v, "{kind:?} var {v} vs {var}");
        }
    }

    #[test]
    fn poisson_draws_are_integers() {
        let spec = NoiseSpec { kind: NoiseKind::Poisson { rate: 4.0 }, seed: 3 };
        assert!((0..100).all(|i| spec.draw(0, i).fract() == 0.0));
    }

    #[test]
    fn draws_reproducible_by_counter() {
        let spec = NoiseSpec { kind: NoiseKind::Normal { sigma: 1.0 }, seed: 5 };
        assert_eq!(spec.draw(0, 7), spec.draw(0, 7));
        assert_ne!(spec.draw(0, 7), spec.draw(0, 8));
        assert_ne!(spec.draw(0, 7), spec.draw(1, 7));
    }

    #[test]
    fn corruption_sides() {
        let c = CorruptionSpec {
            interval: Interval::bounded(10.0, 20.0),
            polarity: Polarity::Inside,
            mean: 4.0,
            variance: CORRUPTION_VARIANCE,
            seed: 1,
        };
        assert!(c.validate().is_ok());
        assert!(c.corrupts(15.0) && c.corrupts(10.0) && !c.corrupts(9.9));
        // 6-sigma bound with sigma = 0.1.
        assert!((0..1000).all(|i| (c.draw(0, i) - 4.0).abs() < 1.0));
        let o = CorruptionSpec { polarity: Polarity::Outside, ..c };
        assert!(!o.corrupts(15.0) && o.corrupts(0.0) && o.corrupts(100.0));
        assert_eq!(o.region().len(), 2);
        let too_long = CorruptionSpec { interval: Interval::bounded(0.0, 30.0), ..c };
        assert!(too_long.validate().is_err());
    }
}
