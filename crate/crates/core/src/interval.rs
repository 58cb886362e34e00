//! Closed real intervals with optional infinite ends, and set overlap on a
//! bounded window.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::numeric::fmt_num;

/// `[lo, hi]`, where a missing end is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn bounded(lo: f64, hi: f64) -> Self {
        Interval { lo: Some(lo), hi: Some(hi) }
    }

    pub fn at_least(lo: f64) -> Self {
        Interval { lo: Some(lo), hi: None }
    }

    pub fn at_most(hi: f64) -> Self {
        Interval { lo: None, hi: Some(hi) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo.is_none_or(|lo| x >= lo) && self.hi.is_none_or(|hi| x <= hi)
    }

    /// Clips to `[lo, hi]`; `None` if the result is empty.
    pub fn clip(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let a = self.lo.map_or(lo, |v| v.max(lo));
        let b = self.hi.map_or(hi, |v| v.min(hi));
        (a < b).then_some((a, b))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lo, self.hi) {
            (Some(a), Some(b)) => write!(f, "[{}, {}]", fmt_num(a), fmt_num(b)),
            (Some(a), None) => write!(f, "[{}, inf)", fmt_num(a)),
            (None, Some(b)) => write!(f, "(-inf, {}]", fmt_num(b)),
            (None, None) => f.write_str("(-inf, inf)"),
        }
    }
}

pub fn describe_set(set: &[Interval]) -> String {
    let parts: Vec<String> = set.iter().map(|i| format!("{i}")).collect();
    parts.join(" and ")
}

fn merged(set: &[Interval], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut segs: Vec<(f64, f64)> = set.iter().filter_map(|i| i.clip(lo, hi)).collect();
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in segs {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Lebesgue measure of a union of intervals inside `[lo, hi]`.
pub fn measure(set: &[Interval], lo: f64, hi: f64) -> f64 {
    merged(set, lo, hi).iter().map(|(a, b)| b - a).sum()
}

/// Intersection-over-union of two interval unions, restricted to `[lo, hi]`.
/// Two empty sets have IoU 1.
pub fn iou(a: &[Interval], b: &[Interval], lo: f64, hi: f64) -> f64 {
    let ma = merged(a, lo, hi);
    let mb = merged(b, lo, hi);
    let mut inter = 0.0;
    for &(a0, a1) in &ma {
        for &(b0, b1) in &mb {
            let l = a0.max(b0);
            let h = a1.min(b1);
            if h > l {
                inter += h - l;
            }
        }
    }
    let total: f64 = ma.iter().map(|(x, y)| y - x).sum::<f64>() + mb.iter().map(|(x, y)| y - x).sum::<f64>();
    let union = total - inter;
    if union <= 0.0 {
        1.0
    } else {
        inter / union
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn iou_basics() {
        let a = [Interval::bounded(10.0, 20.0)];
        assert_eq!(iou(&a, &a, -128.0, 128.0), 1.0);
        assert!((iou(&a, &[Interval::bounded(15.0, 25.0)], -128.0, 128.0) - 5.0 / 15.0).abs() < 1e-12);
        assert_eq!(iou(&a, &[], -128.0, 128.0), 0.0);
        assert_eq!(iou(&[], &[], -128.0, 128.0), 1.0);
        let half = [Interval::at_least(0.0)];
        assert!((measure(&half, -128.0, 128.0) - 128.0).abs() < 1e-12);
        let two = vec![Interval::at_most(-10.0), Interval::at_least(10.0)];
        assert!((measure(&two, -128.0, 128.0) - 236.0).abs() < 1e-12);
    }

    #[test]
    fn display() {
        assert_eq!(format!("{}", Interval::bounded(10.0, 20.5)), "[10, 20.5]");
        assert_eq!(format!("{}", Interval::at_least(-3.0)), "[-3, inf)");
    }
}
