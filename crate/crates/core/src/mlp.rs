//! One-hidden-layer ReLU network used to stand in for a numeric function.
//!
//! With a scalar input every hidden unit is active on one side of its kink
//! `-b/w`. Training sorts the sample once and evaluates the whole batch and
//! its gradient with prefix sums, so an epoch costs `O(n + h log n)` instead
//! of `O(n h)`. The result is the same full-batch gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::NumericExpr;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub x_mean: f64,
    pub x_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub epochs: usize,
    pub train_nmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub points: usize,
    /// Stop once training NMSE falls below this.
    pub target_nmse: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { width: 64, epochs: 10_000, learning_rate: 1e-3, points: 10_000, target_nmse: 1e-5 }
    }
}

/// Minimum number of defined sample points needed to train.
pub const MIN_DEFINED: usize = 100;
const DOMAIN: (f64, f64) = (-100.0, 100.0);

/// Training sample: up to `n` points drawn uniformly from the defined part of
/// the open interval (-100, 100).
pub fn training_points(expr: &NumericExpr, seed: u64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream(seed, 0x6d6c70);
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut drawn = 0usize;
    while xs.len() < n && drawn < n.saturating_mul(100) {
        drawn += 1;
        let x: f64 = rng.random_range(DOMAIN.0..DOMAIN.1);
        if x == DOMAIN.0 {
            continue;
        }
        if let Some(y) = expr.eval(x) {
            xs.push(x);
            ys.push(y);
        }
        if drawn == n && xs.len() < MIN_DEFINED.min(n) {
            break;
        }
    }
    if xs.len() < MIN_DEFINED.min(n) {
        return Err(Error::Unapproximable { found: xs.len(), needed: MIN_DEFINED });
    }
    Ok((xs, ys))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let s = libm::sqrt(var);
    (m, if s > 1e-12 * libm::fabs(m).max(1.0) { s } else { 1.0 })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - libm::pow(B1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(B2, f64::from(self.t));
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / (libm::sqrt(self.v[i] / c2) + 1e-8);
        }
    }
}

/// Flat parameter layout: `w1 | b1 | w2 | b2`.
struct Net<'a> {
    h: usize,
    p: &'a [f64],
}

impl Net<'_> {
    fn w1(&self, j: usize) -> f64 {
        self.p[j]
    }
    fn b1(&self, j: usize) -> f64 {
        self.p[self.h + j]
    }
    fn w2(&self, j: usize) -> f64 {
        self.p[2 * self.h + j]
    }
    fn b2(&self) -> f64 {
        self.p[3 * self.h]
    }

    /// Outputs at sorted inputs `xs`.
    fn batch(&self, xs: &[f64], out: &mut [f64]) {
        // Units whose activity switches at a kink, as (kink, slope, intercept, rising).
        let mut kinks: Vec<(f64, f64, f64, bool)> = Vec::with_capacity(self.h);
        let (mut slope, mut icpt) = (0.0, self.b2());
        for j in 0..self.h {
            let (w, b, v) = (self.w1(j), self.b1(j), self.w2(j));
            if w == 0.0 {
                if b > 0.0 {
                    icpt += v * b;
                }
            } else {
                kinks.push((-b / w, v * w, v * b, w > 0.0));
                if w < 0.0 {
                    // Active from -inf until its kink.
                    slope += v * w;
                    icpt += v * b;
                }
            }
        }
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut k = 0;
        for (i, &x) in xs.iter().enumerate() {
            while k < kinks.len() && kinks[k].0 < x {
                let (_, s, c, rising) = kinks[k];
                if rising {
                    slope += s;
                    icpt += c;
                } else {
                    slope -= s;
                    icpt -= c;
                }
                k += 1;
            }
            out[i] = slope * x + icpt;
        }
    }

    /// Gradient of `sum(d_i * y_i)` given residual weights `d` at sorted `xs`.
    fn grad(&self, xs: &[f64], d: &[f64], g: &mut [f64]) {
        let n = xs.len();
        // Suffix sums: sd[i] = sum_{k>=i} d_k, sdx[i] = sum_{k>=i} d_k x_k.
        let mut sd = vec![0.0; n + 1];
        let mut sdx = vec![0.0; n + 1];
        for i in (0..n).rev() {
            sd[i] = sd[i + 1] + d[i];
            sdx[i] = sdx[i + 1] + d[i] * xs[i];
        }
        let h = self.h;
        for j in 0..h {
            let (w, b, v) = (self.w1(j), self.b1(j), self.w2(j));
            let (s, sx) = if w == 0.0 {
                if b > 0.0 {
                    (sd[0], sdx[0])
                } else {
                    (0.0, 0.0)
                }
            } else {
                let kink = -b / w;
                let p = xs.partition_point(|&x| x <= kink);
                if w > 0.0 {
                    (sd[p], sdx[p])
                } else {
                    (sd[0] - sd[p], sdx[0] - sdx[p])
                }
            };
            g[j] = v * sx;
            g[h + j] = v * s;
            g[2 * h + j] = w * sx + b * s;
        }
        g[3 * h] = sd[0];
    }
}

impl Mlp {
    /// Network output at `x`, in the target's original units.
    pub fn forward(&self, x: f64) -> f64 {
        let z = (x - self.x_mean) / self.x_std;
        let mut y = self.b2;
        for j in 0..self.hidden {
            let a = self.w1[j] * z + self.b1[j];
            if a > 0.0 {
                y += self.w2[j] * a;
            }
        }
        y * self.y_std + self.y_mean
    }

    /// NMSE of the network against `(xs, ys)`, computed with [`Mlp::forward`].
    pub fn nmse_on(&self, xs: &[f64], ys: &[f64]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            let e = self.forward(x) - y;
            num += e * e;
            den += y * y;
        }
        if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        let ok = self.w1.len() == h
            && self.b1.len() == h
            && self.w2.len() == h
            && self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite())
            && [self.b2, self.x_mean, self.x_std, self.y_mean, self.y_std].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("network weights malformed or non-finite".into()))
        }
    }
}

/// Trains a network to mimic `expr` on its defined part of (-100, 100).
pub fn train(expr: &NumericExpr, seed: u64, cfg: &TrainConfig) -> Result<Mlp> {
    let (xs, ys) = training_points(expr, seed, cfg.points)?;
    let (x_mean, x_std) = mean_std(&xs);
    let (y_mean, y_std) = mean_std(&ys);

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let zx: Vec<f64> = order.iter().map(|&i| (xs[i] - x_mean) / x_std).collect();
    let zy: Vec<f64> = order.iter().map(|&i| (ys[i] - y_mean) / y_std).collect();
    let n = zx.len();
    let mean_sq_y = ys.iter().map(|y| y * y).sum::<f64>() / n as f64;

    // Kinks spread over the standardized input range; unit slopes of random sign.
    let h = cfg.width;
    let mut rng = stream(seed, 0x696e6974);
    let (lo, hi) = (zx[0], zx[n - 1]);
    let mut p = vec![0.0; 3 * h + 1];
    for j in 0..h {
        let w: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let kink: f64 = rng.random_range(lo..=hi);
        p[j] = w;
        p[h + j] = -w * kink;
        p[2 * h + j] = rng.random_range(-1.0..1.0) / libm::sqrt(h as f64);
    }

    let mut adam = Adam::new(p.len(), cfg.learning_rate);
    let mut out = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut g = vec![0.0; p.len()];
    let mut epochs = 0;
    let scale = y_std * y_std;
    while epochs < cfg.epochs {
        let net = Net { h, p: &p };
        net.batch(&zx, &mut out);
        let mut sse = 0.0;
        for i in 0..n {
            let e = out[i] - zy[i];
            sse += e * e;
            d[i] = 2.0 * e / n as f64;
        }
        let nmse = if mean_sq_y > 0.0 { sse / n as f64 * scale / mean_sq_y } else { sse };
        if nmse < cfg.target_nmse {
            break;
        }
        net.grad(&zx, &d, &mut g);
        adam.step(&mut p, &g);
        epochs += 1;
    }

    let mut mlp = Mlp {
        hidden: h,
        w1: p[..h].to_vec(),
        b1: p[h..2 * h].to_vec(),
        w2: p[2 * h..3 * h].to_vec(),
        b2: p[3 * h],
        x_mean,
        x_std,
        y_mean,
        y_std,
        epochs,
        train_nmse: 0.0,
    };
    mlp.train_nmse = mlp.nmse_on(&xs, &ys);
    mlp.validate()?;
    Ok(mlp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Atom, Shape};

    fn quick() -> TrainConfig {
        TrainConfig { points: 2000, ..TrainConfig::default() }
    }

    #[test]
    fn batch_matches_direct_forward() {
        let h = 8;
        let mut rng = stream(1, 2);
        let p: Vec<f64> = (0..3 * h + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut xs: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        let net = Net { h, p: &p };
        let mut out = vec![0.0; xs.len()];
        net.batch(&xs, &mut out);
        for (i, &x) in xs.iter().enumerate() {
            let direct: f64 = p[3 * h]
                + (0..h).map(|j| p[2 * h + j] * (p[j] * x + p[h + j]).max(0.0)).sum::<f64>();
            assert!((out[i] - direct).abs() < 1e-12);
        }
        // Gradient against central differences of sum(d_i * y_i).
        let d: Vec<f64> = xs.iter().map(|x| libm::sin(*x)).collect();
        let mut g = vec![0.0; p.len()];
        net.grad(&xs, &d, &mut g);
        let obj = |q: &[f64]| {
            let mut o = vec![0.0; xs.len()];
            Net { h, p: q }.batch(&xs, &mut o);
            o.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>()
        };
        for k in 0..p.len() {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            let fd = (obj(&up) - obj(&dn)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-4 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn constant_is_learned() {
        let net = train(&Atom::constant(5.0).into(), 3, &quick()).unwrap();
        assert!(net.train_nmse < 1e-4);
    }

    #[test]
    fn relu_is_learned() {
        let net = train(&Atom::new(Shape::Relu { leak: 0.0 }, 1.0, 0.0).into(), 3, &quick()).unwrap();
        assert!(net.train_nmse < 1e-3, "{}", net.train_nmse);
    }

    #[test]
    fn linear_grid_error_small_and_forward_pure() {
        let expr: NumericExpr = Atom::linear(2.0, 3.0).into();
        let net = train(&expr, 9, &quick()).unwrap();
        let err: f64 = crate::grid::points().map(|x| (net.forward(x) - (2.0 * x + 3.0)).abs()).sum::<f64>()
            / crate::grid::LEN as f64;
        assert!(err < 0.5, "mean abs error {err}");
        assert_eq!(net.forward(1.25), net.forward(1.25));
    }

    #[test]
    fn recorded_nmse_recomputes() {
        let expr: NumericExpr = Atom::new(Shape::Tanh { center: 3.0, width: 5.0 }, 4.0, 1.0).into();
        let cfg = TrainConfig { epochs: 300, ..quick() };
        let net = train(&expr, 4, &cfg).unwrap();
        let (xs, ys) = training_points(&expr, 4, cfg.points).unwrap();
        assert!((net.nmse_on(&xs, &ys) - net.train_nmse).abs() < 1e-9);
        let again = train(&expr, 4, &cfg).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn zero_net_outputs_bias() {
        let net = Mlp {
            hidden: 2,
            w1: vec![0.0; 2],
            b1: vec![0.0; 2],
            w2: vec![0.0; 2],
            b2: 0.5,
            x_mean: 0.0,
            x_std: 1.0,
            y_mean: 1.0,
            y_std: 2.0,
            epochs: 0,
            train_nmse: 0.0,
        };
        assert_eq!(net.forward(17.0), 2.0);
    }

    #[test]
    fn mostly_undefined_is_rejected() {
        let narrow = NumericExpr::Atom(Atom::new(Shape::Logarithm, 1.0, 0.0));
        assert!(training_points(&narrow, 1, 2000).is_ok());
        let none: NumericExpr = Atom::new(
            Shape::Rational { numerator: vec![1.0], denominator: vec![0.0] },
            1.0,
            0.0,
        )
        .into();
        assert!(matches!(training_points(&none, 1, 2000), Err(Error::Unapproximable { .. })));
    }
}
