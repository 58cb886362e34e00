//! Levenberg-Marquardt with a finite-difference Jacobian.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::cholesky_solve;

fn sse(r: &[f64]) -> f64 {
    let s: f64 = r.iter().map(|v| v * v).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Minimizes the sum of squared residuals written by `resid` into its
/// second argument. Returns the best parameters and their SSE.
pub fn minimize(p0: &[f64], n: usize, resid: &dyn Fn(&[f64], &mut [f64]), iters: usize) -> (Vec<f64>, f64) {
    let m = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n];
    resid(&p, &mut r);
    let mut cur = sse(&r);
    if m == 0 || n == 0 || !cur.is_finite() {
        return (p, cur);
    }
    let mut lambda = 1e-3;
    let mut jac = vec![vec![0.0; n]; m];
    let (mut rp, mut rm) = (vec![0.0; n], vec![0.0; n]);
    let mut trial = vec![0.0; n];
    let mut stalls = 0;
    for _ in 0..iters {
        for k in 0..m {
            let h = 1e-6 * p[k].abs().max(1e-3);
            let mut q = p.clone();
            q[k] = p[k] + h;
            resid(&q, &mut rp);
            q[k] = p[k] - h;
            resid(&q, &mut rm);
            for i in 0..n {
                // Residual is y - f, so its derivative is -df.
                jac[k][i] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = vec![vec![0.0; m]; m];
        let mut jtr = vec![0.0; m];
        for a in 0..m {
            for b in 0..=a {
                let s: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                jtj[a][b] = s;
                jtj[b][a] = s;
            }
            jtr[a] = jac[a].iter().zip(&r).map(|(x, y)| x * y).sum();
        }
        if jtj.iter().flatten().chain(&jtr).any(|v| !v.is_finite()) {
            break;
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[k][k] += lambda * jtj[k][k].max(1e-12) + 1e-300;
            }
            let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = cholesky_solve(&a, &neg) else {
                lambda *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            resid(&q, &mut trial);
            let s = sse(&trial);
            if s < cur {
                let gain = (cur - s) / cur.max(1e-300);
                p = q;
                core::mem::swap(&mut r, &mut trial);
                cur = s;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                stalls = if gain < 1e-10 { stalls + 1 } else { 0 };
                break;
            }
            lambda *= 4.0;
        }
        if !improved || stalls >= 3 || cur == 0.0 {
            break;
        }
    }
    (p, cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let xs: Vec<f64> = (0..40).map(|i| f64::from(i) * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * libm::exp(-0.7 * x) + 1.0).collect();
        let f = |p: &[f64], r: &mut [f64]| {
            for (i, &x) in xs.iter().enumerate() {
                r[i] = ys[i] - (p[0] * libm::exp(p[1] * x) + p[2]);
            }
        };
        let (p, s) = minimize(&[1.0, -0.3, 0.0], xs.len(), &f, 200);
        assert!(s < 1e-16, "{s}");
        assert!((p[0] - 3.0).abs() < 1e-6 && (p[1] + 0.7).abs() < 1e-6 && (p[2] - 1.0).abs() < 1e-6);
    }
}
