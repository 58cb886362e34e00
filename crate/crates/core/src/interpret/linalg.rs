//! Small dense least-squares helpers.

use alloc::vec;
use alloc::vec::Vec;

/// Solution of a linear least-squares problem.
#[derive(Debug, Clone)]
pub struct LstSq {
    pub coef: Vec<f64>,
    pub sse: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `|y - A c|^2` where `cols` are the columns of `A`, using
/// modified Gram-Schmidt with one reorthogonalization pass. Columns that are
/// numerically dependent on earlier ones get coefficient zero.
pub fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> LstSq {
    let p = cols.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut r = vec![vec![0.0; p]; p];
    let mut keep = vec![false; p];
    let mut basis: Vec<usize> = Vec::new();
    for j in 0..p {
        let mut v = cols[j].clone();
        let norm0 = dot(&v, &v).sqrt();
        if !(norm0 > 0.0) || !norm0.is_finite() {
            q.push(v);
            continue;
        }
        for _ in 0..2 {
            for &k in &basis {
                let c = dot(&q[k], &v);
                r[k][j] += c;
                for (vi, qi) in v.iter_mut().zip(&q[k]) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-10 * norm0 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            r[j][j] = norm;
            keep[j] = true;
            basis.push(j);
        }
        q.push(v);
    }
    let mut res = y.to_vec();
    let mut z = vec![0.0; p];
    for _ in 0..2 {
        for &k in &basis {
            let c = dot(&q[k], &res);
            z[k] += c;
            for (ri, qi) in res.iter_mut().zip(&q[k]) {
                *ri -= c * qi;
            }
        }
    }
    let mut coef = vec![0.0; p];
    for &j in basis.iter().rev() {
        let mut s = z[j];
        for &k in &basis {
            if k > j {
                s -= r[j][k] * coef[k];
            }
        }
        coef[j] = s / r[j][j];
    }
    LstSq { coef, sse: dot(&res, &res) }
}

/// Solves the symmetric positive definite system `m x = b` by Cholesky.
pub fn cholesky_solve(m: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Best rank-one factorization `u v^T` of a small matrix by power iteration.
pub fn rank_one(m: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut v = vec![0.0; cols];
    // Start from the column of largest norm.
    let best = (0..cols)
        .max_by(|&a, &b| {
            let na: f64 = m.iter().map(|r| r[a] * r[a]).sum();
            let nb: f64 = m.iter().map(|r| r[b] * r[b]).sum();
            na.total_cmp(&nb)
        })
        .unwrap_or(0);
    if cols > 0 {
        v[best] = 1.0;
    }
    let mut u = vec![0.0; rows];
    for _ in 0..100 {
        let vv = dot(&v, &v);
        if vv == 0.0 {
            break;
        }
        for i in 0..rows {
            u[i] = dot(&m[i], &v) / vv;
        }
        let uu = dot(&u, &u);
        if uu == 0.0 {
            break;
        }
        for j in 0..cols {
            v[j] = (0..rows).map(|i| m[i][j] * u[i]).sum::<f64>() / uu;
        }
    }
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let fit = lstsq(&[vec![1.0; 20], xs], &y);
        assert!((fit.coef[0] - 3.0).abs() < 1e-10 && (fit.coef[1] - 2.0).abs() < 1e-10);
        assert!(fit.sse < 1e-18);
    }

    #[test]
    fn dependent_column_is_dropped() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let twice: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let y: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        let fit = lstsq(&[vec![1.0; 10], xs, twice], &y);
        assert_eq!(fit.coef[2], 0.0);
        assert!(fit.sse < 1e-18);
    }

    #[test]
    fn high_degree_polynomial_is_recovered() {
        let xs: Vec<f64> = (-128..=128).map(f64::from).collect();
        let c = [0.3, -1.2, 4.1, 0.5, -2.2, 1.7];
        let y: Vec<f64> = xs.iter().map(|&x| c.iter().rev().fold(0.0, |a, &k| a * x + k)).collect();
        let cols: Vec<Vec<f64>> = (0..6).map(|k| xs.iter().map(|x| x.powi(k)).collect()).collect();
        let fit = lstsq(&cols, &y);
        for (got, want) in fit.coef.iter().zip(c) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn cholesky_matches_direct() {
        let m = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let x = cholesky_solve(&m, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12 && (x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_of_outer_product() {
        let u0 = [1.0, -2.0, 0.5];
        let v0 = [3.0, 4.0];
        let m: Vec<Vec<f64>> = u0.iter().map(|a| v0.iter().map(|b| a * b).collect()).collect();
        let (u, v) = rank_one(&m);
        for i in 0..3 {
            for j in 0..2 {
                assert!((u[i] * v[j] - m[i][j]).abs() < 1e-12);
            }
        }
    }
}
