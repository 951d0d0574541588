//! Small dense linear algebra: exact (fraction-free) rank and determinant over
//! the rationals, and Gaussian solves generic over [`Scalar`].

use crate::scalar::{Scalar, Q};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Bareiss fraction-free determinant of a square rational matrix.
pub fn det_exact(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    if n == 0 {
        return Q::one();
    }
    let mut a: Vec<Vec<Q>> = m.to_vec();
    let mut sign = Q::one();
    let mut prev = Q::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    sign = -sign;
                }
                None => return Q::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// Exact rank by row reduction over the rationals.
pub fn rank_exact(m: &[Vec<Q>]) -> usize {
    let mut a: Vec<Vec<Q>> = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, rank);
        let piv = a[rank][c].clone();
        for i in 0..rows {
            if i != rank && !a[i][c].is_zero() {
                let f = &a[i][c] / &piv;
                for j in c..cols {
                    let v = &a[rank][j] * &f;
                    a[i][j] -= v;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Rank of a floating matrix with relative pivot tolerance.
pub fn rank_f64(m: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let scale = a.iter().flatten().fold(0f64, |s, v| s.max(v.abs())).max(1e-300);
    let mut rank = 0;
    for c in 0..cols {
        let (p, best) = (rank..rows).map(|i| (i, a[i][c].abs())).fold((rank, 0.0), |b, x| if x.1 > b.1 { x } else { b });
        if best <= tol * scale {
            continue;
        }
        a.swap(p, rank);
        for i in rank + 1..rows {
            let f = a[i][c] / a[rank][c];
            for j in c..cols {
                a[i][j] -= f * a[rank][j];
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Delete row `r` and column `c`.
pub fn minor<T: Clone>(m: &[Vec<T>], r: usize, c: usize) -> Vec<Vec<T>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| v.clone()).collect())
        .collect()
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting on the
/// primal magnitude. Works for rationals, doubles and duals alike.
pub fn solve<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>, LinalgError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Shape(format!("{}x? system with {} right-hand sides", n, b.len())));
    }
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs: Vec<S> = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .filter(|&i| !m[i][k].is_zero())
            .max_by(|&i, &j| m[i][k].abs_f64().total_cmp(&m[j][k].abs_f64()))
            .ok_or(LinalgError::Singular)?;
        m.swap(p, k);
        rhs.swap(p, k);
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let f = m[i][k].clone() / m[k][k].clone();
            for j in k..n {
                let v = m[k][j].clone() * f.clone();
                m[i][j] = m[i][j].clone() - v;
            }
            let v = rhs[k].clone() * f;
            rhs[i] = rhs[i].clone() - v;
        }
    }
    let mut x = vec![S::zero(); n];
    for k in (0..n).rev() {
        let mut acc = rhs[k].clone();
        for j in k + 1..n {
            acc = acc - m[k][j].clone() * x[j].clone();
        }
        x[k] = acc / m[k][k].clone();
    }
    Ok(x)
}

/// Generic determinant by Gaussian elimination (no fraction-free guarantee).
pub fn det<S: Scalar>(a: &[Vec<S>]) -> S {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut d = S::one();
    for k in 0..n {
        let Some(p) = (k..n)
            .filter(|&i| !m[i][k].is_zero())
            .max_by(|&i, &j| m[i][k].abs_f64().total_cmp(&m[j][k].abs_f64()))
        else {
            return S::zero();
        };
        if p != k {
            m.swap(p, k);
            d = -d;
        }
        d = d * m[k][k].clone();
        for i in k + 1..n {
            let f = m[i][k].clone() / m[k][k].clone();
            for j in k..n {
                let v = m[k][j].clone() * f.clone();
                m[i][j] = m[i][j].clone() - v;
            }
        }
    }
    d
}
