//! Small dense linear-algebra helpers on top of `ndarray`.
//!
//! Everything here works on row vectors and row-stochastic matrices: a
//! distribution is an `Array1<f64>` multiplied on the left, `x.dot(&p)`.
//! The state spaces in this crate stay in the hundreds-to-thousands range,
//! so dense storage and an unblocked LU are plenty.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Kronecker product of a chain of factors, left to right.
pub fn kron_chain(factors: &[&Array2<f64>]) -> Array2<f64> {
    assert!(!factors.is_empty());
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f);
    }
    acc
}

pub fn identity(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

/// A 1×n row vector.
pub fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape")
}

/// An n×1 column vector.
pub fn col(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).expect("col shape")
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
}

pub fn max_abs_diff_vec(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
}

/// `‖x P − x‖∞` for a row vector `x`.
pub fn fixed_point_residual(x: &Array1<f64>, p: &Array2<f64>) -> f64 {
    let xp = x.dot(p);
    max_abs_diff_vec(&xp, x)
}

/// Solve `a x = b` by LU with partial pivoting.
///
/// Fails with [`Error::Solver`] when a pivot falls below `1e-13` relative to
/// the matrix scale, which is how singular `I - T` style systems surface.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Argument(format!(
            "solve: shape mismatch ({}×{} vs rhs {})",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let scale = max_abs(a).max(1.0);
    let tol = 1e-13 * scale;
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        // pivot search
        let mut p = k;
        let mut pmax = lu[[k, k]].abs();
        for i in k + 1..n {
            let v = lu[[i, k]].abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax < tol {
            return Err(Error::Solver(format!(
                "singular system: pivot {pmax:.3e} below tolerance at column {k}"
            )));
        }
        if p != k {
            for j in 0..n {
                lu.swap([k, j], [p, j]);
            }
            x.swap(k, p);
        }
        let piv = lu[[k, k]];
        for i in k + 1..n {
            let f = lu[[i, k]] / piv;
            if f == 0.0 {
                continue;
            }
            lu[[i, k]] = f;
            for j in k + 1..n {
                lu[[i, j]] -= f * lu[[k, j]];
            }
            x[i] -= f * x[k];
        }
    }
    // back substitution
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= lu[[i, j]] * x[j];
        }
        x[i] = s / lu[[i, i]];
    }
    Ok(x)
}

/// Dimension of the null space of `a`, estimated by row elimination with
/// partial pivoting. Used to detect reducible chains, where `P - I` loses
/// more than one rank.
pub fn null_space_dim(a: &Array2<f64>, tol: f64) -> usize {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    let mut m = a.clone();
    let scale = max_abs(&m).max(1.0);
    let thresh = tol * scale;
    let mut rank = 0;
    let mut r = 0;
    for c in 0..n {
        let mut p = r;
        let mut pmax = 0.0;
        for i in r..n {
            let v = m[[i, c]].abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax <= thresh {
            continue;
        }
        if p != r {
            for j in 0..n {
                m.swap([r, j], [p, j]);
            }
        }
        let piv = m[[r, c]];
        for i in r + 1..n {
            let f = m[[i, c]] / piv;
            if f != 0.0 {
                for j in c..n {
                    m[[i, j]] -= f * m[[r, j]];
                }
            }
        }
        rank += 1;
        r += 1;
        if r == n {
            break;
        }
    }
    n - rank
}
