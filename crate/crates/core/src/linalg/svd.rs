//! Thin SVD via Householder QR followed by one-sided (Hestenes) Jacobi.
//!
//! Tall inputs are first reduced to their `n × n` triangular factor so the
//! Jacobi sweeps run on a small square matrix; fat inputs are handled
//! through the transpose. Orthogonality of the computed singular vectors is
//! enforced by the Jacobi stopping rule itself (pairwise column cosines
//! below `n·ε`), so it does not degrade for small singular values.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// `a = u · diag(s) · vᵀ` with `k = min(m, n)` columns in `u` and `v`.
#[derive(Clone, Debug)]
pub struct SvdResult<T> {
    pub u: Matrix<T>,
    /// Nonincreasing, nonnegative.
    pub s: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Scalar> SvdResult<T> {
    /// `u · diag(weights) · vᵀ` over the first `weights.len()` triplets,
    /// skipping zero weights.
    pub fn recompose_with(&self, weights: &[T]) -> Matrix<T> {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = vec![T::zero(); m * n];
        for (c, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let uc = self.u.column(c);
            let vc = self.v.column(c);
            for (j, &vj) in vc.iter().enumerate() {
                let f = w * vj;
                if f == T::zero() {
                    continue;
                }
                let dst = &mut out[j * m..(j + 1) * m];
                for (d, &ui) in dst.iter_mut().zip(uc) {
                    *d = *d + ui * f;
                }
            }
        }
        Matrix::from_raw(m, n, out)
    }

    pub fn recompose(&self) -> Matrix<T> {
        self.recompose_with(&self.s)
    }
}

thread_local! {
    static SHAPE_LOG: RefCell<Option<Vec<(usize, usize)>>> = const { RefCell::new(None) };
}

/// Runs `f` and returns the shapes of every SVD computed on this thread
/// while it ran. Work dispatched to other threads is not observed.
pub fn with_svd_shape_log<R>(f: impl FnOnce() -> R) -> (R, Vec<(usize, usize)>) {
    let previous = SHAPE_LOG.with(|log| log.borrow_mut().replace(Vec::new()));
    let out = f();
    let shapes = SHAPE_LOG.with(|log| {
        let mut slot = log.borrow_mut();
        let shapes = slot.take().unwrap_or_default();
        *slot = previous;
        shapes
    });
    (out, shapes)
}

fn record_shape(rows: usize, cols: usize) {
    SHAPE_LOG.with(|log| {
        if let Some(v) = log.borrow_mut().as_mut() {
            v.push((rows, cols));
        }
    });
}

pub fn thin_svd<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    record_shape(a.rows(), a.cols());
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn svd_tall<T: Scalar>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    let (m, n) = a.shape();
    if m > n {
        let (q, r) = householder_qr(a);
        let inner = jacobi(&r, m, n)?;
        Ok(SvdResult {
            u: q.matmul(&inner.u)?,
            s: inner.s,
            v: inner.v,
        })
    } else {
        jacobi(a, m, n)
    }
}

/// Thin QR of a tall matrix: `q` is `m × n` with orthonormal columns and
/// `r` is `n × n` upper triangular.
pub fn householder_qr<T: Scalar>(a: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let (m, n) = a.shape();
    assert!(m >= n, "householder_qr expects rows >= cols");
    let mut w = a.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);
    let two = T::of(2.0);
    for k in 0..n {
        let x = &w.column(k)[k..];
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut v: Vec<T> = x.to_vec();
        if norm == T::zero() {
            reflectors.push(vec![T::zero(); m - k]);
            continue;
        }
        let alpha = if v[0] >= T::zero() { -norm } else { norm };
        v[0] = v[0] - alpha;
        let vnorm = v.iter().map(|&e| e * e).sum::<T>().sqrt();
        if vnorm == T::zero() {
            reflectors.push(vec![T::zero(); m - k]);
            continue;
        }
        for e in &mut v {
            *e = *e / vnorm;
        }
        for j in k..n {
            let col = &mut w.column_mut(j)[k..];
            let d = col.iter().zip(&v).fold(T::zero(), |acc, (&c, &e)| acc + c * e);
            let f = two * d;
            for (c, &e) in col.iter_mut().zip(&v) {
                *c = *c - f * e;
            }
        }
        reflectors.push(v);
    }
    let r = Matrix::from_fn(n, n, |i, j| if i <= j { w.get(i, j) } else { T::zero() });
    let mut q = Matrix::from_fn(m, n, |i, j| if i == j { T::one() } else { T::zero() });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let col = &mut q.column_mut(j)[k..];
            let d = col.iter().zip(v).fold(T::zero(), |acc, (&c, &e)| acc + c * e);
            if d == T::zero() {
                continue;
            }
            let f = two * d;
            for (c, &e) in col.iter_mut().zip(v) {
                *c = *c - f * e;
            }
        }
    }
    (q, r)
}

/// One-sided Jacobi on a matrix with `rows >= cols`. `orig` is the shape
/// reported on failure.
fn jacobi<T: Scalar>(a: &Matrix<T>, orig_rows: usize, orig_cols: usize) -> Result<SvdResult<T>> {
    let (m, n) = a.shape();
    let mut b = a.clone();
    let mut v = Matrix::<T>::identity(n);
    let tol = T::epsilon() * T::of(n.max(2) as f64);
    // Columns at roundoff level relative to the whole matrix are treated as
    // zero: they cannot be made relatively orthogonal to anything.
    let floor = T::epsilon() * a.frob_norm();
    let negligible = floor * floor;
    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let bp = b.column(p);
                    let bq = b.column(q);
                    let mut al = T::zero();
                    let mut be = T::zero();
                    let mut ga = T::zero();
                    for (&x, &y) in bp.iter().zip(bq) {
                        al = al + x * x;
                        be = be + y * y;
                        ga = ga + x * y;
                    }
                    (al, be, ga)
                };
                if alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut b, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            rows: orig_rows,
            cols: orig_cols,
            sweeps: MAX_SWEEPS,
        });
    }

    let norms: Vec<T> = (0..n)
        .map(|j| b.column(j).iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let s: Vec<T> = order.iter().map(|&j| norms[j]).collect();
    let mut u = Matrix::<T>::zeros(m, n);
    let mut deficient = Vec::new();
    for (c, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        if sigma == T::zero() || sigma <= floor {
            deficient.push(c);
            continue;
        }
        for (dst, &x) in u.column_mut(c).iter_mut().zip(b.column(j)) {
            *dst = x / sigma;
        }
    }
    complete_orthonormal(&mut u, &deficient);
    let v = Matrix::from_fn(n, n, |i, c| v.get(i, order[c]));
    Ok(SvdResult { u, s, v })
}

#[inline]
fn rotate_columns<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let (xs, ys) = m.two_columns_mut(p, q);
    for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// First `r` left singular vectors of `a`, padded with an orthonormal
/// completion when `a` has fewer than `r` singular triplets.
pub fn leading_left_vectors<T: Scalar>(a: &Matrix<T>, r: usize) -> Result<Matrix<T>> {
    assert!(r >= 1 && r <= a.rows(), "requested {r} vectors from {} rows", a.rows());
    let svd = thin_svd(a)?;
    let k = svd.u.cols();
    if r <= k {
        return Ok(svd.u.leading_columns(r));
    }
    let mut u = Matrix::zeros(a.rows(), r);
    for j in 0..k {
        u.column_mut(j).copy_from_slice(svd.u.column(j));
    }
    complete_orthonormal(&mut u, &(k..r).collect::<Vec<_>>());
    Ok(u)
}

/// Replaces the listed columns of `u` by unit vectors orthogonal to every
/// other column.
fn complete_orthonormal<T: Scalar>(u: &mut Matrix<T>, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let (m, n) = u.shape();
    let mut filled: Vec<usize> = (0..n).filter(|c| !missing.contains(c)).collect();
    for &c in missing {
        for e in 0..m {
            let mut cand = vec![T::zero(); m];
            cand[e] = T::one();
            for _ in 0..2 {
                for &f in &filled {
                    let col = u.column(f);
                    let d = col.iter().zip(&cand).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
                    for (y, &x) in cand.iter_mut().zip(col) {
                        *y = *y - d * x;
                    }
                }
            }
            let norm = cand.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::of(0.5) {
                for (dst, &x) in u.column_mut(c).iter_mut().zip(&cand) {
                    *dst = x / norm;
                }
                filled.push(c);
                break;
            }
        }
    }
}
