use crate::error::Result;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::svd::thin_svd;

/// Relative cutoff for numerical rank: singular values at or above 1% of
/// the largest one count.
pub const RANK_THRESHOLD: f64 = 0.01;

/// Sum of singular values.
pub fn trace_norm<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    Ok(thin_svd(a)?.s.into_iter().sum())
}

/// Number of singular values `>= rel · s_max`; zero when `s_max == 0`.
pub fn numerical_rank<T: Scalar>(singular_values: &[T], rel: T) -> usize {
    match singular_values.first() {
        Some(&top) if top > T::zero() => {
            let cut = rel * top;
            singular_values.iter().filter(|&&s| s >= cut).count()
        }
        _ => 0,
    }
}

/// Output of a shrinkage step, keeping the spectrum so callers can read
/// off trace norms and ranks without another SVD.
#[derive(Clone, Debug)]
pub struct ShrinkResult<T> {
    pub value: Matrix<T>,
    /// Singular values of the input.
    pub input_spectrum: Vec<T>,
    /// `max(s − threshold, 0)`, i.e. the singular values of `value`.
    pub shrunk_spectrum: Vec<T>,
    /// Left singular vectors of the input (equivalently of `value` on its
    /// nonzero part).
    pub left: Matrix<T>,
}

impl<T: Scalar> ShrinkResult<T> {
    pub fn trace_norm(&self) -> T {
        self.shrunk_spectrum.iter().copied().sum()
    }
}

/// Singular value thresholding: `u · diag(max(s − threshold, 0)) · vᵀ`,
/// the minimizer of `threshold·‖Z‖_tr + ½‖Z − a‖_F²`.
pub fn svt<T: Scalar>(a: &Matrix<T>, threshold: T) -> Result<Matrix<T>> {
    Ok(svt_with_spectrum(a, threshold)?.value)
}

pub fn svt_with_spectrum<T: Scalar>(a: &Matrix<T>, threshold: T) -> Result<ShrinkResult<T>> {
    assert!(threshold >= T::zero(), "threshold must be nonnegative");
    let svd = thin_svd(a)?;
    let shrunk: Vec<T> = svd.s.iter().map(|&s| (s - threshold).max(T::zero())).collect();
    let value = svd.recompose_with(&shrunk);
    Ok(ShrinkResult {
        value,
        input_spectrum: svd.s,
        shrunk_spectrum: shrunk,
        left: svd.u,
    })
}

/// Maximizer of `trace(Uᵀ a)` over matrices with orthonormal columns:
/// `Û V̂ᵀ` from the thin SVD of `a`.
pub fn procrustes<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let svd = thin_svd(a)?;
    svd.u.matmul_transpose(&svd.v)
}
