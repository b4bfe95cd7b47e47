//! Matrix kernels: thin SVD, trace norm, singular value thresholding and
//! orthogonal Procrustes.

mod prox;
mod svd;

pub use prox::{numerical_rank, procrustes, svt, svt_with_spectrum, trace_norm, ShrinkResult, RANK_THRESHOLD};
pub use svd::{householder_qr, leading_left_vectors, thin_svd, with_svd_shape_log, SvdResult};
