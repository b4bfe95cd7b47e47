//! Recovery metrics.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// A recovery counts as successful when its RSE is at most this value.
pub const SUCCESS_RSE: f64 = 1e-2;

/// Relative squared error `‖x − t‖_F / ‖t‖_F`.
pub fn rse<T: Scalar>(x: &DenseTensor<T>, t: &DenseTensor<T>) -> Result<T> {
    let norm = t.frob_norm();
    if norm == T::zero() {
        return Err(Error::ZeroReference);
    }
    Ok(x.distance(t)? / norm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub rse: f64,
    pub success: bool,
    pub est_ranks: Vec<usize>,
    pub iters: usize,
    pub wall_ms: f64,
}

impl TrialOutcome {
    pub fn new(rse: f64, est_ranks: Vec<usize>, iters: usize, wall_ms: f64) -> Self {
        Self {
            rse,
            success: rse <= SUCCESS_RSE,
            est_ranks,
            iters,
            wall_ms,
        }
    }

    pub fn ranks_match(&self, truth: &[usize]) -> bool {
        self.est_ranks == truth
    }
}
