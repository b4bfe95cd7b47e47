use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{Element, Scalar};
use crate::tensor::DenseTensor;

/// Tucker model `G ×_1 U_1 ×_2 ⋯ ×_N U_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    pub core: DenseTensor<T>,
    /// `factors[n]` is `I_n × R_n`.
    pub factors: Vec<Matrix<T>>,
}

impl<T: Element> FactorModel<T> {
    pub fn new(core: DenseTensor<T>, factors: Vec<Matrix<T>>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "order-{} core with {} factors",
                core.order(),
                factors.len()
            )));
        }
        for (n, u) in factors.iter().enumerate() {
            if u.cols() != core.dims()[n] {
                return Err(Error::DimensionMismatch(format!(
                    "factor {n} has {} columns but core extent is {}",
                    u.cols(),
                    core.dims()[n]
                )));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Extents of the reconstructed tensor.
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    pub fn reconstruct(&self) -> DenseTensor<T> {
        self.core
            .multi_mode_product(&self.factors, None)
            .expect("model shapes validated at construction")
    }
}

impl<T: Scalar> FactorModel<T> {
    /// Largest `‖U_nᵀ U_n − I‖_F` over the factors.
    pub fn max_orthonormality_error(&self) -> T {
        self.factors
            .iter()
            .map(Matrix::orthonormality_error)
            .fold(T::zero(), T::max)
    }
}

/// Checks `1 ≤ ranks[n] ≤ dims[n]` for every mode.
pub fn validate_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if dims.len() != ranks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (mode, (&rank, &extent)) in ranks.iter().zip(dims).enumerate() {
        if rank == 0 || rank > extent {
            return Err(Error::InvalidRank { mode, rank, extent });
        }
    }
    Ok(())
}
