//! Truncated HOSVD and HOOI (alternating least squares for the best
//! rank-`(R_1, …, R_N)` approximation).

use std::time::Instant;

use crate::error::Result;
use crate::linalg::leading_left_vectors;
use crate::report::{ratio, IterationRecord, SolveReport, StopReason};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;
use crate::tucker::{validate_ranks, FactorModel};

pub const HOOI_DEFAULT_MAX_SWEEPS: usize = 100;
pub const HOOI_DEFAULT_TOL: f64 = 1e-6;

/// `U_n` = leading `R_n` left singular vectors of each unfolding, core
/// `t ×_1 U_1ᵀ ⋯ ×_N U_Nᵀ`.
pub fn hosvd<T: Scalar>(t: &DenseTensor<T>, ranks: &[usize]) -> Result<FactorModel<T>> {
    validate_ranks(t.dims(), ranks)?;
    let factors = (0..t.order())
        .map(|n| leading_left_vectors(&t.unfold(n)?, ranks[n]))
        .collect::<Result<Vec<_>>>()?;
    let core = t.multi_mode_product_transpose(&factors, None)?;
    FactorModel::new(core, factors)
}

#[derive(Clone, Debug)]
pub struct HooiResult<T> {
    pub model: FactorModel<T>,
    /// One record per sweep; `residual` and `objective` are both
    /// `‖t − reconstruction‖_F`.
    pub report: SolveReport,
}

/// HOOI started from the HOSVD factors. Each sweep updates the modes in
/// order (`U_n` ← leading left singular vectors of
/// `unfold(t ×_{j≠n} U_jᵀ, n)`), and iteration stops once the relative
/// change of `‖core‖_F` drops below `tol`.
pub fn hooi<T: Scalar>(
    t: &DenseTensor<T>,
    ranks: &[usize],
    max_iter: usize,
    tol: T,
) -> Result<HooiResult<T>> {
    let start = Instant::now();
    let mut model = hosvd(t, ranks)?;
    let mut factors = model.factors.clone();
    let mut prev_fit = model.core.frob_norm();
    let mut prev_x = model.reconstruct();
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for sweep in 1..=max_iter.max(1) {
        for n in 0..t.order() {
            let projected = t.multi_mode_product_transpose(&factors, Some(n))?;
            factors[n] = leading_left_vectors(&projected.unfold(n)?, ranks[n])?;
        }
        let core = t.multi_mode_product_transpose(&factors, None)?;
        model = FactorModel::new(core, factors.clone())?;
        let x = model.reconstruct();
        let fit = model.core.frob_norm();
        let misfit = t.distance(&x)?.to_f64_lossy();
        records.push(IterationRecord {
            iter: sweep,
            residual: misfit,
            rel_change: ratio(x.distance(&prev_x)?.to_f64_lossy(), x.frob_norm().to_f64_lossy()),
            objective: misfit,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        let change = ratio((fit - prev_fit).abs().to_f64_lossy(), fit.to_f64_lossy());
        prev_fit = fit;
        prev_x = x;
        if change < tol.to_f64_lossy() {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(HooiResult {
        model,
        report: SolveReport {
            records,
            stop,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gaussian_tensor, random_orthonormal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn exact_model(dims: &[usize], ranks: &[usize], seed: u64) -> DenseTensor<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let core: DenseTensor<f64> = gaussian_tensor(ranks, &mut rng);
        let factors: Vec<_> = dims
            .iter()
            .zip(ranks)
            .map(|(&i, &r)| random_orthonormal(i, r, &mut rng))
            .collect();
        FactorModel::new(core, factors).unwrap().reconstruct()
    }

    fn rse(x: &DenseTensor<f64>, t: &DenseTensor<f64>) -> f64 {
        x.distance(t).unwrap() / t.frob_norm()
    }

    #[test]
    fn hosvd_recovers_exact_rank() {
        let t = exact_model(&[6, 7, 5], &[2, 2, 2], 1);
        let m = hosvd(&t, &[2, 2, 2]).unwrap();
        assert!(rse(&m.reconstruct(), &t) <= 1e-10);
        assert!(m.max_orthonormality_error() < 1e-8);
    }

    #[test]
    fn hosvd_full_rank_is_exact() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let t: DenseTensor<f64> = gaussian_tensor(&[4, 3, 5], &mut rng);
        let m = hosvd(&t, &[4, 3, 5]).unwrap();
        assert!(rse(&m.reconstruct(), &t) <= 1e-12);
    }

    #[test]
    fn ranks_are_validated() {
        let t = DenseTensor::<f64>::zeros(&[3, 3]).unwrap();
        assert!(hosvd(&t, &[4, 1]).is_err());
        assert!(hosvd(&t, &[0, 1]).is_err());
        assert!(hosvd(&t, &[1]).is_err());
        assert!(hooi(&t, &[3, 4], 10, 1e-6).is_err());
    }

    #[test]
    fn hooi_fixed_point_on_exact_rank() {
        let t = exact_model(&[8, 6, 7], &[3, 2, 2], 2);
        let r = hooi(&t, &[3, 2, 2], 100, 1e-6).unwrap();
        assert!(r.report.iterations() <= 3);
        assert!(r.report.converged());
        assert!(rse(&r.model.reconstruct(), &t) <= 1e-10);
    }

    #[test]
    fn hooi_objective_nonincreasing() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let t: DenseTensor<f64> = gaussian_tensor(&[7, 6, 5], &mut rng);
        let r = hooi(&t, &[3, 3, 2], 20, 0.0).unwrap();
        assert_eq!(r.report.iterations(), 20);
        let hosvd_misfit = t.distance(&hosvd(&t, &[3, 3, 2]).unwrap().reconstruct()).unwrap();
        let obj: Vec<f64> = r.report.records.iter().map(|x| x.objective).collect();
        assert!(obj[0] <= hosvd_misfit + 1e-10);
        for w in obj.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} then {}", w[0], w[1]);
        }
        assert!(r.model.max_orthonormality_error() < 1e-8);
    }

    #[test]
    fn zero_tensor_is_handled() {
        let t = DenseTensor::<f64>::zeros(&[4, 4, 4]).unwrap();
        let r = hooi(&t, &[2, 2, 2], 10, 1e-6).unwrap();
        assert!(r.report.converged());
        assert_eq!(r.model.reconstruct().frob_norm(), 0.0);
    }

    #[test]
    fn ranks_exceeding_complementary_product() {
        // R_1 = 3 > R_2·R_3 = 2 needs padded factors.
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let t: DenseTensor<f64> = gaussian_tensor(&[5, 4, 4], &mut rng);
        let r = hooi(&t, &[3, 2, 1], 5, 1e-6).unwrap();
        assert!(r.model.max_orthonormality_error() < 1e-8);
    }
}
