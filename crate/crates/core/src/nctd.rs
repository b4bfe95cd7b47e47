//! Core-trace-norm regularized HOOI.
//!
//! Solves
//!
//! ```text
//! min_{G, U_n ᵀU_n = I}  Σ_n α_n ‖G_(n)‖_tr + λ/2 ‖T − G ×_1 U_1 ⋯ ×_N U_N‖_F²
//! ```
//!
//! For orthonormal factors the trace norm of `X_(n)` equals that of
//! `G_(n)`, so all shrinkage happens on the small core unfoldings. Each
//! iteration updates the core in closed form, then per mode (in parallel)
//! takes a Procrustes step for `U_n`, shrinks the auxiliary copy `G_n` of
//! `G_(n)` and updates its multiplier.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::datagen::{component_rng, random_orthonormal, STREAM_SOLVER_INIT};
use crate::error::{Error, Result};
use crate::linalg::{procrustes, svt_with_spectrum, ShrinkResult};
use crate::matrix::Matrix;
use crate::report::{ratio, IterationRecord, SolveReport, StopReason};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;
use crate::tucker::{validate_ranks, FactorModel};

#[derive(Clone, Debug)]
pub struct NctdState<T> {
    pub core: DenseTensor<T>,
    pub factors: Vec<Matrix<T>>,
    /// `G_n`, shaped like `unfold(core, n)`.
    pub aux: Vec<Matrix<T>>,
    /// `Y_n`, shaped like `aux[n]`.
    pub duals: Vec<Matrix<T>>,
    pub mu: T,
    pub iter: usize,
}

impl<T: Scalar> NctdState<T> {
    /// Orthonormalized Gaussian factors, zero core, auxiliaries and
    /// multipliers.
    pub fn init(dims: &[usize], ranks: &[usize], mu: T, seed: u64) -> Result<Self> {
        validate_ranks(dims, ranks)?;
        let mut rng = component_rng(seed, STREAM_SOLVER_INIT);
        let factors = dims
            .iter()
            .zip(ranks)
            .map(|(&i, &r)| random_orthonormal(i, r, &mut rng))
            .collect();
        let total: usize = ranks.iter().product();
        let aux: Vec<Matrix<T>> = ranks.iter().map(|&r| Matrix::zeros(r, total / r)).collect();
        Ok(Self {
            core: DenseTensor::zeros(ranks)?,
            factors,
            duals: aux.clone(),
            aux,
            mu,
            iter: 0,
        })
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn ranks(&self) -> &[usize] {
        self.core.dims()
    }

    pub fn model(&self) -> Result<FactorModel<T>> {
        FactorModel::new(self.core.clone(), self.factors.clone())
    }
}

#[derive(Clone, Debug)]
pub struct NctdResult<T> {
    /// Final iterate when converged, otherwise the iterate with the
    /// smallest residual.
    pub model: FactorModel<T>,
    pub report: SolveReport,
    /// Iteration that produced `model`.
    pub model_iter: usize,
    pub state: NctdState<T>,
}

impl<T> NctdResult<T> {
    /// Set when the solver hit `max_iter` before the residual dropped
    /// below `tol`.
    pub fn warning(&self) -> bool {
        !self.report.converged()
    }
}

fn check_mode<T: Scalar>(state: &NctdState<T>, mode: usize) -> Result<()> {
    if mode >= state.order() {
        return Err(Error::ModeOutOfRange { mode, order: state.order() });
    }
    Ok(())
}

/// Closed-form core minimizing the augmented Lagrangian for fixed factors:
/// `(λ t ×_n U_nᵀ + Σ_n refold(μ G_n − Y_n, n)) / (λ + N μ)`.
pub fn update_core<T: Scalar>(
    state: &NctdState<T>,
    cfg: &SolverConfig<T>,
    t: &DenseTensor<T>,
) -> Result<DenseTensor<T>> {
    let ranks = state.ranks().to_vec();
    let mu = state.mu;
    let mut acc = t.multi_mode_product_transpose(&state.factors, None)?.scale(cfg.lambda);
    for (n, (g, y)) in state.aux.iter().zip(&state.duals).enumerate() {
        let pulled = g.zip_with(y, |g, y| mu * g - y)?;
        acc.axpy(T::one(), &DenseTensor::refold(&pulled, n, &ranks)?)?;
    }
    let n = T::from_usize(state.order()).expect("order fits scalar");
    Ok(acc.scale(T::one() / (cfg.lambda + n * mu)))
}

/// `W_n = unfold(G ×_{j≠n} U_j, n)`, i.e. `G_(n)` times the transposed
/// Kronecker product of the other factors, without forming that product.
pub fn factor_weights<T: Scalar>(core: &DenseTensor<T>, factors: &[Matrix<T>], mode: usize) -> Result<Matrix<T>> {
    core.multi_mode_product(factors, Some(mode))?.unfold(mode)
}

fn procrustes_step<T: Scalar>(
    t_unfolded: &Matrix<T>,
    core: &DenseTensor<T>,
    factors: &[Matrix<T>],
    mode: usize,
) -> Result<Matrix<T>> {
    let w = factor_weights(core, factors, mode)?;
    procrustes(&t_unfolded.matmul_transpose(&w)?)
}

/// Orthonormal `U_n` maximizing `trace(U_nᵀ T_(n) W_nᵀ)` with the other
/// factors and the core held fixed.
pub fn update_factor<T: Scalar>(state: &NctdState<T>, t: &DenseTensor<T>, mode: usize) -> Result<Matrix<T>> {
    check_mode(state, mode)?;
    procrustes_step(&t.unfold(mode)?, &state.core, &state.factors, mode)
}

fn shrink_aux<T: Scalar>(
    state: &NctdState<T>,
    cfg: &SolverConfig<T>,
    core_unfolded: &Matrix<T>,
    mode: usize,
    tau: T,
) -> Result<ShrinkResult<T>> {
    let mu = state.mu;
    let denom = mu + tau;
    let avg = core_unfolded.zip_with(&state.duals[mode], |g, y| mu * g + y)?;
    let avg = avg.zip_with(&state.aux[mode], |a, g| (a + tau * g) / denom)?;
    svt_with_spectrum(&avg, cfg.weight(mode) / denom)
}

/// New `G_n`: singular value thresholding of
/// `(μ G_(n) + Y_n + τ_n G_n) / (μ + τ_n)` with threshold `α_n / (μ + τ_n)`.
pub fn update_aux<T: Scalar>(state: &NctdState<T>, cfg: &SolverConfig<T>, mode: usize) -> Result<Matrix<T>> {
    check_mode(state, mode)?;
    let tau = cfg.taus_at(state.mu, state.order(), state.order())[mode];
    Ok(shrink_aux(state, cfg, &state.core.unfold(mode)?, mode, tau)?.value)
}

/// `h = ⟨T, G ×_1 U_1 ⋯ ×_N U_N⟩`, the quantity each factor step maximizes.
pub fn factor_gain<T: Scalar>(t: &DenseTensor<T>, core: &DenseTensor<T>, factors: &[Matrix<T>]) -> Result<T> {
    t.multi_mode_product_transpose(factors, None)?.inner(core)
}

/// Augmented Lagrangian restricted to the core and factors:
/// `Σ_n μ/2 ‖G_(n) − G_n + Y_n/μ‖_F² + λ/2 ‖T − G ×_1 U_1 ⋯ ×_N U_N‖_F²`.
/// Requires `μ > 0`.
pub fn subproblem_objective<T: Scalar>(
    state: &NctdState<T>,
    cfg: &SolverConfig<T>,
    t: &DenseTensor<T>,
    core: &DenseTensor<T>,
    factors: &[Matrix<T>],
) -> Result<T> {
    let mu = state.mu;
    let two = T::of(2.0);
    let mut total = T::zero();
    for (n, (g, y)) in state.aux.iter().zip(&state.duals).enumerate() {
        let d = core.unfold(n)?.zip_with(g, |c, g| c - g)?.zip_with(y, |d, y| d + y / mu)?;
        let f = d.frob_norm();
        total = total + mu / two * f * f;
    }
    let misfit = FactorModel::new(core.clone(), factors.to_vec())?.reconstruct().distance(t)?;
    Ok(total + cfg.lambda / two * misfit * misfit)
}

fn map_modes<R, F>(n: usize, parallel: bool, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Runs the solver from a random orthonormal start seeded by `cfg.seed`.
pub fn nctd_decompose<T: Scalar>(
    t: &DenseTensor<T>,
    ranks: &[usize],
    cfg: &SolverConfig<T>,
) -> Result<NctdResult<T>> {
    let n_modes = t.order();
    validate_ranks(t.dims(), ranks)?;
    cfg.validate(n_modes, n_modes)?;
    let start = Instant::now();
    let t_unfolded = (0..n_modes).map(|n| t.unfold(n)).collect::<Result<Vec<_>>>()?;
    let mut state = NctdState::init(t.dims(), ranks, cfg.mu0, cfg.seed)?;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut prev_x = DenseTensor::zeros(t.dims())?;
    let mut best: Option<(f64, usize, FactorModel<T>)> = None;

    while state.iter < cfg.max_iter {
        state.core = update_core(&state, cfg, t)?;
        let core_unfolded = (0..n_modes).map(|n| state.core.unfold(n)).collect::<Result<Vec<_>>>()?;

        let mut factors = state.factors.clone();
        for _ in 0..cfg.factor_sweeps {
            let current = &factors;
            let core = &state.core;
            factors = map_modes(n_modes, cfg.parallel, |n| {
                procrustes_step(&t_unfolded[n], core, current, n)
            })?;
        }
        let taus = cfg.taus_at(state.mu, n_modes, n_modes);
        let shrunk = map_modes(n_modes, cfg.parallel, |n| {
            shrink_aux(&state, cfg, &core_unfolded[n], n, taus[n])
        })?;

        let step = cfg.gamma * state.mu;
        let mut residual = T::zero();
        let mut trace_sum = T::zero();
        for (n, s) in shrunk.into_iter().enumerate() {
            let gap = core_unfolded[n].sub(&s.value)?;
            residual = residual.max(gap.frob_norm());
            state.duals[n] = state.duals[n].zip_with(&gap, |y, d| y + step * d)?;
            trace_sum = trace_sum + cfg.weight(n) * s.trace_norm();
            state.aux[n] = s.value;
        }
        state.factors = factors;
        state.iter += 1;

        let model = state.model()?;
        let x = model.reconstruct();
        let misfit = x.distance(t)?;
        let residual = residual.to_f64_lossy();
        records.push(IterationRecord {
            iter: state.iter,
            residual,
            rel_change: ratio(x.distance(&prev_x)?.to_f64_lossy(), x.frob_norm().to_f64_lossy()),
            objective: (trace_sum + cfg.lambda * misfit * misfit / T::of(2.0)).to_f64_lossy(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        prev_x = x;
        if cfg.adaptive_mu {
            state.mu = (state.mu * cfg.rho).min(cfg.mu_max);
        }
        if residual < cfg.tol.to_f64_lossy() {
            stop = StopReason::Converged;
            best = Some((residual, state.iter, model));
            break;
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, state.iter, model));
        }
    }

    let (_, model_iter, model) = best.expect("at least one iteration runs");
    Ok(NctdResult {
        model,
        report: SolveReport {
            records,
            stop,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        model_iter,
        state,
    })
}
