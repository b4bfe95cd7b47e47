//! Convex trace-norm regularized Tucker decomposition.
//!
//! Solves
//!
//! ```text
//! min_X  Σ_n α_n ‖X_(n)‖_tr + λ/2 ‖X − T‖_F²
//! ```
//!
//! by splitting `X` into copies `M_n = X` and running a Jacobi-parallel
//! proximal ADMM: every `M_n` is updated from the previous iterate (so the
//! modes can be processed concurrently), then `X` is the weighted average
//! of the copies, the data and its previous value.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, svt_with_spectrum, thin_svd, ShrinkResult, RANK_THRESHOLD};
use crate::report::{ratio, IterationRecord, SolveReport, StopReason};
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;
use crate::tucker::FactorModel;

/// Window and growth factor of the divergence guard.
const DIVERGENCE_WINDOW: usize = 20;
const DIVERGENCE_GROWTH: f64 = 10.0;
/// Residuals below `DIVERGENCE_FLOOR · tol` never count as divergence.
const DIVERGENCE_FLOOR: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct CtdState<T> {
    pub x: DenseTensor<T>,
    pub m: Vec<DenseTensor<T>>,
    pub y: Vec<DenseTensor<T>>,
    pub mu: T,
    pub iter: usize,
    /// Stopping residual after each iteration.
    pub residual_history: Vec<f64>,
}

impl<T: Scalar> CtdState<T> {
    /// All-zero state.
    pub fn new(dims: &[usize], mu: T) -> Result<Self> {
        let zero = DenseTensor::zeros(dims)?;
        Ok(Self {
            x: zero.clone(),
            m: vec![zero.clone(); dims.len()],
            y: vec![zero; dims.len()],
            mu,
            iter: 0,
            residual_history: Vec::new(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        self.x.dims()
    }

    pub fn order(&self) -> usize {
        self.x.order()
    }
}

#[derive(Clone, Debug)]
pub struct CtdResult<T> {
    pub x: DenseTensor<T>,
    /// Factors truncated to `max(mode_ranks[n], 1)` columns and the matching
    /// core `X ×_1 U_1ᵀ ⋯ ×_N U_Nᵀ`.
    pub model: FactorModel<T>,
    pub mode_ranks: Vec<usize>,
    pub report: SolveReport,
    pub state: CtdState<T>,
}

fn check_mode<T: Scalar>(state: &CtdState<T>, mode: usize) -> Result<()> {
    if mode >= state.order() {
        return Err(Error::ModeOutOfRange { mode, order: state.order() });
    }
    Ok(())
}

fn shrink_mode<T: Scalar>(
    state: &CtdState<T>,
    cfg: &SolverConfig<T>,
    mode: usize,
    tau: T,
) -> Result<(DenseTensor<T>, ShrinkResult<T>)> {
    let mu = state.mu;
    let denom = mu + tau;
    // (μX − Y_n + τ M_n) / (μ + τ), formed in tensor layout then unfolded.
    let avg = state.x.zip_with(&state.y[mode], |x, y| mu * x - y)?;
    let avg = avg.zip_with(&state.m[mode], |a, m| (a + tau * m) / denom)?;
    let shrunk = svt_with_spectrum(&avg.unfold(mode)?, cfg.weight(mode) / denom)?;
    let m = DenseTensor::refold(&shrunk.value, mode, state.dims())?;
    Ok((m, shrunk))
}

/// New `M_n`: singular value thresholding of the proximal average
/// `(μ X − Y_n + τ_n M_n) / (μ + τ_n)` unfolded along `mode`, with
/// threshold `α_n / (μ + τ_n)`.
pub fn update_m<T: Scalar>(state: &CtdState<T>, cfg: &SolverConfig<T>, mode: usize) -> Result<DenseTensor<T>> {
    check_mode(state, mode)?;
    let tau = cfg.taus_at(state.mu, state.order(), state.order() + 1)[mode];
    Ok(shrink_mode(state, cfg, mode, tau)?.0)
}

/// New `X`: `(Σ_n (μ M_n + Y_n) + λ T + τ_{N+1} X) / (N μ + λ + τ_{N+1})`
/// using the current (not yet updated) `M_n`.
pub fn update_x<T: Scalar>(state: &CtdState<T>, cfg: &SolverConfig<T>, t: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    if t.dims() != state.dims() {
        return Err(Error::DimensionMismatch(format!(
            "data dims {:?} vs state dims {:?}",
            t.dims(),
            state.dims()
        )));
    }
    let n = state.order();
    let tau = cfg.taus_at(state.mu, n, n + 1)[n];
    let mu = state.mu;
    let mut acc = t.scale(cfg.lambda);
    acc.axpy(tau, &state.x)?;
    for (m, y) in state.m.iter().zip(&state.y) {
        acc.axpy(mu, m)?;
        acc.axpy(T::one(), y)?;
    }
    let denom = T::from_usize(n).expect("order fits scalar") * mu + cfg.lambda + tau;
    Ok(acc.scale(T::one() / denom))
}

/// Numerical rank (1% rule, ties included) of each `unfold(M_n, n)`.
pub fn estimate_ranks<T: Scalar>(state: &CtdState<T>) -> Result<Vec<usize>> {
    state
        .m
        .iter()
        .enumerate()
        .map(|(n, m)| Ok(numerical_rank(&thin_svd(&m.unfold(n)?)?.s, T::of(RANK_THRESHOLD))))
        .collect()
}

/// `Σ_n α_n ‖X_(n)‖_tr + λ/2 ‖X − T‖_F²`.
pub fn objective<T: Scalar>(x: &DenseTensor<T>, t: &DenseTensor<T>, cfg: &SolverConfig<T>) -> Result<T> {
    let mut total = T::zero();
    for n in 0..x.order() {
        let s = thin_svd(&x.unfold(n)?)?.s;
        total = total + cfg.weight(n) * s.into_iter().sum::<T>();
    }
    let d = x.distance(t)?;
    Ok(total + cfg.lambda * d * d / T::of(2.0))
}

/// Runs the solver from the all-zero state.
pub fn ctd_decompose<T: Scalar>(t: &DenseTensor<T>, cfg: &SolverConfig<T>) -> Result<CtdResult<T>> {
    let n_modes = t.order();
    cfg.validate(n_modes, n_modes + 1)?;
    let start = Instant::now();
    let t_norm = t.frob_norm();
    let mut state = CtdState::new(t.dims(), cfg.mu0)?;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut spectra: Vec<Vec<T>> = vec![Vec::new(); n_modes];
    let mut lefts = Vec::new();

    while state.iter < cfg.max_iter {
        let taus = cfg.taus_at(state.mu, n_modes, n_modes + 1);
        let shrink = |n: usize| shrink_mode(&state, cfg, n, taus[n]);
        let updated: Vec<_> = if cfg.parallel {
            (0..n_modes).into_par_iter().map(shrink).collect::<Result<_>>()?
        } else {
            (0..n_modes).map(shrink).collect::<Result<_>>()?
        };
        let x_new = update_x(&state, cfg, t)?;

        let mu = state.mu;
        let mut feas = T::zero();
        let mut trace_sum = T::zero();
        lefts.clear();
        for (n, (m_new, shrunk)) in updated.into_iter().enumerate() {
            let gap = m_new.sub(&x_new)?;
            feas = feas.max(gap.frob_norm());
            state.y[n].axpy(cfg.gamma * mu, &gap)?;
            state.m[n] = m_new;
            trace_sum = trace_sum + cfg.weight(n) * shrunk.trace_norm();
            spectra[n] = shrunk.shrunk_spectrum;
            lefts.push(shrunk.left);
        }
        let rel_change = ratio(
            x_new.distance(&state.x)?.to_f64_lossy(),
            x_new.frob_norm().to_f64_lossy(),
        );
        let feas_rel = if t_norm > T::zero() {
            (feas / t_norm).to_f64_lossy()
        } else {
            feas.to_f64_lossy()
        };
        let misfit = x_new.distance(t)?;
        state.x = x_new;
        state.iter += 1;
        let residual = rel_change.max(feas_rel);
        state.residual_history.push(residual);
        records.push(IterationRecord {
            iter: state.iter,
            residual: feas_rel,
            rel_change,
            objective: (trace_sum + cfg.lambda * misfit * misfit / T::of(2.0)).to_f64_lossy(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if cfg.adaptive_mu {
            state.mu = (state.mu * cfg.rho).min(cfg.mu_max);
        }
        if residual < cfg.tol.to_f64_lossy() {
            stop = StopReason::Converged;
            break;
        }
        check_divergence(&state.residual_history, cfg.tol.to_f64_lossy())?;
    }

    let rank_cut = T::of(RANK_THRESHOLD);
    let mode_ranks: Vec<usize> = spectra.iter().map(|s| numerical_rank(s, rank_cut)).collect();
    let factors = lefts
        .iter()
        .zip(&mode_ranks)
        .map(|(u, &r)| u.leading_columns(r.max(1).min(u.cols())))
        .collect::<Vec<_>>();
    let core = state.x.multi_mode_product_transpose(&factors, None)?;
    let model = FactorModel::new(core, factors)?;
    Ok(CtdResult {
        x: state.x.clone(),
        model,
        mode_ranks,
        report: SolveReport {
            records,
            stop,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        state,
    })
}

fn check_divergence(history: &[f64], tol: f64) -> Result<()> {
    let k = history.len();
    if k <= DIVERGENCE_WINDOW {
        return Ok(());
    }
    let now = history[k - 1];
    let earlier = history[k - 1 - DIVERGENCE_WINDOW];
    if !now.is_finite() || (now > DIVERGENCE_GROWTH * earlier && now > DIVERGENCE_FLOOR * tol) {
        return Err(Error::Diverged { iter: k, residual: now, earlier });
    }
    Ok(())
}
