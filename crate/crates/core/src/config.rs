//! Solver parameters shared by the two ADMM schemes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `Σ α_n = 1` for user-supplied weights.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Small additive margin in the default proximal weights so they stay
/// strictly above the convergence bound.
const TAU_MARGIN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Weight of the data-fit term `λ/2 ‖X − T‖_F²`.
    pub lambda: T,
    /// Initial penalty parameter.
    pub mu0: T,
    /// Penalty growth factor, used when `adaptive_mu` is on.
    pub rho: T,
    pub mu_max: T,
    /// Dual step scaling in `(0, 2)`.
    pub gamma: T,
    /// Explicit proximal weights `τ_1, …, τ_N, τ_{N+1}` (the last one is
    /// used for the `X` block). `None` selects the default rule
    /// `τ = 1.01 μ (N/(2−γ) − 1)`.
    pub tau: Option<Vec<T>>,
    pub tol: T,
    pub max_iter: usize,
    /// Shrinkage weights `α_n`, summing to one. `None` means `α_n = 1`.
    pub weights: Option<Vec<T>>,
    /// Grow `μ` geometrically each iteration and recompute `τ` from it.
    pub adaptive_mu: bool,
    /// Jacobi sweeps over the factor matrices per outer NCTD iteration.
    pub factor_sweeps: usize,
    /// Seed for randomized initialization.
    pub seed: u64,
    /// Run per-mode updates on the rayon pool.
    pub parallel: bool,
}

impl<T: Scalar> SolverConfig<T> {
    /// Defaults for the convex model: fixed `μ = λ/10`.
    pub fn ctd_default() -> Self {
        Self {
            lambda: T::of(100.0),
            mu0: T::of(10.0),
            rho: T::of(1.05),
            mu_max: T::of(1e10),
            gamma: T::one(),
            tau: None,
            tol: T::of(1e-5),
            max_iter: 500,
            weights: None,
            adaptive_mu: false,
            factor_sweeps: 1,
            seed: 0,
            parallel: true,
        }
    }

    /// Defaults for the core-trace-norm model: `μ` grows from `1e-4` by
    /// `ρ = 1.05` up to `1e10`.
    pub fn nctd_default() -> Self {
        Self {
            mu0: T::of(1e-4),
            adaptive_mu: true,
            ..Self::ctd_default()
        }
    }

    /// `α_n`.
    pub fn weight(&self, mode: usize) -> T {
        self.weights.as_ref().map_or(T::one(), |w| w[mode])
    }

    /// Lower bound `μ (N/(2−γ) − 1)` on each `τ_i` that guarantees
    /// convergence of an order-`order` solve at penalty `mu`.
    pub fn tau_bound(&self, mu: T, order: usize) -> T {
        let n = T::from_usize(order).expect("order fits scalar");
        (mu * (n / (T::of(2.0) - self.gamma) - T::one())).max(T::zero())
    }

    /// `count` proximal weights for an order-`order` solve at penalty `mu`.
    pub fn taus_at(&self, mu: T, order: usize, count: usize) -> Vec<T> {
        match &self.tau {
            Some(t) => t.clone(),
            None => vec![T::of(1.01) * self.tau_bound(mu, order) + T::of(TAU_MARGIN); count],
        }
    }

    /// Checks parameter ranges for an order-`order` problem with `blocks`
    /// proximal weights.
    pub fn validate(&self, order: usize, blocks: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let positive = [("lambda", self.lambda), ("mu0", self.mu0), ("tol", self.tol)];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.mu_max < self.mu0 {
            return bad(format!("mu_max {} is below mu0 {}", self.mu_max, self.mu0));
        }
        if !(self.rho > T::one() && self.rho <= T::of(1.1)) {
            return bad(format!("rho must lie in (1, 1.1], got {}", self.rho));
        }
        if !(self.gamma > T::zero() && self.gamma < T::of(2.0)) {
            return bad(format!("gamma must lie in (0, 2), got {}", self.gamma));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if self.factor_sweeps == 0 {
            return bad("factor_sweeps must be at least 1".into());
        }
        if let Some(w) = &self.weights {
            if w.len() != order {
                return bad(format!("{} weights for an order-{order} tensor", w.len()));
            }
            if w.iter().any(|&a| !(a >= T::zero()) || !a.is_finite()) {
                return bad("weights must be nonnegative and finite".into());
            }
            let sum: f64 = w.iter().map(|a| a.to_f64_lossy()).sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return bad(format!("weights must sum to 1, got {sum}"));
            }
        }
        if let Some(t) = &self.tau {
            if self.adaptive_mu {
                return bad("explicit tau requires a fixed mu (adaptive_mu off)".into());
            }
            if t.len() != blocks {
                return bad(format!("expected {blocks} tau values, got {}", t.len()));
            }
            let bound = self.tau_bound(self.mu0, order);
            if let Some(v) = t.iter().find(|&&v| !(v > bound) || !v.is_finite()) {
                return bad(format!(
                    "tau {v} does not exceed the convergence bound {bound} \
                     mu0 ({order}/(2 - gamma) - 1)"
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SolverConfig::<f64>::ctd_default().validate(3, 4).unwrap();
        SolverConfig::<f64>::nctd_default().validate(3, 3).unwrap();
        SolverConfig::<f32>::nctd_default().validate(4, 4).unwrap();
    }

    #[test]
    fn default_tau_exceeds_bound() {
        let c = SolverConfig::<f64>::ctd_default();
        for order in 2..8 {
            let taus = c.taus_at(c.mu0, order, order + 1);
            assert_eq!(taus.len(), order + 1);
            for tau in taus {
                assert!(tau > c.tau_bound(c.mu0, order));
            }
        }
        // N = 4, γ = 1: bound is 3μ.
        assert!((c.tau_bound(2.0, 4) - 6.0).abs() < 1e-12);
        // Bound clamps at zero when N/(2−γ) < 1.
        let c = SolverConfig { gamma: 0.5, ..c };
        assert_eq!(c.tau_bound(1.0, 1), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        let base = SolverConfig::<f64>::ctd_default();
        let cases = [
            SolverConfig { rho: 1.0, ..base.clone() },
            SolverConfig { rho: 1.2, ..base.clone() },
            SolverConfig { gamma: 2.0, ..base.clone() },
            SolverConfig { gamma: 0.0, ..base.clone() },
            SolverConfig { lambda: 0.0, ..base.clone() },
            SolverConfig { mu0: -1.0, ..base.clone() },
            SolverConfig { max_iter: 0, ..base.clone() },
            SolverConfig { weights: Some(vec![0.5, 0.6, 0.0]), ..base.clone() },
            SolverConfig { weights: Some(vec![0.5, 0.5]), ..base.clone() },
            SolverConfig { tau: Some(vec![1e9; 3]), ..base.clone() },
            SolverConfig { tau: Some(vec![20.0; 4]), ..base.clone() },
            SolverConfig { tau: Some(vec![1e9; 4]), adaptive_mu: true, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate(3, 4).is_err(), "{c:?}");
        }
        let ok = SolverConfig { tau: Some(vec![20.5; 4]), weights: Some(vec![0.25, 0.25, 0.5]), ..base };
        ok.validate(3, 4).unwrap();
        assert_eq!(ok.weight(2), 0.5);
    }
}
