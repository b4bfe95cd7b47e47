//! Per-iteration traces shared by all iterative solvers.

/// One row of an iteration trace.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration (or sweep) number.
    pub iter: usize,
    /// Solver-specific feasibility residual.
    pub residual: f64,
    /// `‖X^{k+1} − X^k‖_F / ‖X^{k+1}‖_F`.
    pub rel_change: f64,
    pub objective: f64,
    /// Milliseconds since the solve started.
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub wall_ms: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }
}

/// `num / den`, with `0/0 = 0`.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}
