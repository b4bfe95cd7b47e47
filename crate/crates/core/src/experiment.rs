//! Experiment harness behind the CLI: single decompositions, benchmark
//! sweeps, phase-transition grids and convergence traces.
//!
//! Trials run concurrently on the rayon pool and are collected in grid
//! order, so output files are identical from run to run apart from the
//! wall-time columns. Every trial derives its data seed from the base seed
//! and its grid coordinates, and all methods in a sweep see the same data
//! for the same coordinates.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{hooi, hosvd, HOOI_DEFAULT_MAX_SWEEPS, HOOI_DEFAULT_TOL};
use crate::config::SolverConfig;
use crate::ctd::ctd_decompose;
use crate::datagen::{SynthData, SynthSpec};
use crate::error::{Error, Result};
use crate::io::{save_matrix, save_tnsr};
use crate::kv::{parse_list, KvConfig};
use crate::linalg::{numerical_rank, thin_svd, RANK_THRESHOLD};
use crate::metrics::{rse, TrialOutcome, SUCCESS_RSE};
use crate::nctd::nctd_decompose;
use crate::report::{IterationRecord, SolveReport, StopReason};
use crate::tensor::DenseTensor;
use crate::tucker::FactorModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Hosvd,
    Hooi,
    Ctd,
    Nctd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hosvd, Method::Hooi, Method::Ctd, Method::Nctd];

    /// CTD picks its own ranks; the others need them.
    pub fn needs_ranks(self) -> bool {
        self != Method::Ctd
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Hosvd => "hosvd",
            Method::Hooi => "hooi",
            Method::Ctd => "ctd",
            Method::Nctd => "nctd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown method {s:?} (expected hosvd, hooi, ctd or nctd)")))
    }
}

/// Solver settings read from a [`KvConfig`]; unset keys keep the
/// per-method defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverOverrides {
    pub lambda: Option<f64>,
    pub mu0: Option<f64>,
    pub rho: Option<f64>,
    pub mu_max: Option<f64>,
    pub gamma: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub adaptive_mu: Option<bool>,
    pub factor_sweeps: Option<usize>,
    pub weights: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub hooi_tol: Option<f64>,
    pub hooi_max_iter: Option<usize>,
    pub parallel: Option<bool>,
}

impl SolverOverrides {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        Ok(Self {
            lambda: kv.get("lambda")?,
            mu0: kv.get("mu0")?,
            rho: kv.get("rho")?,
            mu_max: kv.get("mu_max")?,
            gamma: kv.get("gamma")?,
            tol: kv.get("tol")?,
            max_iter: kv.get("max_iter")?,
            adaptive_mu: kv.get("adaptive_mu")?,
            factor_sweeps: kv.get("factor_sweeps")?,
            weights: kv.get_list("weights")?,
            tau: kv.get_list("tau")?,
            hooi_tol: kv.get("hooi_tol")?,
            hooi_max_iter: kv.get("hooi_max_iter")?,
            parallel: kv.get("parallel")?,
        })
    }

    /// Defaults for `method` with the overrides applied. The CTD penalty
    /// defaults to `λ/10` so that it follows a user-supplied `λ`.
    pub fn solver_config(&self, method: Method, seed: u64) -> SolverConfig<f64> {
        let mut c = match method {
            Method::Nctd => SolverConfig::nctd_default(),
            _ => SolverConfig::ctd_default(),
        };
        if let Some(v) = self.lambda {
            c.lambda = v;
            if method == Method::Ctd {
                c.mu0 = v / 10.0;
            }
        }
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { c.$field = v.clone(); } )* };
        }
        take!(mu0, rho, mu_max, gamma, tol, max_iter, adaptive_mu, factor_sweeps, parallel);
        if self.weights.is_some() {
            c.weights = self.weights.clone();
        }
        if self.tau.is_some() {
            c.tau = self.tau.clone();
        }
        c.seed = seed;
        c
    }
}

/// Outcome of one solve.
#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub method: Method,
    pub x: DenseTensor<f64>,
    pub model: FactorModel<f64>,
    /// CTD: numerical ranks of its auxiliary unfoldings. Others: numerical
    /// ranks of the core unfoldings (equal to those of the reconstruction
    /// since the factors are orthonormal).
    pub est_ranks: Vec<usize>,
    pub report: SolveReport,
    /// Milliseconds spent in the solver.
    pub solve_ms: f64,
}

impl MethodOutput {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }

    pub fn iterations(&self) -> usize {
        self.report.iterations()
    }
}

fn core_ranks(core: &DenseTensor<f64>) -> Result<Vec<usize>> {
    (0..core.order())
        .map(|n| Ok(numerical_rank(&thin_svd(&core.unfold(n)?)?.s, RANK_THRESHOLD)))
        .collect()
}

/// Runs `method` on `t`. `ranks` is required for every method but CTD.
pub fn run_method(
    method: Method,
    t: &DenseTensor<f64>,
    ranks: Option<&[usize]>,
    overrides: &SolverOverrides,
    seed: u64,
) -> Result<MethodOutput> {
    let ranks = match (method.needs_ranks(), ranks) {
        (true, None) => return Err(Error::InvalidConfig(format!("{method} needs ranks"))),
        (_, r) => r,
    };
    let start = Instant::now();
    let (x, model, est, report) = match method {
        Method::Hosvd => {
            let model = hosvd(t, ranks.expect("checked"))?;
            let x = model.reconstruct();
            let misfit = t.distance(&x)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let report = SolveReport {
                records: vec![IterationRecord { iter: 1, residual: misfit, rel_change: 0.0, objective: misfit, wall_ms: ms }],
                stop: StopReason::Converged,
                wall_ms: ms,
            };
            let est = core_ranks(&model.core)?;
            (x, model, est, report)
        }
        Method::Hooi => {
            let r = hooi(
                t,
                ranks.expect("checked"),
                overrides.hooi_max_iter.unwrap_or(HOOI_DEFAULT_MAX_SWEEPS),
                overrides.hooi_tol.unwrap_or(HOOI_DEFAULT_TOL),
            )?;
            let est = core_ranks(&r.model.core)?;
            (r.model.reconstruct(), r.model, est, r.report)
        }
        Method::Ctd => {
            let r = ctd_decompose(t, &overrides.solver_config(method, seed))?;
            (r.x, r.model, r.mode_ranks, r.report)
        }
        Method::Nctd => {
            let r = nctd_decompose(t, ranks.expect("checked"), &overrides.solver_config(method, seed))?;
            let est = core_ranks(&r.model.core)?;
            (r.model.reconstruct(), r.model, est, r.report)
        }
    };
    Ok(MethodOutput {
        method,
        x,
        model,
        est_ranks: est,
        report,
        solve_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Which corruption the phase grid varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseAxis {
    Noise,
    Outliers,
}

impl FromStr for PhaseAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noise" | "delta" => Ok(PhaseAxis::Noise),
            "outliers" | "outlier" | "outlier_ratio" => Ok(PhaseAxis::Outliers),
            _ => Err(Error::Parse(format!("unknown phase axis {s:?} (expected noise or outliers)"))),
        }
    }
}

impl fmt::Display for PhaseAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseAxis::Noise => "noise",
            PhaseAxis::Outliers => "outliers",
        })
    }
}

/// Everything a sweep needs, read from layered key=value settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    /// Each entry `r` means true ranks `(r, …, r)`.
    pub true_ranks: Vec<usize>,
    /// Given ranks (same for every mode). In a benchmark they pair up with
    /// `true_ranks`; in a phase grid they form the rank axis. When absent,
    /// `ceil(rank_factor · r)` is used.
    pub given_ranks: Option<Vec<usize>>,
    pub rank_factor: f64,
    pub deltas: Vec<f64>,
    pub outlier_ratios: Vec<f64>,
    pub outlier_range: f64,
    pub axis: PhaseAxis,
    pub seed: u64,
    pub repeats: usize,
    pub solver: SolverOverrides,
}

impl ExperimentConfig {
    /// Table-style benchmark: 40³, true rank 5 with given rank 6, δ = 0.02.
    pub fn benchmark_defaults() -> KvConfig {
        KvConfig::parse(
            "methods = hosvd,hooi,ctd,nctd\ndims = 40,40,40\ntrue_rank = 5\nrank_factor = 1.2\n\
             delta = 0.02\noutlier_ratio = 0\noutlier_range = 1\nseed = 1\nrepeats = 10\naxis = noise\n",
        )
        .expect("static defaults")
    }

    /// Phase grid: 30³ with true rank 10, given ranks 5..15 step 2,
    /// δ from 0 to 0.05 step 0.01.
    pub fn phase_defaults() -> KvConfig {
        KvConfig::parse(
            "methods = hooi,ctd\ndims = 30,30,30\ntrue_rank = 10\nranks = 5,7,9,11,13,15\n\
             rank_factor = 1.2\ndelta = 0,0.01,0.02,0.03,0.04,0.05\n\
             outlier_ratio = 0,0.01,0.02,0.03,0.04,0.05\noutlier_range = 1\nseed = 1\nrepeats = 10\naxis = noise\n",
        )
        .expect("static defaults")
    }

    /// Convergence traces: noiseless 50³, true rank 10, given rank 12.
    pub fn trace_defaults() -> KvConfig {
        KvConfig::parse(
            "methods = hooi,ctd,nctd\ndims = 50,50,50\ntrue_rank = 10\nrank_factor = 1.2\n\
             delta = 0\noutlier_ratio = 0\noutlier_range = 1\nseed = 1\nrepeats = 1\naxis = noise\n",
        )
        .expect("static defaults")
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let req = |key: &str| Error::InvalidConfig(format!("missing {key}"));
        let methods = match kv.raw("methods").or_else(|| kv.raw("method")) {
            Some(v) => parse_list::<String>("methods", v)?
                .iter()
                .map(|m| m.parse())
                .collect::<Result<Vec<Method>>>()?,
            None => return Err(req("methods")),
        };
        let cfg = Self {
            methods,
            dims: kv.get_list("dims")?.ok_or_else(|| req("dims"))?,
            true_ranks: kv.get_list("true_rank")?.ok_or_else(|| req("true_rank"))?,
            given_ranks: kv.get_list("ranks")?,
            rank_factor: kv.get_or("rank_factor", 1.2)?,
            deltas: kv.get_list("delta")?.unwrap_or_else(|| vec![0.0]),
            outlier_ratios: kv.get_list("outlier_ratio")?.unwrap_or_else(|| vec![0.0]),
            outlier_range: kv.get_or("outlier_range", 1.0)?,
            axis: kv.get_or("axis", PhaseAxis::Noise)?,
            seed: kv.get_or("seed", 0)?,
            repeats: kv.get_or("repeats", 1)?,
            solver: SolverOverrides::from_kv(kv)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.methods.is_empty() || self.true_ranks.is_empty() || self.dims.is_empty() {
            return bad("methods, dims and true_rank must be nonempty".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        let min_dim = *self.dims.iter().min().expect("nonempty");
        let ranks = self.true_ranks.iter().chain(self.given_ranks.iter().flatten());
        for &r in ranks {
            if r == 0 || r > min_dim {
                return bad(format!("rank {r} must lie in 1..={min_dim}"));
            }
        }
        for &d in &self.deltas {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("delta {d} must be >= 0"));
            }
        }
        for &o in &self.outlier_ratios {
            if !(0.0..=1.0).contains(&o) {
                return bad(format!("outlier ratio {o} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Given rank paired with the `i`-th true rank in a benchmark.
    pub fn given_rank_for(&self, i: usize) -> usize {
        let r = self.true_ranks[i];
        let min_dim = *self.dims.iter().min().expect("nonempty");
        match &self.given_ranks {
            Some(g) => g[i.min(g.len() - 1)],
            None => ((self.rank_factor * r as f64).ceil() as usize).clamp(1, min_dim),
        }
    }

    fn spec(&self, true_rank: usize, delta: f64, outlier_ratio: f64, seed: u64) -> SynthSpec {
        SynthSpec::new(self.dims.clone(), vec![true_rank; self.dims.len()])
            .with_seed(seed)
            .with_noise(delta)
            .with_outliers(outlier_ratio, self.outlier_range)
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Data seed for the grid point `coords` of a sweep started from `base`.
pub fn trial_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(base), |h, &c| mix(h ^ c))
}

/// One benchmark trial.
#[derive(Clone, Debug)]
pub struct TrialRow {
    pub method: Method,
    pub true_rank: usize,
    pub given_rank: usize,
    pub delta: f64,
    pub outlier_ratio: f64,
    pub seed: u64,
    pub repeat: usize,
    /// `Err` carries the message of a failed trial.
    pub outcome: std::result::Result<(TrialOutcome, bool), String>,
}

impl TrialRow {
    pub fn status(&self) -> &str {
        match &self.outcome {
            Ok((_, true)) => "converged",
            Ok((_, false)) => "max_iter",
            Err(_) => "error",
        }
    }
}

/// Means over the successful solves of one (method, ranks, δ, ratio) group.
#[derive(Clone, Debug)]
pub struct MeanRow {
    pub method: Method,
    pub true_rank: usize,
    pub given_rank: usize,
    pub delta: f64,
    pub outlier_ratio: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_rse: f64,
    pub success_fraction: f64,
    pub mean_iters: f64,
    pub converged_fraction: f64,
    pub mean_wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub dims: Vec<usize>,
    pub rows: Vec<TrialRow>,
    pub means: Vec<MeanRow>,
}

impl BenchmarkReport {
    pub fn mean_for(&self, method: Method) -> Option<&MeanRow> {
        self.means.iter().find(|m| m.method == method)
    }
}

fn outcome_of(data: &SynthData<f64>, out: &MethodOutput) -> Result<TrialOutcome> {
    Ok(TrialOutcome::new(
        rse(&out.x, &data.clean)?,
        out.est_ranks.clone(),
        out.iterations(),
        out.solve_ms,
    ))
}

/// Methods × true ranks × δ × outlier ratios × repeats, with RSE measured
/// against the clean tensor.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    struct Point {
        ri: usize,
        di: usize,
        oi: usize,
        repeat: usize,
        seed: u64,
    }
    let mut points = Vec::new();
    for ri in 0..cfg.true_ranks.len() {
        for di in 0..cfg.deltas.len() {
            for oi in 0..cfg.outlier_ratios.len() {
                for repeat in 0..cfg.repeats {
                    let coords = [cfg.true_ranks[ri] as u64, di as u64, oi as u64, repeat as u64];
                    points.push(Point { ri, di, oi, repeat, seed: trial_seed(cfg.seed, &coords) });
                }
            }
        }
    }
    let per_point: Vec<Vec<TrialRow>> = points
        .par_iter()
        .map(|p| {
            let true_rank = cfg.true_ranks[p.ri];
            let given_rank = cfg.given_rank_for(p.ri);
            let (delta, ratio) = (cfg.deltas[p.di], cfg.outlier_ratios[p.oi]);
            let data = cfg.spec(true_rank, delta, ratio, p.seed).generate::<f64>();
            cfg.methods
                .iter()
                .map(|&method| {
                    let outcome = data
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|data| {
                            let ranks = vec![given_rank; cfg.dims.len()];
                            run_method(method, &data.noisy, Some(&ranks), &cfg.solver, p.seed)
                                .and_then(|out| Ok((outcome_of(data, &out)?, out.converged())))
                                .map_err(|e| e.to_string())
                        });
                    TrialRow {
                        method,
                        true_rank,
                        given_rank,
                        delta,
                        outlier_ratio: ratio,
                        seed: p.seed,
                        repeat: p.repeat,
                        outcome,
                    }
                })
                .collect()
        })
        .collect();

    // Reorder to method-major so each group is contiguous.
    let mut rows = Vec::with_capacity(per_point.len() * cfg.methods.len());
    for mi in 0..cfg.methods.len() {
        rows.extend(per_point.iter().map(|rows| rows[mi].clone()));
    }
    let means = aggregate(&rows);
    Ok(BenchmarkReport { dims: cfg.dims.clone(), rows, means })
}

fn aggregate(rows: &[TrialRow]) -> Vec<MeanRow> {
    let mut out: Vec<MeanRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = |r: &TrialRow| (r.method, r.true_rank, r.given_rank, r.delta.to_bits(), r.outlier_ratio.to_bits());
        let k = key(&rows[start]);
        let end = start + rows[start..].iter().take_while(|r| key(r) == k).count();
        let group = &rows[start..end];
        let ok: Vec<&(TrialOutcome, bool)> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let n = ok.len().max(1) as f64;
        let mean = |f: &dyn Fn(&(TrialOutcome, bool)) -> f64| {
            if ok.is_empty() { f64::NAN } else { ok.iter().map(|o| f(o)).sum::<f64>() / n }
        };
        let first = &group[0];
        out.push(MeanRow {
            method: first.method,
            true_rank: first.true_rank,
            given_rank: first.given_rank,
            delta: first.delta,
            outlier_ratio: first.outlier_ratio,
            trials: group.len(),
            failed: group.len() - ok.len(),
            mean_rse: mean(&|o| o.0.rse),
            success_fraction: mean(&|o| f64::from(u8::from(o.0.success))),
            mean_iters: mean(&|o| o.0.iters as f64),
            converged_fraction: mean(&|o| f64::from(u8::from(o.1))),
            mean_wall_ms: mean(&|o| o.0.wall_ms),
        });
        start = end;
    }
    out
}

/// Scientific notation with 17 significant digits (round-trips `f64`).
pub fn sci(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

fn shape(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub const BENCHMARK_HEADER: [&str; 16] = [
    "kind", "method", "dims", "true_rank", "given_rank", "delta", "outlier_ratio", "seed", "repeat",
    "rse", "success", "est_ranks", "iters", "converged", "wall_ms", "status",
];

/// Trial rows (`kind = trial`) followed by one `kind = mean` row per group.
/// In mean rows `repeat` holds the trial count, `success` and
/// `converged` hold fractions and `status` counts failed trials.
pub fn write_benchmark_csv<W: Write>(w: W, report: &BenchmarkReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BENCHMARK_HEADER).map_err(csv_err)?;
    let dims = shape(&report.dims);
    for r in &report.rows {
        let (rse, success, est, iters, conv, wall) = match &r.outcome {
            Ok((o, c)) => (
                sci(o.rse),
                u8::from(o.success).to_string(),
                shape(&o.est_ranks),
                o.iters.to_string(),
                u8::from(*c).to_string(),
                sci(o.wall_ms),
            ),
            Err(_) => Default::default(),
        };
        let status = match &r.outcome {
            Err(msg) => format!("error: {msg}"),
            Ok(_) => r.status().to_string(),
        };
        out.write_record([
            "trial".to_string(),
            r.method.to_string(),
            dims.clone(),
            r.true_rank.to_string(),
            r.given_rank.to_string(),
            sci(r.delta),
            sci(r.outlier_ratio),
            r.seed.to_string(),
            (r.repeat + 1).to_string(),
            rse,
            success,
            est,
            iters,
            conv,
            wall,
            status,
        ])
        .map_err(csv_err)?;
    }
    for m in &report.means {
        out.write_record([
            "mean".to_string(),
            m.method.to_string(),
            dims.clone(),
            m.true_rank.to_string(),
            m.given_rank.to_string(),
            sci(m.delta),
            sci(m.outlier_ratio),
            String::new(),
            m.trials.to_string(),
            sci(m.mean_rse),
            sci(m.success_fraction),
            String::new(),
            sci(m.mean_iters),
            sci(m.converged_fraction),
            sci(m.mean_wall_ms),
            format!("failed={}", m.failed),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// One cell of a phase grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCell {
    pub method: Method,
    pub axis: PhaseAxis,
    pub given_rank: usize,
    pub level: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_rse: f64,
}

impl PhaseCell {
    pub fn success_fraction(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Success fractions over given ranks × corruption levels. The true rank
/// is `true_ranks[0]`; data for a (level, repeat) pair is shared by every
/// method and given rank, and CTD, which ignores the given rank, is solved
/// once per pair.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<Vec<PhaseCell>> {
    cfg.validate()?;
    let given = cfg
        .given_ranks
        .clone()
        .ok_or_else(|| Error::InvalidConfig("phase grid needs a ranks list".into()))?;
    let true_rank = cfg.true_ranks[0];
    let levels = match cfg.axis {
        PhaseAxis::Noise => &cfg.deltas,
        PhaseAxis::Outliers => &cfg.outlier_ratios,
    };
    let pairs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|li| (0..cfg.repeats).map(move |rep| (li, rep)))
        .collect();
    let data: Vec<SynthData<f64>> = pairs
        .par_iter()
        .map(|&(li, rep)| {
            let seed = trial_seed(cfg.seed, &[true_rank as u64, li as u64, rep as u64]);
            let (delta, ratio) = match cfg.axis {
                PhaseAxis::Noise => (levels[li], cfg.outlier_ratios[0]),
                PhaseAxis::Outliers => (cfg.deltas[0], levels[li]),
            };
            cfg.spec(true_rank, delta, ratio, seed).generate()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        let rank_list: Vec<Option<usize>> =
            if method.needs_ranks() { given.iter().map(|&g| Some(g)).collect() } else { vec![None] };
        let jobs: Vec<(Option<usize>, usize)> = rank_list
            .iter()
            .flat_map(|&g| (0..pairs.len()).map(move |p| (g, p)))
            .collect();
        let rses: Vec<f64> = jobs
            .par_iter()
            .map(|&(g, p)| {
                let d = &data[p];
                let ranks = g.map(|g| vec![g; cfg.dims.len()]);
                let seed = trial_seed(cfg.seed, &[true_rank as u64, pairs[p].0 as u64, pairs[p].1 as u64]);
                // A failed solve counts as a failure, not as an abort.
                run_method(method, &d.noisy, ranks.as_deref(), &cfg.solver, seed)
                    .and_then(|out| rse(&out.x, &d.clean))
                    .unwrap_or(f64::INFINITY)
            })
            .collect();
        for (gi, &g) in given.iter().enumerate() {
            let block = if method.needs_ranks() { gi } else { 0 };
            for li in 0..levels.len() {
                let vals: Vec<f64> = (0..cfg.repeats)
                    .map(|rep| rses[block * pairs.len() + li * cfg.repeats + rep])
                    .collect();
                let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
                cells.push(PhaseCell {
                    method,
                    axis: cfg.axis,
                    given_rank: g,
                    level: levels[li],
                    trials: vals.len(),
                    successes: vals.iter().filter(|&&v| v <= SUCCESS_RSE).count(),
                    mean_rse: if finite.is_empty() { f64::NAN } else { finite.iter().sum::<f64>() / finite.len() as f64 },
                });
            }
        }
    }
    Ok(cells)
}

pub fn write_phase_csv<W: Write>(w: W, cfg: &ExperimentConfig, cells: &[PhaseCell]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "method", "axis", "given_rank", "level", "true_rank", "dims", "trials", "successes",
        "success_fraction", "mean_rse",
    ])
    .map_err(csv_err)?;
    for c in cells {
        out.write_record([
            c.method.to_string(),
            c.axis.to_string(),
            c.given_rank.to_string(),
            sci(c.level),
            cfg.true_ranks[0].to_string(),
            shape(&cfg.dims),
            c.trials.to_string(),
            c.successes.to_string(),
            sci(c.success_fraction()),
            sci(c.mean_rse),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Iteration trace of one method.
#[derive(Clone, Debug)]
pub struct MethodTrace {
    pub method: Method,
    pub seed: u64,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
}

/// Traces every method on the problem given by the first true rank,
/// δ and outlier ratio, once per repeat.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<Vec<MethodTrace>> {
    cfg.validate()?;
    let r = cfg.true_ranks[0];
    let given = vec![cfg.given_rank_for(0); cfg.dims.len()];
    let mut jobs = Vec::new();
    for &method in &cfg.methods {
        for rep in 0..cfg.repeats {
            jobs.push((method, trial_seed(cfg.seed, &[r as u64, 0, 0, rep as u64])));
        }
    }
    jobs.par_iter()
        .map(|&(method, seed)| {
            let data = cfg.spec(r, cfg.deltas[0], cfg.outlier_ratios[0], seed).generate::<f64>()?;
            let out = run_method(method, &data.noisy, Some(&given), &cfg.solver, seed)?;
            Ok(MethodTrace { method, seed, converged: out.converged(), records: out.report.records })
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(w: W, traces: &[MethodTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "seed", "iter", "residual", "rel_change", "objective", "wall_ms"])
        .map_err(csv_err)?;
    for t in traces {
        for r in &t.records {
            out.write_record([
                t.method.to_string(),
                t.seed.to_string(),
                r.iter.to_string(),
                sci(r.residual),
                sci(r.rel_change),
                sci(r.objective),
                sci(r.wall_ms),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Files written by [`write_decomposition`] and the numbers in its
/// summary.
#[derive(Clone, Debug)]
pub struct DecomposeSummary {
    pub method: Method,
    pub rse: Option<f64>,
    pub est_ranks: Vec<usize>,
    pub iters: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Writes `core.tnsr`, `factor_1.tnsr` … `factor_N.tnsr`,
/// `reconstruction.tnsr`, `trace.csv` and `summary.csv` into `dir`.
pub fn write_decomposition(
    dir: &Path,
    out: &MethodOutput,
    reference: Option<&DenseTensor<f64>>,
) -> Result<DecomposeSummary> {
    std::fs::create_dir_all(dir)?;
    save_tnsr(&dir.join("core.tnsr"), &out.model.core)?;
    for (n, u) in out.model.factors.iter().enumerate() {
        save_matrix(&dir.join(format!("factor_{}.tnsr", n + 1)), u)?;
    }
    save_tnsr(&dir.join("reconstruction.tnsr"), &out.x)?;
    let trace = MethodTrace {
        method: out.method,
        seed: 0,
        converged: out.converged(),
        records: out.report.records.clone(),
    };
    write_trace_csv(std::fs::File::create(dir.join("trace.csv"))?, std::slice::from_ref(&trace))?;
    // A zero reference leaves the RSE undefined; the column stays empty.
    let rse = match reference.map(|r| rse(&out.x, r)) {
        Some(Err(Error::ZeroReference)) | None => None,
        Some(r) => Some(r?),
    };
    let summary = DecomposeSummary {
        method: out.method,
        rse,
        est_ranks: out.est_ranks.clone(),
        iters: out.iterations(),
        converged: out.converged(),
        wall_ms: out.solve_ms,
    };
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_err)?;
    w.write_record(["method", "dims", "ranks", "est_ranks", "iters", "converged", "wall_ms", "rse"])
        .map_err(csv_err)?;
    w.write_record([
        out.method.to_string(),
        shape(out.x.dims()),
        shape(&out.model.ranks()),
        shape(&summary.est_ranks),
        summary.iters.to_string(),
        u8::from(summary.converged).to_string(),
        sci(summary.wall_ms),
        summary.rse.map(sci).unwrap_or_default(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: &str, extra: &str) -> ExperimentConfig {
        let base = match kind {
            "phase" => ExperimentConfig::phase_defaults(),
            "trace" => ExperimentConfig::trace_defaults(),
            _ => ExperimentConfig::benchmark_defaults(),
        };
        let over = KvConfig::parse(extra).unwrap();
        ExperimentConfig::from_kv(&base.merged(&over)).unwrap()
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("NCTD".parse::<Method>().unwrap(), Method::Nctd);
        assert!("cp".parse::<Method>().is_err());
    }

    #[test]
    fn overrides_follow_lambda() {
        let o = SolverOverrides { lambda: Some(50.0), ..Default::default() };
        let c = o.solver_config(Method::Ctd, 3);
        assert_eq!((c.lambda, c.mu0, c.seed), (50.0, 5.0, 3));
        let n = o.solver_config(Method::Nctd, 3);
        assert_eq!(n.mu0, 1e-4);
        assert!(n.adaptive_mu);
    }

    #[test]
    fn defaults_parse() {
        let b = small("bench", "");
        assert_eq!(b.given_rank_for(0), 6);
        assert_eq!(b.methods.len(), 4);
        let p = small("phase", "");
        assert_eq!(p.given_ranks.as_ref().unwrap().len(), 6);
        assert_eq!(p.deltas.len(), 6);
        assert_eq!(small("trace", "").given_rank_for(0), 12);
        let bad = ExperimentConfig::benchmark_defaults().merged(&KvConfig::parse("true_rank = 50").unwrap());
        assert!(ExperimentConfig::from_kv(&bad).is_err());
    }

    #[test]
    fn seeds_depend_on_coordinates() {
        assert_eq!(trial_seed(1, &[5, 0, 0, 0]), trial_seed(1, &[5, 0, 0, 0]));
        assert_ne!(trial_seed(1, &[5, 0, 0, 0]), trial_seed(1, &[5, 0, 0, 1]));
        assert_ne!(trial_seed(1, &[5, 0]), trial_seed(2, &[5, 0]));
    }

    #[test]
    fn benchmark_row_counts() {
        let cfg = small("bench", "dims = 8,8,8\ntrue_rank = 2\nrepeats = 1\nmethods = hooi");
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!((r.rows.len(), r.means.len()), (1, 1));

        let cfg = small("bench", "dims = 9,9,9\ntrue_rank = 1,2,3\nrepeats = 5\nmax_iter = 5\nhooi_max_iter = 3");
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 60);
        assert_eq!(r.means.len(), 12);
        let mut buf = Vec::new();
        write_benchmark_csv(&mut buf, &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 60 + 12);
        // Means are recomputable from the trial rows.
        for m in &r.means {
            let rses: Vec<f64> = r
                .rows
                .iter()
                .filter(|t| t.method == m.method && t.true_rank == m.true_rank)
                .map(|t| t.outcome.as_ref().unwrap().0.rse)
                .collect();
            let mean = rses.iter().sum::<f64>() / rses.len() as f64;
            assert!((mean - m.mean_rse).abs() <= 1e-15 * mean.max(1.0));
        }
    }

    #[test]
    fn failed_trials_are_recorded() {
        // γ = 3 is rejected by the solver config, so CTD fails per trial.
        let cfg = small("bench", "dims = 6,6,6\ntrue_rank = 2\nrepeats = 2\nmethods = ctd,hosvd\ngamma = 3");
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.rows.iter().filter(|t| t.method == Method::Ctd).all(|t| t.status() == "error"));
        assert!(r.rows.iter().filter(|t| t.method == Method::Hosvd).all(|t| t.outcome.is_ok()));
        assert_eq!(r.mean_for(Method::Ctd).unwrap().failed, 2);
    }

    #[test]
    fn phase_grid_shape() {
        let cfg = small(
            "phase",
            "dims = 10,10,10\ntrue_rank = 3\nranks = 2,3,4\ndelta = 0,0.01\nrepeats = 2\nmethods = hosvd,ctd",
        );
        let cells = run_phase(&cfg).unwrap();
        assert_eq!(cells.len(), 2 * 3 * 2);
        let get = |m: Method, g: usize, l: f64| {
            cells.iter().find(|c| c.method == m && c.given_rank == g && c.level == l).unwrap()
        };
        assert_eq!(get(Method::Hosvd, 2, 0.0).successes, 0);
        assert_eq!(get(Method::Hosvd, 3, 0.0).success_fraction(), 1.0);
        assert_eq!(get(Method::Ctd, 3, 0.0).success_fraction(), 1.0);
        // CTD ignores the given rank.
        assert_eq!(get(Method::Ctd, 2, 0.01), &PhaseCell { given_rank: 2, ..get(Method::Ctd, 4, 0.01).clone() });
    }

    #[test]
    fn trace_rows() {
        let cfg = small("trace", "dims = 10,10,10\ntrue_rank = 2\nmethods = hooi,nctd\nmax_iter = 40");
        let traces = run_trace(&cfg).unwrap();
        assert_eq!(traces.len(), 2);
        assert!(traces.iter().all(|t| !t.records.is_empty()));
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &traces).unwrap();
        let n: usize = traces.iter().map(|t| t.records.len()).sum();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), n + 1);
    }

    #[test]
    fn sci_format() {
        assert_eq!(sci(1.0), "1.0000000000000000e0");
        assert_eq!(sci(f64::NAN), "");
        let v = 0.1 + 0.2;
        assert_eq!(sci(v).parse::<f64>().unwrap(), v);
    }
}
