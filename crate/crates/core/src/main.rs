use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use trace_tucker::datagen::RNG_ALGORITHM;
use trace_tucker::experiment::{
    run_benchmark, run_method, run_phase, run_trace, write_benchmark_csv, write_decomposition,
    write_phase_csv, write_trace_csv, ExperimentConfig, Method, SolverOverrides,
};
use trace_tucker::io::{load_tensor, save_matrix, save_tnsr};
use trace_tucker::kv::KvConfig;
use trace_tucker::SynthSpec;

#[derive(Parser)]
#[command(name = "trace-tucker", version, about = "Trace-norm regularized Tucker decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Tucker tensor (clean, noisy and ground truth).
    Gen(Common),
    /// Decompose a tensor file.
    Decompose {
        /// TNSR file, or CSV of values together with --dims.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Benchmark sweep: methods × true ranks × repeats.
    Benchmark(Common),
    /// Phase-transition grid: given ranks × noise or outlier levels.
    Phase(Common),
    /// Per-iteration convergence traces.
    Trace(Common),
}

/// Flags shared by all subcommands. Each one overrides the key of the same
/// name (dashes become underscores) from --config.
#[derive(Args, Default)]
struct Common {
    /// key=value settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method or comma-separated methods: hosvd, hooi, ctd, nctd.
    #[arg(long, alias = "methods")]
    method: Option<String>,
    /// Extents, e.g. 40,40,40.
    #[arg(long)]
    dims: Option<String>,
    /// Given ranks (per mode for decompose, rank axis for phase).
    #[arg(long)]
    ranks: Option<String>,
    /// True rank(s) of generated data.
    #[arg(long)]
    true_rank: Option<String>,
    /// Noise level(s) δ.
    #[arg(long)]
    delta: Option<String>,
    /// Outlier ratio(s).
    #[arg(long)]
    outlier_ratio: Option<String>,
    #[arg(long)]
    outlier_range: Option<f64>,
    /// Phase axis: noise or outliers.
    #[arg(long)]
    axis: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    mu_max: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Grow μ each iteration (true/false).
    #[arg(long)]
    adaptive_mu: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Output file (benchmark, phase, trace) or directory (gen, decompose).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ground-truth tensor for the RSE column of decompose.
    #[arg(long)]
    reference: Option<PathBuf>,
}

impl Common {
    /// File settings overlaid with the flags that were given.
    fn layered(&self, defaults: KvConfig) -> anyhow::Result<KvConfig> {
        let file = match &self.config {
            Some(p) => KvConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => KvConfig::new(),
        };
        let mut cli = KvConfig::new();
        let strings = [
            ("methods", &self.method),
            ("dims", &self.dims),
            ("ranks", &self.ranks),
            ("true_rank", &self.true_rank),
            ("delta", &self.delta),
            ("outlier_ratio", &self.outlier_ratio),
            ("axis", &self.axis),
        ];
        for (k, v) in strings {
            if let Some(v) = v {
                cli.set(k, v);
            }
        }
        let numbers = [
            ("outlier_range", self.outlier_range),
            ("lambda", self.lambda),
            ("mu0", self.mu0),
            ("rho", self.rho),
            ("mu_max", self.mu_max),
            ("gamma", self.gamma),
            ("tol", self.tol),
        ];
        for (k, v) in numbers {
            if let Some(v) = v {
                cli.set(k, format!("{v:e}"));
            }
        }
        if let Some(v) = self.max_iter {
            cli.set("max_iter", v);
        }
        if let Some(v) = self.adaptive_mu {
            cli.set("adaptive_mu", v);
        }
        if let Some(v) = self.seed {
            cli.set("seed", v);
        }
        if let Some(v) = self.repeats {
            cli.set("repeats", v);
        }
        // A file may say `method` where the CLI sets `methods`.
        let mut merged = defaults.merged(&file).merged(&cli);
        if cli.contains("methods") || !file.contains("method") {
            return Ok(merged);
        }
        merged.set("methods", file.raw("method").unwrap_or_default());
        Ok(merged)
    }

    fn out(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn gen(c: &Common) -> anyhow::Result<ExitCode> {
    let defaults = KvConfig::parse("dims = 30,30,30\ntrue_rank = 5\ndelta = 0\noutlier_ratio = 0\noutlier_range = 1\nseed = 1")?;
    let kv = c.layered(defaults)?;
    let dims: Vec<usize> = kv.get_list("dims")?.unwrap_or_default();
    let mut true_ranks: Vec<usize> = kv.get_list("true_rank")?.unwrap_or_default();
    if true_ranks.len() == 1 {
        true_ranks = vec![true_ranks[0]; dims.len()];
    }
    let spec = SynthSpec {
        dims,
        true_ranks,
        noise_delta: kv.get_or("delta", 0.0)?,
        outlier_ratio: kv.get_or("outlier_ratio", 0.0)?,
        outlier_range: kv.get_or("outlier_range", 1.0)?,
        seed: kv.get_or("seed", 1)?,
    };
    let data = spec.generate::<f64>()?;
    let dir = c.out("gen");
    std::fs::create_dir_all(&dir)?;
    save_tnsr(&dir.join("clean.tnsr"), &data.clean)?;
    save_tnsr(&dir.join("noisy.tnsr"), &data.noisy)?;
    save_tnsr(&dir.join("truth_core.tnsr"), &data.truth.core)?;
    for (n, u) in data.truth.factors.iter().enumerate() {
        save_matrix(&dir.join(format!("truth_factor_{}.tnsr", n + 1)), u)?;
    }
    std::fs::write(dir.join("spec.kv"), spec.to_kv().to_string())?;
    eprintln!("wrote {} ({RNG_ALGORITHM})", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn decompose(input: &Path, c: &Common) -> anyhow::Result<ExitCode> {
    let kv = c.layered(KvConfig::parse("methods = ctd\nseed = 1")?)?;
    let methods: Vec<String> = kv.get_list("methods")?.unwrap_or_default();
    let [method] = methods.as_slice() else {
        bail!("decompose takes exactly one method");
    };
    let method: Method = method.parse()?;
    let dims: Option<Vec<usize>> = kv.get_list("dims")?;
    let t = load_tensor(input, dims.as_deref()).with_context(|| format!("reading {}", input.display()))?;
    let mut ranks: Option<Vec<usize>> = kv.get_list("ranks")?;
    if let Some(r) = &mut ranks {
        if r.len() == 1 {
            *r = vec![r[0]; t.order()];
        }
    }
    let reference = match &c.reference {
        Some(p) => Some(load_tensor(p, Some(t.dims())).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let overrides = SolverOverrides::from_kv(&kv)?;
    let out = run_method(method, &t, ranks.as_deref(), &overrides, kv.get_or("seed", 1)?)?;
    let summary = write_decomposition(&c.out("decompose-out"), &out, reference.as_ref())?;
    let ranks = summary.est_ranks.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
    let rse = summary.rse.map(|r| format!(" rse={r:.6e}")).unwrap_or_default();
    eprintln!("{method}: {} iterations, est_ranks={ranks}{rse}", summary.iters);
    if summary.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: stopped at max_iter before reaching tol");
        Ok(ExitCode::from(2))
    }
}

fn benchmark(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig::from_kv(&c.layered(ExperimentConfig::benchmark_defaults())?)?;
    let report = run_benchmark(&cfg)?;
    write_benchmark_csv(create(&c.out("benchmark.csv"))?, &report)?;
    for m in &report.means {
        eprintln!(
            "{:>5} r={} R={} delta={:.3} mean_rse={:.4e} success={:.2}",
            m.method, m.true_rank, m.given_rank, m.delta, m.mean_rse, m.success_fraction
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn phase(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig::from_kv(&c.layered(ExperimentConfig::phase_defaults())?)?;
    let cells = run_phase(&cfg)?;
    write_phase_csv(create(&c.out("phase.csv"))?, &cfg, &cells)?;
    Ok(ExitCode::SUCCESS)
}

fn trace(c: &Common) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig::from_kv(&c.layered(ExperimentConfig::trace_defaults())?)?;
    let traces = run_trace(&cfg)?;
    write_trace_csv(create(&c.out("trace.csv"))?, &traces)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(c) => gen(c),
        Command::Decompose { input, common } => decompose(input, common),
        Command::Benchmark(c) => benchmark(c),
        Command::Phase(c) => phase(c),
        Command::Trace(c) => trace(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
