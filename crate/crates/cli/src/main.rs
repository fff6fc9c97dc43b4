use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use lipopt::certificate::{self, BoundOptions, Mode, DEFAULT_MAX_TERMS};
use lipopt::lp::{self, LpStatus};
use lipopt::network::{Activation, Network, LBS_DEFAULT_RADIUS, LBS_DEFAULT_SAMPLES};
use lipopt::oracle::{self, DEFAULT_VERTEX_CAP};
use lipopt::polynomial::norm_gradient_polynomial;
use lipopt::sdp;
use lipopt::sparsity::{clique_stats, validate_pattern, SparsityPattern};

mod sweep;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "lipopt", version, about = "Certified Lipschitz upper bounds for feed-forward networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper bound θ_k on the ℓ∞ Lipschitz constant.
    Bound(BoundArgs),
    /// Baseline estimates: product bound, sampled lower bound, exact oracle.
    Baseline(BaselineArgs),
    /// Random-network experiment grid written as CSV.
    Sweep(sweep::SweepArgs),
    /// Random sparse network in JSON.
    GenRandom(GenArgs),
    /// Zero the smallest weights.
    Prune(PruneArgs),
    /// Write the LP (MPS) or the Shor relaxation (SDPA) without solving.
    Export(ExportArgs),
    /// Check a clique pattern against the network's polynomial.
    ValidatePattern(PatternArgs),
}

#[derive(Args)]
struct NetArgs {
    /// Network JSON file.
    #[arg(long)]
    net: PathBuf,
    /// Restrict a multi-output network to this output row.
    #[arg(long)]
    output_index: Option<usize>,
}

impl NetArgs {
    fn load(&self) -> Result<Network> {
        let bytes = fs::read(&self.net).with_context(|| format!("reading {}", self.net.display()))?;
        Ok(Network::from_json_with_output(&bytes, self.output_index)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sparse,
    Dense,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sparse => Mode::Sparse,
            ModeArg::Dense => Mode::Dense,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Elu,
    Softplus,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Elu => Activation::Elu,
            ActivationArg::Softplus => Activation::Softplus,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Certificate term cap. LIPOPT_MAX_TERMS overrides the default.
    #[arg(long)]
    max_terms: Option<usize>,
    /// Simplex iteration limit.
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl SolverArgs {
    fn options(&self) -> Result<BoundOptions> {
        let mut opts = BoundOptions { max_terms: max_terms(self.max_terms)?, ..Default::default() };
        if let Some(n) = self.max_iterations {
            opts.solver.max_iterations = n;
        }
        Ok(opts)
    }
}

fn max_terms(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("LIPOPT_MAX_TERMS") {
        Ok(v) => v.trim().parse().with_context(|| format!("LIPOPT_MAX_TERMS={v:?} is not a count")),
        Err(_) => Ok(DEFAULT_MAX_TERMS),
    }
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Hierarchy degree.
    #[arg(long)]
    k: u32,
    #[arg(long, value_enum, default_value = "sparse")]
    mode: ModeArg,
    /// Center of the local region, a JSON array (or {"x0": [...]}).
    #[arg(long, requires = "eps")]
    local: Option<PathBuf>,
    /// ℓ∞ radius of the local region.
    #[arg(long, requires = "local")]
    eps: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Ubp,
    Lbs,
    Oracle,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(value_enum)]
    method: BaselineMethod,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long, default_value_t = LBS_DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = LBS_DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of polynomial variables the oracle will enumerate.
    #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
    vertex_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Layer widths, input first, e.g. 40,40,1.
    #[arg(long, value_delimiter = ',', required = true)]
    widths: Vec<usize>,
    /// Nonzeros per row; fully connected when omitted.
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long, value_enum, default_value = "elu")]
    activation: ActivationArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Fraction of weights to zero, in [0, 1).
    #[arg(long)]
    fraction: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Mps,
    Sdpa,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(value_enum)]
    format: ExportFormat,
    #[command(flatten)]
    net: NetArgs,
    /// Hierarchy degree (MPS only).
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, value_enum, default_value = "sparse")]
    mode: ModeArg,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PatternArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Pattern JSON {"cliques": [[...], ...]}; the induced pattern when omitted.
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Degree used for the term-count estimate.
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let resource = matches!(
                e.downcast_ref::<lipopt::Error>(),
                Some(
                    lipopt::Error::TermCap { .. }
                        | lipopt::Error::OracleCap { .. }
                        | lipopt::Error::IterationLimit { .. }
                )
            );
            ExitCode::from(if resource { EXIT_RESOURCE } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Bound(a) => cmd_bound(&a),
        Command::Baseline(a) => cmd_baseline(&a).map(|_| 0),
        Command::Sweep(a) => sweep::cmd_sweep(&a).map(|_| 0),
        Command::GenRandom(a) => cmd_gen(&a).map(|_| 0),
        Command::Prune(a) => cmd_prune(&a).map(|_| 0),
        Command::Export(a) => cmd_export(&a).map(|_| 0),
        Command::ValidatePattern(a) => cmd_validate(&a).map(|_| 0),
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    emit(path, &format!("{value}\n"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CenterFile {
    Plain(Vec<f64>),
    Keyed { x0: Vec<f64> },
}

fn read_center(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let c: CenterFile = serde_json::from_slice(&bytes)
        .with_context(|| format!("{}: expected a JSON array of numbers", path.display()))?;
    Ok(match c {
        CenterFile::Plain(v) | CenterFile::Keyed { x0: v } => v,
    })
}

fn cmd_bound(a: &BoundArgs) -> Result<u8> {
    let net = a.net.load()?;
    let opts = a.solver.options()?;
    let mode = Mode::from(a.mode);
    let bounds = match (&a.local, a.eps) {
        (Some(path), Some(eps)) => {
            if !(eps >= 0.0) {
                bail!("eps must be nonnegative, got {eps}");
            }
            let x0 = read_center(path)?;
            let pre = net.preactivation_bounds(&x0, eps)?;
            Some(net.derivative_bounds(&pre)?)
        }
        _ => None,
    };
    let report = certificate::lipopt_bound(&net, a.k, mode, bounds.as_ref(), &opts)?;
    if bounds.is_some() {
        let global = certificate::lipopt_bound(&net, a.k, mode, None, &opts)?;
        eprintln!("local theta {} / global theta {}", report.theta, global.theta);
    }
    emit(a.out.as_deref(), &format!("{}\n", report.to_json()))?;
    Ok(match report.status {
        LpStatus::Infeasible => EXIT_INFEASIBLE,
        _ => 0,
    })
}

fn cmd_baseline(a: &BaselineArgs) -> Result<()> {
    let net = a.net.load()?;
    let report = match a.method {
        BaselineMethod::Ubp => json!({ "method": "ubp", "value": net.ubp() }),
        BaselineMethod::Lbs => {
            if a.samples == 0 {
                bail!("lbs needs at least one sample");
            }
            let value = net.lbs(a.samples, a.radius, a.seed);
            json!({
                "method": "lbs",
                "value": value,
                "samples": a.samples,
                "radius": a.radius,
                "seed": a.seed,
            })
        }
        BaselineMethod::Oracle => {
            let p = norm_gradient_polynomial(&net);
            let r = oracle::vertex_max_with_cap(&p, a.vertex_cap)?;
            json!({
                "method": "oracle",
                "value": r.value,
                "argmax": r.argmax,
                "vertices": r.vertices,
            })
        }
    };
    emit_json(a.out.as_deref(), &report)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let act = Activation::from(a.activation);
    let net = match a.sparsity {
        Some(r) => Network::random(&a.widths, r, act, a.seed)?,
        None => Network::random_dense(&a.widths, act, a.seed)?,
    };
    emit(a.out.as_deref(), &net.to_canonical_json())
}

fn cmd_prune(a: &PruneArgs) -> Result<()> {
    let net = a.net.load()?.prune(a.fraction)?;
    emit(a.out.as_deref(), &net.to_canonical_json())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let net = a.net.load()?;
    let mut buf = Vec::new();
    match a.format {
        ExportFormat::Mps => {
            let Some(k) = a.k else { bail!("export mps needs --k") };
            let opts = a.solver.options()?;
            let p = norm_gradient_polynomial(&net);
            let pat = certificate::pattern_for(&net, a.mode.into());
            let assembled = certificate::build_lp(&p, &pat, k, &opts)?;
            lp::write_mps(&assembled.lp, "lipopt", &mut buf)?;
        }
        ExportFormat::Sdpa => {
            let q = sdp::qcqp_reformulate(&net)?;
            sdp::write_sdpa(&sdp::shor_relax(&q), &mut buf)?;
        }
    }
    emit(a.out.as_deref(), std::str::from_utf8(&buf)?)
}

#[derive(Deserialize)]
struct PatternFile {
    cliques: Vec<Vec<usize>>,
}

fn cmd_validate(a: &PatternArgs) -> Result<()> {
    let net = a.net.load()?;
    let p = norm_gradient_polynomial(&net);
    let pat = match &a.pattern {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let f: PatternFile = serde_json::from_slice(&bytes)
                .with_context(|| format!("{}: expected {{\"cliques\": [[...]]}}", path.display()))?;
            let nvars = p.nvars();
            if let Some(v) = f.cliques.iter().flatten().find(|&&v| v >= nvars) {
                bail!("pattern variable {v} out of range for {nvars} variables");
            }
            SparsityPattern::new(f.cliques)
        }
        None => SparsityPattern::for_network(&net),
    };
    let report = validate_pattern(&pat, &p);
    let stats = clique_stats(&pat, a.k);
    let value = json!({
        "valid": report.is_valid(),
        "covers": report.covers,
        "decomposes": report.decomposes,
        "running_intersection": report.running_intersection,
        "cliques": pat.cliques(),
        "max_clique": stats.max_clique,
        "k": stats.k,
        "term_bound": stats.term_bound.to_string(),
        "term_bound_saturated": stats.saturated,
    });
    emit_json(a.out.as_deref(), &value)
}
