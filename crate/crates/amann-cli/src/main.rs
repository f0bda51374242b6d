//! `amann` — build, query, and benchmark associative-memory ANN indexes.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable or malformed data.
//! Benchmark results are CSV on stdout (or `--out`); progress goes to
//! stderr. Every randomized command takes an explicit `--seed`, and a rerun
//! with the same arguments and seed reproduces the same results regardless
//! of `--threads`; add `--deterministic` to also suppress the timestamp
//! comment so reruns are byte-identical.

mod bench_cmd;
mod cfgfile;
mod data;
mod index_cmd;

use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use amann::bench::bounds::{regime_check, theoretical_bound, BoundInput, DenseBranch, RegimeKind};

pub(crate) const TOOL_VERSION: &str = concat!("amann ", env!("CARGO_PKG_VERSION"));
pub(crate) const REVISION: &str = env!("AMANN_GIT_DESCRIBE");

#[derive(Parser)]
#[command(
    name = "amann",
    version,
    about = "Associative-memory class filtering for approximate nearest neighbor search"
)]
struct Cli {
    /// Cap the worker-thread count (default: all cores). Results never
    /// depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Omit the timestamp provenance comment so identical reruns produce
    /// byte-identical files.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pattern collection (sparse -> 0/1 CSV,
    /// dense -> ivecs of +-1).
    Gen(index_cmd::GenArgs),
    /// Build an index file over a stored collection.
    Build(index_cmd::BuildArgs),
    /// Query an index file; prints one CSV row per query.
    Query(index_cmd::QueryArgs),
    /// Monte-Carlo error-rate sweeps on synthetic data.
    BenchSynthetic(bench_cmd::SynthArgs),
    /// Recall@1-versus-complexity curves on a stored collection.
    BenchRecall(bench_cmd::RecallArgs),
    /// Evaluate a closed-form error bound (or print the full regime report
    /// with --check).
    Bound(BoundArgs),
    /// Describe an index or data file.
    Inspect(index_cmd::InspectArgs),
}

#[derive(clap::Args)]
pub(crate) struct BoundArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<std::path::PathBuf>,

    /// One of: sparse-exact, sparse-corrupted, dense-exact,
    /// dense-corrupted.
    #[arg(long)]
    regime: Option<RegimeKind>,

    #[arg(long)]
    d: Option<u64>,

    #[arg(long)]
    k: Option<u64>,

    #[arg(long)]
    q: Option<u64>,

    /// Query-corruption overlap in (0, 1]; required by corrupted regimes.
    #[arg(long)]
    alpha: Option<f64>,

    /// Dense exponent branch, large-k or small-k; required by dense
    /// regimes.
    #[arg(long)]
    branch: Option<DenseBranch>,

    /// Print the regime ratios and every bound variant instead of one
    /// number.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    // Behave like a conventional pipeline stage: exit quietly when the
    // reader closes the pipe (`amann bound --check | head`) instead of
    // panicking on the failed stdout write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure the thread pool: {err}");
            return ExitCode::from(1);
        }
    }

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let data_error = err
                .chain()
                .filter_map(|cause| cause.downcast_ref::<amann::Error>())
                .any(amann::Error::is_data_error);
            ExitCode::from(if data_error { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let deterministic = cli.deterministic;
    match cli.command {
        Command::Gen(args) => index_cmd::run_gen(args),
        Command::Build(args) => index_cmd::run_build(args),
        Command::Query(args) => index_cmd::run_query(args),
        Command::BenchSynthetic(args) => bench_cmd::run_synthetic(args, deterministic),
        Command::BenchRecall(args) => bench_cmd::run_recall(args, deterministic),
        Command::Bound(args) => run_bound(args),
        Command::Inspect(args) => index_cmd::run_inspect(args),
    }
}

fn run_bound(mut args: BoundArgs) -> anyhow::Result<()> {
    if let Some(path) = args.config.take() {
        let cfg = cfgfile::ConfigFile::load(&path)?;
        cfg.fill_parsed(&mut args.regime, "regime")?;
        cfg.fill_u64(&mut args.d, "d")?;
        cfg.fill_u64(&mut args.k, "k")?;
        cfg.fill_u64(&mut args.q, "q")?;
        cfg.fill_f64(&mut args.alpha, "alpha")?;
        cfg.fill_parsed(&mut args.branch, "branch")?;
        cfg.fill_flag(&mut args.check, "check")?;
        cfg.finish()?;
    }
    let d = required(args.d, "d")?;
    let k = required(args.k, "k")?;
    let q = required(args.q, "q")?;

    if args.check {
        let report = regime_check(d, k, q, args.alpha.unwrap_or(1.0))?;
        println!("{report}");
        return Ok(());
    }

    let regime = required(args.regime, "regime")?;
    if regime.is_corrupted() && args.alpha.is_none() {
        bail!("--alpha is required for corrupted regimes");
    }
    let branch = match (regime.is_dense(), args.branch) {
        (true, Some(branch)) => branch,
        (true, None) => bail!("--branch (large-k | small-k) is required for dense regimes"),
        // The branch is not consulted by sparse bounds.
        (false, _) => DenseBranch::LargeK,
    };
    let value = theoretical_bound(&BoundInput {
        regime,
        d,
        k,
        q,
        alpha: args.alpha.unwrap_or(1.0),
        branch,
    })?;
    println!("{value}");
    Ok(())
}

pub(crate) fn required<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.with_context(|| format!("missing required --{flag} (set it as a flag or in --config)"))
}
