//! The `bench-synthetic` and `bench-recall` subcommands.
//!
//! Both emit the shared CSV schema. The provenance `config` line records
//! the resolved, result-determining parameters in a canonical form —
//! execution-only flags (`--threads`, `--out`) are excluded, so reruns
//! produce identical files no matter how the work was scheduled.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::ValueEnum;

use amann::baselines::{hybrid_build, rs_build};
use amann::bench::csvout::{write_csv, CsvRow, Provenance};
use amann::bench::recall::{
    am_recall_curve, ground_truth, hybrid_recall_curve, rs_recall_curve, HybridRecallPoint,
    RecallPoint,
};
use amann::bench::synthetic::{
    run_asymptotic, run_error_rate, run_fixed_n_tradeoff, ExperimentConfig, Sweep, SweepOutcome,
};
use amann::bench::binomial_stderr;
use amann::index::{allocate, build_index, Allocation};
use amann::memory::Rule;
use amann::pattern::{Pattern, Variant};

use crate::cfgfile::ConfigFile;
use crate::data::{load_collection, preprocess, Collection, FileFormat, SynthVariant};
use crate::{required, REVISION, TOOL_VERSION};

// ---------------------------------------------------------------------------
// Shared output plumbing
// ---------------------------------------------------------------------------

fn timestamp(deterministic: bool) -> Option<u64> {
    if deterministic {
        return None;
    }
    Some(
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    )
}

fn emit(
    out: Option<&Path>,
    provenance: &Provenance,
    rows: &[CsvRow],
) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, provenance, rows)?;
            eprintln!("wrote {} row(s) to {}", rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            write_csv(&mut stdout.lock(), provenance, rows)?;
        }
    }
    Ok(())
}

fn join_list(values: &[usize]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------------------
// bench-synthetic
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub(crate) struct SynthArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Data variant: sparse or dense.
    #[arg(long)]
    variant: Option<SynthVariant>,

    /// Pattern dimension.
    #[arg(long)]
    d: Option<usize>,

    /// Mean active coordinates per sparse pattern (dimension sweeps derive
    /// it as ceil(log2 d)).
    #[arg(long)]
    c: Option<usize>,

    /// Class size(s); several comma-separated values sweep k.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,

    /// Class count(s); several comma-separated values sweep q.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<usize>>,

    /// Query-corruption overlap in (0, 1]; omitted = query with the stored
    /// pattern itself.
    #[arg(long)]
    alpha: Option<f64>,

    /// Memory combination rule: sum (default) or max (sparse only).
    #[arg(long)]
    rule: Option<Rule>,

    /// Monte-Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<u64>,

    /// Keep k·q = n fixed and sweep k (with --k listing the class sizes).
    #[arg(long, value_name = "N")]
    fixed_n: Option<usize>,

    /// Dimension grid; sweeps d with k = floor(d^a) at q = 2.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,

    /// Scaling exponent a (a multiple of 0.5) for --dims.
    #[arg(long, value_name = "A")]
    exponent: Option<f64>,

    /// Use k = floor(d^a / 10) instead of floor(d^a).
    #[arg(long)]
    div_ten: bool,

    /// Share one database across all trials of a point instead of
    /// regenerating per trial.
    #[arg(long)]
    reuse_database: bool,

    /// RNG seed (required; reruns with the same seed reproduce the file).
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum ResolvedSweep {
    PlainK { ks: Vec<usize>, q: usize },
    PlainQ { k: usize, qs: Vec<usize> },
    FixedN { n: usize, ks: Vec<usize> },
    Dimension { ds: Vec<usize>, exponent: f64, a_tenths: u32, div_ten: bool },
}

fn exponent_tenths(exponent: f64) -> anyhow::Result<u32> {
    let tenths = (exponent * 10.0).round();
    if !(tenths > 0.0 && (exponent * 10.0 - tenths).abs() < 1e-9)
        || !(tenths as u64).is_multiple_of(5)
    {
        bail!("--exponent must be a positive multiple of 0.5, got {exponent}");
    }
    Ok(tenths as u32)
}

pub(crate) fn run_synthetic(mut args: SynthArgs, deterministic: bool) -> anyhow::Result<()> {
    let config_path = args.config.take();
    if let Some(path) = &config_path {
        let cfg = ConfigFile::load(path)?;
        cfg.fill_parsed(&mut args.variant, "variant")?;
        cfg.fill_usize(&mut args.d, "d")?;
        cfg.fill_usize(&mut args.c, "c")?;
        cfg.fill_usize_list(&mut args.k, "k")?;
        cfg.fill_usize_list(&mut args.q, "q")?;
        cfg.fill_f64(&mut args.alpha, "alpha")?;
        cfg.fill_parsed(&mut args.rule, "rule")?;
        cfg.fill_u64(&mut args.trials, "trials")?;
        cfg.fill_usize(&mut args.fixed_n, "fixed-n")?;
        cfg.fill_usize_list(&mut args.dims, "dims")?;
        cfg.fill_f64(&mut args.exponent, "exponent")?;
        cfg.fill_flag(&mut args.div_ten, "div-ten")?;
        cfg.fill_flag(&mut args.reuse_database, "reuse-database")?;
        cfg.fill_u64(&mut args.seed, "seed")?;
        cfg.finish()?;
    }

    let variant = required(args.variant, "variant")?.variant();
    let trials = required(args.trials, "trials")?;
    let seed = required(args.seed, "seed")?;
    let rule = args.rule.unwrap_or(Rule::Sum);

    let sweep = if let Some(ds) = args.dims.clone() {
        if args.k.is_some() {
            bail!("--dims derives k from --exponent; --k cannot be combined with it");
        }
        if args.c.is_some() && variant == Variant::Sparse {
            bail!("--dims derives c = ceil(log2 d); drop --c");
        }
        match args.q.as_deref() {
            None | Some([2]) => {}
            _ => bail!("dimension sweeps run at q = 2"),
        }
        let exponent = required(args.exponent, "exponent")?;
        ResolvedSweep::Dimension {
            ds,
            exponent,
            a_tenths: exponent_tenths(exponent)?,
            div_ten: args.div_ten,
        }
    } else if let Some(n) = args.fixed_n {
        if args.q.is_some() {
            bail!("--fixed-n derives q = n/k; drop --q");
        }
        let ks = required(args.k.clone(), "k")?;
        ResolvedSweep::FixedN { n, ks }
    } else {
        let ks = required(args.k.clone(), "k")?;
        let qs = required(args.q.clone(), "q")?;
        match (ks.len(), qs.len()) {
            (_, 1) => ResolvedSweep::PlainK { ks, q: qs[0] },
            (1, _) => ResolvedSweep::PlainQ { k: ks[0], qs },
            _ => bail!("sweep either k or q, not both (one of --k/--q must be a single value)"),
        }
    };

    let sparse = variant == Variant::Sparse;
    // The dimension sweep derives d and c per point; other sweeps take d
    // directly and, for sparse data, c as well.
    let (d, c) = match &sweep {
        ResolvedSweep::Dimension { ds, .. } => {
            if args.d.is_some() {
                bail!("--dims derives d per point; drop --d");
            }
            (ds[0], 1)
        }
        _ => {
            let d = required(args.d, "d")?;
            let c = if sparse {
                required(args.c, "c")?
            } else {
                if args.c.is_some() {
                    bail!("--c applies to sparse data");
                }
                0
            };
            (d, c)
        }
    };

    let mut config_line = format!("bench-synthetic variant={variant}");
    if !matches!(sweep, ResolvedSweep::Dimension { .. }) {
        let _ = write!(config_line, " d={d}");
        if sparse {
            let _ = write!(config_line, " c={c}");
        }
    }
    match &sweep {
        ResolvedSweep::PlainK { ks, q } => {
            let _ = write!(config_line, " sweep=k k={} q={q}", join_list(ks));
        }
        ResolvedSweep::PlainQ { k, qs } => {
            let _ = write!(config_line, " sweep=q k={k} q={}", join_list(qs));
        }
        ResolvedSweep::FixedN { n, ks } => {
            let _ = write!(config_line, " sweep=fixed-n n={n} k={}", join_list(ks));
        }
        ResolvedSweep::Dimension {
            ds,
            exponent,
            div_ten,
            ..
        } => {
            let _ = write!(
                config_line,
                " sweep=dimension dims={} exponent={exponent} div-ten={div_ten}",
                join_list(ds)
            );
        }
    }
    if let Some(alpha) = args.alpha {
        let _ = write!(config_line, " alpha={alpha}");
    }
    let _ = write!(
        config_line,
        " rule={rule} trials={trials} reuse-database={} seed={seed}",
        args.reuse_database
    );
    if let Some(path) = &config_path {
        let _ = write!(config_line, " config-file={}", path.display());
    }

    let (cfg, exponent_column) = match &sweep {
        ResolvedSweep::PlainK { ks, q } => (
            ExperimentConfig {
                variant,
                d,
                c,
                k: ks[0],
                q: *q,
                alpha: args.alpha,
                rule,
                trials,
                seed,
                reuse_database: args.reuse_database,
                sweep: Sweep::K(ks.clone()),
            },
            None,
        ),
        ResolvedSweep::PlainQ { k, qs } => (
            ExperimentConfig {
                variant,
                d,
                c,
                k: *k,
                q: qs[0],
                alpha: args.alpha,
                rule,
                trials,
                seed,
                reuse_database: args.reuse_database,
                sweep: Sweep::Q(qs.clone()),
            },
            None,
        ),
        ResolvedSweep::FixedN { n, ks } => (
            ExperimentConfig {
                variant,
                d,
                c,
                k: ks[0],
                q: 1,
                alpha: args.alpha,
                rule,
                trials,
                seed,
                reuse_database: args.reuse_database,
                sweep: Sweep::FixedN {
                    n: *n,
                    ks: ks.clone(),
                },
            },
            None,
        ),
        ResolvedSweep::Dimension {
            ds,
            exponent,
            a_tenths,
            div_ten,
        } => (
            ExperimentConfig {
                variant,
                d: ds[0],
                c,
                k: 1,
                q: 2,
                alpha: args.alpha,
                rule,
                trials,
                seed,
                reuse_database: args.reuse_database,
                sweep: Sweep::AsymptoticD {
                    ds: ds.clone(),
                    a_tenths: *a_tenths,
                    div_ten: *div_ten,
                },
            },
            Some(*exponent),
        ),
    };

    let points = match &cfg.sweep {
        Sweep::K(ks) => ks.len(),
        Sweep::Q(qs) => qs.len(),
        Sweep::FixedN { ks, .. } => ks.len(),
        Sweep::AsymptoticD { ds, .. } => ds.len(),
    };
    eprintln!("bench-synthetic: {points} point(s) x {trials} trial(s), seed {seed}");

    let outcomes = match &cfg.sweep {
        Sweep::K(_) | Sweep::Q(_) => run_error_rate(&cfg)?,
        Sweep::FixedN { .. } => run_fixed_n_tradeoff(&cfg)?,
        Sweep::AsymptoticD { .. } => run_asymptotic(&cfg)?,
    };
    for outcome in &outcomes {
        eprintln!(
            "  x={} error_rate={} ({} / {})",
            outcome.x, outcome.error_rate, outcome.errors, outcome.trials
        );
    }

    let rows: Vec<CsvRow> = outcomes
        .iter()
        .map(|o| synth_row(o, exponent_column))
        .collect();
    let provenance = Provenance {
        tool: TOOL_VERSION.to_string(),
        revision: REVISION.to_string(),
        seed,
        config: config_line,
        timestamp: timestamp(deterministic),
    };
    emit(args.out.as_deref(), &provenance, &rows)
}

fn synth_row(o: &SweepOutcome, exponent: Option<f64>) -> CsvRow {
    CsvRow {
        sweep_value: o.x,
        metric: o.error_rate,
        stderr: Some(o.stderr),
        op_count: None,
        metric_name: "error_rate".to_string(),
        method: "am".to_string(),
        variant: o.variant.to_string(),
        d: Some(o.d),
        c: (o.variant == Variant::Sparse).then_some(o.c),
        k: Some(o.k),
        q: Some(o.q),
        p: None,
        r: None,
        a: exponent,
        alpha: o.alpha,
        rule: Some(o.rule.to_string()),
        trials: Some(o.trials),
        seed: Some(o.seed),
    }
}

// ---------------------------------------------------------------------------
// bench-recall
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum MethodArg {
    /// Partitioned associative-memory index.
    Am,
    /// Anchor baseline.
    Rs,
    /// Class partition with an anchor index inside each class.
    Hybrid,
}

impl std::str::FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> Result<MethodArg, String> {
        <MethodArg as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum AllocArg {
    Random,
    Greedy,
}

impl std::str::FromStr for AllocArg {
    type Err = String;

    fn from_str(s: &str) -> Result<AllocArg, String> {
        <AllocArg as ValueEnum>::from_str(s, false)
    }
}

#[derive(clap::Args)]
pub(crate) struct RecallArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Base collection file.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,

    /// Base file format: fvecs, bvecs, ivecs, csv, or mnist.
    #[arg(long)]
    format: Option<FileFormat>,

    /// Column count for csv collections.
    #[arg(long)]
    dim: Option<usize>,

    /// Skip the first line of csv collections.
    #[arg(long)]
    has_header: bool,

    /// Query file (default: the base collection queries itself).
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,

    /// Query file format (default: same as --format).
    #[arg(long)]
    query_format: Option<FileFormat>,

    /// Keep only the first N base vectors.
    #[arg(long, value_name = "N")]
    limit_base: Option<usize>,

    /// Keep only the first N queries.
    #[arg(long, value_name = "N")]
    limit_queries: Option<usize>,

    /// Center with the base mean and normalize (real-valued data).
    #[arg(long)]
    preprocess: bool,

    /// Method to sweep: am (default), rs, or hybrid.
    #[arg(long)]
    method: Option<MethodArg>,

    /// Class count (am, hybrid).
    #[arg(long)]
    q: Option<usize>,

    /// Allocation strategy: random (default) or greedy.
    #[arg(long)]
    alloc: Option<AllocArg>,

    /// Class-size cap for greedy allocation.
    #[arg(long, value_name = "N")]
    max_class_size: Option<usize>,

    /// Memory combination rule: sum (default) or max.
    #[arg(long)]
    rule: Option<Rule>,

    /// Probed-class counts to sweep (am, hybrid).
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,

    /// Anchor count (rs, hybrid).
    #[arg(long)]
    r: Option<usize>,

    /// Probed-anchor counts to sweep (rs, hybrid).
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<usize>>,

    /// RNG seed (required; drives allocation and anchor choice).
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

struct RecallPlan {
    method: MethodArg,
    q: Option<usize>,
    strategy: Allocation,
    rule: Rule,
    ps: Option<Vec<usize>>,
    r: Option<usize>,
    a_values: Option<Vec<usize>>,
    seed: u64,
}

pub(crate) fn run_recall(mut args: RecallArgs, deterministic: bool) -> anyhow::Result<()> {
    let config_path = args.config.take();
    if let Some(path) = &config_path {
        let cfg = ConfigFile::load(path)?;
        cfg.fill_parsed(&mut args.data, "data")?;
        cfg.fill_parsed(&mut args.format, "format")?;
        cfg.fill_usize(&mut args.dim, "dim")?;
        cfg.fill_flag(&mut args.has_header, "has-header")?;
        cfg.fill_parsed(&mut args.queries, "queries")?;
        cfg.fill_parsed(&mut args.query_format, "query-format")?;
        cfg.fill_usize(&mut args.limit_base, "limit-base")?;
        cfg.fill_usize(&mut args.limit_queries, "limit-queries")?;
        cfg.fill_flag(&mut args.preprocess, "preprocess")?;
        cfg.fill_parsed(&mut args.method, "method")?;
        cfg.fill_usize(&mut args.q, "q")?;
        cfg.fill_parsed(&mut args.alloc, "alloc")?;
        cfg.fill_usize(&mut args.max_class_size, "max-class-size")?;
        cfg.fill_parsed(&mut args.rule, "rule")?;
        cfg.fill_usize_list(&mut args.p, "p")?;
        cfg.fill_usize(&mut args.r, "r")?;
        cfg.fill_usize_list(&mut args.a, "a")?;
        cfg.fill_u64(&mut args.seed, "seed")?;
        cfg.finish()?;
    }

    let data = required(args.data, "data")?;
    let format = required(args.format, "format")?;
    let seed = required(args.seed, "seed")?;
    let method = args.method.unwrap_or(MethodArg::Am);
    let rule = args.rule.unwrap_or(Rule::Sum);
    let alloc = args.alloc.unwrap_or(AllocArg::Random);
    let strategy = match alloc {
        AllocArg::Random => {
            if args.max_class_size.is_some() {
                bail!("--max-class-size applies to greedy allocation");
            }
            Allocation::Random
        }
        AllocArg::Greedy => Allocation::Greedy {
            max_class_size: args.max_class_size,
        },
    };

    let mut base = load_collection(&data, format, args.dim, args.has_header)?;
    if let Some(limit) = args.limit_base {
        base.truncate(limit);
    }
    eprintln!(
        "loaded {} base vector(s) of dimension {} from {}",
        base.len(),
        base.dim(),
        data.display()
    );
    let mut queries = match &args.queries {
        Some(path) => {
            let qformat = args.query_format.unwrap_or(format);
            load_collection(path, qformat, args.dim, args.has_header)?
        }
        None => {
            // Self-query: the base vectors are their own query set.
            load_collection(&data, format, args.dim, args.has_header)?
        }
    };
    if let Some(limit) = args.limit_queries {
        queries.truncate(limit);
    }
    eprintln!("using {} query vector(s)", queries.len());
    if args.preprocess {
        let (b, q) = preprocess(base, queries)?;
        base = b;
        queries = q;
        eprintln!("centered with the base mean and normalized");
    }
    if base.variant() != queries.variant() {
        bail!(
            "base ({}) and query ({}) collections have different variants",
            base.variant(),
            queries.variant()
        );
    }
    if base.dim() != queries.dim() {
        bail!(
            "base dimension {} does not match query dimension {}",
            base.dim(),
            queries.dim()
        );
    }

    let mut config_line = format!(
        "bench-recall method={} data={} format={}",
        method_name(method),
        data.display(),
        format.name()
    );
    match &args.queries {
        Some(path) => {
            let _ = write!(config_line, " queries={}", path.display());
            if let Some(qf) = args.query_format {
                let _ = write!(config_line, " query-format={}", qf.name());
            }
        }
        None => {
            let _ = write!(config_line, " queries=self");
        }
    }
    if let Some(dim) = args.dim {
        let _ = write!(config_line, " dim={dim}");
    }
    if args.has_header {
        let _ = write!(config_line, " has-header=true");
    }
    if let Some(l) = args.limit_base {
        let _ = write!(config_line, " limit-base={l}");
    }
    if let Some(l) = args.limit_queries {
        let _ = write!(config_line, " limit-queries={l}");
    }
    if args.preprocess {
        let _ = write!(config_line, " preprocess=true");
    }
    if let Some(q) = args.q {
        let _ = write!(config_line, " q={q}");
    }
    if matches!(method, MethodArg::Am | MethodArg::Hybrid) {
        let _ = write!(
            config_line,
            " alloc={}",
            match alloc {
                AllocArg::Random => "random".to_string(),
                AllocArg::Greedy => match args.max_class_size {
                    Some(cap) => format!("greedy(max-class-size={cap})"),
                    None => "greedy".to_string(),
                },
            }
        );
        let _ = write!(config_line, " rule={rule}");
    }
    if let Some(ps) = &args.p {
        let _ = write!(config_line, " p={}", join_list(ps));
    }
    if let Some(r) = args.r {
        let _ = write!(config_line, " r={r}");
    }
    if let Some(a) = &args.a {
        let _ = write!(config_line, " a={}", join_list(a));
    }
    let _ = write!(config_line, " seed={seed}");
    if let Some(path) = &config_path {
        let _ = write!(config_line, " config-file={}", path.display());
    }

    let plan = RecallPlan {
        method,
        q: args.q,
        strategy,
        rule,
        ps: args.p,
        r: args.r,
        a_values: args.a,
        seed,
    };
    let rows = match (base, queries) {
        (Collection::Sparse(b), Collection::Sparse(q)) => recall_rows(&b, &q, &plan)?,
        (Collection::Dense(b), Collection::Dense(q)) => recall_rows(&b, &q, &plan)?,
        (Collection::Real(b), Collection::Real(q)) => recall_rows(&b, &q, &plan)?,
        _ => unreachable!("variant equality checked above"),
    };

    let provenance = Provenance {
        tool: TOOL_VERSION.to_string(),
        revision: REVISION.to_string(),
        seed,
        config: config_line,
        timestamp: timestamp(deterministic),
    };
    emit(args.out.as_deref(), &provenance, &rows)
}

fn method_name(method: MethodArg) -> &'static str {
    match method {
        MethodArg::Am => "am",
        MethodArg::Rs => "rs",
        MethodArg::Hybrid => "hybrid",
    }
}

fn recall_rows<P: Pattern>(
    base: &[P],
    queries: &[P],
    plan: &RecallPlan,
) -> anyhow::Result<Vec<CsvRow>> {
    eprintln!("computing exhaustive ground truth...");
    let truth = ground_truth(base, queries)?;

    let dim = base[0].dim();
    let shared = CsvRow {
        metric_name: "recall_at_1".to_string(),
        method: method_name(plan.method).to_string(),
        variant: P::VARIANT.to_string(),
        d: Some(dim),
        trials: Some(queries.len() as u64),
        seed: Some(plan.seed),
        ..CsvRow::default()
    };

    match plan.method {
        MethodArg::Am => {
            let q = required(plan.q, "q")?;
            let ps = required(plan.ps.clone(), "p")?;
            eprintln!("allocating {q} class(es) and building memories...");
            let classes = allocate(base, q, plan.strategy, plan.rule, plan.seed)?;
            let index = build_index(base, &classes, plan.rule)?;
            eprintln!("sweeping {} probe count(s)...", ps.len());
            let curve = am_recall_curve(&index, base, queries, &truth, &ps)?;
            Ok(curve
                .iter()
                .map(|pt| {
                    let mut row = am_point_row(pt, &shared);
                    row.q = Some(q);
                    row.rule = Some(plan.rule.to_string());
                    row.p = Some(pt.param);
                    row
                })
                .collect())
        }
        MethodArg::Rs => {
            if plan.q.is_some() {
                bail!("--q applies to am and hybrid methods");
            }
            let r = required(plan.r, "r")?;
            let a_values = required(plan.a_values.clone(), "a")?;
            eprintln!("sampling {r} anchor(s) and attaching...");
            let index = rs_build(base, r, plan.seed)?;
            eprintln!("sweeping {} probed-anchor count(s)...", a_values.len());
            let curve = rs_recall_curve(&index, base, queries, &truth, &a_values)?;
            Ok(curve
                .iter()
                .map(|pt| {
                    let mut row = am_point_row(pt, &shared);
                    row.r = Some(r);
                    row.a = Some(pt.param as f64);
                    row
                })
                .collect())
        }
        MethodArg::Hybrid => {
            let q = required(plan.q, "q")?;
            let r = required(plan.r, "r")?;
            let ps = required(plan.ps.clone(), "p")?;
            let a_values = required(plan.a_values.clone(), "a")?;
            let pairs: Vec<(usize, usize)> = ps
                .iter()
                .flat_map(|&p| a_values.iter().map(move |&a| (p, a)))
                .collect();
            eprintln!("building the two-stage index (q={q}, r={r} per class)...");
            let index = hybrid_build(base, q, plan.strategy, plan.rule, r, plan.seed)?;
            eprintln!("sweeping {} (p, a) pair(s)...", pairs.len());
            let curve = hybrid_recall_curve(&index, base, queries, &truth, &pairs)?;
            Ok(curve
                .iter()
                .map(|pt| hybrid_point_row(pt, &shared, q, r, plan.rule))
                .collect())
        }
    }
}

fn am_point_row(pt: &RecallPoint, shared: &CsvRow) -> CsvRow {
    CsvRow {
        sweep_value: pt.relative_complexity,
        metric: pt.recall,
        stderr: Some(binomial_stderr(pt.recall, pt.queries as u64)),
        op_count: Some(pt.mean_op_count),
        ..shared.clone()
    }
}

fn hybrid_point_row(
    pt: &HybridRecallPoint,
    shared: &CsvRow,
    q: usize,
    r: usize,
    rule: Rule,
) -> CsvRow {
    CsvRow {
        sweep_value: pt.relative_complexity,
        metric: pt.recall,
        stderr: Some(binomial_stderr(pt.recall, pt.queries as u64)),
        op_count: Some(pt.mean_op_count),
        q: Some(q),
        p: Some(pt.p),
        r: Some(r),
        a: Some(pt.a as f64),
        rule: Some(rule.to_string()),
        ..shared.clone()
    }
}
