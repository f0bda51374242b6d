//! The `gen`, `build`, `query`, and `inspect` subcommands.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use amann::baselines::{hybrid_build, rs_build, rs_search, hybrid_search};
use amann::datasets::{write_ivecs, write_sparse_csv};
use amann::index::{allocate, build_index, Allocation};
use amann::memory::Rule;
use amann::pattern::{gen_dense_patterns, gen_sparse_patterns, GeneratorConfig, Pattern};
use amann::storage::{
    peek_header, read_anchor, read_hybrid, read_partitioned, write_anchor, write_hybrid,
    write_partitioned, IndexKind,
};

use crate::bench_cmd::{AllocArg, MethodArg};
use crate::cfgfile::ConfigFile;
use crate::data::{load_collection, preprocess, preprocess_base, Collection, FileFormat, SynthVariant};
use crate::required;

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub(crate) struct GenArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Data variant: sparse (written as 0/1 csv) or dense (written as ±1
    /// ivecs).
    #[arg(long)]
    variant: Option<SynthVariant>,

    /// Pattern dimension.
    #[arg(long)]
    d: Option<usize>,

    /// Mean active coordinates per sparse pattern.
    #[arg(long)]
    c: Option<usize>,

    /// Number of patterns to generate.
    #[arg(long)]
    count: Option<usize>,

    /// RNG seed (required).
    #[arg(long)]
    seed: Option<u64>,

    /// Output file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub(crate) fn run_gen(mut args: GenArgs) -> anyhow::Result<()> {
    if let Some(path) = args.config.take() {
        let cfg = ConfigFile::load(&path)?;
        cfg.fill_parsed(&mut args.variant, "variant")?;
        cfg.fill_usize(&mut args.d, "d")?;
        cfg.fill_usize(&mut args.c, "c")?;
        cfg.fill_usize(&mut args.count, "count")?;
        cfg.fill_u64(&mut args.seed, "seed")?;
        cfg.fill_parsed(&mut args.out, "out")?;
        cfg.finish()?;
    }
    let variant = required(args.variant, "variant")?;
    let dim = required(args.d, "d")?;
    let count = required(args.count, "count")?;
    let seed = required(args.seed, "seed")?;
    let out = required(args.out, "out")?;

    match variant {
        SynthVariant::Sparse => {
            let ones_mean = required(args.c, "c")?;
            let cfg = GeneratorConfig {
                dim,
                ones_mean,
                count,
                seed,
            };
            let patterns = gen_sparse_patterns(&cfg)?;
            write_sparse_csv(&out, &patterns)?;
        }
        SynthVariant::Dense => {
            if args.c.is_some() {
                bail!("--c applies to sparse data");
            }
            let cfg = GeneratorConfig {
                dim,
                ones_mean: 0,
                count,
                seed,
            };
            let patterns = gen_dense_patterns(&cfg)?;
            let rows: Vec<Vec<i32>> = patterns
                .iter()
                .map(|p| p.to_signs().iter().map(|&s| i32::from(s)).collect())
                .collect();
            write_ivecs(&out, &rows)?;
        }
    }
    eprintln!(
        "wrote {count} {} vector(s) of dimension {dim} to {}",
        variant.variant(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub(crate) struct BuildArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Collection file to index.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,

    /// File format: fvecs, bvecs, ivecs, csv, or mnist.
    #[arg(long)]
    format: Option<FileFormat>,

    /// Column count for csv collections.
    #[arg(long)]
    dim: Option<usize>,

    /// Skip the first line of csv collections.
    #[arg(long)]
    has_header: bool,

    /// Keep only the first N vectors.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,

    /// Center with the collection mean and normalize (real-valued data).
    #[arg(long)]
    preprocess: bool,

    /// Index kind: am (default), rs, or hybrid.
    #[arg(long)]
    kind: Option<MethodArg>,

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

    /// Anchor count (rs: total; hybrid: per class).
    #[arg(long)]
    r: Option<usize>,

    /// RNG seed (required; drives allocation and anchor choice).
    #[arg(long)]
    seed: Option<u64>,

    /// Output index file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

pub(crate) fn run_build(mut args: BuildArgs) -> anyhow::Result<()> {
    if let Some(path) = args.config.take() {
        let cfg = ConfigFile::load(&path)?;
        cfg.fill_parsed(&mut args.data, "data")?;
        cfg.fill_parsed(&mut args.format, "format")?;
        cfg.fill_usize(&mut args.dim, "dim")?;
        cfg.fill_flag(&mut args.has_header, "has-header")?;
        cfg.fill_usize(&mut args.limit, "limit")?;
        cfg.fill_flag(&mut args.preprocess, "preprocess")?;
        cfg.fill_parsed(&mut args.kind, "kind")?;
        cfg.fill_usize(&mut args.q, "q")?;
        cfg.fill_parsed(&mut args.alloc, "alloc")?;
        cfg.fill_usize(&mut args.max_class_size, "max-class-size")?;
        cfg.fill_parsed(&mut args.rule, "rule")?;
        cfg.fill_usize(&mut args.r, "r")?;
        cfg.fill_u64(&mut args.seed, "seed")?;
        cfg.fill_parsed(&mut args.out, "out")?;
        cfg.finish()?;
    }
    let data = required(args.data, "data")?;
    let format = required(args.format, "format")?;
    let seed = required(args.seed, "seed")?;
    let out = required(args.out, "out")?;
    let kind = args.kind.unwrap_or(MethodArg::Am);
    let rule = args.rule.unwrap_or(Rule::Sum);
    let strategy = match args.alloc.unwrap_or(AllocArg::Random) {
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

    let mut collection = load_collection(&data, format, args.dim, args.has_header)?;
    if let Some(limit) = args.limit {
        collection.truncate(limit);
    }
    if args.preprocess {
        collection = preprocess_base(collection)?;
    }
    eprintln!(
        "indexing {} vector(s) of dimension {}",
        collection.len(),
        collection.dim()
    );

    match collection {
        Collection::Sparse(p) => build_typed(&p, kind, args.q, strategy, rule, args.r, seed, &out),
        Collection::Dense(p) => build_typed(&p, kind, args.q, strategy, rule, args.r, seed, &out),
        Collection::Real(p) => build_typed(&p, kind, args.q, strategy, rule, args.r, seed, &out),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_typed<P: Pattern>(
    patterns: &[P],
    kind: MethodArg,
    q: Option<usize>,
    strategy: Allocation,
    rule: Rule,
    r: Option<usize>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let n = patterns.len();
    let dim = patterns[0].dim();
    match kind {
        MethodArg::Am => {
            if r.is_some() {
                bail!("--r applies to rs and hybrid indexes");
            }
            let q = required(q, "q")?;
            let classes = allocate(patterns, q, strategy, rule, seed)?;
            let idx = build_index(patterns, &classes, rule)?;
            write_partitioned(out, &idx)?;
            eprintln!(
                "wrote partitioned index ({q} class(es), {n} vector(s)) to {}",
                out.display()
            );
        }
        MethodArg::Rs => {
            if q.is_some() {
                bail!("--q applies to am and hybrid indexes");
            }
            let r = required(r, "r")?;
            let idx = rs_build(patterns, r, seed)?;
            write_anchor(out, &idx, P::VARIANT, dim, n)?;
            eprintln!(
                "wrote anchor index ({r} anchor(s), {n} vector(s)) to {}",
                out.display()
            );
        }
        MethodArg::Hybrid => {
            let q = required(q, "q")?;
            let r = required(r, "r")?;
            let idx = hybrid_build(patterns, q, strategy, rule, r, seed)?;
            write_hybrid(out, &idx)?;
            eprintln!(
                "wrote hybrid index ({q} class(es), {r} anchor(s) each, {n} vector(s)) to {}",
                out.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub(crate) struct QueryArgs {
    /// TOML file supplying any of the other flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Index file produced by `build`.
    #[arg(long, value_name = "FILE")]
    index: Option<PathBuf>,

    /// The collection the index was built from (same file and ordering).
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

    /// Keep only the first N base vectors (match the build invocation).
    #[arg(long, value_name = "N")]
    limit: Option<usize>,

    /// Center with the base mean and normalize (match the build invocation).
    #[arg(long)]
    preprocess: bool,

    /// Query file (default: the base collection queries itself).
    #[arg(long, value_name = "FILE")]
    queries: Option<PathBuf>,

    /// Query file format (default: same as --format).
    #[arg(long)]
    query_format: Option<FileFormat>,

    /// Classes to probe (partitioned and hybrid indexes).
    #[arg(long)]
    p: Option<usize>,

    /// Anchors to probe (anchor and hybrid indexes).
    #[arg(long)]
    a: Option<usize>,

    /// Output CSV path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

struct QueryRow {
    nn_id: usize,
    similarity: String,
    op_count: u64,
}

pub(crate) fn run_query(mut args: QueryArgs) -> anyhow::Result<()> {
    if let Some(path) = args.config.take() {
        let cfg = ConfigFile::load(&path)?;
        cfg.fill_parsed(&mut args.index, "index")?;
        cfg.fill_parsed(&mut args.data, "data")?;
        cfg.fill_parsed(&mut args.format, "format")?;
        cfg.fill_usize(&mut args.dim, "dim")?;
        cfg.fill_flag(&mut args.has_header, "has-header")?;
        cfg.fill_usize(&mut args.limit, "limit")?;
        cfg.fill_flag(&mut args.preprocess, "preprocess")?;
        cfg.fill_parsed(&mut args.queries, "queries")?;
        cfg.fill_parsed(&mut args.query_format, "query-format")?;
        cfg.fill_usize(&mut args.p, "p")?;
        cfg.fill_usize(&mut args.a, "a")?;
        cfg.fill_parsed(&mut args.out, "out")?;
        cfg.finish()?;
    }
    let index = required(args.index, "index")?;
    let data = required(args.data, "data")?;
    let format = required(args.format, "format")?;

    let header = peek_header(&index)?;
    let mut base = load_collection(&data, format, args.dim, args.has_header)?;
    if let Some(limit) = args.limit {
        base.truncate(limit);
    }
    let mut queries = match &args.queries {
        Some(path) => {
            let qformat = args.query_format.unwrap_or(format);
            load_collection(path, qformat, args.dim, args.has_header)?
        }
        None => load_collection(&data, format, args.dim, args.has_header)?,
    };
    if args.preprocess {
        let (b, q) = preprocess(base, queries)?;
        base = b;
        queries = q;
    }

    if base.variant() != header.variant {
        bail!(
            "index holds {} data but {} is {}",
            header.variant,
            data.display(),
            base.variant()
        );
    }
    if base.dim() != header.dim {
        bail!(
            "index dimension {} does not match collection dimension {}",
            header.dim,
            base.dim()
        );
    }
    if base.len() != header.n {
        bail!(
            "index covers {} vector(s) but the collection has {} — pass the file the index was built from (and the same --limit)",
            header.n,
            base.len()
        );
    }
    if queries.variant() != base.variant() || queries.dim() != base.dim() {
        bail!("query collection does not match the base variant/dimension");
    }

    let rows = match (base, queries) {
        (Collection::Sparse(b), Collection::Sparse(q)) => {
            query_typed(&index, header.kind, &b, &q, args.p, args.a)?
        }
        (Collection::Dense(b), Collection::Dense(q)) => {
            query_typed(&index, header.kind, &b, &q, args.p, args.a)?
        }
        (Collection::Real(b), Collection::Real(q)) => {
            query_typed(&index, header.kind, &b, &q, args.p, args.a)?
        }
        _ => unreachable!("variant equality checked above"),
    };

    let mut text = String::from("query,nn_id,similarity,op_count\n");
    for (i, row) in rows.iter().enumerate() {
        text.push_str(&format!(
            "{i},{},{},{}\n",
            row.nn_id, row.similarity, row.op_count
        ));
    }
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            );
            w.write_all(text.as_bytes())?;
            w.flush()?;
            eprintln!("wrote {} result row(s) to {}", rows.len(), path.display());
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn query_typed<P: Pattern>(
    index: &Path,
    kind: IndexKind,
    base: &[P],
    queries: &[P],
    p: Option<usize>,
    a: Option<usize>,
) -> anyhow::Result<Vec<QueryRow>> {
    match kind {
        IndexKind::Partitioned => {
            if a.is_some() {
                bail!("--a applies to anchor and hybrid indexes");
            }
            let p = required(p, "p")?;
            let idx = read_partitioned::<P>(index)?;
            queries
                .iter()
                .map(|qv| {
                    let res = idx.search_top_p(base, qv, p)?;
                    Ok(QueryRow {
                        nn_id: res.nn_id,
                        similarity: res.nn_similarity.to_string(),
                        op_count: res.op_count,
                    })
                })
                .collect()
        }
        IndexKind::Anchor => {
            if p.is_some() {
                bail!("--p applies to partitioned and hybrid indexes");
            }
            let a = required(a, "a")?;
            let (idx, _) = read_anchor(index)?;
            queries
                .iter()
                .map(|qv| {
                    let res = rs_search(&idx, base, qv, a)?;
                    Ok(QueryRow {
                        nn_id: res.nn_id,
                        similarity: res.similarity.to_string(),
                        op_count: res.op_count,
                    })
                })
                .collect()
        }
        IndexKind::Hybrid => {
            let p = required(p, "p")?;
            let a = required(a, "a")?;
            let idx = read_hybrid::<P>(index)?;
            queries
                .iter()
                .map(|qv| {
                    let res = hybrid_search(&idx, base, qv, p, a)?;
                    Ok(QueryRow {
                        nn_id: res.nn_id,
                        similarity: res.similarity.to_string(),
                        op_count: res.op_count,
                    })
                })
                .collect()
        }
    }
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

#[derive(clap::Args)]
pub(crate) struct InspectArgs {
    /// Index file to describe.
    #[arg(long, value_name = "FILE", conflicts_with = "data")]
    index: Option<PathBuf>,

    /// Collection file to describe.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,

    /// File format for --data.
    #[arg(long)]
    format: Option<FileFormat>,

    /// Column count for csv collections.
    #[arg(long)]
    dim: Option<usize>,

    /// Skip the first line of csv collections.
    #[arg(long)]
    has_header: bool,
}

pub(crate) fn run_inspect(args: InspectArgs) -> anyhow::Result<()> {
    match (&args.index, &args.data) {
        (Some(index), None) => {
            let header = peek_header(index)?;
            println!("kind: {}", header.kind);
            println!("variant: {}", header.variant);
            println!("dim: {}", header.dim);
            println!("vectors: {}", header.n);
            match header.kind {
                IndexKind::Partitioned | IndexKind::Hybrid => {
                    println!("classes: {}", header.q);
                    println!("rule: {}", header.rule);
                }
                IndexKind::Anchor => {
                    let (idx, _) = read_anchor(index)?;
                    println!("anchors: {}", idx.r());
                }
            }
        }
        (None, Some(data)) => {
            let format = required(args.format, "format")?;
            let collection = load_collection(data, format, args.dim, args.has_header)?;
            println!("format: {}", format.name());
            println!("variant: {}", collection.variant());
            println!("dim: {}", collection.dim());
            println!("vectors: {}", collection.len());
        }
        _ => bail!("pass exactly one of --index or --data"),
    }
    Ok(())
}
