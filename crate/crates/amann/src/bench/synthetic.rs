//! Monte-Carlo error-rate experiments on synthetic sparse/dense data.
//!
//! Each trial builds a fresh database of `n = k·q` i.i.d. patterns split
//! into `q` classes of `k`, queries with one stored pattern (or its
//! corruption), and records whether the host class fails to win the score
//! ranking. The harness never materializes memories: under the sum rule the
//! class score is the streamed sum of squared query dots, and under the max
//! rule a coverage bitmap over the query's active coordinates accumulates
//! exactly the cells a max-rule memory would activate. Equality of both
//! routes with the matrix pipeline is pinned by tests.
//!
//! # Determinism
//!
//! Every trial draws from RNG streams derived from `(seed, point index,
//! role, trial index)`, where the roles are: 0 — host-class choice; 1 — the
//! database, drawn as the source pattern first and then the remaining
//! `n − 1` patterns in class order (the source occupies slot 0 of the host
//! class); 2 — query corruption. Role separation makes results independent
//! of thread scheduling and lets a corrupted run at α=1 reproduce the exact
//! run trial for trial.
//!
//! An error is recorded when some rival class scores strictly higher than
//! the host class, or ties with it at a lower class index.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bench::CurvePoint;
use crate::error::{Error, Result};
use crate::memory::{build_memory, MemoryMatrix, Rule};
use crate::pattern::{
    corrupt_dense_with, corrupt_sparse_with, dense_dot_words, fill_dense_words, stream_rng,
    DensePattern, Pattern, ScoreValue, SparsePattern, SparseSampler, Variant,
};

// Stream-id layout: | point index (24 bits) | role (8 bits) | trial (32 bits) |
const ROLE_CHOICE: u64 = 0;
const ROLE_DATABASE: u64 = 1;
const ROLE_CORRUPTION: u64 = 2;

pub(crate) fn trial_stream(point: u32, role: u64, trial: u32) -> u64 {
    (u64::from(point) << 40) | (role << 32) | u64::from(trial)
}

/// Parameter grid attached to an experiment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sweep {
    /// Vary the class size `k` at fixed `q`.
    K(Vec<usize>),
    /// Vary the class count `q` at fixed `k`.
    Q(Vec<usize>),
    /// Vary `k` while holding `n = k·q` fixed, so `q = n/k`.
    FixedN { n: usize, ks: Vec<usize> },
    /// Vary the dimension with `k = ⌊d^a⌋` (exponent in tenths, optionally
    /// divided by ten) at `q = 2`; sparse runs take `c = ⌈log2 d⌉`.
    AsymptoticD {
        ds: Vec<usize>,
        a_tenths: u32,
        div_ten: bool,
    },
}

/// A synthetic error-rate experiment. `k`, `q`, `c`, and `d` give the base
/// point; the sweep overrides one of them per measured point. `alpha: None`
/// queries with the stored pattern itself, `Some(α)` with its corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub d: usize,
    /// Mean active count for sparse patterns; unused for dense.
    pub c: usize,
    pub k: usize,
    pub q: usize,
    pub alpha: Option<f64>,
    pub rule: Rule,
    pub trials: u64,
    pub seed: u64,
    /// Keep one database for all trials of a point instead of regenerating
    /// per trial; queries then pick a uniformly random stored pattern. Off
    /// by default — fresh databases match fully independent trials.
    pub reuse_database: bool,
    pub sweep: Sweep,
}

impl ExperimentConfig {
    /// Total stored patterns per trial at the base point.
    pub fn n(&self) -> usize {
        self.k * self.q
    }

    fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::Sparse => {
                if self.c == 0 || self.c > self.d {
                    return Err(Error::param(format!(
                        "sparse experiments need 0 < c <= d, got c={} d={}",
                        self.c, self.d
                    )));
                }
            }
            Variant::Dense => {
                if self.rule == Rule::Max {
                    return Err(Error::UnsupportedRule {
                        rule: self.rule,
                        variant: self.variant,
                    });
                }
            }
            Variant::Real => {
                return Err(Error::param(
                    "synthetic experiments cover the sparse and dense variants",
                ));
            }
        }
        if self.d == 0 || self.k == 0 || self.q == 0 {
            return Err(Error::param("d, k, q must be positive"));
        }
        if self.trials == 0 || self.trials > u64::from(u32::MAX) {
            return Err(Error::param(format!(
                "trials must lie in 1..=2^32-1, got {}",
                self.trials
            )));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::param(format!(
                    "overlap alpha must lie in (0, 1], got {a}"
                )));
            }
        }
        Ok(())
    }
}

/// One measured sweep point with its resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// The swept value (k, q, or d depending on the sweep).
    pub x: f64,
    pub error_rate: f64,
    pub stderr: f64,
    pub errors: u64,
    pub trials: u64,
    pub variant: Variant,
    pub d: usize,
    /// Mean active count used at this point (0 for dense).
    pub c: usize,
    pub k: usize,
    pub q: usize,
    pub alpha: Option<f64>,
    pub rule: Rule,
    pub seed: u64,
}

impl SweepOutcome {
    pub fn curve_point(&self) -> CurvePoint {
        CurvePoint {
            x: self.x,
            y: self.error_rate,
            stderr: self.stderr,
        }
    }
}

/// Exact `k = ⌊d^a⌋` (or `⌊d^a/10⌋`) with the exponent given in tenths.
/// `2a` must be an integer so `d^{2a}` is exact; then `⌊d^a⌋ = isqrt(d^{2a})`
/// with no floating-point boundary cases.
pub fn class_size_for_dimension(d: usize, a_tenths: u32, div_ten: bool) -> Result<usize> {
    if a_tenths == 0 || !a_tenths.is_multiple_of(5) {
        return Err(Error::param(
            "scaling exponent must be a positive multiple of 0.5",
        ));
    }
    if d == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    let two_a = a_tenths / 5;
    let pow = (d as u128)
        .checked_pow(two_a)
        .ok_or_else(|| Error::param("d^(2a) overflows"))?;
    let mut k = pow.isqrt();
    if div_ten {
        k /= 10;
    }
    if k == 0 || k > usize::MAX as u128 {
        return Err(Error::param(format!(
            "class size ⌊{d}^{}⌋{} is out of range",
            a_tenths as f64 / 10.0,
            if div_ten { "/10" } else { "" }
        )));
    }
    Ok(k as usize)
}

fn ceil_log2(d: usize) -> usize {
    debug_assert!(d >= 2);
    (usize::BITS - (d - 1).leading_zeros()) as usize
}

// ---------------------------------------------------------------------------
// Sweep runners
// ---------------------------------------------------------------------------

/// Error rate along a `k` or `q` sweep (the class-size and class-count
/// experiments).
pub fn run_error_rate(cfg: &ExperimentConfig) -> Result<Vec<SweepOutcome>> {
    cfg.validate()?;
    let points: Vec<(usize, usize)> = match &cfg.sweep {
        Sweep::K(ks) => ks.iter().map(|&k| (k, cfg.q)).collect(),
        Sweep::Q(qs) => qs.iter().map(|&q| (cfg.k, q)).collect(),
        _ => {
            return Err(Error::param(
                "run_error_rate expects a k sweep or a q sweep",
            ))
        }
    };
    if points.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    let xs: Vec<f64> = match &cfg.sweep {
        Sweep::K(ks) => ks.iter().map(|&k| k as f64).collect(),
        _ => points.iter().map(|&(_, q)| q as f64).collect(),
    };
    points
        .iter()
        .zip(xs)
        .enumerate()
        .map(|(idx, (&(k, q), x))| measure_point(cfg, idx as u32, x, cfg.d, cfg.c, k, q))
        .collect()
}

/// Error rate as `k` grows while `n = k·q` stays fixed.
pub fn run_fixed_n_tradeoff(cfg: &ExperimentConfig) -> Result<Vec<SweepOutcome>> {
    cfg.validate()?;
    let Sweep::FixedN { n, ks } = &cfg.sweep else {
        return Err(Error::param("run_fixed_n_tradeoff expects a fixed-n sweep"));
    };
    if ks.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    for &k in ks {
        if k == 0 || n % k != 0 {
            return Err(Error::param(format!(
                "class size {k} does not divide the fixed collection size {n}"
            )));
        }
    }
    ks.iter()
        .enumerate()
        .map(|(idx, &k)| measure_point(cfg, idx as u32, k as f64, cfg.d, cfg.c, k, n / k))
        .collect()
}

/// Error rate along a dimension grid with `k = ⌊d^a⌋` (or `⌊d^a/10⌋`) and
/// `q = 2`; sparse points take `c = ⌈log2 d⌉`.
pub fn run_asymptotic(cfg: &ExperimentConfig) -> Result<Vec<SweepOutcome>> {
    let Sweep::AsymptoticD {
        ds,
        a_tenths,
        div_ten,
    } = &cfg.sweep
    else {
        return Err(Error::param("run_asymptotic expects a dimension sweep"));
    };
    if cfg.q != 2 {
        return Err(Error::param(
            "the dimension-scaling experiment is defined at q = 2",
        ));
    }
    if ds.is_empty() {
        return Err(Error::param("sweep grid is empty"));
    }
    if ds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("dimension grid must be strictly ascending"));
    }
    ds.iter()
        .enumerate()
        .map(|(idx, &d)| {
            if d < 2 {
                return Err(Error::param("dimension grid starts at 2"));
            }
            let k = class_size_for_dimension(d, *a_tenths, *div_ten)?;
            let c = match cfg.variant {
                Variant::Sparse => ceil_log2(d),
                _ => cfg.c,
            };
            // Validate the derived point through a config copy.
            let mut point_cfg = cfg.clone();
            point_cfg.d = d;
            point_cfg.c = c;
            point_cfg.k = k;
            point_cfg.validate()?;
            measure_point(cfg, idx as u32, d as f64, d, c, k, 2)
        })
        .collect()
}

fn measure_point(
    cfg: &ExperimentConfig,
    point_idx: u32,
    x: f64,
    d: usize,
    c: usize,
    k: usize,
    q: usize,
) -> Result<SweepOutcome> {
    if k == 0 || q == 0 {
        return Err(Error::param("swept k and q values must be positive"));
    }
    let spec = PointSpec {
        variant: cfg.variant,
        d,
        c,
        k,
        q,
        alpha: cfg.alpha,
        rule: cfg.rule,
        trials: cfg.trials as u32,
        seed: cfg.seed,
        point_idx,
        reuse: cfg.reuse_database,
    };
    let flags = execute_point(&spec)?;
    let errors = flags.iter().filter(|&&e| e).count() as u64;
    let rate = errors as f64 / cfg.trials as f64;
    Ok(SweepOutcome {
        x,
        error_rate: rate,
        stderr: super::binomial_stderr(rate, cfg.trials),
        errors,
        trials: cfg.trials,
        variant: cfg.variant,
        d,
        c: if cfg.variant == Variant::Sparse { c } else { 0 },
        k,
        q,
        alpha: cfg.alpha,
        rule: cfg.rule,
        seed: cfg.seed,
    })
}

/// Per-trial error indicators at the config's base point (the sweep field is
/// ignored). Exposed for consistency tests: a corrupted run at α=1 must
/// produce the same flags as an exact run.
pub fn point_error_flags(cfg: &ExperimentConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    execute_point(&PointSpec {
        variant: cfg.variant,
        d: cfg.d,
        c: cfg.c,
        k: cfg.k,
        q: cfg.q,
        alpha: cfg.alpha,
        rule: cfg.rule,
        trials: cfg.trials as u32,
        seed: cfg.seed,
        point_idx: 0,
        reuse: cfg.reuse_database,
    })
}

#[derive(Debug, Clone, Copy)]
struct PointSpec {
    variant: Variant,
    d: usize,
    c: usize,
    k: usize,
    q: usize,
    alpha: Option<f64>,
    rule: Rule,
    trials: u32,
    seed: u64,
    point_idx: u32,
    reuse: bool,
}

fn execute_point(spec: &PointSpec) -> Result<Vec<bool>> {
    let mut flags = vec![false; spec.trials as usize];
    if spec.reuse {
        reuse_mode(spec, &mut flags)?;
    } else {
        match spec.variant {
            Variant::Sparse => sparse_fresh(spec, &mut flags)?,
            Variant::Dense => dense_fresh(spec, &mut flags)?,
            Variant::Real => unreachable!("validated earlier"),
        }
    }
    Ok(flags)
}

/// Host loses to a rival scoring strictly higher, or tying from a lower
/// class index.
fn is_error<S: ScoreValue>(scores: &[S], host: usize) -> bool {
    scores.iter().enumerate().any(|(i, s)| {
        i != host
            && match s.total_cmp(&scores[host]) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => i < host,
                std::cmp::Ordering::Less => false,
            }
    })
}

// ---------------------------------------------------------------------------
// Fresh-database trials (streamed scoring)
// ---------------------------------------------------------------------------

fn sparse_fresh(spec: &PointSpec, flags: &mut [bool]) -> Result<()> {
    let sampler = SparseSampler::new(spec.d, spec.c)?;
    flags
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(t, slot)| -> Result<()> {
            *slot = sparse_trial(spec, &sampler, t as u32)?;
            Ok(())
        })
}

fn sparse_trial(spec: &PointSpec, sampler: &SparseSampler, trial: u32) -> Result<bool> {
    let mut choice = stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_CHOICE, trial));
    let host: usize = choice.random_range(0..spec.q);

    let mut db = stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_DATABASE, trial));
    let mut src_active = Vec::with_capacity(2 * spec.c);
    sampler.sample_active_into(&mut db, &mut src_active);
    let source = SparsePattern::new(spec.d, src_active)?;
    // A pattern with no active coordinates has nothing to corrupt; the query
    // is the pattern itself.
    let query = match spec.alpha {
        Some(a) if source.active_count() > 0 => {
            let mut cr =
                stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_CORRUPTION, trial));
            corrupt_sparse_with(&source, a, &mut cr)?
        }
        _ => source.clone(),
    };

    let mut scores = vec![0i64; spec.q];
    match spec.rule {
        Rule::Sum => {
            let mut qmask = vec![0u8; spec.d];
            for &i in query.active() {
                qmask[i as usize] = 1;
            }
            let src_dot: i64 = source
                .active()
                .iter()
                .map(|&i| i64::from(qmask[i as usize]))
                .sum();
            let mut scratch = Vec::with_capacity(2 * spec.c);
            for (i, score) in scores.iter_mut().enumerate() {
                let mut s = 0i64;
                for j in 0..spec.k {
                    let dot = if i == host && j == 0 {
                        src_dot
                    } else {
                        i64::from(sampler.sample_overlap_into(&mut db, &qmask, &mut scratch))
                    };
                    s += dot * dot;
                }
                *score = s;
            }
        }
        Rule::Max => {
            // Map coordinate -> position in the query's active list.
            let ctilde = query.active_count();
            let mut qpos = vec![-1i32; spec.d];
            for (p, &i) in query.active().iter().enumerate() {
                qpos[i as usize] = p as i32;
            }
            let mut coverage = CoverageAccumulator::new(ctilde);
            let mut member = Vec::with_capacity(2 * spec.c);
            let mut positions = Vec::with_capacity(ctilde);
            for (i, score) in scores.iter_mut().enumerate() {
                coverage.reset();
                for j in 0..spec.k {
                    let coords: &[u32] = if i == host && j == 0 {
                        source.active()
                    } else {
                        sampler.sample_active_into(&mut db, &mut member);
                        &member
                    };
                    positions.clear();
                    for &coord in coords {
                        let p = qpos[coord as usize];
                        if p >= 0 {
                            positions.push(p as u32);
                        }
                    }
                    coverage.absorb(&positions);
                }
                *score = coverage.score();
            }
        }
    }
    Ok(is_error(&scores, host))
}

fn dense_fresh(spec: &PointSpec, flags: &mut [bool]) -> Result<()> {
    flags
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(t, slot)| -> Result<()> {
            *slot = dense_trial(spec, t as u32)?;
            Ok(())
        })
}

fn dense_trial(spec: &PointSpec, trial: u32) -> Result<bool> {
    let words = spec.d.div_ceil(64);
    let mut choice = stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_CHOICE, trial));
    let host: usize = choice.random_range(0..spec.q);

    let mut db = stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_DATABASE, trial));
    let mut src_words = vec![0u64; words];
    fill_dense_words(spec.d, &mut db, &mut src_words);
    let source = DensePattern::from_words(spec.d, src_words)?;
    let query = match spec.alpha {
        Some(a) => {
            let mut cr =
                stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_CORRUPTION, trial));
            corrupt_dense_with(&source, a, &mut cr)?
        }
        None => source.clone(),
    };

    let qwords = query.words();
    let src_dot = dense_dot_words(spec.d, qwords, source.words());
    let mut buf = vec![0u64; words];
    let mut scores = vec![0i64; spec.q];
    for (i, score) in scores.iter_mut().enumerate() {
        let mut s = 0i64;
        for j in 0..spec.k {
            let dot = if i == host && j == 0 {
                src_dot
            } else {
                fill_dense_words(spec.d, &mut db, &mut buf);
                dense_dot_words(spec.d, qwords, &buf)
            };
            s += dot * dot;
        }
        *score = s;
    }
    Ok(is_error(&scores, host))
}

// ---------------------------------------------------------------------------
// Max-rule streaming score
// ---------------------------------------------------------------------------

/// Streamed max-rule class score. For a query with active positions
/// `0..c̃`, tracks which (i, j) position pairs are co-active in at least one
/// stored pattern; the score is the number of covered pairs, exactly the
/// quadratic form a 0/1 max-combined memory would produce.
pub(crate) struct CoverageAccumulator {
    ctilde: usize,
    words_per_row: usize,
    rows: Vec<u64>,
    mask: Vec<u64>,
}

impl CoverageAccumulator {
    pub(crate) fn new(ctilde: usize) -> CoverageAccumulator {
        let words_per_row = ctilde.div_ceil(64);
        CoverageAccumulator {
            ctilde,
            words_per_row,
            rows: vec![0u64; ctilde * words_per_row],
            mask: vec![0u64; words_per_row],
        }
    }

    pub(crate) fn reset(&mut self) {
        self.rows.fill(0);
    }

    /// Folds in one stored pattern, given as the positions (indices into the
    /// query's active list) where it overlaps the query.
    pub(crate) fn absorb(&mut self, positions: &[u32]) {
        debug_assert!(positions.iter().all(|&p| (p as usize) < self.ctilde));
        self.mask.fill(0);
        for &p in positions {
            self.mask[p as usize / 64] |= 1u64 << (p % 64);
        }
        for &p in positions {
            let row = p as usize * self.words_per_row;
            for (w, &m) in self.rows[row..row + self.words_per_row]
                .iter_mut()
                .zip(&self.mask)
            {
                *w |= m;
            }
        }
    }

    pub(crate) fn score(&self) -> i64 {
        self.rows.iter().map(|w| i64::from(w.count_ones())).sum()
    }
}

// ---------------------------------------------------------------------------
// Reused-database trials (matrix scoring)
// ---------------------------------------------------------------------------

fn reuse_mode(spec: &PointSpec, flags: &mut [bool]) -> Result<()> {
    match spec.variant {
        Variant::Sparse => {
            let sampler = SparseSampler::new(spec.d, spec.c)?;
            let mut rng =
                stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_DATABASE, 0));
            let mut active = Vec::with_capacity(2 * spec.c);
            let patterns: Vec<SparsePattern> = (0..spec.k * spec.q)
                .map(|_| {
                    sampler.sample_active_into(&mut rng, &mut active);
                    SparsePattern::new(spec.d, active.clone())
                })
                .collect::<Result<_>>()?;
            reuse_trials(spec, &patterns, flags, |p, a, rng| {
                if p.active_count() == 0 {
                    Ok(p.clone())
                } else {
                    corrupt_sparse_with(p, a, rng)
                }
            })
        }
        Variant::Dense => {
            let mut rng =
                stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_DATABASE, 0));
            let patterns: Vec<DensePattern> = (0..spec.k * spec.q)
                .map(|_| DensePattern::sample(spec.d, &mut rng))
                .collect();
            reuse_trials(spec, &patterns, flags, corrupt_dense_with)
        }
        Variant::Real => unreachable!("validated earlier"),
    }
}

/// Shared-database trials score through real memory matrices, so this mode
/// doubles as a cross-check of the streamed scorer.
fn reuse_trials<P, F>(spec: &PointSpec, patterns: &[P], flags: &mut [bool], corrupt: F) -> Result<()>
where
    P: Pattern,
    F: Fn(&P, f64, &mut ChaCha8Rng) -> Result<P> + Sync,
{
    let memories: Vec<MemoryMatrix<P>> = (0..spec.q)
        .map(|i| build_memory(&patterns[i * spec.k..(i + 1) * spec.k], spec.rule))
        .collect::<Result<_>>()?;
    flags
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(t, slot)| -> Result<()> {
            let trial = t as u32;
            let mut choice =
                stream_rng(spec.seed, trial_stream(spec.point_idx, ROLE_CHOICE, trial));
            let idx: usize = choice.random_range(0..patterns.len());
            let host = idx / spec.k;
            let source = &patterns[idx];
            let query = match spec.alpha {
                Some(a) => {
                    let mut cr = stream_rng(
                        spec.seed,
                        trial_stream(spec.point_idx, ROLE_CORRUPTION, trial),
                    );
                    corrupt(source, a, &mut cr)?
                }
                None => source.clone(),
            };
            let scores = memories
                .iter()
                .map(|m| m.score(&query))
                .collect::<Result<Vec<_>>>()?;
            *slot = is_error(&scores, host);
            Ok(())
        })
}
