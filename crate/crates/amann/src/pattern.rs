//! Pattern representations and synthetic generators.
//!
//! Three vector families are supported:
//!
//! * [`SparsePattern`] — binary vectors given by their sorted active
//!   coordinates; typical for bag-of-features style data where the number of
//!   ones `c̃` is far below the dimension `d`.
//! * [`DensePattern`] — ±1 vectors, stored bit-packed (one sign bit per
//!   coordinate). Dot products reduce to XOR + popcount.
//! * [`RealPattern`] — real-valued vectors, used for datasets that get
//!   centered and projected to the unit sphere before indexing.
//!
//! All generators and corruption models draw from an explicitly seeded
//! ChaCha8 stream, so identical configurations reproduce identical
//! collections across runs, platforms, and thread counts. Nothing in this
//! module calls into platform math routines on the sampling path; the
//! binomial sampler below is built from plain f64 arithmetic for exactly
//! that reason.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pattern family tag. Stored in index files and used by the CLI to pick a
/// concrete pattern type at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Sparse,
    Dense,
    Real,
}

impl Variant {
    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Sparse => 0,
            Variant::Dense => 1,
            Variant::Real => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Variant> {
        match code {
            0 => Some(Variant::Sparse),
            1 => Some(Variant::Dense),
            2 => Some(Variant::Real),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sparse => "sparse",
            Variant::Dense => "dense",
            Variant::Real => "real",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "sparse" => Ok(Variant::Sparse),
            "dense" => Ok(Variant::Dense),
            "real" => Ok(Variant::Real),
            other => Err(Error::param(format!("unknown variant '{other}'"))),
        }
    }
}

/// Scalar type produced by similarity and class scores: `i64` for sparse and
/// dense data (exact arithmetic), `f64` for real-valued data.
pub trait ScoreValue:
    Copy + PartialEq + PartialOrd + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    const ZERO: Self;

    fn add(self, rhs: Self) -> Self;

    fn square(self) -> Self;

    /// Total order used for rankings; for floats this is IEEE `total_cmp`
    /// (loaded data is validated to be finite, so NaN never reaches here).
    fn total_cmp(&self, other: &Self) -> Ordering;

    fn as_f64(self) -> f64;

    fn to_le_bytes(self) -> [u8; 8];
    fn from_le_bytes(bytes: [u8; 8]) -> Self;
}

impl ScoreValue for i64 {
    const ZERO: Self = 0;

    fn add(self, rhs: Self) -> Self {
        self + rhs
    }

    fn square(self) -> Self {
        self * self
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn to_le_bytes(self) -> [u8; 8] {
        i64::to_le_bytes(self)
    }

    fn from_le_bytes(bytes: [u8; 8]) -> Self {
        i64::from_le_bytes(bytes)
    }
}

impl ScoreValue for f64 {
    const ZERO: Self = 0.0;

    fn add(self, rhs: Self) -> Self {
        self + rhs
    }

    fn square(self) -> Self {
        self * self
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        f64::total_cmp(self, other)
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn to_le_bytes(self) -> [u8; 8] {
        f64::to_le_bytes(self)
    }

    fn from_le_bytes(bytes: [u8; 8]) -> Self {
        f64::from_le_bytes(bytes)
    }
}

/// Common interface over the three pattern families.
///
/// Beyond plain similarity ([`Pattern::dot`]), the trait carries the three
/// memory-cell primitives (`add_outer_product`, `max_outer_product`,
/// `quadratic_form`) so that [`crate::memory::MemoryMatrix`] can stay generic
/// while each family keeps its fast path: sparse patterns only ever touch the
/// `c̃ × c̃` submatrix of their active coordinates.
pub trait Pattern: Clone + Send + Sync + 'static {
    type Score: ScoreValue;

    const VARIANT: Variant;

    /// Whether the cooccurrence (max) memory rule is defined for this family.
    const MAX_RULE: bool;

    fn dim(&self) -> usize;

    /// Elementary operations consumed by one similarity evaluation with this
    /// pattern as the query: `c̃` for sparse queries, `d` otherwise. This is
    /// the unit every op count in the crate is expressed in.
    fn dot_cost(&self) -> u64;

    /// Inner product without the dimension check; callers must validate.
    fn dot_unchecked(&self, other: &Self) -> Self::Score;

    fn dot(&self, other: &Self) -> Result<Self::Score> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.dot_unchecked(other))
    }

    fn self_dot(&self) -> Self::Score {
        self.dot_unchecked(self)
    }

    /// `cells[l][m] += x_l · x_m` for the full outer product (sum rule).
    fn add_outer_product(&self, dim: usize, cells: &mut [Self::Score]);

    /// `cells[l][m] = max(cells[l][m], x_l · x_m)` — only meaningful for
    /// binary patterns; guarded by [`Pattern::MAX_RULE`].
    fn max_outer_product(&self, dim: usize, cells: &mut [Self::Score]);

    /// Quadratic form `xᵀ W x` over a row-major `dim × dim` cell array.
    fn quadratic_form(&self, dim: usize, cells: &[Self::Score]) -> Self::Score;
}

// ---------------------------------------------------------------------------
// Sparse patterns
// ---------------------------------------------------------------------------

/// Binary vector stored as the sorted list of its active coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    dim: usize,
    active: Vec<u32>,
}

impl SparsePattern {
    /// Builds a pattern from a (not necessarily sorted) list of active
    /// coordinates. Rejects out-of-range and duplicate indices.
    pub fn new(dim: usize, mut active: Vec<u32>) -> Result<SparsePattern> {
        if dim == 0 {
            return Err(Error::param("pattern dimension must be positive"));
        }
        if dim > u32::MAX as usize {
            return Err(Error::param("sparse dimension exceeds u32 range"));
        }
        active.sort_unstable();
        if let Some(&last) = active.last() {
            if last as usize >= dim {
                return Err(Error::param(format!(
                    "active index {last} out of range for dimension {dim}"
                )));
            }
        }
        if active.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("duplicate active index"));
        }
        Ok(SparsePattern { dim, active })
    }

    pub fn active(&self) -> &[u32] {
        &self.active
    }

    /// Number of ones, written `c̃` throughout the crate.
    pub fn active_count(&self) -> usize {
        self.active.len()
    }
}

impl Pattern for SparsePattern {
    type Score = i64;

    const VARIANT: Variant = Variant::Sparse;
    const MAX_RULE: bool = true;

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot_cost(&self) -> u64 {
        self.active.len() as u64
    }

    fn dot_unchecked(&self, other: &Self) -> i64 {
        // Sorted-merge intersection count.
        let (a, b) = (&self.active, &other.active);
        let (mut i, mut j, mut acc) = (0usize, 0usize, 0i64);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    fn add_outer_product(&self, dim: usize, cells: &mut [i64]) {
        for &a in &self.active {
            let base = a as usize * dim;
            for &b in &self.active {
                cells[base + b as usize] += 1;
            }
        }
    }

    fn max_outer_product(&self, dim: usize, cells: &mut [i64]) {
        for &a in &self.active {
            let base = a as usize * dim;
            for &b in &self.active {
                cells[base + b as usize] = 1;
            }
        }
    }

    fn quadratic_form(&self, dim: usize, cells: &[i64]) -> i64 {
        // Only the active × active submatrix can contribute: cost c̃².
        let mut acc = 0i64;
        for &a in &self.active {
            let base = a as usize * dim;
            for &b in &self.active {
                acc += cells[base + b as usize];
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Dense ±1 patterns
// ---------------------------------------------------------------------------

/// ±1 vector, bit-packed: bit set ⇒ +1, bit clear ⇒ −1. Padding bits past
/// `dim` are kept at zero so whole-word operations stay well-defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensePattern {
    dim: usize,
    words: Vec<u64>,
}

fn words_for(dim: usize) -> usize {
    dim.div_ceil(64)
}

fn tail_mask(dim: usize) -> u64 {
    if dim.is_multiple_of(64) {
        !0
    } else {
        (1u64 << (dim % 64)) - 1
    }
}

impl DensePattern {
    pub fn from_signs(signs: &[i8]) -> Result<DensePattern> {
        if signs.is_empty() {
            return Err(Error::param("pattern dimension must be positive"));
        }
        let mut words = vec![0u64; words_for(signs.len())];
        for (i, &s) in signs.iter().enumerate() {
            match s {
                1 => words[i / 64] |= 1u64 << (i % 64),
                -1 => {}
                other => {
                    return Err(Error::param(format!(
                        "dense entry must be +1 or -1, got {other}"
                    )))
                }
            }
        }
        Ok(DensePattern {
            dim: signs.len(),
            words,
        })
    }

    pub(crate) fn from_words(dim: usize, words: Vec<u64>) -> Result<DensePattern> {
        if dim == 0 {
            return Err(Error::param("pattern dimension must be positive"));
        }
        if words.len() != words_for(dim) {
            return Err(Error::param("dense word count does not match dimension"));
        }
        if let Some(&last) = words.last() {
            if last & !tail_mask(dim) != 0 {
                return Err(Error::param("dense padding bits must be zero"));
            }
        }
        Ok(DensePattern { dim, words })
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Entry at coordinate `i` as +1 / −1.
    pub fn sign(&self, i: usize) -> i8 {
        debug_assert!(i < self.dim);
        if self.words[i / 64] >> (i % 64) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.dim).map(|i| self.sign(i)).collect()
    }

    fn toggle(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub(crate) fn sample<R: RngCore>(dim: usize, rng: &mut R) -> DensePattern {
        let mut words = vec![0u64; words_for(dim)];
        fill_dense_words(dim, rng, &mut words);
        DensePattern { dim, words }
    }
}

/// Fills `words` with uniform sign bits for a `dim`-coordinate pattern,
/// zeroing the padding bits.
pub(crate) fn fill_dense_words<R: RngCore>(dim: usize, rng: &mut R, words: &mut [u64]) {
    for w in words.iter_mut() {
        *w = rng.next_u64();
    }
    if let Some(last) = words.last_mut() {
        *last &= tail_mask(dim);
    }
}

/// Dot product of two bit-packed sign vectors: `d − 2·hamming`.
pub(crate) fn dense_dot_words(dim: usize, a: &[u64], b: &[u64]) -> i64 {
    let mut hamming = 0u64;
    for (x, y) in a.iter().zip(b) {
        hamming += (x ^ y).count_ones() as u64;
    }
    dim as i64 - 2 * hamming as i64
}

impl Pattern for DensePattern {
    type Score = i64;

    const VARIANT: Variant = Variant::Dense;
    const MAX_RULE: bool = false;

    fn dim(&self) -> usize {
        self.dim
    }

    fn dot_cost(&self) -> u64 {
        self.dim as u64
    }

    fn dot_unchecked(&self, other: &Self) -> i64 {
        dense_dot_words(self.dim, &self.words, &other.words)
    }

    fn add_outer_product(&self, dim: usize, cells: &mut [i64]) {
        let signs: Vec<i64> = (0..dim).map(|i| self.sign(i) as i64).collect();
        for (l, &sl) in signs.iter().enumerate() {
            let row = &mut cells[l * dim..(l + 1) * dim];
            for (cell, &sm) in row.iter_mut().zip(&signs) {
                *cell += sl * sm;
            }
        }
    }

    fn max_outer_product(&self, _dim: usize, _cells: &mut [i64]) {
        unreachable!("max rule is rejected for dense patterns at memory construction")
    }

    fn quadratic_form(&self, dim: usize, cells: &[i64]) -> i64 {
        let signs: Vec<i64> = (0..dim).map(|i| self.sign(i) as i64).collect();
        let mut acc = 0i64;
        for (l, &sl) in signs.iter().enumerate() {
            let row = &cells[l * dim..(l + 1) * dim];
            let mut t = 0i64;
            for (&cell, &sm) in row.iter().zip(&signs) {
                t += cell * sm;
            }
            acc += sl * t;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Real-valued patterns
// ---------------------------------------------------------------------------

/// Real vector; after dataset preprocessing these are unit-norm, which makes
/// maximum dot product equivalent to minimum Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPattern {
    entries: Vec<f64>,
}

impl RealPattern {
    pub fn new(entries: Vec<f64>) -> Result<RealPattern> {
        if entries.is_empty() {
            return Err(Error::param("pattern dimension must be positive"));
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("real pattern entries must be finite"));
        }
        Ok(RealPattern { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

impl Pattern for RealPattern {
    type Score = f64;

    const VARIANT: Variant = Variant::Real;
    const MAX_RULE: bool = false;

    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn dot_cost(&self) -> u64 {
        self.entries.len() as u64
    }

    fn dot_unchecked(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn add_outer_product(&self, dim: usize, cells: &mut [f64]) {
        for (l, &el) in self.entries.iter().enumerate() {
            let row = &mut cells[l * dim..(l + 1) * dim];
            for (cell, &em) in row.iter_mut().zip(&self.entries) {
                *cell += el * em;
            }
        }
    }

    fn max_outer_product(&self, _dim: usize, _cells: &mut [f64]) {
        unreachable!("max rule is rejected for real patterns at memory construction")
    }

    /// Row-major accumulation: `Σ_l x_l (Σ_m W[l][m] x_m)`, inner sum first.
    /// The order is fixed so scores are bit-reproducible run to run.
    fn quadratic_form(&self, dim: usize, cells: &[f64]) -> f64 {
        let mut acc = 0.0f64;
        for (l, &el) in self.entries.iter().enumerate() {
            let row = &cells[l * dim..(l + 1) * dim];
            let mut t = 0.0f64;
            for (&cell, &em) in row.iter().zip(&self.entries) {
                t += cell * em;
            }
            acc += el * t;
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Parameters for synthetic pattern generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub dim: usize,
    /// Mean number of ones `c` for sparse generation (each coordinate is
    /// active independently with probability `c/d`). Ignored by the dense
    /// generator.
    pub ones_mean: usize,
    pub count: usize,
    pub seed: u64,
}

/// ChaCha8 stream keyed by `(seed, stream)`. Every randomized computation in
/// the crate derives its generator through this function, which is what makes
/// parallel Monte-Carlo runs independent of scheduling: each trial reads only
/// streams derived from its own coordinates, never a shared generator.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `cfg.count` sparse patterns with i.i.d. Bernoulli(c/d)
/// coordinates.
pub fn gen_sparse_patterns(cfg: &GeneratorConfig) -> Result<Vec<SparsePattern>> {
    let sampler = SparseSampler::new(cfg.dim, cfg.ones_mean)?;
    if cfg.count == 0 {
        return Err(Error::param("pattern count must be at least 1"));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut scratch = Vec::new();
    Ok((0..cfg.count)
        .map(|_| {
            sampler.sample_active_into(&mut rng, &mut scratch);
            let mut active = scratch.clone();
            active.sort_unstable();
            SparsePattern {
                dim: cfg.dim,
                active,
            }
        })
        .collect())
}

/// Generates `cfg.count` dense patterns with i.i.d. uniform ±1 coordinates.
pub fn gen_dense_patterns(cfg: &GeneratorConfig) -> Result<Vec<DensePattern>> {
    if cfg.dim == 0 {
        return Err(Error::param("pattern dimension must be positive"));
    }
    if cfg.count == 0 {
        return Err(Error::param("pattern count must be at least 1"));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    Ok((0..cfg.count)
        .map(|_| DensePattern::sample(cfg.dim, &mut rng))
        .collect())
}

/// `round()` with ties-to-even, returning a count.
pub(crate) fn round_half_even(x: f64) -> usize {
    x.round_ties_even() as usize
}

/// Flips exactly `round((1−α)·d/2)` uniformly chosen coordinates, so the
/// overlap with the original is `d − 2·flips ≈ α·d`.
pub fn corrupt_dense(x: &DensePattern, alpha: f64, seed: u64) -> Result<DensePattern> {
    let mut rng = stream_rng(seed, 0);
    corrupt_dense_with(x, alpha, &mut rng)
}

pub(crate) fn corrupt_dense_with<R: RngCore>(
    x: &DensePattern,
    alpha: f64,
    rng: &mut R,
) -> Result<DensePattern> {
    check_alpha(alpha)?;
    let flips = round_half_even((1.0 - alpha) * x.dim as f64 / 2.0);
    let mut out = x.clone();
    for i in rand::seq::index::sample(rng, x.dim, flips) {
        out.toggle(i);
    }
    Ok(out)
}

/// Keeps `m = round(α·c̃)` of the active coordinates and relocates the other
/// `c̃ − m` to uniformly chosen previously inactive positions. The result has
/// the same number of ones and overlap exactly `m` with the original.
pub fn corrupt_sparse(x: &SparsePattern, alpha: f64, seed: u64) -> Result<SparsePattern> {
    let mut rng = stream_rng(seed, 0);
    corrupt_sparse_with(x, alpha, &mut rng)
}

pub(crate) fn corrupt_sparse_with<R: RngCore>(
    x: &SparsePattern,
    alpha: f64,
    rng: &mut R,
) -> Result<SparsePattern> {
    check_alpha(alpha)?;
    let c = x.active.len();
    if c == 0 {
        return Err(Error::param("cannot corrupt a pattern with no active coordinates"));
    }
    let keep = round_half_even(alpha * c as f64);
    let moved = c - keep;
    let inactive = x.dim - c;
    if moved > inactive {
        return Err(Error::param(format!(
            "insufficient inactive positions: need {moved}, have {inactive}"
        )));
    }

    let mut active: Vec<u32> = rand::seq::index::sample(rng, c, keep)
        .iter()
        .map(|i| x.active[i])
        .collect();
    if moved > 0 {
        // Map draws over [0, d−c) to the sorted list of inactive coordinates.
        let mut inactive_coords = Vec::with_capacity(inactive);
        let mut next = 0u32;
        for &a in &x.active {
            inactive_coords.extend(next..a);
            next = a + 1;
        }
        inactive_coords.extend(next..x.dim as u32);
        for i in rand::seq::index::sample(rng, inactive, moved) {
            active.push(inactive_coords[i]);
        }
    }
    active.sort_unstable();
    Ok(SparsePattern {
        dim: x.dim,
        active,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha must lie in [0,1], got {alpha}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Binomial count sampler
// ---------------------------------------------------------------------------

/// Deterministic exponentiation by squaring; fixed multiplication order so
/// results do not depend on compiler or platform.
fn powi_det(base: f64, mut exp: usize) -> f64 {
    let mut acc = 1.0f64;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    // 53 uniform mantissa bits in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Samples the number of ones of a sparse pattern: Binomial(d, c/d).
///
/// Implemented via an explicit CDF table built with the pmf recurrence
/// `p_{k+1} = p_k · (d−k)/(k+1) · p/(1−p)` — additions, multiplications and
/// divisions only, so the table is identical on every platform. When the base
/// probability `(1−p)^d` underflows (astronomically large `c`), the sampler
/// falls back to exact per-coordinate Bernoulli thresholds on raw u64 draws.
enum CountSampler {
    /// c = d: every coordinate active.
    Saturated,
    Table(Vec<f64>),
    PerCoordinate { threshold: u64 },
}

pub(crate) struct SparseSampler {
    dim: usize,
    counts: CountSampler,
}

impl SparseSampler {
    pub(crate) fn new(dim: usize, ones_mean: usize) -> Result<SparseSampler> {
        if dim == 0 {
            return Err(Error::param("pattern dimension must be positive"));
        }
        if dim > u32::MAX as usize {
            return Err(Error::param("sparse dimension exceeds u32 range"));
        }
        if ones_mean == 0 || ones_mean > dim {
            return Err(Error::param(format!(
                "ones mean must satisfy 0 < c <= d, got c={ones_mean}, d={dim}"
            )));
        }
        let counts = if ones_mean == dim {
            CountSampler::Saturated
        } else {
            let p = ones_mean as f64 / dim as f64;
            let ratio = p / (1.0 - p);
            let mut pmf = powi_det(1.0 - p, dim);
            if pmf == 0.0 {
                let threshold = (((ones_mean as u128) << 64) / dim as u128) as u64;
                CountSampler::PerCoordinate { threshold }
            } else {
                let mut cdf = Vec::with_capacity(ones_mean * 4);
                let mut acc = 0.0f64;
                for k in 0..=dim {
                    acc += pmf;
                    cdf.push(acc);
                    if acc >= 1.0 {
                        break;
                    }
                    pmf *= (dim - k) as f64 / (k + 1) as f64 * ratio;
                }
                // Whatever tail mass f64 rounding left over lands on the
                // final entry.
                *cdf.last_mut().unwrap() = f64::INFINITY;
                CountSampler::Table(cdf)
            }
        };
        Ok(SparseSampler { dim, counts })
    }

    #[cfg(test)]
    fn cdf(&self) -> Option<&[f64]> {
        match &self.counts {
            CountSampler::Table(t) => Some(t),
            _ => None,
        }
    }

    fn sample_count<R: RngCore>(&self, rng: &mut R) -> usize {
        match &self.counts {
            CountSampler::Saturated => self.dim,
            CountSampler::Table(cdf) => {
                let u = unit_f64(rng);
                cdf.iter().position(|&edge| u < edge).unwrap_or(cdf.len() - 1)
            }
            CountSampler::PerCoordinate { threshold } => {
                (0..self.dim).filter(|_| rng.next_u64() < *threshold).count()
            }
        }
    }

    /// Draws one pattern into `active` (unsorted). Uses Floyd's algorithm for
    /// the coordinate choice, so no allocation beyond the output buffer.
    pub(crate) fn sample_active_into<R: RngCore>(&self, rng: &mut R, active: &mut Vec<u32>) {
        let count = self.sample_count(rng);
        active.clear();
        for j in (self.dim - count)..self.dim {
            let t = rng.random_range(0..=j as u32);
            if active.contains(&t) {
                active.push(j as u32);
            } else {
                active.push(t);
            }
        }
    }

    /// Draws one pattern and returns its overlap with the query described by
    /// `query_mask` (a `dim`-length membership table). This is the streaming
    /// form used by the Monte-Carlo harness, which never materializes the
    /// database.
    pub(crate) fn sample_overlap_into<R: RngCore>(
        &self,
        rng: &mut R,
        query_mask: &[u8],
        scratch: &mut Vec<u32>,
    ) -> u32 {
        self.sample_active_into(rng, scratch);
        scratch.iter().map(|&i| query_mask[i as usize] as u32).sum()
    }
}
