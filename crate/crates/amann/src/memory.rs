//! Associative memories and quadratic class scoring.
//!
//! A class of stored patterns is summarized by a single `d × d` matrix
//! `W = Σ_μ x^μ (x^μ)ᵀ` (sum rule) or its entrywise binarization
//! (cooccurrence/max rule, sparse binary data only). A query is scored
//! against the whole class at once via the quadratic form `xᵀ W x`, which for
//! the sum rule equals `Σ_μ (x · x^μ)²` — a fact [`score_oracle`] exploits to
//! provide an independent correctness check computed straight from the
//! patterns.
//!
//! Cells are integers for sparse/dense data, so scores are exact and
//! independent of evaluation order; real-valued data uses f64 cells with a
//! fixed row-major summation order.

use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pattern::{Pattern, ScoreValue};

/// Memory accumulation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    /// Cells accumulate outer products by addition.
    Sum,
    /// Cells hold the entrywise maximum (binary OR for 0/1 data). Defined for
    /// sparse binary patterns only.
    Max,
}

impl Rule {
    pub(crate) fn code(self) -> u8 {
        match self {
            Rule::Sum => 0,
            Rule::Max => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Rule> {
        match code {
            0 => Some(Rule::Sum),
            1 => Some(Rule::Max),
            _ => None,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Sum => "sum",
            Rule::Max => "max",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Rule> {
        match s {
            "sum" => Ok(Rule::Sum),
            "max" => Ok(Rule::Max),
            other => Err(Error::param(format!("unknown rule '{other}'"))),
        }
    }
}

/// Score of one class for one query, as produced by ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore<S: ScoreValue> {
    pub class_id: usize,
    pub value: S,
}

/// Ranking order: score descending, ties broken by ascending class id.
pub fn ranking_order<S: ScoreValue>(a: &ClassScore<S>, b: &ClassScore<S>) -> std::cmp::Ordering {
    b.value
        .total_cmp(&a.value)
        .then_with(|| a.class_id.cmp(&b.class_id))
}

/// One class's associative memory: a full symmetric `d × d` cell array plus
/// the accumulation rule and the number of absorbed patterns.
///
/// The full (not triangular) layout keeps the quadratic form branch-free; at
/// `d²` cells per class the memory cost is the method's price of admission.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryMatrix<P: Pattern> {
    dim: usize,
    rule: Rule,
    cells: Vec<P::Score>,
    stored_count: usize,
    _family: PhantomData<fn() -> P>,
}

impl<P: Pattern> MemoryMatrix<P> {
    /// Creates an empty memory. Fails when the rule is undefined for the
    /// pattern family (max rule on dense/real data).
    pub fn new(dim: usize, rule: Rule) -> Result<MemoryMatrix<P>> {
        if dim == 0 {
            return Err(Error::param("memory dimension must be positive"));
        }
        if rule == Rule::Max && !P::MAX_RULE {
            return Err(Error::UnsupportedRule {
                rule,
                variant: P::VARIANT,
            });
        }
        Ok(MemoryMatrix {
            dim,
            rule,
            cells: vec![P::Score::ZERO; dim * dim],
            stored_count: 0,
            _family: PhantomData,
        })
    }

    /// Absorbs one pattern. Incremental absorption is exactly equivalent to
    /// batch construction.
    pub fn absorb(&mut self, pattern: &P) -> Result<()> {
        if pattern.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: pattern.dim(),
            });
        }
        match self.rule {
            Rule::Sum => pattern.add_outer_product(self.dim, &mut self.cells),
            Rule::Max => pattern.max_outer_product(self.dim, &mut self.cells),
        }
        self.stored_count += 1;
        Ok(())
    }

    /// Quadratic form `xᵀ W x`. Sparse queries touch only the `c̃ × c̃` active
    /// submatrix (cost `c̃²`); dense/real queries cost `d²`. Under the sum
    /// rule this equals `Σ_μ (x · x^μ)²` exactly.
    pub fn score(&self, query: &P) -> Result<P::Score> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        Ok(query.quadratic_form(self.dim, &self.cells))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn stored_count(&self) -> usize {
        self.stored_count
    }

    /// Row-major cell array, `dim²` entries.
    pub fn cells(&self) -> &[P::Score] {
        &self.cells
    }

    pub(crate) fn from_raw(
        dim: usize,
        rule: Rule,
        cells: Vec<P::Score>,
        stored_count: usize,
    ) -> Result<MemoryMatrix<P>> {
        if rule == Rule::Max && !P::MAX_RULE {
            return Err(Error::UnsupportedRule {
                rule,
                variant: P::VARIANT,
            });
        }
        if cells.len() != dim * dim {
            return Err(Error::param("cell array length does not match dimension"));
        }
        Ok(MemoryMatrix {
            dim,
            rule,
            cells,
            stored_count,
            _family: PhantomData,
        })
    }
}

/// Builds a memory from a nonempty pattern slice. (For empty classes, create
/// via [`MemoryMatrix::new`] with an explicit dimension.)
pub fn build_memory<P: Pattern>(patterns: &[P], rule: Rule) -> Result<MemoryMatrix<P>> {
    let first = patterns
        .first()
        .ok_or_else(|| Error::param("cannot infer dimension from an empty pattern list"))?;
    let mut mem = MemoryMatrix::new(first.dim(), rule)?;
    for p in patterns {
        mem.absorb(p)?;
    }
    Ok(mem)
}

/// Sum-rule score computed directly from the patterns, `Σ_μ (x · x^μ)²`,
/// bypassing the matrix entirely. Serves as the independent oracle for
/// [`MemoryMatrix::score`].
pub fn score_oracle<P: Pattern>(patterns: &[P], query: &P) -> Result<P::Score> {
    let mut acc = P::Score::ZERO;
    for p in patterns {
        acc = acc.add(query.dot(p)?.square());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{
        gen_dense_patterns, gen_sparse_patterns, DensePattern, GeneratorConfig, RealPattern,
        SparsePattern,
    };

    fn sparse(dim: usize, active: &[u32]) -> SparsePattern {
        SparsePattern::new(dim, active.to_vec()).unwrap()
    }

    #[test]
    fn sum_rule_single_outer_product() {
        let mem = build_memory(&[sparse(3, &[1, 2])], Rule::Sum).unwrap();
        let expect = [0, 0, 0, 0, 1, 1, 0, 1, 1];
        assert_eq!(mem.cells(), &expect);
        assert_eq!(mem.stored_count(), 1);
    }

    #[test]
    fn sum_rule_two_patterns() {
        let mem = build_memory(&[sparse(3, &[0, 1]), sparse(3, &[1, 2])], Rule::Sum).unwrap();
        // Cell (1,1) is touched by both patterns; the eight other touched
        // cells accumulate once each.
        let expect = [1, 1, 0, 1, 2, 1, 0, 1, 1];
        assert_eq!(mem.cells(), &expect);
    }

    #[test]
    fn max_rule_two_patterns() {
        let mem = build_memory(&[sparse(3, &[0, 1]), sparse(3, &[1, 2])], Rule::Max).unwrap();
        let expect = [1, 1, 0, 1, 1, 1, 0, 1, 1];
        assert_eq!(mem.cells(), &expect);
        assert!(mem.cells().iter().all(|&c| c == 0 || c == 1));
    }

    #[test]
    fn max_rule_rejected_for_dense_and_real() {
        assert!(matches!(
            MemoryMatrix::<DensePattern>::new(4, Rule::Max),
            Err(Error::UnsupportedRule { .. })
        ));
        assert!(matches!(
            MemoryMatrix::<RealPattern>::new(4, Rule::Max),
            Err(Error::UnsupportedRule { .. })
        ));
    }

    #[test]
    fn self_query_scores_squared_self_similarity() {
        let p = sparse(8, &[1, 4, 6]);
        let mem = build_memory(std::slice::from_ref(&p), Rule::Sum).unwrap();
        assert_eq!(mem.score(&p).unwrap(), 9);

        let d = DensePattern::from_signs(&[1, -1, -1, 1]).unwrap();
        let mem = build_memory(std::slice::from_ref(&d), Rule::Sum).unwrap();
        assert_eq!(mem.score(&d).unwrap(), 16);
    }

    #[test]
    fn score_matches_oracle_sparse() {
        let cfg = GeneratorConfig {
            dim: 8,
            ones_mean: 3,
            count: 4,
            seed: 42,
        };
        let pats = gen_sparse_patterns(&cfg).unwrap();
        let (class, query) = pats.split_at(3);
        let mem = build_memory(class, Rule::Sum).unwrap();
        assert_eq!(
            mem.score(&query[0]).unwrap(),
            score_oracle(class, &query[0]).unwrap()
        );
    }

    #[test]
    fn score_matches_oracle_dense() {
        let cfg = GeneratorConfig {
            dim: 16,
            ones_mean: 1,
            count: 6,
            seed: 43,
        };
        let pats = gen_dense_patterns(&cfg).unwrap();
        let (class, query) = pats.split_at(5);
        let mem = build_memory(class, Rule::Sum).unwrap();
        assert_eq!(
            mem.score(&query[0]).unwrap(),
            score_oracle(class, &query[0]).unwrap()
        );
    }

    #[test]
    fn real_score_matches_oracle_within_tolerance() {
        // Hand-rolled deterministic real vectors, unit-normalized.
        let mut vectors = Vec::new();
        for s in 0..6u64 {
            let entries: Vec<f64> = (0..12)
                .map(|i| ((s * 31 + i * 17) % 23) as f64 / 23.0 - 0.5)
                .collect();
            let norm = entries.iter().map(|e| e * e).sum::<f64>().sqrt();
            vectors.push(RealPattern::new(entries.iter().map(|e| e / norm).collect()).unwrap());
        }
        let (class, query) = vectors.split_at(5);
        let mem = build_memory(class, Rule::Sum).unwrap();
        let fast = mem.score(&query[0]).unwrap();
        let oracle = score_oracle(class, &query[0]).unwrap();
        assert!(
            (fast - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
            "fast {fast} vs oracle {oracle}"
        );
    }

    #[test]
    fn incremental_build_equals_batch() {
        let cfg = GeneratorConfig {
            dim: 12,
            ones_mean: 4,
            count: 5,
            seed: 44,
        };
        let pats = gen_sparse_patterns(&cfg).unwrap();
        let batch = build_memory(&pats, Rule::Sum).unwrap();
        let mut inc = MemoryMatrix::new(12, Rule::Sum).unwrap();
        for p in &pats {
            inc.absorb(p).unwrap();
        }
        assert_eq!(batch, inc);
    }

    #[test]
    fn host_class_score_bounded_below_by_self_similarity_squared() {
        let cfg = GeneratorConfig {
            dim: 16,
            ones_mean: 4,
            count: 6,
            seed: 45,
        };
        let pats = gen_sparse_patterns(&cfg).unwrap();
        let mem = build_memory(&pats, Rule::Sum).unwrap();
        for p in &pats {
            let floor = (p.active_count() * p.active_count()) as i64;
            assert!(mem.score(p).unwrap() >= floor);
        }
    }

    #[test]
    fn max_score_never_exceeds_sum_score() {
        let cfg = GeneratorConfig {
            dim: 24,
            ones_mean: 5,
            count: 8,
            seed: 46,
        };
        let pats = gen_sparse_patterns(&cfg).unwrap();
        let (class, queries) = pats.split_at(6);
        let sum = build_memory(class, Rule::Sum).unwrap();
        let max = build_memory(class, Rule::Max).unwrap();
        for q in queries {
            assert!(max.score(q).unwrap() <= sum.score(q).unwrap());
        }
    }

    #[test]
    fn empty_class_scores_zero() {
        let q = sparse(6, &[0, 3]);
        assert_eq!(score_oracle::<SparsePattern>(&[], &q).unwrap(), 0);
        let mem = MemoryMatrix::<SparsePattern>::new(6, Rule::Sum).unwrap();
        assert_eq!(mem.score(&q).unwrap(), 0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut mem = MemoryMatrix::<SparsePattern>::new(6, Rule::Sum).unwrap();
        assert!(mem.absorb(&sparse(5, &[0])).is_err());
        assert!(mem.score(&sparse(7, &[0])).is_err());
        assert!(score_oracle(&[sparse(6, &[1])], &sparse(7, &[0])).is_err());
    }

    #[test]
    fn cells_are_symmetric() {
        let cfg = GeneratorConfig {
            dim: 10,
            ones_mean: 3,
            count: 7,
            seed: 47,
        };
        let mem = build_memory(&gen_sparse_patterns(&cfg).unwrap(), Rule::Sum).unwrap();
        for l in 0..10 {
            for m in 0..10 {
                assert_eq!(mem.cells()[l * 10 + m], mem.cells()[m * 10 + l]);
            }
        }
    }

    #[test]
    fn dense_sum_diagonal_counts_patterns() {
        let cfg = GeneratorConfig {
            dim: 9,
            ones_mean: 1,
            count: 5,
            seed: 48,
        };
        let mem = build_memory(&gen_dense_patterns(&cfg).unwrap(), Rule::Sum).unwrap();
        for l in 0..9 {
            assert_eq!(mem.cells()[l * 9 + l], 5);
        }
    }
}
