//! Class allocation, the top-p search pipeline, and the elementary-operation
//! cost model.
//!
//! A [`PartitionedIndex`] splits `n` stored patterns into `q` disjoint
//! classes, each summarized by one [`MemoryMatrix`]. A query is answered in
//! two stages: every class is scored through its memory (cost `d²·q`, or
//! `c̃²·q` for sparse queries), then the members of the `p` best-scoring
//! classes are scanned exhaustively (cost `d` or `c̃` per member). Op counts
//! follow that model exactly; sorting the `q` scores is not charged.
//!
//! Ties are broken the same way everywhere in the crate: equal class scores
//! rank the lower class id first, equal similarities return the lower stored
//! id.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::memory::{ranking_order, ClassScore, MemoryMatrix, Rule};
use crate::pattern::{stream_rng, Pattern, ScoreValue, Variant};

/// Allocation strategy, for callers that defer the choice (CLI, hybrid
/// builds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    Random,
    Greedy { max_class_size: Option<usize> },
}

/// Cuts a uniformly random permutation of `0..n` into `q` contiguous blocks.
/// When `q` does not divide `n`, the first `n mod q` classes take one extra
/// element.
pub fn allocate_random(n: usize, q: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    validate_counts(n, q)?;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut stream_rng(seed, 0));
    let base = n / q;
    let extra = n % q;
    let mut classes = Vec::with_capacity(q);
    let mut start = 0;
    for i in 0..q {
        let size = base + usize::from(i < extra);
        classes.push(ids[start..start + size].to_vec());
        start += size;
    }
    Ok(classes)
}

/// Greedy allocation: `q` seed patterns are drawn without replacement, then
/// every remaining pattern (in input order) joins the class maximizing
/// `score / current class size`, with the class memory updated after each
/// assignment. Scoring uses the caller's memory rule — the same one the
/// final index will be built with.
///
/// `max_class_size` optionally caps class growth; uncapped greedy can
/// degenerate into one giant class on strongly clustered data.
pub fn allocate_greedy<P: Pattern>(
    patterns: &[P],
    q: usize,
    rule: Rule,
    seed: u64,
    max_class_size: Option<usize>,
) -> Result<Vec<Vec<usize>>> {
    let n = patterns.len();
    validate_counts(n, q)?;
    if let Some(cap) = max_class_size {
        if cap == 0 || cap.saturating_mul(q) < n {
            return Err(Error::param(format!(
                "max class size {cap} cannot hold {n} patterns in {q} classes"
            )));
        }
    }
    let dim = patterns[0].dim();
    let mut rng = stream_rng(seed, 0);
    let seeds: Vec<usize> = rand::seq::index::sample(&mut rng, n, q).into_iter().collect();

    let mut classes: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    let mut memories: Vec<MemoryMatrix<P>> = Vec::with_capacity(q);
    for &s in &seeds {
        let mut mem = MemoryMatrix::new(dim, rule)?;
        mem.absorb(&patterns[s])?;
        memories.push(mem);
    }

    let mut is_seed = vec![false; n];
    for &s in &seeds {
        is_seed[s] = true;
    }

    for id in (0..n).filter(|&id| !is_seed[id]) {
        let x = &patterns[id];
        let mut best: Option<(usize, f64)> = None;
        for (i, mem) in memories.iter().enumerate() {
            if max_class_size.is_some_and(|cap| classes[i].len() >= cap) {
                continue;
            }
            let normalized = mem.score(x)?.as_f64() / classes[i].len() as f64;
            // Strict comparison keeps the lowest class index on ties.
            if best.is_none_or(|(_, b)| normalized > b) {
                best = Some((i, normalized));
            }
        }
        let (winner, _) = best.expect("at least one class below the size cap");
        classes[winner].push(id);
        memories[winner].absorb(x)?;
    }
    Ok(classes)
}

fn validate_counts(n: usize, q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::param("class count must be at least 1"));
    }
    if n < q {
        return Err(Error::param(format!(
            "cannot split {n} patterns into {q} nonempty classes"
        )));
    }
    Ok(())
}

/// Runs the configured allocation strategy.
pub fn allocate<P: Pattern>(
    patterns: &[P],
    q: usize,
    strategy: Allocation,
    rule: Rule,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    match strategy {
        Allocation::Random => allocate_random(patterns.len(), q, seed),
        Allocation::Greedy { max_class_size } => {
            allocate_greedy(patterns, q, rule, seed, max_class_size)
        }
    }
}

/// `n` patterns partitioned into `q` classes, one associative memory per
/// class.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedIndex<P: Pattern> {
    dim: usize,
    rule: Rule,
    classes: Vec<Vec<usize>>,
    memories: Vec<MemoryMatrix<P>>,
    n: usize,
}

/// Builds an index from an explicit allocation (as produced by
/// [`allocate_random`] / [`allocate_greedy`]). The allocation must be a
/// partition of `0..patterns.len()`.
pub fn build_index<P: Pattern>(
    patterns: &[P],
    allocation: &[Vec<usize>],
    rule: Rule,
) -> Result<PartitionedIndex<P>> {
    let n = patterns.len();
    let first = patterns
        .first()
        .ok_or_else(|| Error::param("cannot build an index over zero patterns"))?;
    let dim = first.dim();
    validate_partition(allocation, n)?;

    // Classes build independently; assembly order is fixed by collect.
    let memories: Vec<MemoryMatrix<P>> = allocation
        .par_iter()
        .map(|members| {
            let mut mem = MemoryMatrix::new(dim, rule)?;
            for &id in members {
                mem.absorb(&patterns[id])?;
            }
            Ok(mem)
        })
        .collect::<Result<_>>()?;

    Ok(PartitionedIndex {
        dim,
        rule,
        classes: allocation.to_vec(),
        memories,
        n,
    })
}

pub(crate) fn validate_partition(allocation: &[Vec<usize>], n: usize) -> Result<()> {
    if allocation.is_empty() {
        return Err(Error::param("allocation must contain at least one class"));
    }
    let mut seen = vec![false; n];
    let mut covered = 0usize;
    for class in allocation {
        for &id in class {
            if id >= n {
                return Err(Error::param(format!("member id {id} out of range (n={n})")));
            }
            if seen[id] {
                return Err(Error::param(format!("member id {id} assigned twice")));
            }
            seen[id] = true;
            covered += 1;
        }
    }
    if covered != n {
        return Err(Error::param(format!(
            "allocation covers {covered} of {n} ids"
        )));
    }
    Ok(())
}

/// Outcome of one top-p query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult<S: ScoreValue> {
    /// All `q` class scores, best first (ties: lower class id first).
    pub ranking: Vec<ClassScore<S>>,
    /// The first `p` class ids of the ranking — the classes that were
    /// scanned.
    pub probed_classes: Vec<usize>,
    pub nn_id: usize,
    pub nn_similarity: S,
    pub op_count: u64,
}

impl<P: Pattern> PartitionedIndex<P> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn q(&self) -> usize {
        self.classes.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn memories(&self) -> &[MemoryMatrix<P>] {
        &self.memories
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub(crate) fn from_parts(
        dim: usize,
        rule: Rule,
        classes: Vec<Vec<usize>>,
        memories: Vec<MemoryMatrix<P>>,
        n: usize,
    ) -> Result<PartitionedIndex<P>> {
        validate_partition(&classes, n)?;
        if memories.len() != classes.len() {
            return Err(Error::param("one memory required per class"));
        }
        for (mem, class) in memories.iter().zip(&classes) {
            if mem.dim() != dim || mem.rule() != rule {
                return Err(Error::param("memory metadata does not match index header"));
            }
            if mem.stored_count() != class.len() {
                return Err(Error::param(
                    "memory stored count does not match class size",
                ));
            }
        }
        Ok(PartitionedIndex {
            dim,
            rule,
            classes,
            memories,
            n,
        })
    }

    /// Scores the query against every class memory and returns all `q`
    /// scores, best first.
    pub fn rank_classes(&self, query: &P) -> Result<Vec<ClassScore<P::Score>>> {
        let mut ranking = Vec::with_capacity(self.memories.len());
        for (class_id, mem) in self.memories.iter().enumerate() {
            ranking.push(ClassScore {
                class_id,
                value: mem.score(query)?,
            });
        }
        ranking.sort_unstable_by(ranking_order);
        Ok(ranking)
    }

    /// Full pipeline: rank classes, scan the members of the `p` best ones,
    /// return the most similar member. `patterns` must be the collection the
    /// index was built over.
    pub fn search_top_p(
        &self,
        patterns: &[P],
        query: &P,
        p: usize,
    ) -> Result<QueryResult<P::Score>> {
        if p == 0 || p > self.q() {
            return Err(Error::param(format!(
                "probe count must satisfy 1 <= p <= q={}, got {p}",
                self.q()
            )));
        }
        if patterns.len() != self.n {
            return Err(Error::param(format!(
                "index stores {} patterns but {} were supplied",
                self.n,
                patterns.len()
            )));
        }
        let ranking = self.rank_classes(query)?;
        let probed_classes: Vec<usize> = ranking[..p].iter().map(|s| s.class_id).collect();

        let unit = query.dot_cost();
        let mut op_count = unit * unit * self.q() as u64;
        let mut best: Option<(usize, P::Score)> = None;
        for &cid in &probed_classes {
            op_count += unit * self.classes[cid].len() as u64;
            for &id in &self.classes[cid] {
                let s = query.dot_unchecked(&patterns[id]);
                let better = match best {
                    None => true,
                    Some((bid, bs)) => match s.total_cmp(&bs) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Equal => id < bid,
                        std::cmp::Ordering::Less => false,
                    },
                };
                if better {
                    best = Some((id, s));
                }
            }
        }
        let (nn_id, nn_similarity) =
            best.ok_or_else(|| Error::param("probed classes contain no members"))?;
        Ok(QueryResult {
            ranking,
            probed_classes,
            nn_id,
            nn_similarity,
            op_count,
        })
    }
}

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

/// Closed-form elementary-operation counts for one query.
///
/// `class_sizes` holds the sizes of the `p` classes that are actually probed
/// (when classes are unequal, reports should average the resulting counts
/// over queries).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub d: usize,
    /// Query weight for sparse data; `None` for dense/real.
    pub c: Option<usize>,
    pub q: usize,
    pub p: usize,
    pub class_sizes: Vec<usize>,
}

impl CostModel {
    /// Filter stage plus probe stage: `u²·q + u·Σ class_sizes`, where the
    /// unit `u` is `c` for sparse queries and `d` otherwise.
    pub fn search_ops(&self, variant: Variant) -> Result<u64> {
        if self.d == 0 || self.q == 0 || self.p == 0 {
            return Err(Error::param("cost model fields must be positive"));
        }
        if self.p > self.q {
            return Err(Error::param(format!(
                "p={} exceeds q={}",
                self.p, self.q
            )));
        }
        if self.class_sizes.len() != self.p {
            return Err(Error::param(format!(
                "expected {} probed class sizes, got {}",
                self.p,
                self.class_sizes.len()
            )));
        }
        let unit = self.unit(variant)?;
        let probed: u64 = self.class_sizes.iter().map(|&s| s as u64).sum();
        Ok(unit * unit * self.q as u64 + unit * probed)
    }

    /// Exhaustive-search reference for `n` stored patterns: `d·n` (sparse:
    /// `c·n`).
    pub fn exhaustive_ops(&self, variant: Variant, n: usize) -> Result<u64> {
        Ok(self.unit(variant)? * n as u64)
    }

    fn unit(&self, variant: Variant) -> Result<u64> {
        match variant {
            Variant::Sparse => match self.c {
                Some(c) if c > 0 => Ok(c as u64),
                _ => Err(Error::param("sparse cost model requires a positive c")),
            },
            Variant::Dense | Variant::Real => Ok(self.d as u64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::exhaustive_search;
    use crate::pattern::{
        gen_dense_patterns, gen_sparse_patterns, DensePattern, GeneratorConfig, SparsePattern,
    };

    fn sparse(dim: usize, active: &[u32]) -> SparsePattern {
        SparsePattern::new(dim, active.to_vec()).unwrap()
    }

    fn dense_cfg(dim: usize, count: usize, seed: u64) -> Vec<DensePattern> {
        gen_dense_patterns(&GeneratorConfig {
            dim,
            ones_mean: 1,
            count,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn random_allocation_splits_evenly() {
        let classes = allocate_random(6, 3, 1).unwrap();
        assert_eq!(classes.iter().map(Vec::len).collect::<Vec<_>>(), [2, 2, 2]);
        let mut all: Vec<usize> = classes.concat();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn random_allocation_spreads_remainder_first() {
        let classes = allocate_random(7, 3, 1).unwrap();
        assert_eq!(classes.iter().map(Vec::len).collect::<Vec<_>>(), [3, 2, 2]);
    }

    #[test]
    fn random_allocation_is_deterministic() {
        assert_eq!(allocate_random(20, 4, 9).unwrap(), allocate_random(20, 4, 9).unwrap());
        assert!(allocate_random(3, 4, 0).is_err());
        assert!(allocate_random(3, 0, 0).is_err());
    }

    #[test]
    fn greedy_duplicate_joins_its_twin_class() {
        // p2 = p0 and p2 ⟂ p1: whichever class seeds with p0 must win p2.
        let patterns = vec![sparse(8, &[0, 1]), sparse(8, &[4, 5]), sparse(8, &[0, 1])];
        let classes = allocate_greedy(&patterns, 2, Rule::Sum, 3, None).unwrap();
        let host = classes.iter().position(|c| c.contains(&0)).unwrap();
        assert!(classes[host].contains(&2), "duplicate assigned to {classes:?}");
        let other = 1 - host;
        assert_eq!(classes[other].len(), 1);
    }

    #[test]
    fn greedy_all_zero_scores_fall_to_first_class() {
        // Remaining pattern orthogonal to both seeds: tie at 0 → class 0.
        let patterns = vec![sparse(9, &[0]), sparse(9, &[3]), sparse(9, &[6])];
        for seed in 0..8 {
            let classes = allocate_greedy(&patterns, 2, Rule::Sum, seed, None).unwrap();
            let seeds: Vec<usize> = classes.iter().map(|c| c[0]).collect();
            let rest: Vec<usize> = (0..3).filter(|id| !seeds.contains(id)).collect();
            assert_eq!(rest.len(), 1);
            assert!(classes[0].contains(&rest[0]));
        }
    }

    #[test]
    fn greedy_respects_size_cap_and_partitions() {
        let pats = gen_sparse_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 4,
            count: 21,
            seed: 5,
        })
        .unwrap();
        let classes = allocate_greedy(&pats, 3, Rule::Sum, 11, Some(8)).unwrap();
        assert!(classes.iter().all(|c| c.len() <= 8));
        let mut all: Vec<usize> = classes.concat();
        all.sort_unstable();
        assert_eq!(all, (0..21).collect::<Vec<_>>());
        // Cap too small to hold everything is rejected up front.
        assert!(allocate_greedy(&pats, 3, Rule::Sum, 11, Some(6)).is_err());
    }

    #[test]
    fn build_index_populates_class_memories() {
        let pats = dense_cfg(16, 4, 7);
        let idx = build_index(&pats, &allocate_random(4, 2, 1).unwrap(), Rule::Sum).unwrap();
        assert_eq!(idx.q(), 2);
        assert_eq!(idx.n(), 4);
        assert!(idx.memories().iter().all(|m| m.stored_count() == 2));

        let whole = build_index(&pats, &allocate_random(4, 1, 1).unwrap(), Rule::Sum).unwrap();
        assert_eq!(whole.q(), 1);
        assert_eq!(whole.classes()[0].len(), 4);
    }

    #[test]
    fn build_index_rejects_non_partitions() {
        let pats = dense_cfg(8, 4, 3);
        assert!(build_index(&pats, &[vec![0, 1], vec![1, 2, 3]], Rule::Sum).is_err());
        assert!(build_index(&pats, &[vec![0, 1], vec![2]], Rule::Sum).is_err());
        assert!(build_index(&pats, &[vec![0, 1], vec![2, 4]], Rule::Sum).is_err());
        assert!(build_index::<DensePattern>(&[], &[vec![]], Rule::Sum).is_err());
    }

    #[test]
    fn ranking_orders_by_score_then_class_id() {
        // Two identical classes → equal scores → class 0 first.
        let pats = vec![
            sparse(8, &[1, 2]),
            sparse(8, &[5, 6]),
            sparse(8, &[1, 2]),
            sparse(8, &[5, 6]),
        ];
        let idx = build_index(&pats, &[vec![0, 1], vec![2, 3]], Rule::Sum).unwrap();
        let ranking = idx.rank_classes(&sparse(8, &[1, 2])).unwrap();
        assert_eq!(ranking[0].class_id, 0);
        assert_eq!(ranking[0].value, ranking[1].value);

        let single = build_index(&pats, &[vec![0, 1, 2, 3]], Rule::Sum).unwrap();
        assert_eq!(single.rank_classes(&pats[0]).unwrap().len(), 1);
    }

    #[test]
    fn self_query_host_class_meets_lower_bound() {
        let pats = dense_cfg(16, 12, 9);
        let idx = build_index(&pats, &allocate_random(12, 3, 2).unwrap(), Rule::Sum).unwrap();
        for (cid, class) in idx.classes().iter().enumerate() {
            for &id in class {
                let ranking = idx.rank_classes(&pats[id]).unwrap();
                let host = ranking.iter().find(|s| s.class_id == cid).unwrap();
                assert!(host.value >= 16 * 16);
            }
        }
    }

    #[test]
    fn full_probe_matches_exhaustive_search() {
        let pats = dense_cfg(32, 40, 13);
        let idx = build_index(&pats, &allocate_random(40, 5, 3).unwrap(), Rule::Sum).unwrap();
        let queries = dense_cfg(32, 10, 14);
        for query in &queries {
            let full = idx.search_top_p(&pats, query, 5).unwrap();
            let (nn, sim) = exhaustive_search(&pats, query).unwrap();
            assert_eq!((full.nn_id, full.nn_similarity), (nn, sim));
        }
    }

    #[test]
    fn self_query_finds_itself_when_host_probed() {
        let pats = dense_cfg(24, 12, 21);
        let idx = build_index(&pats, &allocate_random(12, 3, 4).unwrap(), Rule::Sum).unwrap();
        for (cid, class) in idx.classes().iter().enumerate() {
            for &id in class {
                let res = idx.search_top_p(&pats, &pats[id], idx.q()).unwrap();
                assert_eq!(res.nn_id, id);
                assert_eq!(res.nn_similarity, 24);
                assert!(res.probed_classes.contains(&cid));
            }
        }
    }

    #[test]
    fn recall_is_monotone_in_probe_count() {
        let pats = gen_sparse_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 5,
            count: 200,
            seed: 31,
        })
        .unwrap();
        let idx = build_index(&pats, &allocate_random(200, 10, 6).unwrap(), Rule::Sum).unwrap();
        let queries = gen_sparse_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 5,
            count: 40,
            seed: 32,
        })
        .unwrap();
        let truth: Vec<usize> = queries
            .iter()
            .map(|q| exhaustive_search(&pats, q).unwrap().0)
            .collect();
        let mut last = 0usize;
        for p in 1..=10 {
            let hits = queries
                .iter()
                .zip(&truth)
                .filter(|(q, &t)| idx.search_top_p(&pats, q, p).unwrap().nn_id == t)
                .count();
            assert!(hits >= last, "recall dropped from {last} to {hits} at p={p}");
            last = hits;
        }
        assert_eq!(last, queries.len(), "full probe must recover every query");
    }

    #[test]
    fn scaling_every_score_preserves_ranking_order() {
        let scores = vec![
            ClassScore { class_id: 0, value: 0.25f64 },
            ClassScore { class_id: 1, value: 1.5 },
            ClassScore { class_id: 2, value: 0.25 },
            ClassScore { class_id: 3, value: 0.75 },
        ];
        let order = |list: &[ClassScore<f64>]| {
            let mut v = list.to_vec();
            v.sort_unstable_by(ranking_order);
            v.iter().map(|s| s.class_id).collect::<Vec<_>>()
        };
        let scaled: Vec<ClassScore<f64>> = scores
            .iter()
            .map(|s| ClassScore { class_id: s.class_id, value: s.value * 7.25 })
            .collect();
        assert_eq!(order(&scores), order(&scaled));
        assert_eq!(order(&scores), vec![1, 3, 0, 2]);
    }

    #[test]
    fn cost_model_worked_examples() {
        let cm = CostModel {
            d: 128,
            c: None,
            q: 10,
            p: 2,
            class_sizes: vec![100, 100],
        };
        assert_eq!(cm.search_ops(Variant::Dense).unwrap(), 189_440);
        assert_eq!(cm.exhaustive_ops(Variant::Dense, 16384).unwrap(), 2_097_152);

        let cm = CostModel {
            d: 128,
            c: Some(8),
            q: 10,
            p: 1,
            class_sizes: vec![64],
        };
        assert_eq!(cm.search_ops(Variant::Sparse).unwrap(), 1_152);
    }

    #[test]
    fn cost_model_validates_fields() {
        let cm = CostModel {
            d: 8,
            c: None,
            q: 2,
            p: 3,
            class_sizes: vec![1, 1, 1],
        };
        assert!(cm.search_ops(Variant::Dense).is_err());
        let cm = CostModel {
            d: 8,
            c: None,
            q: 4,
            p: 2,
            class_sizes: vec![1],
        };
        assert!(cm.search_ops(Variant::Dense).is_err());
        let cm = CostModel {
            d: 8,
            c: None,
            q: 4,
            p: 1,
            class_sizes: vec![2],
        };
        assert!(cm.search_ops(Variant::Sparse).is_err());
    }

    #[test]
    fn search_op_count_matches_cost_model_on_equal_classes() {
        let pats = dense_cfg(16, 40, 17);
        let idx = build_index(&pats, &allocate_random(40, 4, 5).unwrap(), Rule::Sum).unwrap();
        let query = &dense_cfg(16, 1, 18)[0];
        for p in 1..=4 {
            let res = idx.search_top_p(&pats, query, p).unwrap();
            let cm = CostModel {
                d: 16,
                c: None,
                q: 4,
                p,
                class_sizes: vec![10; p],
            };
            assert_eq!(res.op_count, cm.search_ops(Variant::Dense).unwrap());
        }
    }

    #[test]
    fn probe_count_out_of_range_is_rejected() {
        let pats = dense_cfg(8, 6, 19);
        let idx = build_index(&pats, &allocate_random(6, 2, 1).unwrap(), Rule::Sum).unwrap();
        assert!(idx.search_top_p(&pats, &pats[0], 0).is_err());
        assert!(idx.search_top_p(&pats, &pats[0], 3).is_err());
        assert!(idx.search_top_p(&pats[..4], &pats[0], 1).is_err());
    }
}
