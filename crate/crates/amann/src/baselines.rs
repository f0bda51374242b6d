//! Reference search methods: exhaustive scan, anchor-point random sampling
//! (RS), and the memory-filter + RS hybrid.
//!
//! Exhaustive search is the ground-truth oracle every recall number in the
//! crate is measured against. RS samples `r` anchor elements, attaches every
//! stored pattern to its nearest anchor, and at query time scans the
//! attachment lists of the `a` nearest anchors. The hybrid first ranks
//! classes through their memories, then runs RS independently inside each
//! probed class.
//!
//! Cost accounting matches the partitioned index: one similarity evaluation
//! costs `d` elementary operations (`c̃` for sparse queries).

use crate::error::{Error, Result};
use crate::index::{allocate, build_index, Allocation, PartitionedIndex};
use crate::memory::Rule;
use crate::pattern::{stream_rng, Pattern, ScoreValue};

/// Scans the whole collection and returns `(nn_id, similarity)` — maximum
/// dot product, ties resolved to the lowest id. For unit-norm real data this
/// coincides with minimum Euclidean distance.
pub fn exhaustive_search<P: Pattern>(patterns: &[P], query: &P) -> Result<(usize, P::Score)> {
    if patterns.is_empty() {
        return Err(Error::param("cannot search an empty collection"));
    }
    let mut best_id = 0usize;
    let mut best = query.dot(&patterns[0])?;
    for (id, p) in patterns.iter().enumerate().skip(1) {
        let s = query.dot_unchecked(p);
        if s.total_cmp(&best) == std::cmp::Ordering::Greater {
            best = s;
            best_id = id;
        }
    }
    Ok((best_id, best))
}

/// `r` anchor elements plus the nearest-anchor attachment lists that
/// partition the collection (or one class of it, for hybrid use). Ids refer
/// to positions in the pattern collection the index was built over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorIndex {
    anchor_ids: Vec<usize>,
    attachments: Vec<Vec<usize>>,
}

impl AnchorIndex {
    pub fn r(&self) -> usize {
        self.anchor_ids.len()
    }

    /// Anchor ids in ascending order; "anchor position" below means the
    /// position in this list.
    pub fn anchor_ids(&self) -> &[usize] {
        &self.anchor_ids
    }

    /// `attachments[j]` lists the members whose nearest anchor is anchor
    /// `j` (ties during attachment go to the lowest anchor position).
    pub fn attachments(&self) -> &[Vec<usize>] {
        &self.attachments
    }

    pub(crate) fn from_parts(
        anchor_ids: Vec<usize>,
        attachments: Vec<Vec<usize>>,
    ) -> Result<AnchorIndex> {
        if anchor_ids.is_empty() {
            return Err(Error::param("anchor index requires at least one anchor"));
        }
        if anchor_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("anchor ids must be strictly increasing"));
        }
        if attachments.len() != anchor_ids.len() {
            return Err(Error::param("one attachment list required per anchor"));
        }
        Ok(AnchorIndex {
            anchor_ids,
            attachments,
        })
    }
}

/// Builds an anchor index over the whole collection: `r` anchors sampled
/// uniformly without replacement, every element attached to its nearest
/// anchor.
pub fn rs_build<P: Pattern>(patterns: &[P], r: usize, seed: u64) -> Result<AnchorIndex> {
    let members: Vec<usize> = (0..patterns.len()).collect();
    rs_build_subset(patterns, &members, r, seed)
}

/// Anchor index over an arbitrary member subset (used per class by the
/// hybrid). Anchors are sampled from `members`; all ids are collection-level.
pub(crate) fn rs_build_subset<P: Pattern>(
    patterns: &[P],
    members: &[usize],
    r: usize,
    seed: u64,
) -> Result<AnchorIndex> {
    if r == 0 || r > members.len() {
        return Err(Error::param(format!(
            "anchor count must satisfy 1 <= r <= {}, got {r}",
            members.len()
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut anchor_ids: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), r)
        .into_iter()
        .map(|i| members[i])
        .collect();
    // Ascending anchor order makes "lowest anchor position" and "lowest
    // anchor id" the same rule.
    anchor_ids.sort_unstable();

    let mut attachments: Vec<Vec<usize>> = vec![Vec::new(); r];
    for &id in members {
        let x = &patterns[id];
        let mut best_pos = 0usize;
        let mut best = x.dot(&patterns[anchor_ids[0]])?;
        for (pos, &aid) in anchor_ids.iter().enumerate().skip(1) {
            let s = x.dot_unchecked(&patterns[aid]);
            if s.total_cmp(&best) == std::cmp::Ordering::Greater {
                best = s;
                best_pos = pos;
            }
        }
        attachments[best_pos].push(id);
    }
    Ok(AnchorIndex {
        anchor_ids,
        attachments,
    })
}

/// Result of an RS or hybrid query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome<S: ScoreValue> {
    pub nn_id: usize,
    pub similarity: S,
    pub op_count: u64,
}

/// Scans all `r` anchors, then exhaustively searches the attachment lists of
/// the `a` nearest anchors. `op_count = u·r + u·Σ probed list sizes` with the
/// usual unit `u` (`d`, or `c̃` for sparse queries).
pub fn rs_search<P: Pattern>(
    idx: &AnchorIndex,
    patterns: &[P],
    query: &P,
    a: usize,
) -> Result<SearchOutcome<P::Score>> {
    let r = idx.r();
    if a == 0 || a > r {
        return Err(Error::param(format!(
            "probed anchor count must satisfy 1 <= a <= r={r}, got {a}"
        )));
    }
    let mut anchor_scores: Vec<(usize, P::Score)> = Vec::with_capacity(r);
    for (pos, &aid) in idx.anchor_ids.iter().enumerate() {
        anchor_scores.push((pos, query.dot(&patterns[aid])?));
    }
    anchor_scores.sort_unstable_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));

    let unit = query.dot_cost();
    let mut op_count = unit * r as u64;
    let mut best: Option<(usize, P::Score)> = None;
    for &(pos, _) in &anchor_scores[..a] {
        let list = &idx.attachments[pos];
        op_count += unit * list.len() as u64;
        for &id in list {
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
    let (nn_id, similarity) =
        best.ok_or_else(|| Error::param("probed anchors have no attached members"))?;
    Ok(SearchOutcome {
        nn_id,
        similarity,
        op_count,
    })
}

/// Memory filter outside, RS inside: a partitioned index whose classes each
/// carry their own anchor index.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridIndex<P: Pattern> {
    outer: PartitionedIndex<P>,
    inner: Vec<AnchorIndex>,
}

impl<P: Pattern> HybridIndex<P> {
    pub fn outer(&self) -> &PartitionedIndex<P> {
        &self.outer
    }

    /// Per-class anchor indexes, aligned with the outer classes.
    pub fn inner(&self) -> &[AnchorIndex] {
        &self.inner
    }

    pub(crate) fn from_parts(
        outer: PartitionedIndex<P>,
        inner: Vec<AnchorIndex>,
    ) -> Result<HybridIndex<P>> {
        if inner.len() != outer.q() {
            return Err(Error::param("one anchor index required per class"));
        }
        for (class, anchors) in outer.classes().iter().zip(&inner) {
            let mut covered: Vec<usize> = anchors.attachments.concat();
            covered.sort_unstable();
            let mut expected = class.clone();
            expected.sort_unstable();
            if covered != expected {
                return Err(Error::param(
                    "anchor attachments do not partition their class",
                ));
            }
            if !anchors.anchor_ids.iter().all(|aid| class.contains(aid)) {
                return Err(Error::param("anchor outside its class"));
            }
        }
        Ok(HybridIndex { outer, inner })
    }
}

/// Builds the hybrid: allocate `q` classes with the chosen strategy, build
/// their memories under `rule`, then build one anchor index of `r_per_class`
/// anchors inside every class. Per-class anchor sampling derives its seed
/// from `seed` and the class id.
pub fn hybrid_build<P: Pattern>(
    patterns: &[P],
    q: usize,
    strategy: Allocation,
    rule: Rule,
    r_per_class: usize,
    seed: u64,
) -> Result<HybridIndex<P>> {
    let allocation = allocate(patterns, q, strategy, rule, seed)?;
    let min_class = allocation.iter().map(Vec::len).min().unwrap_or(0);
    if r_per_class == 0 || r_per_class > min_class {
        return Err(Error::param(format!(
            "r per class must satisfy 1 <= r <= min class size {min_class}, got {r_per_class}"
        )));
    }
    let outer = build_index(patterns, &allocation, rule)?;
    let inner: Vec<AnchorIndex> = allocation
        .iter()
        .enumerate()
        .map(|(cid, members)| {
            rs_build_subset(patterns, members, r_per_class, seed ^ (cid as u64 + 1))
        })
        .collect::<Result<_>>()?;
    HybridIndex::from_parts(outer, inner)
}

/// Ranks classes through the outer memories, then runs the RS stage inside
/// each of the top `p` classes. `op_count = u²·q + Σ_probed (u·r_i + u·Σ
/// probed attachment sizes)`.
pub fn hybrid_search<P: Pattern>(
    idx: &HybridIndex<P>,
    patterns: &[P],
    query: &P,
    p: usize,
    a: usize,
) -> Result<SearchOutcome<P::Score>> {
    let q = idx.outer.q();
    if p == 0 || p > q {
        return Err(Error::param(format!(
            "probe count must satisfy 1 <= p <= q={q}, got {p}"
        )));
    }
    let ranking = idx.outer.rank_classes(query)?;
    let unit = query.dot_cost();
    let mut op_count = unit * unit * q as u64;
    let mut best: Option<(usize, P::Score)> = None;
    for scored in &ranking[..p] {
        let outcome = rs_search(&idx.inner[scored.class_id], patterns, query, a)?;
        op_count += outcome.op_count;
        let better = match best {
            None => true,
            Some((bid, bs)) => match outcome.similarity.total_cmp(&bs) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => outcome.nn_id < bid,
                std::cmp::Ordering::Less => false,
            },
        };
        if better {
            best = Some((outcome.nn_id, outcome.similarity));
        }
    }
    let (nn_id, similarity) = best.expect("p >= 1 probed classes");
    Ok(SearchOutcome {
        nn_id,
        similarity,
        op_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{gen_dense_patterns, gen_sparse_patterns, DensePattern, GeneratorConfig};

    fn dense(dim: usize, count: usize, seed: u64) -> Vec<DensePattern> {
        gen_dense_patterns(&GeneratorConfig {
            dim,
            ones_mean: 1,
            count,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn exhaustive_finds_self_and_breaks_ties_low() {
        let pats = dense(16, 10, 1);
        let (id, sim) = exhaustive_search(&pats, &pats[7]).unwrap();
        assert_eq!((id, sim), (7, 16));

        let single = vec![pats[0].clone()];
        assert_eq!(exhaustive_search(&single, &pats[3]).unwrap().0, 0);

        // Duplicate best matches → the lower id wins.
        let twins = vec![pats[0].clone(), pats[1].clone(), pats[1].clone()];
        assert_eq!(exhaustive_search(&twins, &pats[1]).unwrap().0, 1);

        assert!(exhaustive_search::<DensePattern>(&[], &pats[0]).is_err());
    }

    #[test]
    fn single_anchor_attaches_everything() {
        let pats = dense(8, 12, 2);
        let idx = rs_build(&pats, 1, 5).unwrap();
        assert_eq!(idx.r(), 1);
        assert_eq!(idx.attachments()[0].len(), 12);
        let out = rs_search(&idx, &pats, &pats[4], 1).unwrap();
        let (nn, sim) = exhaustive_search(&pats, &pats[4]).unwrap();
        assert_eq!((out.nn_id, out.similarity), (nn, sim));
    }

    #[test]
    fn all_anchors_attach_to_themselves() {
        let pats = dense(64, 20, 3);
        let idx = rs_build(&pats, 20, 7).unwrap();
        assert_eq!(idx.anchor_ids(), (0..20).collect::<Vec<_>>().as_slice());
        for (pos, list) in idx.attachments().iter().enumerate() {
            assert_eq!(list, &vec![idx.anchor_ids()[pos]]);
        }
    }

    #[test]
    fn attachments_are_nearest_by_brute_force() {
        let pats = dense(16, 100, 4);
        let idx = rs_build(&pats, 9, 11).unwrap();
        for (pos, list) in idx.attachments().iter().enumerate() {
            for &id in list {
                let mut best_pos = 0;
                let mut best = pats[id].dot(&pats[idx.anchor_ids()[0]]).unwrap();
                for (j, &aid) in idx.anchor_ids().iter().enumerate().skip(1) {
                    let s = pats[id].dot(&pats[aid]).unwrap();
                    if s > best {
                        best = s;
                        best_pos = j;
                    }
                }
                assert_eq!(pos, best_pos, "element {id} attached to wrong anchor");
            }
        }
    }

    #[test]
    fn full_anchor_probe_equals_exhaustive() {
        let pats = dense(32, 60, 5);
        let idx = rs_build(&pats, 8, 13).unwrap();
        let queries = dense(32, 15, 6);
        for qy in &queries {
            let out = rs_search(&idx, &pats, qy, 8).unwrap();
            let (nn, sim) = exhaustive_search(&pats, qy).unwrap();
            assert_eq!((out.nn_id, out.similarity), (nn, sim));
        }
    }

    #[test]
    fn rs_recall_is_nondecreasing_in_probed_anchors() {
        let pats = dense(32, 120, 7);
        let idx = rs_build(&pats, 10, 17).unwrap();
        let queries = dense(32, 30, 8);
        let truth: Vec<usize> = queries
            .iter()
            .map(|qy| exhaustive_search(&pats, qy).unwrap().0)
            .collect();
        let mut last = 0usize;
        for a in 1..=10 {
            let hits = queries
                .iter()
                .zip(&truth)
                .filter(|(qy, &t)| rs_search(&idx, &pats, qy, a).unwrap().nn_id == t)
                .count();
            assert!(hits >= last);
            last = hits;
        }
        assert_eq!(last, queries.len());
    }

    #[test]
    fn rs_op_count_matches_closed_form() {
        let pats = dense(16, 40, 9);
        let idx = rs_build(&pats, 5, 19).unwrap();
        let qy = &dense(16, 1, 10)[0];
        for a in 1..=5 {
            let out = rs_search(&idx, &pats, qy, a).unwrap();
            // Recompute which anchors were probed to total their list sizes.
            let mut scored: Vec<(usize, i64)> = idx
                .anchor_ids()
                .iter()
                .enumerate()
                .map(|(pos, &aid)| (pos, qy.dot(&pats[aid]).unwrap()))
                .collect();
            scored.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
            let probed: u64 = scored[..a]
                .iter()
                .map(|&(pos, _)| idx.attachments()[pos].len() as u64)
                .sum();
            assert_eq!(out.op_count, 16 * 5 + 16 * probed);
        }
    }

    #[test]
    fn rs_parameter_ranges_are_enforced() {
        let pats = dense(8, 10, 11);
        assert!(rs_build(&pats, 0, 1).is_err());
        assert!(rs_build(&pats, 11, 1).is_err());
        let idx = rs_build(&pats, 3, 1).unwrap();
        assert!(rs_search(&idx, &pats, &pats[0], 0).is_err());
        assert!(rs_search(&idx, &pats, &pats[0], 4).is_err());
    }

    #[test]
    fn hybrid_with_one_class_reduces_to_its_inner_rs() {
        let pats = dense(16, 30, 12);
        let hybrid =
            hybrid_build(&pats, 1, Allocation::Random, Rule::Sum, 4, 23).unwrap();
        let queries = dense(16, 10, 13);
        for qy in &queries {
            let h = hybrid_search(&hybrid, &pats, qy, 1, 2).unwrap();
            let r = rs_search(&hybrid.inner()[0], &pats, qy, 2).unwrap();
            assert_eq!((h.nn_id, h.similarity), (r.nn_id, r.similarity));
            // The hybrid pays the class-filter scan on top of the RS stage.
            assert_eq!(h.op_count, 16 * 16 + r.op_count);
        }
    }

    #[test]
    fn hybrid_full_coverage_equals_exhaustive() {
        let pats = gen_sparse_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 5,
            count: 60,
            seed: 14,
        })
        .unwrap();
        let hybrid =
            hybrid_build(&pats, 4, Allocation::Random, Rule::Sum, 15, 29).unwrap();
        let queries = gen_sparse_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 5,
            count: 12,
            seed: 15,
        })
        .unwrap();
        for qy in &queries {
            let h = hybrid_search(&hybrid, &pats, qy, 4, 15).unwrap();
            let (nn, sim) = exhaustive_search(&pats, qy).unwrap();
            assert_eq!((h.nn_id, h.similarity), (nn, sim));
        }
    }

    #[test]
    fn hybrid_op_count_includes_filter_and_inner_stages() {
        let pats = dense(16, 40, 16);
        let hybrid =
            hybrid_build(&pats, 4, Allocation::Random, Rule::Sum, 2, 31).unwrap();
        let qy = &dense(16, 1, 17)[0];
        let out = hybrid_search(&hybrid, &pats, qy, 2, 1).unwrap();
        // Recompute: filter 16²·4, then per probed class 16·2 anchors plus
        // 16·(probed attachment size).
        let ranking = hybrid.outer().rank_classes(qy).unwrap();
        let mut expect = 16 * 16 * 4u64;
        for scored in &ranking[..2] {
            let inner = &hybrid.inner()[scored.class_id];
            let sub = rs_search(inner, &pats, qy, 1).unwrap();
            expect += sub.op_count;
        }
        assert_eq!(out.op_count, expect);
    }

    #[test]
    fn hybrid_r_larger_than_smallest_class_is_rejected() {
        let pats = dense(8, 10, 18);
        assert!(hybrid_build(&pats, 3, Allocation::Random, Rule::Sum, 4, 1).is_err());
        assert!(hybrid_build(&pats, 3, Allocation::Random, Rule::Sum, 0, 1).is_err());
    }
}
