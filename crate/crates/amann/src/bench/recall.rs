//! Recall-versus-cost curves on stored collections.
//!
//! Recall@1 here is identifier recall: the fraction of queries whose
//! returned neighbor is exactly the pattern an exhaustive scan returns
//! (both sides break similarity ties toward the lowest identifier, so the
//! comparison is well defined even with duplicates). Each point also
//! carries the mean elementary-operation count and that count relative to
//! the exhaustive scan, which is what makes curves comparable across
//! methods and datasets.

use rayon::prelude::*;

use crate::baselines::{exhaustive_search, hybrid_search, rs_search, AnchorIndex, HybridIndex};
use crate::error::{Error, Result};
use crate::index::PartitionedIndex;
use crate::pattern::{Pattern, ScoreValue};

/// One point of a recall curve: the swept parameter (probed classes `p` or
/// probed anchors `a`), the identifier recall, and the measured cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallPoint {
    pub param: usize,
    pub recall: f64,
    pub hits: usize,
    pub queries: usize,
    pub mean_op_count: f64,
    /// Mean op count divided by the exhaustive-scan mean op count.
    pub relative_complexity: f64,
}

/// One point of a two-parameter hybrid curve.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridRecallPoint {
    pub p: usize,
    pub a: usize,
    pub recall: f64,
    pub hits: usize,
    pub queries: usize,
    pub mean_op_count: f64,
    pub relative_complexity: f64,
}

/// Exhaustive nearest neighbors (highest inner product, ties to the lowest
/// identifier) for every query.
pub fn ground_truth<P: Pattern>(patterns: &[P], queries: &[P]) -> Result<Vec<usize>> {
    if queries.is_empty() {
        return Err(Error::param("ground truth needs at least one query"));
    }
    queries
        .par_iter()
        .map(|q| exhaustive_search(patterns, q).map(|(id, _)| id))
        .collect()
}

/// Mean exhaustive-scan cost over the query set: `unit(query) · n` averaged,
/// the denominator of every relative-complexity figure.
pub fn exhaustive_mean_ops<P: Pattern>(patterns: &[P], queries: &[P]) -> Result<f64> {
    if patterns.is_empty() || queries.is_empty() {
        return Err(Error::param(
            "exhaustive cost needs patterns and at least one query",
        ));
    }
    let total: u64 = queries
        .iter()
        .map(|q| q.dot_cost() * patterns.len() as u64)
        .sum();
    Ok(total as f64 / queries.len() as f64)
}

fn check_params(ps: &[usize], upper: usize, what: &str) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::param(format!("{what} grid is empty")));
    }
    if ps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param(format!("{what} grid must be strictly ascending")));
    }
    if ps[0] == 0 || ps[ps.len() - 1] > upper {
        return Err(Error::param(format!(
            "{what} values must lie in 1..={upper}"
        )));
    }
    Ok(())
}

fn check_truth(truth: &[usize], queries: usize, n: usize) -> Result<()> {
    if truth.len() != queries {
        return Err(Error::param(format!(
            "{} ground-truth entries for {} queries",
            truth.len(),
            queries
        )));
    }
    if truth.iter().any(|&id| id >= n) {
        return Err(Error::param("ground-truth identifier out of range"));
    }
    Ok(())
}

/// Recall and cost of the partitioned index at each probe count in `ps`
/// (strictly ascending). Rankings are computed once per query and prefixes
/// are replayed, which returns exactly what separate `search_top_p` calls
/// would.
pub fn am_recall_curve<P: Pattern>(
    index: &PartitionedIndex<P>,
    patterns: &[P],
    queries: &[P],
    truth: &[usize],
    ps: &[usize],
) -> Result<Vec<RecallPoint>> {
    check_params(ps, index.q(), "probe count")?;
    check_truth(truth, queries.len(), patterns.len())?;
    if patterns.len() != index.n() {
        return Err(Error::param(format!(
            "index stores {} patterns but {} were supplied",
            index.n(),
            patterns.len()
        )));
    }
    let denominator = exhaustive_mean_ops(patterns, queries)?;

    // One (hits, op-sum) accumulator per requested p, merged across queries.
    let zero = || vec![(0usize, 0u64); ps.len()];
    let acc = queries
        .par_iter()
        .zip(truth.par_iter())
        .map(|(query, &true_id)| -> Result<Vec<(usize, u64)>> {
            let ranking = index.rank_classes(query)?;
            let unit = query.dot_cost();
            let mut ops = unit * unit * index.q() as u64;
            let mut best: Option<(usize, P::Score)> = None;
            let mut out = zero();
            let mut next = 0usize;
            for (pos, scored) in ranking.iter().enumerate() {
                let class = &index.classes()[scored.class_id];
                ops += unit * class.len() as u64;
                for &id in class {
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
                while next < ps.len() && ps[next] == pos + 1 {
                    let hit = best.is_some_and(|(id, _)| id == true_id);
                    out[next] = (usize::from(hit), ops);
                    next += 1;
                }
                if next == ps.len() {
                    break;
                }
            }
            Ok(out)
        })
        .try_reduce(zero, |mut a, b| {
            for (ai, bi) in a.iter_mut().zip(b) {
                ai.0 += bi.0;
                ai.1 += bi.1;
            }
            Ok(a)
        })?;

    Ok(ps
        .iter()
        .zip(acc)
        .map(|(&p, (hits, ops))| {
            let mean_ops = ops as f64 / queries.len() as f64;
            RecallPoint {
                param: p,
                recall: hits as f64 / queries.len() as f64,
                hits,
                queries: queries.len(),
                mean_op_count: mean_ops,
                relative_complexity: mean_ops / denominator,
            }
        })
        .collect())
}

/// Recall and cost of the anchor baseline at each probed-anchor count in
/// `a_values` (strictly ascending).
pub fn rs_recall_curve<P: Pattern>(
    index: &AnchorIndex,
    patterns: &[P],
    queries: &[P],
    truth: &[usize],
    a_values: &[usize],
) -> Result<Vec<RecallPoint>> {
    check_params(a_values, index.r(), "probed-anchor count")?;
    check_truth(truth, queries.len(), patterns.len())?;
    let denominator = exhaustive_mean_ops(patterns, queries)?;

    a_values
        .iter()
        .map(|&a| {
            let (hits, ops) = queries
                .par_iter()
                .zip(truth.par_iter())
                .map(|(query, &true_id)| -> Result<(usize, u64)> {
                    let out = rs_search(index, patterns, query, a)?;
                    Ok((usize::from(out.nn_id == true_id), out.op_count))
                })
                .try_reduce(
                    || (0, 0),
                    |x, y| Ok((x.0 + y.0, x.1 + y.1)),
                )?;
            let mean_ops = ops as f64 / queries.len() as f64;
            Ok(RecallPoint {
                param: a,
                recall: hits as f64 / queries.len() as f64,
                hits,
                queries: queries.len(),
                mean_op_count: mean_ops,
                relative_complexity: mean_ops / denominator,
            })
        })
        .collect()
}

/// Recall and cost of the two-stage index at each `(p, a)` pair.
pub fn hybrid_recall_curve<P: Pattern>(
    index: &HybridIndex<P>,
    patterns: &[P],
    queries: &[P],
    truth: &[usize],
    pairs: &[(usize, usize)],
) -> Result<Vec<HybridRecallPoint>> {
    if pairs.is_empty() {
        return Err(Error::param("parameter grid is empty"));
    }
    check_truth(truth, queries.len(), patterns.len())?;
    let denominator = exhaustive_mean_ops(patterns, queries)?;

    pairs
        .iter()
        .map(|&(p, a)| {
            let (hits, ops) = queries
                .par_iter()
                .zip(truth.par_iter())
                .map(|(query, &true_id)| -> Result<(usize, u64)> {
                    let out = hybrid_search(index, patterns, query, p, a)?;
                    Ok((usize::from(out.nn_id == true_id), out.op_count))
                })
                .try_reduce(
                    || (0, 0),
                    |x, y| Ok((x.0 + y.0, x.1 + y.1)),
                )?;
            let mean_ops = ops as f64 / queries.len() as f64;
            Ok(HybridRecallPoint {
                p,
                a,
                recall: hits as f64 / queries.len() as f64,
                hits,
                queries: queries.len(),
                mean_op_count: mean_ops,
                relative_complexity: mean_ops / denominator,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{hybrid_build, rs_build};
    use crate::index::{allocate_random, build_index, Allocation};
    use crate::memory::Rule;
    use crate::pattern::{gen_dense_patterns, gen_sparse_patterns, GeneratorConfig};

    fn sparse_setup(
        n: usize,
        q: usize,
    ) -> (
        Vec<crate::pattern::SparsePattern>,
        Vec<crate::pattern::SparsePattern>,
        PartitionedIndex<crate::pattern::SparsePattern>,
    ) {
        let patterns = gen_sparse_patterns(&GeneratorConfig {
            dim: 48,
            ones_mean: 6,
            count: n,
            seed: 5,
        })
        .unwrap();
        let queries = gen_sparse_patterns(&GeneratorConfig {
            dim: 48,
            ones_mean: 6,
            count: 25,
            seed: 6,
        })
        .unwrap();
        let classes = allocate_random(n, q, 7).unwrap();
        let index = build_index(&patterns, &classes, Rule::Sum).unwrap();
        (patterns, queries, index)
    }

    #[test]
    fn probing_every_class_recovers_the_exhaustive_neighbor() {
        let (patterns, queries, index) = sparse_setup(60, 6);
        let truth = ground_truth(&patterns, &queries).unwrap();
        let curve =
            am_recall_curve(&index, &patterns, &queries, &truth, &[1, 3, 6]).unwrap();
        assert_eq!(curve.len(), 3);
        assert!((curve[2].recall - 1.0).abs() < 1e-12);
        // Recall cannot decrease and cost cannot decrease along the sweep.
        for w in curve.windows(2) {
            assert!(w[1].recall >= w[0].recall - 1e-12);
            assert!(w[1].mean_op_count > w[0].mean_op_count);
        }
    }

    #[test]
    fn prefix_replay_matches_direct_searches() {
        let (patterns, queries, index) = sparse_setup(54, 6);
        let truth = ground_truth(&patterns, &queries).unwrap();
        let ps: Vec<usize> = (1..=6).collect();
        let curve = am_recall_curve(&index, &patterns, &queries, &truth, &ps).unwrap();
        for (pi, &p) in ps.iter().enumerate() {
            let mut hits = 0usize;
            let mut ops = 0u64;
            for (query, &true_id) in queries.iter().zip(&truth) {
                let out = index.search_top_p(&patterns, query, p).unwrap();
                hits += usize::from(out.nn_id == true_id);
                ops += out.op_count;
            }
            assert_eq!(curve[pi].hits, hits, "p={p}");
            let mean = ops as f64 / queries.len() as f64;
            assert!((curve[pi].mean_op_count - mean).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn relative_complexity_is_exact_for_equal_units() {
        // Dense queries all cost d per dot, so relative complexity at full
        // probing is (d²q + dn) / (dn) exactly.
        let patterns = gen_dense_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 0,
            count: 40,
            seed: 9,
        })
        .unwrap();
        let queries = gen_dense_patterns(&GeneratorConfig {
            dim: 32,
            ones_mean: 0,
            count: 10,
            seed: 10,
        })
        .unwrap();
        let classes = allocate_random(40, 4, 3).unwrap();
        let index = build_index(&patterns, &classes, Rule::Sum).unwrap();
        let truth = ground_truth(&patterns, &queries).unwrap();
        let curve = am_recall_curve(&index, &patterns, &queries, &truth, &[4]).unwrap();
        let d = 32f64;
        let expected = (d * d * 4.0 + d * 40.0) / (d * 40.0);
        assert!((curve[0].relative_complexity - expected).abs() < 1e-12);
    }

    #[test]
    fn anchor_curve_reaches_full_recall_with_all_anchors_probed() {
        let patterns = gen_sparse_patterns(&GeneratorConfig {
            dim: 40,
            ones_mean: 5,
            count: 30,
            seed: 21,
        })
        .unwrap();
        let queries = gen_sparse_patterns(&GeneratorConfig {
            dim: 40,
            ones_mean: 5,
            count: 12,
            seed: 22,
        })
        .unwrap();
        let truth = ground_truth(&patterns, &queries).unwrap();
        // r = n makes every pattern an anchor: probing all of them scans
        // every pattern, so recall is exactly 1.
        let index = rs_build(&patterns, 30, 4).unwrap();
        let curve = rs_recall_curve(&index, &patterns, &queries, &truth, &[1, 30]).unwrap();
        assert!((curve[1].recall - 1.0).abs() < 1e-12);
        assert!(curve[0].recall <= curve[1].recall);
    }

    #[test]
    fn hybrid_curve_full_probing_is_exhaustive() {
        let patterns = gen_sparse_patterns(&GeneratorConfig {
            dim: 40,
            ones_mean: 5,
            count: 36,
            seed: 31,
        })
        .unwrap();
        let queries = gen_sparse_patterns(&GeneratorConfig {
            dim: 40,
            ones_mean: 5,
            count: 9,
            seed: 32,
        })
        .unwrap();
        let truth = ground_truth(&patterns, &queries).unwrap();
        let index = hybrid_build(
            &patterns,
            4,
            Allocation::Random,
            Rule::Sum,
            9,
            33,
        )
        .unwrap();
        let curve =
            hybrid_recall_curve(&index, &patterns, &queries, &truth, &[(2, 3), (4, 9)]).unwrap();
        assert!((curve[1].recall - 1.0).abs() < 1e-12);
        assert!(curve[1].mean_op_count > curve[0].mean_op_count);
    }

    #[test]
    fn parameter_grids_are_validated() {
        let (patterns, queries, index) = sparse_setup(24, 4);
        let truth = ground_truth(&patterns, &queries).unwrap();
        for bad in [vec![], vec![0], vec![5], vec![2, 2], vec![3, 1]] {
            assert!(
                am_recall_curve(&index, &patterns, &queries, &truth, &bad).is_err(),
                "{bad:?}"
            );
        }
        let short_truth = vec![0; queries.len() - 1];
        assert!(am_recall_curve(&index, &patterns, &queries, &short_truth, &[1]).is_err());
    }
}
