//! Randomized invariant checks over the public API.

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use amann::baselines::{exhaustive_search, hybrid_build, hybrid_search, rs_build, rs_search};
use amann::index::{allocate_greedy, allocate_random, build_index};
use amann::memory::{build_memory, score_oracle, MemoryMatrix};
use amann::pattern::{corrupt_dense, corrupt_sparse, DensePattern, Pattern, SparsePattern};
use amann::storage::{
    read_partitioned, write_anchor, write_hybrid, write_partitioned,
};
use amann::{Allocation, RealPattern, Rule};

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

fn sparse_pattern(dim: usize) -> impl Strategy<Value = SparsePattern> {
    btree_set(0..dim as u32, 0..=dim.min(10))
        .prop_map(move |set| SparsePattern::new(dim, set.into_iter().collect()).unwrap())
}

fn dense_pattern(dim: usize) -> impl Strategy<Value = DensePattern> {
    vec(prop::bool::ANY, dim).prop_map(|bits| {
        let signs: Vec<i8> = bits.iter().map(|&b| if b { 1 } else { -1 }).collect();
        DensePattern::from_signs(&signs).unwrap()
    })
}

fn real_pattern(dim: usize) -> impl Strategy<Value = RealPattern> {
    vec(-1.0f64..1.0, dim).prop_map(|entries| RealPattern::new(entries).unwrap())
}

/// A dimension, a class stored in one memory, and a query of the same width.
fn sparse_instance() -> impl Strategy<Value = (Vec<SparsePattern>, SparsePattern)> {
    (4usize..40).prop_flat_map(|dim| (vec(sparse_pattern(dim), 1..12), sparse_pattern(dim)))
}

fn dense_instance() -> impl Strategy<Value = (Vec<DensePattern>, DensePattern)> {
    (1usize..80).prop_flat_map(|dim| (vec(dense_pattern(dim), 1..12), dense_pattern(dim)))
}

fn real_instance() -> impl Strategy<Value = (Vec<RealPattern>, RealPattern)> {
    (1usize..24).prop_flat_map(|dim| (vec(real_pattern(dim), 1..8), real_pattern(dim)))
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

proptest! {
    /// The quadratic form through the accumulated matrix equals the factored
    /// per-pattern computation exactly (integer arithmetic).
    #[test]
    fn sum_score_matches_factored_oracle_sparse((class, query) in sparse_instance()) {
        let mem = build_memory(&class, Rule::Sum).unwrap();
        prop_assert_eq!(mem.score(&query).unwrap(), score_oracle(&class, &query).unwrap());
    }

    #[test]
    fn sum_score_matches_factored_oracle_dense((class, query) in dense_instance()) {
        let mem = build_memory(&class, Rule::Sum).unwrap();
        prop_assert_eq!(mem.score(&query).unwrap(), score_oracle(&class, &query).unwrap());
    }

    /// Real-valued scores go through different association orders on the two
    /// routes, so equality is up to rounding.
    #[test]
    fn sum_score_matches_factored_oracle_real((class, query) in real_instance()) {
        let mem = build_memory(&class, Rule::Sum).unwrap();
        let via_matrix = mem.score(&query).unwrap();
        let factored = score_oracle(&class, &query).unwrap();
        let scale = via_matrix.abs().max(factored.abs()).max(1.0);
        prop_assert!((via_matrix - factored).abs() <= 1e-9 * scale,
            "matrix {via_matrix} vs factored {factored}");
    }

    /// Absorbing patterns one at a time leaves exactly the same memory as
    /// batch construction, for every rule the family supports.
    #[test]
    fn incremental_absorption_equals_batch((class, _) in sparse_instance(),
                                           rule in prop::sample::select(vec![Rule::Sum, Rule::Max])) {
        let batch = build_memory(&class, rule).unwrap();
        let mut incremental = MemoryMatrix::new(class[0].dim(), rule).unwrap();
        for p in &class {
            incremental.absorb(p).unwrap();
        }
        prop_assert_eq!(batch, incremental);
    }

    #[test]
    fn incremental_absorption_equals_batch_dense((class, _) in dense_instance()) {
        let batch = build_memory(&class, Rule::Sum).unwrap();
        let mut incremental = MemoryMatrix::new(class[0].dim(), Rule::Sum).unwrap();
        for p in &class {
            incremental.absorb(p).unwrap();
        }
        prop_assert_eq!(batch, incremental);
    }
}

// ---------------------------------------------------------------------------
// Allocation
// ---------------------------------------------------------------------------

fn assert_is_partition(classes: &[Vec<usize>], n: usize) -> Result<(), TestCaseError> {
    let mut seen = vec![false; n];
    for class in classes {
        for &id in class {
            prop_assert!(id < n, "id {id} out of range");
            prop_assert!(!seen[id], "id {id} assigned twice");
            seen[id] = true;
        }
    }
    prop_assert!(seen.iter().all(|&s| s), "some ids were never assigned");
    Ok(())
}

proptest! {
    /// Random allocation is a partition into `q` classes whose sizes are as
    /// equal as possible, larger classes first.
    #[test]
    fn random_allocation_is_balanced_partition(n in 1usize..300, q_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let q = 1 + ((n - 1) as f64 * q_frac) as usize;
        let classes = allocate_random(n, q, seed).unwrap();
        prop_assert_eq!(classes.len(), q);
        assert_is_partition(&classes, n)?;
        let (base, extra) = (n / q, n % q);
        for (cid, class) in classes.iter().enumerate() {
            let expect = if cid < extra { base + 1 } else { base };
            prop_assert_eq!(class.len(), expect);
        }
    }

    /// Greedy allocation is a partition that respects the class-size cap.
    #[test]
    fn greedy_allocation_is_capped_partition((class, _) in sparse_instance(),
                                             q_frac in 0.0f64..1.0,
                                             slack in 0usize..4,
                                             seed in any::<u64>()) {
        let n = class.len();
        let q = 1 + ((n - 1) as f64 * q_frac) as usize;
        let cap = n.div_ceil(q) + slack;
        let classes = allocate_greedy(&class, q, Rule::Sum, seed, Some(cap)).unwrap();
        prop_assert_eq!(classes.len(), q);
        assert_is_partition(&classes, n)?;
        for class in &classes {
            prop_assert!(class.len() <= cap);
        }
    }
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

proptest! {
    /// Sparse corruption keeps the number of active coordinates and hits the
    /// requested overlap exactly (`round(α·c̃)`, ties to even).
    #[test]
    fn sparse_corruption_hits_exact_overlap(dim in 8usize..64,
                                            count_frac in 0.0f64..1.0,
                                            alpha in 0.0f64..=1.0,
                                            seed in any::<u64>()) {
        let c = 1 + ((dim / 2 - 1) as f64 * count_frac) as usize;
        let original = SparsePattern::new(dim, (0..c as u32).collect()).unwrap();
        let corrupted = corrupt_sparse(&original, alpha, seed).unwrap();
        prop_assert_eq!(corrupted.active_count(), c);
        let expect_overlap = (alpha * c as f64).round_ties_even() as i64;
        prop_assert_eq!(original.dot(&corrupted).unwrap(), expect_overlap);
    }

    /// Dense corruption flips exactly `round((1−α)·d/2)` coordinates, so the
    /// similarity with the original is pinned.
    #[test]
    fn dense_corruption_hits_exact_similarity(pattern in (2usize..128).prop_flat_map(dense_pattern),
                                              alpha in 0.0f64..=1.0,
                                              seed in any::<u64>()) {
        let d = pattern.dim();
        let corrupted = corrupt_dense(&pattern, alpha, seed).unwrap();
        let flips = ((1.0 - alpha) * d as f64 / 2.0).round_ties_even() as i64;
        prop_assert_eq!(pattern.dot(&corrupted).unwrap(), d as i64 - 2 * flips);
    }
}

// ---------------------------------------------------------------------------
// Search degeneracy: probing everything must equal the exhaustive scan
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn full_class_probing_matches_exhaustive((base, query) in sparse_instance(),
                                             q_frac in 0.0f64..1.0,
                                             seed in any::<u64>()) {
        let n = base.len();
        let q = 1 + ((n - 1) as f64 * q_frac) as usize;
        let classes = allocate_random(n, q, seed).unwrap();
        let index = build_index(&base, &classes, Rule::Sum).unwrap();
        let result = index.search_top_p(&base, &query, q).unwrap();
        let (id, similarity) = exhaustive_search(&base, &query).unwrap();
        prop_assert_eq!(result.nn_id, id);
        prop_assert_eq!(result.nn_similarity, similarity);
    }

    #[test]
    fn full_anchor_probing_matches_exhaustive((base, query) in dense_instance(),
                                              r_frac in 0.0f64..1.0,
                                              seed in any::<u64>()) {
        let n = base.len();
        let r = 1 + ((n - 1) as f64 * r_frac) as usize;
        let index = rs_build(&base, r, seed).unwrap();
        let outcome = rs_search(&index, &base, &query, r).unwrap();
        let (id, similarity) = exhaustive_search(&base, &query).unwrap();
        prop_assert_eq!(outcome.nn_id, id);
        prop_assert_eq!(outcome.similarity, similarity);
    }

    #[test]
    fn full_hybrid_probing_matches_exhaustive((base, query) in sparse_instance(),
                                              seed in any::<u64>()) {
        let n = base.len();
        let q = 1 + n / 4;
        let r = 2.min(n / q);
        prop_assume!(r >= 1);
        let index = hybrid_build(&base, q, Allocation::Random, Rule::Sum, r, seed).unwrap();
        let outcome = hybrid_search(&index, &base, &query, q, r).unwrap();
        let (id, similarity) = exhaustive_search(&base, &query).unwrap();
        prop_assert_eq!(outcome.nn_id, id);
        prop_assert_eq!(outcome.similarity, similarity);
    }
}

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Write → read → write reproduces the file byte for byte, and the
    /// reloaded partitioned index carries identical memories.
    #[test]
    fn index_files_roundtrip_byte_identical((base, _) in sparse_instance(), seed in any::<u64>()) {
        let n = base.len();
        let q = 1 + n / 3;
        let dir = tempfile::tempdir().unwrap();

        let classes = allocate_random(n, q, seed).unwrap();
        let index = build_index(&base, &classes, Rule::Max).unwrap();
        let first = dir.path().join("part.bin");
        let second = dir.path().join("part2.bin");
        write_partitioned(&first, &index).unwrap();
        let reloaded = read_partitioned::<SparsePattern>(&first).unwrap();
        prop_assert_eq!(reloaded.classes(), index.classes());
        prop_assert_eq!(reloaded.memories(), index.memories());
        write_partitioned(&second, &reloaded).unwrap();
        prop_assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

        let anchor = rs_build(&base, 1 + n / 2, seed).unwrap();
        let afirst = dir.path().join("anchor.bin");
        let asecond = dir.path().join("anchor2.bin");
        write_anchor(&afirst, &anchor, SparsePattern::VARIANT, base[0].dim(), n).unwrap();
        let (reloaded, _) = amann::storage::read_anchor(&afirst).unwrap();
        write_anchor(&asecond, &reloaded, SparsePattern::VARIANT, base[0].dim(), n).unwrap();
        prop_assert_eq!(std::fs::read(&afirst).unwrap(), std::fs::read(&asecond).unwrap());

        let hybrid = hybrid_build(&base, q, Allocation::Random, Rule::Sum, 1, seed).unwrap();
        let hfirst = dir.path().join("hybrid.bin");
        let hsecond = dir.path().join("hybrid2.bin");
        write_hybrid(&hfirst, &hybrid).unwrap();
        let reloaded = amann::storage::read_hybrid::<SparsePattern>(&hfirst).unwrap();
        write_hybrid(&hsecond, &reloaded).unwrap();
        prop_assert_eq!(std::fs::read(&hfirst).unwrap(), std::fs::read(&hsecond).unwrap());
    }
}
