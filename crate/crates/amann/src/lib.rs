//! Associative-memory class filtering for approximate nearest neighbor
//! search.
//!
//! The collection is partitioned into `q` classes and each class is
//! summarized by one `d × d` associative memory — the sum (or entrywise
//! max) of the outer products of its members. A query is first scored
//! against every memory with a quadratic form, then only the members of the
//! `p` best classes are scanned exactly. The memory score concentrates on
//! the class holding the query's nearest neighbor, so a handful of probes
//! replaces a full scan.
//!
//! The crate covers three data variants — sparse 0/1 patterns, dense ±1
//! patterns, and real-valued vectors — plus:
//!
//! - random and greedy class allocation, and index search with exact
//!   operation counts ([`index`]);
//! - anchor-based and two-stage baselines to compare against
//!   ([`baselines`]);
//! - Monte-Carlo error-rate experiments, recall/cost curves, closed-form
//!   error bounds, and CSV reporting ([`bench`]);
//! - loaders for common vector-collection file formats and an on-disk
//!   index format ([`datasets`], [`storage`]).
//!
//! All randomness flows through seeded, stream-keyed generators, so every
//! result in the crate is reproducible bit for bit, independent of thread
//! count.

pub mod baselines;
pub mod bench;
mod bytes;
pub mod datasets;
pub mod error;
pub mod index;
pub mod memory;
pub mod pattern;
pub mod storage;

pub use error::{Error, Result};
pub use index::{allocate, build_index, Allocation, PartitionedIndex};
pub use memory::{build_memory, MemoryMatrix, Rule};
pub use pattern::{DensePattern, Pattern, RealPattern, SparsePattern, Variant};
