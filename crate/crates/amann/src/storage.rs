//! Index persistence: a single little-endian binary file per index.
//!
//! Layout: 6-byte magic `AMANN1`, then a fixed header — index kind (u8),
//! pattern variant (u8), combination rule (u8), `dim` (u32), `q` (u32),
//! `n` (u64) — then the body:
//!
//! * partitioned index: `q` class sections, each `member_count: u64`,
//!   member ids (u64 each), then `dim²` memory cells (8 bytes each, `i64`
//!   for sparse/dense scores, `f64` bits for real);
//! * anchor index: one anchor section, tagged `RSIDX1`: `r: u64`, then per
//!   anchor `(anchor_id: u64, attach_count: u64, attached ids: u64 each)`;
//! * hybrid: the `q` class sections followed by `q` anchor sections, one
//!   per class in class order.
//!
//! Loading re-validates everything the builders guarantee: the partition is
//! disjoint and covering, cells are symmetric and finite, max-rule cells are
//! 0/1, dense sum-rule diagonals equal the stored count, anchor ids ascend,
//! and attachments partition their universe. Malformed input fails with the
//! byte offset where the problem was detected. Writing is deterministic:
//! identical indexes serialize to identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::baselines::{AnchorIndex, HybridIndex};
use crate::bytes::FileReader;
use crate::error::Result;
use crate::index::PartitionedIndex;
use crate::memory::{MemoryMatrix, Rule};
use crate::pattern::{Pattern, ScoreValue, Variant};

const MAGIC: &[u8; 6] = b"AMANN1";
const ANCHOR_TAG: &[u8; 6] = b"RSIDX1";

/// What a file contains, before committing to a pattern type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Partitioned,
    Anchor,
    Hybrid,
}

impl IndexKind {
    fn code(self) -> u8 {
        match self {
            IndexKind::Partitioned => 0,
            IndexKind::Anchor => 1,
            IndexKind::Hybrid => 2,
        }
    }

    fn from_code(code: u8) -> Option<IndexKind> {
        match code {
            0 => Some(IndexKind::Partitioned),
            1 => Some(IndexKind::Anchor),
            2 => Some(IndexKind::Hybrid),
            _ => None,
        }
    }
}

impl std::fmt::Display for IndexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IndexKind::Partitioned => "partitioned",
            IndexKind::Anchor => "anchor",
            IndexKind::Hybrid => "hybrid",
        })
    }
}

/// Decoded fixed header. Anchor-only files carry no memories; their `rule`
/// is recorded as [`Rule::Sum`] and `q` as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexHeader {
    pub kind: IndexKind,
    pub variant: Variant,
    pub rule: Rule,
    pub dim: usize,
    pub q: usize,
    pub n: usize,
}

fn read_header(r: &mut FileReader) -> Result<IndexHeader> {
    r.tag(MAGIC, "magic")?;
    let at = r.offset();
    let kind = IndexKind::from_code(r.u8()?)
        .ok_or_else(|| r.fail_at(at, "unknown index kind code"))?;
    let at = r.offset();
    let variant = Variant::from_code(r.u8()?)
        .ok_or_else(|| r.fail_at(at, "unknown pattern variant code"))?;
    let at = r.offset();
    let rule =
        Rule::from_code(r.u8()?).ok_or_else(|| r.fail_at(at, "unknown combination rule code"))?;
    let at = r.offset();
    let dim = r.u32_le()? as usize;
    if dim == 0 {
        return Err(r.fail_at(at, "dimension must be positive"));
    }
    let q = r.u32_le()? as usize;
    let n = r.u64_le()? as usize;
    Ok(IndexHeader {
        kind,
        variant,
        rule,
        dim,
        q,
        n,
    })
}

/// Reads just the fixed header, for dispatching on kind and variant without
/// loading the body.
pub fn peek_header(path: &Path) -> Result<IndexHeader> {
    read_header(&mut FileReader::open(path)?)
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn write_header(
    w: &mut impl Write,
    kind: IndexKind,
    variant: Variant,
    rule: Rule,
    dim: usize,
    q: usize,
    n: usize,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[kind.code(), variant.code(), rule.code()])?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(q as u32).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    Ok(())
}

fn write_class_section<P: Pattern>(
    w: &mut impl Write,
    members: &[usize],
    memory: &MemoryMatrix<P>,
) -> Result<()> {
    w.write_all(&(members.len() as u64).to_le_bytes())?;
    for &id in members {
        w.write_all(&(id as u64).to_le_bytes())?;
    }
    for &cell in memory.cells() {
        w.write_all(&cell.to_le_bytes())?;
    }
    Ok(())
}

fn write_anchor_section(w: &mut impl Write, idx: &AnchorIndex) -> Result<()> {
    w.write_all(ANCHOR_TAG)?;
    w.write_all(&(idx.r() as u64).to_le_bytes())?;
    for (aid, list) in idx.anchor_ids().iter().zip(idx.attachments()) {
        w.write_all(&(*aid as u64).to_le_bytes())?;
        w.write_all(&(list.len() as u64).to_le_bytes())?;
        for &id in list {
            w.write_all(&(id as u64).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Serializes a partitioned index (kind 0).
pub fn write_partitioned<P: Pattern>(path: &Path, idx: &PartitionedIndex<P>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        IndexKind::Partitioned,
        P::VARIANT,
        idx.rule(),
        idx.dim(),
        idx.q(),
        idx.n(),
    )?;
    for (members, memory) in idx.classes().iter().zip(idx.memories()) {
        write_class_section(&mut w, members, memory)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes a stand-alone anchor index (kind 1). The anchor structure
/// itself is pattern-free, so the variant and collection shape are passed
/// explicitly for the header.
pub fn write_anchor(
    path: &Path,
    idx: &AnchorIndex,
    variant: Variant,
    dim: usize,
    n: usize,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, IndexKind::Anchor, variant, Rule::Sum, dim, 0, n)?;
    write_anchor_section(&mut w, idx)?;
    w.flush()?;
    Ok(())
}

/// Serializes a hybrid index (kind 2).
pub fn write_hybrid<P: Pattern>(path: &Path, idx: &HybridIndex<P>) -> Result<()> {
    let outer = idx.outer();
    let mut w = BufWriter::new(File::create(path)?);
    write_header(
        &mut w,
        IndexKind::Hybrid,
        P::VARIANT,
        outer.rule(),
        outer.dim(),
        outer.q(),
        outer.n(),
    )?;
    for (members, memory) in outer.classes().iter().zip(outer.memories()) {
        write_class_section(&mut w, members, memory)?;
    }
    for anchors in idx.inner() {
        write_anchor_section(&mut w, anchors)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

fn expect_variant<P: Pattern>(r: &FileReader, header: &IndexHeader) -> Result<()> {
    if header.variant != P::VARIANT {
        return Err(r.fail_at(
            7,
            format!(
                "file stores {} patterns, requested {}",
                header.variant,
                P::VARIANT
            ),
        ));
    }
    Ok(())
}

/// Checks every memory invariant the builder guarantees, reporting against
/// the byte offset where the class's cells begin.
fn validate_cells<P: Pattern>(
    r: &FileReader,
    cells_at: u64,
    class_id: usize,
    cells: &[P::Score],
    dim: usize,
    rule: Rule,
    stored_count: usize,
) -> Result<()> {
    let complain = |msg: String| r.fail_at(cells_at, format!("class {class_id}: {msg}"));
    for i in 0..dim {
        for j in 0..i {
            if cells[i * dim + j].total_cmp(&cells[j * dim + i]) != std::cmp::Ordering::Equal {
                return Err(complain(format!("cell ({i},{j}) breaks symmetry")));
            }
        }
    }
    let k = stored_count as f64;
    for (pos, cell) in cells.iter().enumerate() {
        let v = cell.as_f64();
        if !v.is_finite() {
            return Err(complain(format!("cell {pos} is not finite")));
        }
        match (rule, P::VARIANT) {
            (Rule::Max, _) if v != 0.0 && v != 1.0 => {
                return Err(complain(format!("max-rule cell {pos} is {v}, not 0/1")));
            }
            (Rule::Sum, Variant::Sparse) if !(0.0..=k).contains(&v) => {
                return Err(complain(format!(
                    "sparse cell {pos} is {v}, outside 0..={stored_count}"
                )));
            }
            (Rule::Sum, Variant::Dense) if !(-k..=k).contains(&v) => {
                return Err(complain(format!(
                    "dense cell {pos} is {v}, outside ±{stored_count}"
                )));
            }
            _ => {}
        }
    }
    if rule == Rule::Sum && P::VARIANT == Variant::Dense {
        for i in 0..dim {
            if cells[i * dim + i].as_f64() != k {
                return Err(complain(format!(
                    "diagonal cell {i} must equal stored count {stored_count}"
                )));
            }
        }
    }
    Ok(())
}

fn read_class_section<P: Pattern>(
    r: &mut FileReader,
    class_id: usize,
    header: &IndexHeader,
) -> Result<(Vec<usize>, MemoryMatrix<P>)> {
    let count = r.count(8, "class member count")?;
    let members = r.id_list(count, header.n, "member")?;
    let cells_at = r.offset();
    let mut cells = Vec::with_capacity(header.dim * header.dim);
    let mut buf = [0u8; 8];
    for _ in 0..header.dim * header.dim {
        r.fill(&mut buf)?;
        cells.push(P::Score::from_le_bytes(buf));
    }
    validate_cells::<P>(r, cells_at, class_id, &cells, header.dim, header.rule, count)?;
    let memory = MemoryMatrix::from_raw(header.dim, header.rule, cells, count)?;
    Ok((members, memory))
}

/// Reads the anchor section and validates it against its member universe
/// (the whole collection, or one class for hybrids).
fn read_anchor_section(r: &mut FileReader, universe: &[usize], n: usize) -> Result<AnchorIndex> {
    let section_at = r.offset();
    r.tag(ANCHOR_TAG, "anchor section tag")?;
    let rr = r.count(16, "anchor count")?;
    let mut anchor_ids = Vec::with_capacity(rr);
    let mut attachments = Vec::with_capacity(rr);
    for _ in 0..rr {
        let at = r.offset();
        let aid = r.u64_le()?;
        if aid >= n as u64 {
            return Err(r.fail_at(at, format!("anchor id {aid} out of range (n={n})")));
        }
        anchor_ids.push(aid as usize);
        let count = r.count(8, "attachment count")?;
        attachments.push(r.id_list(count, n, "attached member")?);
    }
    let idx = AnchorIndex::from_parts(anchor_ids, attachments)
        .map_err(|e| r.fail_at(section_at, e.to_string()))?;

    let mut covered: Vec<usize> = idx.attachments().concat();
    covered.sort_unstable();
    let mut expected = universe.to_vec();
    expected.sort_unstable();
    if covered != expected {
        return Err(r.fail_at(
            section_at,
            "attachments do not partition the member universe",
        ));
    }
    if !idx.anchor_ids().iter().all(|aid| universe.contains(aid)) {
        return Err(r.fail_at(section_at, "anchor outside its member universe"));
    }
    Ok(idx)
}

/// Loads a partitioned index, re-validating the partition and all memory
/// invariants. `P` must match the stored variant.
pub fn read_partitioned<P: Pattern>(path: &Path) -> Result<PartitionedIndex<P>> {
    let mut r = FileReader::open(path)?;
    let header = read_header(&mut r)?;
    if header.kind != IndexKind::Partitioned {
        return Err(r.fail_at(6, format!("expected a partitioned index, found {}", header.kind)));
    }
    expect_variant::<P>(&r, &header)?;
    let mut classes = Vec::with_capacity(header.q);
    let mut memories = Vec::with_capacity(header.q);
    for class_id in 0..header.q {
        let (members, memory) = read_class_section::<P>(&mut r, class_id, &header)?;
        classes.push(members);
        memories.push(memory);
    }
    r.finish()?;
    PartitionedIndex::from_parts(header.dim, header.rule, classes, memories, header.n)
        .map_err(|e| r.fail_at(0, e.to_string()))
}

/// Loads a stand-alone anchor index along with its header (which carries the
/// variant, dimension, and collection size it was built for).
pub fn read_anchor(path: &Path) -> Result<(AnchorIndex, IndexHeader)> {
    let mut r = FileReader::open(path)?;
    let header = read_header(&mut r)?;
    if header.kind != IndexKind::Anchor {
        return Err(r.fail_at(6, format!("expected an anchor index, found {}", header.kind)));
    }
    let universe: Vec<usize> = (0..header.n).collect();
    let idx = read_anchor_section(&mut r, &universe, header.n)?;
    r.finish()?;
    Ok((idx, header))
}

/// Loads a hybrid index, re-validating both stages.
pub fn read_hybrid<P: Pattern>(path: &Path) -> Result<HybridIndex<P>> {
    let mut r = FileReader::open(path)?;
    let header = read_header(&mut r)?;
    if header.kind != IndexKind::Hybrid {
        return Err(r.fail_at(6, format!("expected a hybrid index, found {}", header.kind)));
    }
    expect_variant::<P>(&r, &header)?;
    let mut classes = Vec::with_capacity(header.q);
    let mut memories = Vec::with_capacity(header.q);
    for class_id in 0..header.q {
        let (members, memory) = read_class_section::<P>(&mut r, class_id, &header)?;
        classes.push(members);
        memories.push(memory);
    }
    let mut inner = Vec::with_capacity(header.q);
    for class in &classes {
        inner.push(read_anchor_section(&mut r, class, header.n)?);
    }
    r.finish()?;
    let outer = PartitionedIndex::from_parts(header.dim, header.rule, classes, memories, header.n)
        .map_err(|e| r.fail_at(0, e.to_string()))?;
    HybridIndex::from_parts(outer, inner).map_err(|e| r.fail_at(0, e.to_string()))
}
