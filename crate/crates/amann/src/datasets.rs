//! Dataset loading and preprocessing: the texmex vector containers
//! (fvecs/bvecs/ivecs), the MNIST idx image format, sparse CSV tables, and
//! the center-then-normalize projection applied to real-valued data before
//! indexing.
//!
//! Every loader has a matching writer and the round trip is byte-exact;
//! malformed input is rejected with the byte offset of the defect.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::bytes::FileReader;
use crate::error::{Error, Result};
use crate::pattern::{Pattern, RealPattern, SparsePattern, Variant};

// ---------------------------------------------------------------------------
// texmex containers: fvecs / bvecs / ivecs
// ---------------------------------------------------------------------------

/// Per-record entry width and reader for the three texmex containers, which
/// share the layout `dim: i32 LE, then dim entries`.
fn load_vecs<T>(
    path: &Path,
    elem_bytes: u64,
    mut read_elem: impl FnMut(&mut FileReader) -> Result<T>,
) -> Result<Vec<Vec<T>>> {
    let mut r = FileReader::open(path)?;
    let mut out: Vec<Vec<T>> = Vec::new();
    let mut dim = 0usize;
    while !r.at_eof() {
        let at = r.offset();
        let header = r.i32_le()?;
        if header <= 0 {
            return Err(r.fail_at(at, format!("vector dimension {header} must be positive")));
        }
        if out.is_empty() {
            dim = header as usize;
        } else if header as usize != dim {
            return Err(r.fail_at(
                at,
                format!("vector {} has dimension {header}, expected {dim}", out.len()),
            ));
        }
        r.check_fits(at, header as u64, elem_bytes, "vector dimension")?;
        let mut entries = Vec::with_capacity(dim);
        for _ in 0..dim {
            entries.push(read_elem(&mut r)?);
        }
        out.push(entries);
    }
    if out.is_empty() {
        return Err(r.fail("file contains no vectors"));
    }
    Ok(out)
}

/// Loads an fvecs file (float32 entries) as real patterns.
pub fn load_fvecs(path: &Path) -> Result<Vec<RealPattern>> {
    let rows = load_vecs(path, 4, |r| {
        let at = r.offset();
        let v = r.f32_le()?;
        if !v.is_finite() {
            return Err(r.fail_at(at, "entry is not a finite float"));
        }
        Ok(f64::from(v))
    })?;
    rows.into_iter().map(RealPattern::new).collect()
}

/// Loads a bvecs file (uint8 entries) as raw byte vectors.
pub fn load_bvecs(path: &Path) -> Result<Vec<Vec<u8>>> {
    load_vecs(path, 1, |r| r.u8())
}

/// Loads an ivecs file (int32 entries), the container used for ground-truth
/// neighbor lists.
pub fn load_ivecs(path: &Path) -> Result<Vec<Vec<i32>>> {
    load_vecs(path, 4, |r| r.i32_le())
}

fn write_vecs<T: Copy>(
    path: &Path,
    rows: &[Vec<T>],
    mut write_elem: impl FnMut(&mut BufWriter<File>, T) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for &v in row {
            write_elem(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes real patterns as fvecs. Entries are stored as float32, the
/// format's native width.
pub fn write_fvecs(path: &Path, patterns: &[RealPattern]) -> Result<()> {
    let rows: Vec<Vec<f64>> = patterns.iter().map(|p| p.entries().to_vec()).collect();
    write_vecs(path, &rows, |w, v| w.write_all(&(v as f32).to_le_bytes()))
}

pub fn write_bvecs(path: &Path, rows: &[Vec<u8>]) -> Result<()> {
    write_vecs(path, rows, |w, v| w.write_all(&[v]))
}

pub fn write_ivecs(path: &Path, rows: &[Vec<i32>]) -> Result<()> {
    write_vecs(path, rows, |w, v| w.write_all(&v.to_le_bytes()))
}

/// Exact size in bytes of an fvecs file holding `count` vectors of dimension
/// `dim` — a cheap consistency check before a long load.
pub fn fvecs_file_size(count: u64, dim: u64) -> u64 {
    count * (4 + 4 * dim)
}

/// Converts raw byte vectors (bvecs) to real patterns by casting each entry.
pub fn bvecs_to_real(rows: &[Vec<u8>]) -> Result<Vec<RealPattern>> {
    rows.iter()
        .map(|row| RealPattern::new(row.iter().map(|&b| f64::from(b)).collect()))
        .collect()
}

// ---------------------------------------------------------------------------
// MNIST idx images
// ---------------------------------------------------------------------------

const MNIST_MAGIC: u32 = 0x0000_0803;
const MNIST_SIDE: usize = 28;
/// Flattened image dimension; the loaders insist on 28×28 images.
pub const MNIST_DIM: usize = MNIST_SIDE * MNIST_SIDE;

/// Loads an idx3 image file as real patterns: big-endian header (magic,
/// count, rows, cols), then one byte per pixel. Pixels are scaled to [0,1];
/// centering/normalization is a separate step.
pub fn load_mnist_images(path: &Path) -> Result<Vec<RealPattern>> {
    let mut r = FileReader::open(path)?;
    let at = r.offset();
    let magic = r.u32_be()?;
    if magic != MNIST_MAGIC {
        return Err(r.fail_at(at, format!("bad idx3 magic {magic:#010x}, expected {MNIST_MAGIC:#010x}")));
    }
    let at = r.offset();
    let count = r.u32_be()? as u64;
    let rows_at = r.offset();
    let rows = r.u32_be()? as usize;
    let cols_at = r.offset();
    let cols = r.u32_be()? as usize;
    if rows != MNIST_SIDE {
        return Err(r.fail_at(rows_at, format!("image rows {rows}, expected {MNIST_SIDE}")));
    }
    if cols != MNIST_SIDE {
        return Err(r.fail_at(cols_at, format!("image cols {cols}, expected {MNIST_SIDE}")));
    }
    r.check_fits(at, count, MNIST_DIM as u64, "image count")?;
    let mut out = Vec::with_capacity(count as usize);
    let mut pixels = [0u8; MNIST_DIM];
    for _ in 0..count {
        r.fill(&mut pixels)?;
        let entries = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        out.push(RealPattern::new(entries)?);
    }
    r.finish()?;
    Ok(out)
}

/// Writes 28×28 images (flattened, one byte per pixel) as an idx3 file.
pub fn write_mnist_images(path: &Path, images: &[Vec<u8>]) -> Result<()> {
    for (i, img) in images.iter().enumerate() {
        if img.len() != MNIST_DIM {
            return Err(Error::param(format!(
                "image {i} has {} pixels, expected {MNIST_DIM}",
                img.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MNIST_MAGIC.to_be_bytes())?;
    w.write_all(&(images.len() as u32).to_be_bytes())?;
    w.write_all(&(MNIST_SIDE as u32).to_be_bytes())?;
    w.write_all(&(MNIST_SIDE as u32).to_be_bytes())?;
    for img in images {
        w.write_all(img)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sparse CSV
// ---------------------------------------------------------------------------

/// Loads a CSV table as sparse patterns: one row per vector, exactly `dim`
/// numeric columns, any nonzero value marking an active coordinate. With
/// `has_header` the first line is skipped.
pub fn load_sparse_csv(path: &Path, dim: usize, has_header: bool) -> Result<Vec<SparsePattern>> {
    if dim == 0 {
        return Err(Error::param("pattern dimension must be positive"));
    }
    let display = path.display().to_string();
    let fail = |offset: u64, message: String| Error::Format {
        path: display.clone(),
        offset,
        message,
    };
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for (line_idx, raw) in content.split_inclusive('\n').enumerate() {
        let line_start = offset;
        offset += raw.len() as u64;
        let line = raw.trim_end_matches(['\n', '\r']);
        let line_no = line_idx + 1;
        if line_idx == 0 && has_header {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut active = Vec::new();
        let mut cols = 0usize;
        for (ci, cell) in line.split(',').enumerate() {
            cols += 1;
            let v: f64 = cell.trim().parse().map_err(|_| {
                fail(
                    line_start,
                    format!("line {line_no}: column {} is not numeric: {cell:?}", ci + 1),
                )
            })?;
            if v != 0.0 {
                active.push(ci as u32);
            }
        }
        if cols != dim {
            return Err(fail(
                line_start,
                format!("line {line_no}: expected {dim} columns, found {cols}"),
            ));
        }
        out.push(SparsePattern::new(dim, active)?);
    }
    if out.is_empty() {
        return Err(fail(0, "file contains no data rows".into()));
    }
    Ok(out)
}

/// Writes sparse patterns as a headerless 0/1 CSV table.
pub fn write_sparse_csv(path: &Path, patterns: &[SparsePattern]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in patterns {
        let mut row = vec![b'0'; p.dim()];
        for &i in p.active() {
            row[i as usize] = b'1';
        }
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            w.write_all(&[*cell])?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Centers every vector on the base-set mean, then scales each to unit L2
/// norm. Queries are centered with the *base* mean so no query statistics
/// leak into the representation. A vector that coincides with the mean has
/// no direction left and is rejected by position.
pub fn preprocess_center_normalize(
    base: &[RealPattern],
    queries: &[RealPattern],
) -> Result<(Vec<RealPattern>, Vec<RealPattern>)> {
    let first = base
        .first()
        .ok_or_else(|| Error::param("base set must be nonempty"))?;
    let dim = first.dim();
    let mut mean = vec![0.0f64; dim];
    for p in base {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        for (m, e) in mean.iter_mut().zip(p.entries()) {
            *m += e;
        }
    }
    let inv = 1.0 / base.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }

    let transform = |p: &RealPattern, what: &str, i: usize| -> Result<RealPattern> {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        let mut centered: Vec<f64> = p
            .entries()
            .iter()
            .zip(&mean)
            .map(|(e, m)| e - m)
            .collect();
        let norm = centered.iter().map(|e| e * e).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::param(format!(
                "{what} vector {i} equals the base mean and has zero norm after centering"
            )));
        }
        for e in &mut centered {
            *e /= norm;
        }
        RealPattern::new(centered)
    };

    let base_out = base
        .iter()
        .enumerate()
        .map(|(i, p)| transform(p, "base", i))
        .collect::<Result<Vec<_>>>()?;
    let query_out = queries
        .iter()
        .enumerate()
        .map(|(i, p)| transform(p, "query", i))
        .collect::<Result<Vec<_>>>()?;
    Ok((base_out, query_out))
}

// ---------------------------------------------------------------------------
// Reference dataset descriptions
// ---------------------------------------------------------------------------

/// Shape of a standard evaluation dataset, used to sanity-check loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: &'static str,
    pub n_base: usize,
    pub n_query: usize,
    pub dim: usize,
    pub variant: Variant,
    /// Conventional distribution file names (base, queries).
    pub sources: (&'static str, &'static str),
}

impl DatasetMeta {
    /// Checks loaded shapes against the declared ones.
    pub fn check(&self, n_base: usize, n_query: usize, dim: usize) -> Result<()> {
        if (n_base, n_query, dim) != (self.n_base, self.n_query, self.dim) {
            return Err(Error::param(format!(
                "{}: expected {}x{} base / {} queries, loaded {n_base}x{dim} / {n_query}",
                self.name, self.n_base, self.dim, self.n_query
            )));
        }
        Ok(())
    }
}

/// The four standard evaluation datasets. The binary transaction table is
/// queried with its own stored vectors, hence equal base and query counts.
pub fn reference_datasets() -> [DatasetMeta; 4] {
    [
        DatasetMeta {
            name: "mnist",
            n_base: 60_000,
            n_query: 10_000,
            dim: MNIST_DIM,
            variant: Variant::Real,
            sources: ("train-images-idx3-ubyte", "t10k-images-idx3-ubyte"),
        },
        DatasetMeta {
            name: "santander",
            n_base: 76_000,
            n_query: 76_000,
            dim: 369,
            variant: Variant::Sparse,
            sources: ("train.csv", "train.csv"),
        },
        DatasetMeta {
            name: "sift1m",
            n_base: 1_000_000,
            n_query: 10_000,
            dim: 128,
            variant: Variant::Real,
            sources: ("sift_base.fvecs", "sift_query.fvecs"),
        },
        DatasetMeta {
            name: "gist1m",
            n_base: 1_000_000,
            n_query: 1_000,
            dim: 960,
            variant: Variant::Real,
            sources: ("gist_base.fvecs", "gist_query.fvecs"),
        },
    ]
}
