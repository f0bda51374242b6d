//! Loading and writing pattern collections in the supported file formats.

use std::path::Path;

use anyhow::{bail, Context};
use clap::ValueEnum;

use amann::datasets::{
    bvecs_to_real, load_bvecs, load_fvecs, load_ivecs, load_mnist_images, load_sparse_csv,
    preprocess_center_normalize,
};
use amann::pattern::{DensePattern, Pattern, RealPattern, SparsePattern, Variant};

/// Synthetic-data variants (real-valued data comes from files, not a
/// generator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum SynthVariant {
    Sparse,
    Dense,
}

impl SynthVariant {
    pub(crate) fn variant(self) -> Variant {
        match self {
            SynthVariant::Sparse => Variant::Sparse,
            SynthVariant::Dense => Variant::Dense,
        }
    }
}

impl std::str::FromStr for SynthVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<SynthVariant, String> {
        <SynthVariant as ValueEnum>::from_str(s, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum FileFormat {
    /// 32-bit floats, little-endian, 4-byte dimension prefix per vector.
    Fvecs,
    /// Unsigned bytes, 4-byte dimension prefix per vector.
    Bvecs,
    /// 32-bit integers (entries must be +-1), 4-byte dimension prefix.
    Ivecs,
    /// Text rows of numbers; nonzero cells mark active coordinates.
    Csv,
    /// idx3-ubyte image file; pixels are scaled to [0, 1].
    Mnist,
}

impl FileFormat {
    pub(crate) fn name(self) -> &'static str {
        match self {
            FileFormat::Fvecs => "fvecs",
            FileFormat::Bvecs => "bvecs",
            FileFormat::Ivecs => "ivecs",
            FileFormat::Csv => "csv",
            FileFormat::Mnist => "mnist",
        }
    }
}

impl std::str::FromStr for FileFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<FileFormat, String> {
        <FileFormat as ValueEnum>::from_str(s, false)
    }
}

/// A loaded collection of one of the three pattern variants.
pub(crate) enum Collection {
    Sparse(Vec<SparsePattern>),
    Dense(Vec<DensePattern>),
    Real(Vec<RealPattern>),
}

impl Collection {
    pub(crate) fn len(&self) -> usize {
        match self {
            Collection::Sparse(v) => v.len(),
            Collection::Dense(v) => v.len(),
            Collection::Real(v) => v.len(),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        match self {
            Collection::Sparse(v) => v.first().map_or(0, Pattern::dim),
            Collection::Dense(v) => v.first().map_or(0, Pattern::dim),
            Collection::Real(v) => v.first().map_or(0, Pattern::dim),
        }
    }

    pub(crate) fn variant(&self) -> Variant {
        match self {
            Collection::Sparse(_) => Variant::Sparse,
            Collection::Dense(_) => Variant::Dense,
            Collection::Real(_) => Variant::Real,
        }
    }

    pub(crate) fn truncate(&mut self, limit: usize) {
        match self {
            Collection::Sparse(v) => v.truncate(limit),
            Collection::Dense(v) => v.truncate(limit),
            Collection::Real(v) => v.truncate(limit),
        }
    }
}

/// Reads a collection. `dim` is required by the csv format (the column
/// count), ignored elsewhere.
pub(crate) fn load_collection(
    path: &Path,
    format: FileFormat,
    dim: Option<usize>,
    has_header: bool,
) -> anyhow::Result<Collection> {
    let collection = match format {
        FileFormat::Fvecs => Collection::Real(load_fvecs(path)?),
        FileFormat::Bvecs => Collection::Real(bvecs_to_real(&load_bvecs(path)?)?),
        FileFormat::Mnist => Collection::Real(load_mnist_images(path)?),
        FileFormat::Csv => {
            let dim = dim.context("--dim is required for csv collections")?;
            Collection::Sparse(load_sparse_csv(path, dim, has_header)?)
        }
        FileFormat::Ivecs => {
            let rows = load_ivecs(path)?;
            let mut patterns = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let signs: Vec<i8> = row
                    .iter()
                    .map(|&v| {
                        i8::try_from(v)
                            .ok()
                            .filter(|s| *s == 1 || *s == -1)
                            .with_context(|| {
                                format!("{}: vector {i} has entry {v}, expected +-1", path.display())
                            })
                    })
                    .collect::<anyhow::Result<_>>()?;
                patterns.push(DensePattern::from_signs(&signs)?);
            }
            Collection::Dense(patterns)
        }
    };
    if collection.len() == 0 {
        bail!("{}: no vectors loaded", path.display());
    }
    Ok(collection)
}

/// Centers with the base mean and normalizes both sets; real-valued data
/// only.
pub(crate) fn preprocess(
    base: Collection,
    queries: Collection,
) -> anyhow::Result<(Collection, Collection)> {
    match (base, queries) {
        (Collection::Real(b), Collection::Real(q)) => {
            let (b, q) = preprocess_center_normalize(&b, &q)?;
            Ok((Collection::Real(b), Collection::Real(q)))
        }
        _ => bail!("--preprocess applies to real-valued collections only"),
    }
}

/// [`preprocess`] for a base collection alone.
pub(crate) fn preprocess_base(base: Collection) -> anyhow::Result<Collection> {
    match base {
        Collection::Real(b) => {
            let (b, _) = preprocess_center_normalize(&b, &[])?;
            Ok(Collection::Real(b))
        }
        _ => bail!("--preprocess applies to real-valued collections only"),
    }
}
