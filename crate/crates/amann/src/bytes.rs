//! Byte-level file reading with positional diagnostics, shared by the index
//! and dataset loaders. Every failure reports the byte offset where the
//! problem was detected, and declared element counts are checked against the
//! remaining file size before anything is allocated.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct FileReader {
    inner: BufReader<File>,
    path: String,
    offset: u64,
    len: u64,
}

impl FileReader {
    pub(crate) fn open(path: &Path) -> Result<FileReader> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        Ok(FileReader {
            inner: BufReader::new(file),
            path: path.display().to_string(),
            offset: 0,
            len,
        })
    }

    pub(crate) fn offset(&self) -> u64 {
        self.offset
    }

    pub(crate) fn remaining(&self) -> u64 {
        self.len.saturating_sub(self.offset)
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.offset == self.len
    }

    pub(crate) fn fail(&self, message: impl Into<String>) -> Error {
        self.fail_at(self.offset, message)
    }

    pub(crate) fn fail_at(&self, offset: u64, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        if let Err(e) = self.inner.read_exact(buf) {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                return Err(self.fail("unexpected end of file"));
            }
            return Err(e.into());
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub(crate) fn tag(&mut self, expected: &[u8; 6], what: &str) -> Result<()> {
        let at = self.offset;
        let mut buf = [0u8; 6];
        self.fill(&mut buf)?;
        if &buf != expected {
            return Err(self.fail_at(at, format!("bad {what}: expected {expected:?}")));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.fill(&mut buf)?;
        Ok(buf[0])
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.fill(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }

    pub(crate) fn i32_le(&mut self) -> Result<i32> {
        let mut buf = [0u8; 4];
        self.fill(&mut buf)?;
        Ok(i32::from_le_bytes(buf))
    }

    pub(crate) fn f32_le(&mut self) -> Result<f32> {
        let mut buf = [0u8; 4];
        self.fill(&mut buf)?;
        Ok(f32::from_le_bytes(buf))
    }

    pub(crate) fn u32_be(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.fill(&mut buf)?;
        Ok(u32::from_be_bytes(buf))
    }

    pub(crate) fn u64_le(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.fill(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }

    /// Reads a u64 count and checks that the elements it promises
    /// (`elem_bytes` each) fit in the rest of the file, so a corrupt count
    /// fails here instead of over-allocating.
    pub(crate) fn count(&mut self, elem_bytes: u64, what: &str) -> Result<usize> {
        let at = self.offset;
        let v = self.u64_le()?;
        self.check_fits(at, v, elem_bytes, what)?;
        Ok(v as usize)
    }

    /// Same preflight for a count obtained by other means (e.g. a big-endian
    /// or 32-bit header field).
    pub(crate) fn check_fits(
        &self,
        at: u64,
        count: u64,
        elem_bytes: u64,
        what: &str,
    ) -> Result<()> {
        if count
            .checked_mul(elem_bytes)
            .is_none_or(|need| need > self.remaining())
        {
            return Err(self.fail_at(at, format!("{what} {count} exceeds remaining file size")));
        }
        Ok(())
    }

    pub(crate) fn id_list(&mut self, count: usize, n: usize, what: &str) -> Result<Vec<usize>> {
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            let at = self.offset;
            let id = self.u64_le()?;
            if id >= n as u64 {
                return Err(self.fail_at(at, format!("{what} id {id} out of range (n={n})")));
            }
            ids.push(id as usize);
        }
        Ok(ids)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.offset != self.len {
            return Err(self.fail(format!("{} trailing bytes", self.len - self.offset)));
        }
        Ok(())
    }
}
