//! Versioned little-endian binary container for bases and vector sets.
//!
//! Layout: 8-byte magic `SHMFLD\0\0`, `u32` version, `u32` kind, then a
//! kind-specific payload of `u64` dimensions and `f64` values.
//!
//! * kind 1, POD basis: `rows`, `rank`, modes (column-major), singular values, center.
//! * kind 2, vector set: `len`, `count`, vectors one after another.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pod::PodBasis;

pub const MAGIC: &[u8; 8] = b"SHMFLD\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
enum Kind {
    PodBasis = 1,
    VectorSet = 2,
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: Kind) -> Self {
        let mut w = Self(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.0.extend_from_slice(&(kind as u32).to_le_bytes());
        w
    }

    fn dim(&mut self, n: usize) {
        self.0.extend_from_slice(&(n as u64).to_le_bytes());
    }

    fn values<'a>(&mut self, v: impl IntoIterator<Item = &'a f64>) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], expected: Kind) -> Result<Self> {
        let mut r = Self { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Artifact(
                "not a shapemanifold artifact (bad magic)".into(),
            ));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Artifact(format!(
                "unsupported artifact version {version} (expected {VERSION})"
            )));
        }
        let kind = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if kind != expected as u32 {
            return Err(Error::Artifact(format!(
                "artifact kind {kind}, expected {}",
                expected as u32
            )));
        }
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Artifact(format!(
                    "truncated artifact: needed {n} bytes at offset {}",
                    self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn dim(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v)
            .map_err(|_| Error::Artifact(format!("dimension {v} does not fit in memory")))
    }

    fn values(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Artifact("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Artifact(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_pod(basis: &PodBasis) -> Vec<u8> {
    let mut w = Writer::new(Kind::PodBasis);
    w.dim(basis.snapshot_len());
    w.dim(basis.rank());
    w.values(basis.modes().as_slice());
    w.values(basis.singular_values().as_slice());
    w.values(basis.center().as_slice());
    w.0
}

pub fn decode_pod(bytes: &[u8]) -> Result<PodBasis> {
    let mut r = Reader::open(bytes, Kind::PodBasis)?;
    let rows = r.dim()?;
    let rank = r.dim()?;
    let modes = DMatrix::from_vec(rows, rank, r.values(rows * rank)?);
    let sigma = DVector::from_vec(r.values(rank)?);
    let center = DVector::from_vec(r.values(rows)?);
    r.finish()?;
    PodBasis::from_parts(modes, sigma, center).map_err(|e| Error::Artifact(e.to_string()))
}

pub fn encode_vectors(vectors: &[DVector<f64>]) -> Result<Vec<u8>> {
    let len = vectors.first().map_or(0, |v| v.len());
    if let Some(v) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: v.len(),
        });
    }
    let mut w = Writer::new(Kind::VectorSet);
    w.dim(len);
    w.dim(vectors.len());
    for v in vectors {
        w.values(v.as_slice());
    }
    Ok(w.0)
}

pub fn decode_vectors(bytes: &[u8]) -> Result<Vec<DVector<f64>>> {
    let mut r = Reader::open(bytes, Kind::VectorSet)?;
    let len = r.dim()?;
    let count = r.dim()?;
    let out = (0..count)
        .map(|_| r.values(len).map(DVector::from_vec))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(out)
}
