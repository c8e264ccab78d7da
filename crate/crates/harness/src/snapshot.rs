//! Binary field snapshots.
//!
//! Layout (little-endian): magic `OTDF`, `u32` version, `u8` model tag,
//! `u32` rank, one `u32` per dimension, `u8` dtype (0 = f64 real, 1 = f64
//! complex interleaved), the row-major payload, then a CRC32 of every
//! preceding byte.

use std::path::Path;

use crate::config::ModelKind;
use crate::error::HarnessError;

pub const MAGIC: &[u8; 4] = b"OTDF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Real,
    Complex,
}

impl DType {
    fn tag(self) -> u8 {
        match self {
            DType::Real => 0,
            DType::Complex => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub model: ModelKind,
    pub dims: Vec<u32>,
    pub dtype: DType,
    /// `prod(dims)` reals, or `2 prod(dims)` for complex data.
    pub data: Vec<f64>,
}

impl Snapshot {
    pub fn expected_len(dims: &[u32], dtype: DType) -> usize {
        let n: usize = dims.iter().map(|&d| d as usize).product();
        match dtype {
            DType::Real => n,
            DType::Complex => 2 * n,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        assert_eq!(self.data.len(), Self::expected_len(&self.dims, self.dtype), "snapshot payload size");
        let mut b = Vec::with_capacity(18 + 4 * self.dims.len() + 8 * self.data.len());
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.push(self.model.tag());
        b.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            b.extend_from_slice(&d.to_le_bytes());
        }
        b.push(self.dtype.tag());
        for x in &self.data {
            b.extend_from_slice(&x.to_le_bytes());
        }
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 4 + 4 + 1 + 4 + 1 + 4 {
            return Err(SnapshotError::Integrity("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if &body[..4] != MAGIC {
            return Err(SnapshotError::Integrity("bad magic".into()));
        }
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(SnapshotError::Integrity("CRC mismatch".into()));
        }
        let mut pos = 4;
        let u32_at = |pos: &mut usize| -> Result<u32, SnapshotError> {
            let s = body
                .get(*pos..*pos + 4)
                .ok_or_else(|| SnapshotError::Integrity("header truncated".into()))?;
            *pos += 4;
            Ok(u32::from_le_bytes(s.try_into().expect("4 bytes")))
        };
        let version = u32_at(&mut pos)?;
        if version != VERSION {
            return Err(SnapshotError::UnsupportedVersion(version));
        }
        let model = ModelKind::from_tag(body[pos])
            .ok_or_else(|| SnapshotError::Integrity(format!("unknown model tag {}", body[pos])))?;
        pos += 1;
        let rank = u32_at(&mut pos)? as usize;
        if rank > 8 {
            return Err(SnapshotError::Integrity(format!("implausible rank {rank}")));
        }
        let dims = (0..rank).map(|_| u32_at(&mut pos)).collect::<Result<Vec<_>, _>>()?;
        let dtype = match body.get(pos) {
            Some(0) => DType::Real,
            Some(1) => DType::Complex,
            other => return Err(SnapshotError::Integrity(format!("bad dtype {other:?}"))),
        };
        pos += 1;
        let payload = &body[pos..];
        let n = Self::expected_len(&dims, dtype);
        if payload.len() != 8 * n {
            return Err(SnapshotError::Integrity(format!(
                "payload holds {} bytes, header implies {}",
                payload.len(),
                8 * n
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            model,
            dims,
            dtype,
            data,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot integrity error: {0}")]
    Integrity(String),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), HarnessError> {
    std::fs::write(path, snap.encode()).map_err(|e| HarnessError::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, HarnessError> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Snapshot::decode(&bytes).map_err(|e| HarnessError::Snapshot {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> Snapshot {
        Snapshot {
            model: ModelKind::Kolmogorov,
            dims: vec![2, 128, 128],
            dtype: DType::Real,
            data: (0..2 * 128 * 128).map(|i| (i as f64).sin()).collect(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = field();
        let bytes = s.encode();
        assert_eq!(bytes.len(), 4 + 4 + 1 + 4 + 12 + 1 + 2 * 128 * 128 * 8 + 4);
        assert_eq!(Snapshot::decode(&bytes).unwrap(), s);
        let c = Snapshot {
            model: ModelKind::Mnls,
            dims: vec![4],
            dtype: DType::Complex,
            data: vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5, 0.0, 1e300, -2.0, 0.5],
        };
        let back = Snapshot::decode(&c.encode()).unwrap();
        assert!(back.data.iter().zip(&c.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = field().encode();
        let truncated = &bytes[..bytes.len() - 100];
        assert!(matches!(Snapshot::decode(truncated), Err(SnapshotError::Integrity(_))));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(Snapshot::decode(&flipped), Err(SnapshotError::Integrity(_))));
        let mut versioned = bytes[..bytes.len() - 4].to_vec();
        versioned[4] = 2;
        let crc = crc32fast::hash(&versioned);
        versioned.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(Snapshot::decode(&versioned), Err(SnapshotError::UnsupportedVersion(2)));
    }
}
