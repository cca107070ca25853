//! TLAB1 field files: magic, a JSON header, a little-endian row-major complex
//! payload and a SHA-256 trailer over everything before it.
//!
//! Layout: `b"TLAB1"`, u32 LE header length, header bytes, payload, 32-byte digest.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::C64;

pub const MAGIC: &[u8; 5] = b"TLAB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Complex64,
    Complex128,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::Complex64 => 8,
            Dtype::Complex128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub dtype: Dtype,
    /// [J?, N, (N)]; a leading time axis is present for tent fields.
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub header: Header,
    pub values: Vec<C64>,
}

impl FieldFile {
    pub fn new(dtype: Dtype, dims: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != values.len() {
            return Err(Error::Format(format!("dims {dims:?} do not match {} values", values.len())));
        }
        Ok(Self { header: Header { dtype, dims }, values })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(5 + 4 + header.len() + self.values.len() * self.header.dtype.width() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            match self.header.dtype {
                Dtype::Complex64 => {
                    out.extend_from_slice(&(v.re as f32).to_le_bytes());
                    out.extend_from_slice(&(v.im as f32).to_le_bytes());
                }
                Dtype::Complex128 => {
                    out.extend_from_slice(&v.re.to_le_bytes());
                    out.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 + 4 + 32 || &bytes[..5] != MAGIC {
            return Err(Error::Format("missing TLAB1 magic".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("checksum mismatch".into()));
        }
        let hlen = u32::from_le_bytes(body[5..9].try_into().unwrap()) as usize;
        if 9 + hlen > body.len() {
            return Err(Error::Format("header length exceeds file".into()));
        }
        let header: Header = serde_json::from_slice(&body[9..9 + hlen]).map_err(|e| Error::Format(format!("bad header: {e}")))?;
        let payload = &body[9 + hlen..];
        let n: usize = header.dims.iter().product();
        let w = header.dtype.width();
        if header.dims.is_empty() || payload.len() != n * w {
            return Err(Error::Format(format!("payload has {} bytes, header {:?} needs {}", payload.len(), header.dims, n * w)));
        }
        let values = payload
            .chunks_exact(w)
            .map(|c| match header.dtype {
                Dtype::Complex64 => C64::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
                ),
                Dtype::Complex128 => C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                ),
            })
            .collect();
        Ok(Self { header, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Spatial shape (dims without a leading time axis) given the grid dimension.
    pub fn spatial_cells(&self, dim: usize) -> usize {
        self.header.dims.iter().rev().take(dim).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let vals = vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)];
        let f = FieldFile::new(Dtype::Complex128, vec![2], vals.clone()).unwrap();
        let b = f.to_bytes().unwrap();
        assert_eq!(&b[..5], b"TLAB1");
        let hlen = u32::from_le_bytes(b[5..9].try_into().unwrap()) as usize;
        assert_eq!(&b[9..9 + hlen], br#"{"dtype":"complex128","dims":[2]}"#);
        assert_eq!(&b[9 + hlen..9 + hlen + 8], &1.0f64.to_le_bytes());
        assert_eq!(b.len(), 9 + hlen + 32 + 32);
        assert_eq!(FieldFile::from_bytes(&b).unwrap(), f);
        let g = FieldFile::new(Dtype::Complex64, vec![1, 2], vals).unwrap();
        assert_eq!(FieldFile::from_bytes(&g.to_bytes().unwrap()).unwrap(), g);
    }

    #[test]
    fn rejects_corruption() {
        let f = FieldFile::new(Dtype::Complex128, vec![1], vec![C64::new(3.0, 0.0)]).unwrap();
        let mut b = f.to_bytes().unwrap();
        let k = b.len() - 40;
        b[k] ^= 1;
        assert!(FieldFile::from_bytes(&b).is_err());
        assert!(FieldFile::from_bytes(b"TLAB0").is_err());
        assert!(FieldFile::new(Dtype::Complex64, vec![3], vec![]).is_err());
    }
}
