//! Tensor serialization.
//!
//! A tensor is a header `{role, phys_dim, bond_dim, count}` followed by the
//! entries of its `count` matrices, each row-major as (re, im) pairs.
//!
//! * JSON mode: the header object with an extra `data` array of floats.
//! * Binary mode: the magic `AQTN`, a little-endian `u32` header length, the
//!   header as JSON, then the entries as little-endian `f64` pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::mps::{MpoTensor, MpsTensor};

const MAGIC: &[u8; 4] = b"AQTN";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Mps,
    Mpo,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub role: Role,
    pub phys_dim: usize,
    pub bond_dim: usize,
    /// Number of `bond_dim × bond_dim` matrices that follow.
    pub count: usize,
}

#[derive(Clone, Serialize, Deserialize)]
struct JsonTensor {
    #[serde(flatten)]
    header: Header,
    data: Vec<f64>,
}

/// Matrices plus header, the common form of every serializable tensor.
/// Its serde form is the JSON mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "JsonTensor", try_from = "JsonTensor")]
pub struct TensorRecord {
    pub header: Header,
    pub matrices: Vec<CMat>,
}

impl TensorRecord {
    pub fn from_mps(a: &MpsTensor) -> Self {
        Self {
            header: Header {
                role: Role::Mps,
                phys_dim: a.phys_dim,
                bond_dim: a.bond_dim,
                count: a.matrices.len(),
            },
            matrices: a.matrices.clone(),
        }
    }

    pub fn from_mpo(o: &MpoTensor) -> Self {
        Self {
            header: Header {
                role: Role::Mpo,
                phys_dim: o.phys_dim,
                bond_dim: o.bond_dim,
                count: o.matrices.len(),
            },
            matrices: o.matrices.clone(),
        }
    }

    pub fn from_boundary(x: &CMat) -> Self {
        Self {
            header: Header {
                role: Role::Boundary,
                phys_dim: 0,
                bond_dim: x.nrows(),
                count: 1,
            },
            matrices: vec![x.clone()],
        }
    }

    pub fn into_mps(self) -> Result<MpsTensor> {
        self.expect_role(Role::Mps)?;
        MpsTensor::new(self.matrices)
    }

    pub fn into_mpo(self) -> Result<MpoTensor> {
        self.expect_role(Role::Mpo)?;
        MpoTensor::new(self.header.phys_dim, self.matrices)
    }

    pub fn into_boundary(self) -> Result<CMat> {
        self.expect_role(Role::Boundary)?;
        self.matrices
            .into_iter()
            .next()
            .ok_or_else(|| Error::Format("boundary record holds no matrix".into()))
    }

    fn expect_role(&self, role: Role) -> Result<()> {
        if self.header.role != role {
            return Err(Error::Format(format!(
                "expected a {role:?} record, found {:?}",
                self.header.role
            )));
        }
        Ok(())
    }

    fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.header.count * self.header.bond_dim.pow(2));
        for m in &self.matrices {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    out.push(m[(i, j)].re);
                    out.push(m[(i, j)].im);
                }
            }
        }
        out
    }

    fn from_flat(header: Header, data: &[f64]) -> Result<Self> {
        let d = header.bond_dim;
        let expected = 2 * header.count * d * d;
        if data.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} floats, found {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite tensor entry".into()));
        }
        let matrices = data
            .chunks(2 * d * d)
            .map(|block| CMat::from_fn(d, d, |i, j| c64(block[2 * (i * d + j)], block[2 * (i * d + j) + 1])))
            .collect();
        Ok(Self { header, matrices })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&JsonTensor {
            header: self.header.clone(),
            data: self.flat(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: JsonTensor = serde_json::from_str(text)?;
        Self::from_flat(t.header, &t.data)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(8 + header.len() + 16 * self.header.count * self.header.bond_dim.pow(2));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing tensor magic".into()));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes")) as usize;
        let body = bytes
            .get(8..8 + len)
            .ok_or_else(|| Error::Format("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        let payload = &bytes[8 + len..];
        if payload.len() % 8 != 0 {
            return Err(Error::Format("payload is not a whole number of f64 values".into()));
        }
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect();
        Self::from_flat(header, &data)
    }
}

impl From<TensorRecord> for JsonTensor {
    fn from(r: TensorRecord) -> Self {
        let data = r.flat();
        JsonTensor { header: r.header, data }
    }
}

impl TryFrom<JsonTensor> for TensorRecord {
    type Error = Error;

    fn try_from(t: JsonTensor) -> Result<Self> {
        Self::from_flat(t.header, &t.data)
    }
}
