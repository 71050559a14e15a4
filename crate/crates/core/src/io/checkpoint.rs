//! The `GMKD1` tensor container.
//!
//! ```text
//! magic    "GMKD1"                      5 bytes
//! version  u16 = 1
//! count    u32
//! record × count:
//!   name_len u16, name (UTF-8)
//!   dtype    u8 (0 = f32, 1 = f64)
//!   ndim     u8, dims u32 × ndim
//!   data     little-endian, product(dims) elements
//!   crc32    u32 over every preceding byte of the record
//! ```
//!
//! All integers are little-endian. Nothing may follow the last record.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::numerics::{DType, Element, ParamStore, Tensor};

pub const MAGIC: &[u8; 5] = b"GMKD1";
pub const VERSION: u16 = 1;
/// Size of a container with no records.
pub const HEADER_LEN: usize = 11;

/// A tensor of either supported precision.
#[derive(Debug, Clone)]
pub enum AnyTensor {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    /// Wraps a tensor of either element type, keeping its precision.
    pub fn from_tensor<T: Element>(t: Tensor<T>) -> Self {
        match T::DTYPE {
            DType::F32 => AnyTensor::F32(t.cast()),
            DType::F64 => AnyTensor::F64(t.cast()),
        }
    }

    /// Converts to `T`, casting if the stored precision differs.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
        }
    }

    /// Same dtype, shape and bit patterns.
    pub fn bit_eq(&self, other: &AnyTensor) -> bool {
        match (self, other) {
            (AnyTensor::F32(a), AnyTensor::F32(b)) => a.bit_eq(b),
            (AnyTensor::F64(a), AnyTensor::F64(b)) => a.bit_eq(b),
            _ => false,
        }
    }
}

impl From<Tensor<f32>> for AnyTensor {
    fn from(t: Tensor<f32>) -> Self {
        AnyTensor::F32(t)
    }
}

impl From<Tensor<f64>> for AnyTensor {
    fn from(t: Tensor<f64>) -> Self {
        AnyTensor::F64(t)
    }
}

/// Named tensors in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    tensors: IndexMap<String, AnyTensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: impl Into<AnyTensor>) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::Config(format!(
                "tensor name of {} bytes is too long",
                name.len()
            )));
        }
        if self.tensors.contains_key(&name) {
            return Err(Error::Config(format!("duplicate tensor name {name:?}")));
        }
        self.tensors.insert(name, t.into());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&AnyTensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AnyTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn bit_eq(&self, other: &Checkpoint) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .zip(other.iter())
                .all(|((na, a), (nb, b))| na == nb && a.bit_eq(b))
    }

    pub fn from_params<T: Element>(params: &ParamStore<T>) -> Self {
        let mut ck = Checkpoint::new();
        for (name, t) in params.iter() {
            ck.tensors
                .insert(name.to_string(), AnyTensor::from_tensor(t.clone()));
        }
        ck
    }

    /// All tensors as a parameter store of precision `T`.
    pub fn to_params<T: Element>(&self) -> Result<ParamStore<T>> {
        let mut store = ParamStore::new();
        for (name, t) in self.iter() {
            store.insert(name, t.to_tensor())?;
        }
        Ok(store)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let start = out.len();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.dtype().code());
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match t {
                AnyTensor::F32(t) => t
                    .contiguous()
                    .data()
                    .iter()
                    .for_each(|v| v.write_le(&mut out)),
                AnyTensor::F64(t) => t
                    .contiguous()
                    .data()
                    .iter()
                    .for_each(|v| v.write_le(&mut out)),
            }
            let crc = crc32fast::hash(&out[start..]);
            out.extend_from_slice(&crc.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(format_error(0, "bad magic, not a GMKD1 container"));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(format_error(5, format!("unsupported version {version}")));
        }
        let count = r.u32("tensor count")?;
        let mut ck = Checkpoint::new();
        for i in 0..count {
            let start = r.pos;
            let name_len = r.u16("name length")? as usize;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| {
                    format_error(name_at as u64, format!("record {i}: name is not UTF-8"))
                })?
                .to_string();
            let dtype_at = r.pos;
            let code = r.u8("dtype")?;
            let dtype = DType::from_code(code).ok_or_else(|| {
                format_error(dtype_at as u64, format!("unknown dtype code {code}"))
            })?;
            let ndim = r.u8("ndim")? as usize;
            let dims_at = r.pos;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32("dimension")? as usize);
            }
            if shape.contains(&0) {
                return Err(format_error(
                    dims_at as u64,
                    format!("{name:?} has a zero dimension"),
                ));
            }
            let data_at = r.pos;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(dtype.size()))
                .ok_or_else(|| format_error(dims_at as u64, "declared size overflows"))?;
            let data = r.take(n, "tensor data")?;
            let body_end = r.pos;
            let crc = r.u32("checksum")?;
            if crc != crc32fast::hash(&bytes[start..body_end]) {
                return Err(format_error(
                    body_end as u64,
                    format!("checksum mismatch in {name:?}"),
                ));
            }
            let tensor = match dtype {
                DType::F32 => AnyTensor::F32(decode(&shape, data, data_at)?),
                DType::F64 => AnyTensor::F64(decode(&shape, data, data_at)?),
            };
            if ck.tensors.insert(name.clone(), tensor).is_some() {
                return Err(format_error(
                    name_at as u64,
                    format!("duplicate tensor name {name:?}"),
                ));
            }
        }
        if r.pos != bytes.len() {
            return Err(format_error(
                r.pos as u64,
                format!("{} trailing bytes", bytes.len() - r.pos),
            ));
        }
        Ok(ck)
    }
}

fn decode<T: Element>(shape: &[usize], data: &[u8], at: usize) -> Result<Tensor<T>> {
    let width = T::DTYPE.size();
    let values = data.chunks_exact(width).map(T::read_le).collect();
    Tensor::from_vec(shape, values).map_err(|e| format_error(at as u64, e.to_string()))
}

fn format_error(offset: u64, detail: impl Into<String>) -> Error {
    Error::Format {
        offset,
        detail: detail.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(format_error(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {remaining} left"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2, what)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ck.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_container_is_eleven_bytes() {
        let bytes = Checkpoint::new().to_bytes();
        assert_eq!(bytes.len(), 5 + 2 + 4);
        assert!(Checkpoint::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn f32_tensor_round_trips() {
        let mut ck = Checkpoint::new();
        let t =
            Tensor::<f32>::from_f64(&[1, 2, 3], &[0.1, -2.5, 3.0, f64::MIN_POSITIVE, 1e30, -0.0])
                .unwrap();
        ck.insert("w", t).unwrap();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert!(back.bit_eq(&ck));
        assert_eq!(back.get("w").unwrap().shape(), &[1, 2, 3]);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = Checkpoint::new().to_bytes();
        bytes[..5].copy_from_slice(b"XXXXX");
        match Checkpoint::from_bytes(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = Checkpoint::new().to_bytes();
        bytes.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Format { offset: 11, .. })
        ));
    }

    #[test]
    fn duplicate_names_are_rejected_on_insert() {
        let mut ck = Checkpoint::new();
        ck.insert("a", Tensor::<f32>::zeros(&[1])).unwrap();
        assert!(ck.insert("a", Tensor::<f64>::zeros(&[1])).is_err());
    }
}
