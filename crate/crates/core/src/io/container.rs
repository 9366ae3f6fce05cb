//! Binary tensor container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic     4 bytes   "LAMA"
//! version   u16       FORMAT_VERSION
//! count     u32       number of entries
//! entry × count:
//!   name_len  u16       byte length of the name
//!   name      name_len  UTF-8
//!   rank      u8
//!   dims      u32 × rank
//!   payload   f64 × ∏dims, row-major
//! ```
//!
//! A rank-0 entry is a scalar with a single value.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::{Image, Sinogram};

pub const MAGIC: [u8; 4] = *b"LAMA";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::shape("tensor payload", &[expected], &[data.len()]));
        }
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::invalid(format!("tensor dims {dims:?} exceed the container limits")));
        }
        Ok(Self { dims, data })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    fn matrix(data: &Array2<f64>) -> Self {
        let (r, c) = data.dim();
        Self {
            dims: vec![r, c],
            data: data.iter().copied().collect(),
        }
    }

    fn to_matrix(&self, name: &str) -> Result<Array2<f64>> {
        match self.dims[..] {
            [r, c] => Ok(Array2::from_shape_vec((r, c), self.data.clone()).expect("validated length")),
            _ => Err(Error::invalid(format!("entry {name:?} has rank {}, expected 2", self.dims.len()))),
        }
    }
}

/// Named tensors in insertion order with unique names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorContainer {
    entries: Vec<(String, Tensor)>,
}

impl TensorContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(Error::invalid("entry name longer than 65535 bytes"));
        }
        if self.get(&name).is_some() {
            return Err(Error::DuplicateName(name));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn insert_image(&mut self, name: impl Into<String>, img: &Image) -> Result<()> {
        self.insert(name, Tensor::matrix(&img.data))
    }

    pub fn insert_sinogram(&mut self, name: impl Into<String>, sino: &Sinogram) -> Result<()> {
        self.insert(name, Tensor::matrix(&sino.data))
    }

    pub fn insert_scalar(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        self.insert(name, Tensor::scalar(value))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| Error::MissingEntry(name.to_owned()))
    }

    pub fn image(&self, name: &str) -> Result<Image> {
        Ok(Image::new(self.require(name)?.to_matrix(name)?))
    }

    pub fn sinogram(&self, name: &str) -> Result<Sinogram> {
        Ok(Sinogram::new(self.require(name)?.to_matrix(name)?))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.require(name)?;
        if !t.dims.is_empty() {
            return Err(Error::invalid(format!("entry {name:?} is not a scalar")));
        }
        Ok(t.data[0])
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, tensor) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(tensor.dims.len() as u8);
            for &d in &tensor.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &tensor.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a container; `origin` only labels errors.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                path: origin.to_path_buf(),
                found: magic,
            });
        }
        let version = u16::from_le_bytes(r.array("version")?);
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let count = u32::from_le_bytes(r.array("entry count")?);
        let mut container = Self::new();
        let mut seen = HashSet::new();
        for index in 0..count {
            let name_len = u16::from_le_bytes(r.array("name length")?) as usize;
            let name = String::from_utf8(r.take(name_len, "name")?.to_vec())
                .map_err(|_| Error::invalid(format!("entry {index} name is not UTF-8")))?;
            let rank = r.take(1, "rank")?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(u32::from_le_bytes(r.array("dims")?) as usize);
            }
            let len = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Truncated(format!("entry {name:?} dims {dims:?} overflow")))?;
            let payload = r.take(len.saturating_mul(8), "payload")?;
            let data = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateName(name));
            }
            container.entries.push((name, Tensor { dims, data }));
        }
        if r.pos != bytes.len() {
            return Err(Error::invalid(format!("{} trailing bytes after the last entry", bytes.len() - r.pos)));
        }
        Ok(container)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("{what} needs {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("exact length"))
    }
}

pub fn save(path: impl AsRef<Path>, container: &TensorContainer) -> Result<()> {
    fs::write(path, container.to_bytes())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TensorContainer> {
    let path = path.as_ref();
    TensorContainer::from_bytes(&fs::read(path)?, path)
}
