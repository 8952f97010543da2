//! Binary tensor container and the named-tensor archive built on top of it.
//!
//! One container serves every array in the toolchain: feature maps, mask
//! stacks (stored as f32 zeros and ones), view matrices, label vectors and
//! checkpoint weights. The layout is fixed little-endian:
//!
//! ```text
//! offset 0  magic    4 bytes  "MQTF"
//! offset 4  version  u16      currently 1
//! offset 6  dtype    u8       1 = f32, 2 = f64
//! offset 7  rank     u8       number of dimensions
//! offset 8  dims     rank x u64
//! then      payload  prod(dims) elements, row-major (last index fastest)
//! ```
//!
//! The archive wraps a sequence of named tensors:
//!
//! ```text
//! offset 0  magic    4 bytes  "MQTA"
//! offset 4  version  u16      currently 1
//! offset 6  count    u32      number of entries
//! then per entry: name_len u16, name (UTF-8), full tensor record as above
//! ```
//!
//! Entries keep insertion order and names are unique. Reads are strict:
//! wrong magic, unknown version or dtype, truncation, size overflow and
//! trailing bytes are all rejected with the byte offset of the problem.
//! Write-then-read reproduces the input bit-exactly (floats are moved as
//! raw IEEE-754 bit patterns, so NaN payloads and signed zeros survive).

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use maskvqa_core::Mat;

/// Magic bytes opening a single-tensor record.
pub const TENSOR_MAGIC: [u8; 4] = *b"MQTF";
/// Magic bytes opening a named-tensor archive.
pub const ARCHIVE_MAGIC: [u8; 4] = *b"MQTA";
/// Format version written by this crate; readers accept only this value.
pub const FORMAT_VERSION: u16 = 1;

const DTYPE_F32: u8 = 1;
const DTYPE_F64: u8 = 2;

/// Error raised by tensor-file reads and writes.
#[derive(Debug)]
pub enum TensorFileError {
    /// Underlying IO failure (file missing, permissions, disk errors).
    Io(io::Error),
    /// Malformed content; `offset` is the byte position of the problem.
    Format { offset: u64, message: String },
}

impl fmt::Display for TensorFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorFileError::Io(e) => write!(f, "io error: {e}"),
            TensorFileError::Format { offset, message } => {
                write!(f, "byte {offset}: {message}")
            }
        }
    }
}

impl std::error::Error for TensorFileError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TensorFileError::Io(e) => Some(e),
            TensorFileError::Format { .. } => None,
        }
    }
}

impl From<io::Error> for TensorFileError {
    fn from(e: io::Error) -> Self {
        TensorFileError::Io(e)
    }
}

/// Shorthand result for this module.
pub type Result<T> = std::result::Result<T, TensorFileError>;

fn format_err<T>(offset: u64, message: impl Into<String>) -> Result<T> {
    Err(TensorFileError::Format {
        offset,
        message: message.into(),
    })
}

/// Element storage of a [`Tensor`]; the dtype tag on disk picks the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    /// 32-bit floats (dtype tag 1); used for mask stacks.
    F32(Vec<f32>),
    /// 64-bit floats (dtype tag 2); used for everything numeric.
    F64(Vec<f64>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    fn dtype_tag(&self) -> u8 {
        match self {
            TensorData::F32(_) => DTYPE_F32,
            TensorData::F64(_) => DTYPE_F64,
        }
    }
}

/// A dense row-major array of f32 or f64 values with explicit dimensions.
///
/// Invariant: the element count always equals the product of `dims`
/// (an empty `dims` list means a scalar with one element, and any zero
/// dimension means an empty payload).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: TensorData,
}

fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl Tensor {
    /// Wraps an f64 buffer; fails if the length does not match the dims.
    pub fn from_f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::new(dims, TensorData::F64(data))
    }

    /// Wraps an f32 buffer; fails if the length does not match the dims.
    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(dims, TensorData::F32(data))
    }

    fn new(dims: Vec<usize>, data: TensorData) -> Result<Self> {
        let expected = checked_product(&dims);
        if expected != Some(data.len()) {
            return format_err(
                0,
                format!(
                    "element count {} does not match dims {:?}",
                    data.len(),
                    dims
                ),
            );
        }
        Ok(Tensor { dims, data })
    }

    /// Copies a core matrix into a rank-2 f64 tensor.
    pub fn from_mat(m: &Mat) -> Self {
        Tensor {
            dims: vec![m.rows(), m.cols()],
            data: TensorData::F64(m.data().to_vec()),
        }
    }

    /// Interprets a rank-2 f64 tensor as a core matrix.
    pub fn to_mat(&self) -> Result<Mat> {
        if self.dims.len() != 2 {
            return format_err(
                0,
                format!("expected a rank-2 tensor, got rank {}", self.dims.len()),
            );
        }
        match &self.data {
            TensorData::F64(v) => Mat::from_vec(self.dims[0], self.dims[1], v.clone())
                .map_err(|e| TensorFileError::Format {
                    offset: 0,
                    message: format!("not a valid matrix: {e}"),
                }),
            TensorData::F32(_) => format_err(0, "expected an f64 tensor, got f32"),
        }
    }

    /// Dimension list, outermost first.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True when the payload is empty (some dimension is zero).
    pub fn is_empty(&self) -> bool {
        self.data.len() == 0
    }

    /// Raw storage reference.
    pub fn data(&self) -> &TensorData {
        &self.data
    }

    /// Payload widened to f64 regardless of the stored dtype.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    /// Borrows the payload as f64, failing on an f32 tensor.
    pub fn as_f64(&self) -> Result<&[f64]> {
        match &self.data {
            TensorData::F64(v) => Ok(v),
            TensorData::F32(_) => format_err(0, "expected an f64 tensor, got f32"),
        }
    }

    /// Borrows the payload as f32, failing on an f64 tensor.
    pub fn as_f32(&self) -> Result<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Ok(v),
            TensorData::F64(_) => format_err(0, "expected an f32 tensor, got f64"),
        }
    }

    /// Serializes the tensor record to a writer.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&TENSOR_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.data.dtype_tag(), self.dims.len() as u8])?;
        if self.dims.len() > u8::MAX as usize {
            return format_err(7, format!("rank {} exceeds 255", self.dims.len()));
        }
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::F64(v) => {
                for x in v {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Parses one tensor record from a reader, leaving the reader positioned
    /// immediately after the payload.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut c = Counter::new(r);
        Self::read_counted(&mut c)
    }

    fn read_counted(c: &mut Counter<'_, impl Read>) -> Result<Self> {
        let at = c.offset;
        let magic = c.bytes::<4>("magic")?;
        if magic != TENSOR_MAGIC {
            return format_err(at, format!("bad magic {magic:02x?}, expected \"MQTF\""));
        }
        let at = c.offset;
        let version = c.u16("version")?;
        if version != FORMAT_VERSION {
            return format_err(
                at,
                format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            );
        }
        let at = c.offset;
        let dtype = c.u8("dtype")?;
        if dtype != DTYPE_F32 && dtype != DTYPE_F64 {
            return format_err(at, format!("unknown dtype tag {dtype}"));
        }
        let rank = c.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for i in 0..rank {
            let at = c.offset;
            let d = c.u64(&format!("dim {i}"))?;
            if d > usize::MAX as u64 {
                return format_err(at, format!("dim {i} value {d} exceeds address space"));
            }
            dims.push(d as usize);
        }
        let at = c.offset;
        let count = match checked_product(&dims) {
            Some(n) => n,
            None => return format_err(at, format!("dims {dims:?} overflow element count")),
        };
        let data = match dtype {
            DTYPE_F32 => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(f32::from_le_bytes(c.bytes::<4>("payload")?));
                }
                TensorData::F32(v)
            }
            _ => {
                let mut v = Vec::with_capacity(count);
                for _ in 0..count {
                    v.push(f64::from_le_bytes(c.bytes::<8>("payload")?));
                }
                TensorData::F64(v)
            }
        };
        Ok(Tensor { dims, data })
    }

    /// Writes the tensor to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Reads a tensor file, rejecting trailing bytes after the payload.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut slice = bytes.as_slice();
        let mut c = Counter::new(&mut slice);
        let t = Self::read_counted(&mut c)?;
        reject_trailing(c.offset, slice)?;
        Ok(t)
    }
}

fn reject_trailing(offset: u64, rest: &[u8]) -> Result<()> {
    if rest.is_empty() {
        Ok(())
    } else {
        format_err(offset, format!("{} trailing bytes after payload", rest.len()))
    }
}

/// Reader wrapper that tracks the byte offset for error reporting.
struct Counter<'a, R: Read> {
    inner: &'a mut R,
    offset: u64,
}

impl<'a, R: Read> Counter<'a, R> {
    fn new(inner: &'a mut R) -> Self {
        Counter { inner, offset: 0 }
    }

    fn bytes<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        match self.inner.read_exact(&mut buf) {
            Ok(()) => {
                self.offset += N as u64;
                Ok(buf)
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => format_err(
                self.offset,
                format!("unexpected end of file while reading {field}"),
            ),
            Err(e) => Err(e.into()),
        }
    }

    fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.bytes::<1>(field)?[0])
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes::<2>(field)?))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(field)?))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>(field)?))
    }
}

/// Ordered collection of uniquely named tensors; the checkpoint container.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorArchive {
    entries: Vec<(String, Tensor)>,
}

impl TensorArchive {
    /// Empty archive.
    pub fn new() -> Self {
        TensorArchive::default()
    }

    /// Appends a named tensor; names must be unique and at most 65535 bytes.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return format_err(0, format!("entry name of {} bytes exceeds 65535", name.len()));
        }
        if self.entries.iter().any(|(n, _)| *n == name) {
            return format_err(0, format!("duplicate entry name {name:?}"));
        }
        self.entries.push((name, tensor));
        Ok(())
    }

    /// Looks an entry up by name.
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Number of entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when the archive has no entries.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes the archive to a writer.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&ARCHIVE_MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        if self.entries.len() > u32::MAX as usize {
            return format_err(6, format!("{} entries exceed u32", self.entries.len()));
        }
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, tensor) in &self.entries {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            tensor.write_to(w)?;
        }
        Ok(())
    }

    /// Parses an archive from a reader.
    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut c = Counter::new(r);
        Self::read_counted(&mut c)
    }

    fn read_counted(c: &mut Counter<'_, impl Read>) -> Result<Self> {
        let at = c.offset;
        let magic = c.bytes::<4>("magic")?;
        if magic != ARCHIVE_MAGIC {
            return format_err(at, format!("bad magic {magic:02x?}, expected \"MQTA\""));
        }
        let at = c.offset;
        let version = c.u16("version")?;
        if version != FORMAT_VERSION {
            return format_err(
                at,
                format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            );
        }
        let count = c.u32("entry count")? as usize;
        let mut archive = TensorArchive::new();
        for i in 0..count {
            let name_len = c.u16(&format!("entry {i} name length"))? as usize;
            let at = c.offset;
            let mut raw = vec![0u8; name_len];
            match c.inner.read_exact(&mut raw) {
                Ok(()) => c.offset += name_len as u64,
                Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                    return format_err(
                        c.offset,
                        format!("unexpected end of file while reading entry {i} name"),
                    )
                }
                Err(e) => return Err(e.into()),
            }
            let name = match String::from_utf8(raw) {
                Ok(s) => s,
                Err(_) => return format_err(at, format!("entry {i} name is not UTF-8")),
            };
            let tensor = Tensor::read_counted(c)?;
            if archive.entries.iter().any(|(n, _)| *n == name) {
                return format_err(at, format!("duplicate entry name {name:?}"));
            }
            archive.entries.push((name, tensor));
        }
        Ok(archive)
    }

    /// Writes the archive to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    /// Reads an archive file, rejecting trailing bytes after the last entry.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let mut slice = bytes.as_slice();
        let mut c = Counter::new(&mut slice);
        let a = Self::read_counted(&mut c)?;
        reject_trailing(c.offset, slice)?;
        Ok(a)
    }
}
