//! NPY v1.0 tensor files: little-endian `f4`/`f8`, C order, rank 4.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, Element, Shape, Tensor};

const MAGIC: &[u8] = b"\x93NUMPY";
const PREAMBLE: usize = MAGIC.len() + 2;

/// A tensor read from disk, in whichever precision the file stored.
#[derive(Clone, Debug, PartialEq)]
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

    pub fn shape(&self) -> Shape {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.clone(),
        }
    }

    pub fn cast<T: Element>(&self) -> Tensor<T> {
        match self {
            AnyTensor::F32(t) => t.cast(),
            AnyTensor::F64(t) => t.cast(),
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

/// Serializes `t` as an NPY v1.0 byte buffer.
pub fn encode<T: Element>(t: &Tensor<T>) -> Vec<u8> {
    let s = t.shape();
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({}, {}, {}, {}), }}",
        T::DTYPE.descr(),
        s.n,
        s.c,
        s.h,
        s.w
    );
    let unpadded = PREAMBLE + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut out = Vec::with_capacity(PREAMBLE + 2 + header.len() + t.len() * T::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

pub fn write_npy<T: Element>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<AnyTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|(offset, message)| Error::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    })
}

/// Reads a file and converts it to precision `T`.
pub fn read_npy_as<T: Element>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    Ok(read_npy(path)?.cast())
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

/// Parses an NPY buffer. Errors carry the byte offset where parsing failed.
pub fn decode(bytes: &[u8]) -> ParseResult<AnyTensor> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err((0, "missing NPY magic string".into()));
    }
    let (major, minor) = match bytes.get(MAGIC.len()..PREAMBLE) {
        Some(v) => (v[0], v[1]),
        None => return Err((bytes.len(), "file ends inside the version field".into())),
    };
    let (len_size, header_len) = match major {
        1 => {
            let b = bytes
                .get(PREAMBLE..PREAMBLE + 2)
                .ok_or((bytes.len(), "file ends inside the header length".to_string()))?;
            (2, u16::from_le_bytes([b[0], b[1]]) as usize)
        }
        2 | 3 => {
            let b = bytes
                .get(PREAMBLE..PREAMBLE + 4)
                .ok_or((bytes.len(), "file ends inside the header length".to_string()))?;
            (4, u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        }
        _ => return Err((MAGIC.len(), format!("unsupported NPY version {major}.{minor}"))),
    };
    let start = PREAMBLE + len_size;
    let end = start + header_len;
    let header = bytes
        .get(start..end)
        .ok_or((bytes.len(), format!("header declares {header_len} bytes but the file ends early")))?;
    let header = Header::parse(header, start)?;

    let shape = Shape::new(header.shape[0], header.shape[1], header.shape[2], header.shape[3])
        .map_err(|e| (header.shape_offset, e.to_string()))?;
    let payload = &bytes[end..];
    let expected = shape.numel() * header.dtype.size();
    if payload.len() < expected {
        return Err((
            bytes.len(),
            format!("truncated data: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err((
            end + expected,
            format!("{} trailing bytes after {expected} bytes of data", payload.len() - expected),
        ));
    }
    Ok(match header.dtype {
        DType::F32 => AnyTensor::F32(read_values(shape, payload)),
        DType::F64 => AnyTensor::F64(read_values(shape, payload)),
    })
}

fn read_values<T: Element>(shape: Shape, payload: &[u8]) -> Tensor<T> {
    let data = payload.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    Tensor::from_data(shape, data).expect("payload length was checked")
}

struct Header {
    dtype: DType,
    shape: Vec<usize>,
    shape_offset: usize,
}

/// Cursor over the ASCII header dictionary; `base` is its offset in the file.
struct Cursor<'a> {
    text: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    fn at(&self) -> usize {
        self.base + self.pos
    }

    fn fail<T>(&self, msg: impl Into<String>) -> ParseResult<T> {
        Err((self.at(), msg.into()))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> ParseResult<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected '{}'", c as char))
        }
    }

    fn string(&mut self) -> ParseResult<String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return self.fail("expected a quoted string"),
        };
        self.pos += 1;
        let begin = self.pos;
        while self.pos < self.text.len() && self.text[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos == self.text.len() {
            return self.fail("unterminated string");
        }
        let s = String::from_utf8_lossy(&self.text[begin..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn word(&mut self) -> ParseResult<&'a [u8]> {
        self.skip_ws();
        let begin = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        if begin == self.pos {
            return self.fail("expected a value");
        }
        Ok(&self.text[begin..self.pos])
    }

    fn tuple(&mut self) -> ParseResult<Vec<usize>> {
        self.expect(b'(')?;
        let mut out = Vec::new();
        loop {
            if self.peek() == Some(b')') {
                self.pos += 1;
                return Ok(out);
            }
            let at = self.at();
            let w = self.word()?;
            let v = std::str::from_utf8(w)
                .ok()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or((at, "expected a non-negative integer dimension".to_string()))?;
            out.push(v);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {}
                _ => return self.fail("expected ',' or ')' in shape"),
            }
        }
    }
}

impl Header {
    fn parse(text: &[u8], base: usize) -> ParseResult<Header> {
        let mut cur = Cursor { text, pos: 0, base };
        cur.expect(b'{')?;
        let (mut dtype, mut fortran, mut shape) = (None, None, None);
        loop {
            if cur.peek() == Some(b'}') {
                cur.pos += 1;
                break;
            }
            let key_at = cur.at();
            let key = cur.string()?;
            cur.expect(b':')?;
            let value_at = {
                cur.skip_ws();
                cur.at()
            };
            match key.as_str() {
                "descr" => {
                    let d = cur.string()?;
                    dtype = Some(match d.as_str() {
                        "<f4" => DType::F32,
                        "<f8" => DType::F64,
                        _ => return Err((value_at, format!("unsupported dtype '{d}', expected '<f4' or '<f8'"))),
                    });
                }
                "fortran_order" => {
                    fortran = Some(match cur.word()? {
                        b"False" => false,
                        b"True" => true,
                        _ => return Err((value_at, "fortran_order must be True or False".into())),
                    });
                }
                "shape" => shape = Some((cur.tuple()?, value_at)),
                _ => return Err((key_at, format!("unexpected header key '{key}'"))),
            }
            match cur.peek() {
                Some(b',') => cur.pos += 1,
                Some(b'}') => {}
                _ => return cur.fail("expected ',' or '}' in header"),
            }
        }
        if cur.peek().is_some() {
            return cur.fail("unexpected characters after header dictionary");
        }
        let dtype = dtype.ok_or((base, "header has no 'descr'".to_string()))?;
        if fortran.ok_or((base, "header has no 'fortran_order'".to_string()))? {
            return Err((base, "Fortran-ordered arrays are not supported".into()));
        }
        let (shape, shape_offset) = shape.ok_or((base, "header has no 'shape'".to_string()))?;
        if shape.len() != 4 {
            return Err((shape_offset, format!("expected a rank-4 array, found rank {}", shape.len())));
        }
        Ok(Header { dtype, shape, shape_offset })
    }
}
