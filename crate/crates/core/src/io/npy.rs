//! Reader and writer for the NumPy `.npy` v1.0 container.
//!
//! Only what the toolkit exchanges is supported: little-endian `f32` and `u8`
//! payloads, C order, two or three dimensions. Headers are written exactly as
//! NumPy writes them (64-byte aligned, space padded, newline terminated), so
//! files round-trip byte for byte with `numpy.save`.

use std::fs;
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::grid::{FeatureStack, Grid};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::U8 => "|u1",
        }
    }

    fn item_size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

/// A decoded array: its shape and C-ordered payload.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

impl NpyArray {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        NpyArray {
            shape,
            data: ArrayData::F32(data),
        }
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Self {
        NpyArray {
            shape,
            data: ArrayData::U8(data),
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::F32(_) => Dtype::F32,
            ArrayData::U8(_) => Dtype::U8,
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            ArrayData::F32(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    fn values_f64(&self) -> Vec<f64> {
        match &self.data {
            ArrayData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            ArrayData::U8(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }

    /// Interpret a 2-D array as a real grid.
    pub fn to_grid(&self) -> Result<Grid<f64>> {
        match self.shape.as_slice() {
            &[h, w] => Grid::from_vec(h, w, self.values_f64()),
            &[1, h, w] => Grid::from_vec(h, w, self.values_f64()),
            other => Err(Error::InvalidInput(format!(
                "expected a 2-D array, got shape {other:?}"
            ))),
        }
    }

    /// Interpret a 3-D `C x H x W` array (or a 2-D array as a single channel)
    /// as a feature stack.
    pub fn to_feature_stack(&self) -> Result<FeatureStack> {
        match self.shape.as_slice() {
            &[c, h, w] => FeatureStack::new(c, h, w, self.values_f64()),
            &[h, w] => FeatureStack::new(1, h, w, self.values_f64()),
            other => Err(Error::InvalidInput(format!(
                "expected a 3-D array, got shape {other:?}"
            ))),
        }
    }

    pub fn from_grid(grid: &Grid<f64>) -> Self {
        NpyArray::f32(
            vec![grid.height(), grid.width()],
            grid.as_slice().iter().map(|&v| v as f32).collect(),
        )
    }

    pub fn from_feature_stack(stack: &FeatureStack) -> Self {
        NpyArray::f32(
            vec![stack.channels(), stack.height(), stack.width()],
            stack.as_slice().iter().map(|&v| v as f32).collect(),
        )
    }
}

pub fn read_array(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_array(path: impl AsRef<Path>, array: &NpyArray) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(array)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn decode(bytes: &[u8]) -> Result<NpyArray, ParseError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ParseError::BadMagic);
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(ParseError::Truncated {
            expected: PREAMBLE_LEN,
            found: bytes.len(),
        });
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(ParseError::UnsupportedVersion { major, minor });
    }
    let header_len = usize::from(u16::from_le_bytes([bytes[8], bytes[9]]));
    let data_start = PREAMBLE_LEN + header_len;
    if bytes.len() < data_start {
        return Err(ParseError::Truncated {
            expected: data_start,
            found: bytes.len(),
        });
    }
    let header = std::str::from_utf8(&bytes[PREAMBLE_LEN..data_start])
        .map_err(|_| ParseError::MalformedHeader("header is not ASCII".into()))?;
    let header = Header::parse(header)?;

    let count: usize = header.shape.iter().product();
    let expected = count * header.dtype.item_size();
    let payload = &bytes[data_start..];
    if payload.len() < expected {
        return Err(ParseError::Truncated {
            expected: data_start + expected,
            found: bytes.len(),
        });
    }
    if payload.len() > expected {
        return Err(ParseError::TrailingBytes {
            extra: payload.len() - expected,
        });
    }
    let data = match header.dtype {
        Dtype::F32 => ArrayData::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
        Dtype::U8 => ArrayData::U8(payload.to_vec()),
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

pub fn encode(array: &NpyArray) -> Result<Vec<u8>> {
    if !(2..=3).contains(&array.shape.len()) {
        return Err(Error::InvalidInput(format!(
            "only 2-D and 3-D arrays are supported, got shape {:?}",
            array.shape
        )));
    }
    if array.shape.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "array has an empty dimension: {:?}",
            array.shape
        )));
    }
    let count: usize = array.shape.iter().product();
    if count != array.len() {
        return Err(Error::InvalidInput(format!(
            "shape {:?} needs {count} values, got {}",
            array.shape,
            array.len()
        )));
    }

    let dims: Vec<String> = array.shape.iter().map(usize::to_string).collect();
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({}), }}",
        array.dtype().descr(),
        dims.join(", ")
    );
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');
    let header_len = u16::try_from(dict.len())
        .map_err(|_| Error::InvalidInput("array header too large".into()))?;

    let mut out = Vec::with_capacity(PREAMBLE_LEN + dict.len() + count * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    match &array.data {
        ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        ArrayData::U8(v) => out.extend_from_slice(v),
    }
    Ok(out)
}

struct Header {
    dtype: Dtype,
    shape: Vec<usize>,
}

impl Header {
    /// Parses the Python dict literal NumPy writes. Key order is not assumed.
    fn parse(text: &str) -> Result<Header, ParseError> {
        let body = text.trim_end_matches(['\n', ' ', '\0']).trim();
        let body = body
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| ParseError::MalformedHeader("not a dict literal".into()))?;

        let descr = dict_value(body, "descr")?;
        let descr = descr
            .trim()
            .trim_matches(|c| c == '\'' || c == '"')
            .to_string();
        let dtype = match descr.as_str() {
            "<f4" => Dtype::F32,
            "|u1" | "<u1" | "u1" => Dtype::U8,
            _ => return Err(ParseError::UnsupportedDtype(descr)),
        };

        match dict_value(body, "fortran_order")?.trim() {
            "False" => {}
            "True" => return Err(ParseError::FortranOrder),
            other => {
                return Err(ParseError::MalformedHeader(format!(
                    "fortran_order: unexpected value {other:?}"
                )))
            }
        }

        let shape_text = dict_value(body, "shape")?;
        let inner = shape_text
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| ParseError::MalformedHeader("shape: not a tuple".into()))?;
        let shape = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| ParseError::MalformedHeader(format!("shape: bad dimension {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !(2..=3).contains(&shape.len()) || shape.contains(&0) {
            return Err(ParseError::UnsupportedShape(shape));
        }
        Ok(Header { dtype, shape })
    }
}

/// Extract the raw text of one value from a flat dict literal. Values are
/// either quoted strings, bare words, or parenthesised tuples.
fn dict_value<'a>(body: &'a str, key: &str) -> Result<&'a str, ParseError> {
    let missing = || ParseError::MalformedHeader(format!("missing key {key:?}"));
    let start = ["'", "\""]
        .iter()
        .find_map(|q| body.find(&format!("{q}{key}{q}")).map(|i| i + key.len() + 2))
        .ok_or_else(missing)?;
    let rest = body[start..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| ParseError::MalformedHeader(format!("{key}: expected ':'")))?
        .trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|i| i + 1)
    } else if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        rest[1..].find(q).map(|i| i + 2)
    } else {
        Some(rest.find(',').unwrap_or(rest.len()))
    }
    .ok_or_else(|| ParseError::MalformedHeader(format!("{key}: unterminated value")))?;
    Ok(&rest[..end])
}
