//! Reading and writing the subset of the npy format the toolkit needs.
//!
//! Supported: format versions 1.0 and 2.0, little-endian `<f4` / `<f8` payloads
//! in C order. Integer dtypes are recognised only so that they can be rejected
//! with a precise error.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub(crate) const MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Element type of a float payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Float payload in its stored precision.
#[derive(Debug, Clone, PartialEq)]
pub enum NpyData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::F32(v) => v.len(),
            NpyData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            NpyData::F32(_) => Dtype::F32,
            NpyData::F64(_) => Dtype::F64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

#[derive(Debug)]
struct Header {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Npy(msg.into())
}

/// Returns the text after `'key':` in a header dict literal.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    for quote in ['\'', '"'] {
        let pat = format!("{quote}{key}{quote}");
        if let Some(pos) = dict.find(&pat) {
            let rest = dict[pos + pat.len()..].trim_start();
            let rest = rest
                .strip_prefix(':')
                .ok_or_else(|| bad(format!("missing ':' after key {key:?}")))?;
            return Ok(rest.trim_start());
        }
    }
    Err(bad(format!("header lacks key {key:?}")))
}

fn parse_descr(dict: &str) -> Result<Dtype> {
    let rest = dict_value(dict, "descr")?;
    let quote = rest
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| bad("descr is not a string literal"))?;
    let body = &rest[1..];
    let end = body
        .find(quote)
        .ok_or_else(|| bad("unterminated descr string"))?;
    let descr = &body[..end];
    match descr {
        "<f4" => Ok(Dtype::F32),
        "<f8" => Ok(Dtype::F64),
        _ => {
            let kind = descr.trim_start_matches(['<', '>', '|', '=']);
            if kind.starts_with('i') || kind.starts_with('u') || kind.starts_with('b') {
                Err(Error::IntegerArray(descr.to_string()))
            } else {
                Err(bad(format!("unsupported dtype {descr:?}")))
            }
        }
    }
}

fn parse_fortran(dict: &str) -> Result<bool> {
    let rest = dict_value(dict, "fortran_order")?;
    if rest.starts_with("False") {
        Ok(false)
    } else if rest.starts_with("True") {
        Ok(true)
    } else {
        Err(bad("fortran_order is not a boolean"))
    }
}

fn parse_shape(dict: &str) -> Result<Vec<usize>> {
    let rest = dict_value(dict, "shape")?;
    let rest = rest
        .strip_prefix('(')
        .ok_or_else(|| bad("shape is not a tuple"))?;
    let end = rest.find(')').ok_or_else(|| bad("unterminated shape"))?;
    rest[..end]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| bad(format!("bad shape element {s:?}")))
        })
        .collect()
}

fn read_header<R: Read>(reader: &mut R) -> Result<Header> {
    let mut magic = [0u8; 8];
    reader
        .read_exact(&mut magic)
        .map_err(|_| bad("file too short for npy magic"))?;
    if magic[..6] != MAGIC {
        return Err(bad("missing \\x93NUMPY magic"));
    }
    let header_len = match magic[6] {
        1 => {
            let mut b = [0u8; 2];
            reader
                .read_exact(&mut b)
                .map_err(|_| bad("truncated header length"))?;
            u16::from_le_bytes(b) as usize
        }
        2 | 3 => {
            let mut b = [0u8; 4];
            reader
                .read_exact(&mut b)
                .map_err(|_| bad("truncated header length"))?;
            u32::from_le_bytes(b) as usize
        }
        v => return Err(bad(format!("unsupported npy version {v}.{}", magic[7]))),
    };
    let mut raw = vec![0u8; header_len];
    reader
        .read_exact(&mut raw)
        .map_err(|_| bad("truncated header"))?;
    let dict = std::str::from_utf8(&raw).map_err(|_| bad("header is not valid text"))?;
    let dict = dict.trim();
    if !dict.starts_with('{') || !dict.ends_with('}') {
        return Err(bad("header is not a dict literal"));
    }
    let header = Header {
        dtype: parse_descr(dict)?,
        fortran_order: parse_fortran(dict)?,
        shape: parse_shape(dict)?,
    };
    if header.fortran_order {
        return Err(bad("fortran_order=True is not supported"));
    }
    Ok(header)
}

/// Dtype and shape from the header alone, without reading the payload.
pub fn read_npy_header<R: Read>(reader: &mut R) -> Result<(Dtype, Vec<usize>)> {
    let header = read_header(reader)?;
    Ok((header.dtype, header.shape))
}

/// Reads a whole npy array from `reader`.
pub fn read_npy<R: Read>(reader: &mut R) -> Result<NpyArray> {
    let header = read_header(reader)?;
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("shape overflows"))?;
    let nbytes = count
        .checked_mul(header.dtype.size())
        .ok_or_else(|| bad("payload size overflows"))?;
    let mut raw = vec![0u8; nbytes];
    reader
        .read_exact(&mut raw)
        .map_err(|_| bad(format!("payload shorter than the {nbytes} bytes declared")))?;
    let data = match header.dtype {
        Dtype::F32 => NpyData::F32(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        Dtype::F64 => NpyData::F64(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        ),
    };
    Ok(NpyArray {
        shape: header.shape,
        data,
    })
}

/// Writes a version 1.0 npy file. The header is padded so that the payload
/// starts on a 64-byte boundary.
pub fn write_npy<W: Write>(writer: &mut W, shape: &[usize], data: &NpyData) -> Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(Error::Shape(format!(
            "shape {shape:?} holds {expected} values, payload has {}",
            data.len()
        )));
    }
    let shape_txt = match shape {
        [one] => format!("({one},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        data.dtype().descr(),
        shape_txt
    );
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');
    let header_len = u16::try_from(dict.len()).map_err(|_| bad("header too long"))?;

    let werr = |e| Error::io("<npy writer>", e);
    writer.write_all(&MAGIC).map_err(werr)?;
    writer.write_all(&[1, 0]).map_err(werr)?;
    writer.write_all(&header_len.to_le_bytes()).map_err(werr)?;
    writer.write_all(dict.as_bytes()).map_err(werr)?;
    match data {
        NpyData::F32(v) => {
            let mut buf = Vec::with_capacity(v.len() * 4);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            writer.write_all(&buf).map_err(werr)?;
        }
        NpyData::F64(v) => {
            let mut buf = Vec::with_capacity(v.len() * 8);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            writer.write_all(&buf).map_err(werr)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_bytes(dict: &str) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
        out.extend_from_slice(dict.as_bytes());
        out
    }

    #[test]
    fn header_is_64_byte_aligned() {
        let mut buf = Vec::new();
        write_npy(&mut buf, &[4, 3], &NpyData::F64(vec![0.0; 12])).unwrap();
        assert_eq!((buf.len() - 12 * 8) % 64, 0);
        assert_eq!(buf[buf.len() - 12 * 8 - 1], b'\n');
    }

    #[test]
    fn parses_numpy_style_header() {
        let mut bytes =
            header_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 1), }\n");
        bytes.extend_from_slice(&1.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_le_bytes());
        let arr = read_npy(&mut bytes.as_slice()).unwrap();
        assert_eq!(arr.shape, vec![2, 1]);
        assert_eq!(arr.data, NpyData::F32(vec![1.5, -2.0]));
    }

    #[test]
    fn rejects_integer_dtype() {
        let bytes = header_bytes("{'descr': '<i8', 'fortran_order': False, 'shape': (1, 1), }\n");
        assert!(matches!(
            read_npy(&mut bytes.as_slice()),
            Err(Error::IntegerArray(_))
        ));
    }

    #[test]
    fn rejects_fortran_order_and_bad_magic() {
        let bytes = header_bytes("{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }\n");
        assert!(read_npy(&mut bytes.as_slice()).is_err());
        assert!(read_npy(&mut &b"\x93NUMPX\x01\x00"[..]).is_err());
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut bytes =
            header_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (2,), }\n");
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(read_npy(&mut bytes.as_slice()).is_err());
    }
}
