//! Minimal NPY v1.0 reader/writer for 2-D little-endian float arrays.
//!
//! Only `<f4` and `<f8` with C order are accepted. Fortran order,
//! big-endian data and other dtypes are rejected.

use std::io::Write;

use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8; 6] = b"\x93NUMPY";
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpyDtype {
    F32,
    F64,
}

impl NpyDtype {
    fn descr(self) -> &'static str {
        match self {
            NpyDtype::F32 => "<f4",
            NpyDtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            NpyDtype::F32 => 4,
            NpyDtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        message: message.into(),
    }
}

/// Decodes an NPY byte buffer into a row-major f64 array.
pub fn decode(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < PREAMBLE_LEN || &bytes[..6] != MAGIC {
        return Err(parse_err("missing NPY magic bytes"));
    }
    if (bytes[6], bytes[7]) != (1, 0) {
        return Err(parse_err(format!(
            "unsupported NPY version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body_start = PREAMBLE_LEN + header_len;
    if bytes.len() < body_start {
        return Err(parse_err("truncated NPY header"));
    }
    let header = std::str::from_utf8(&bytes[PREAMBLE_LEN..body_start])
        .map_err(|_| parse_err("NPY header is not valid text"))?;
    let dict = HeaderDict::parse(header)?;
    if dict.fortran_order {
        return Err(parse_err("Fortran-ordered arrays are not supported"));
    }
    let dtype = match dict.descr.as_str() {
        "<f4" => NpyDtype::F32,
        "<f8" => NpyDtype::F64,
        other => return Err(parse_err(format!("unsupported dtype '{other}'"))),
    };
    let (rows, cols) = match dict.shape.as_slice() {
        &[r, c] => (r, c),
        other => {
            return Err(Error::Shape(format!(
                "expected a 2-D array, got {} dimension(s)",
                other.len()
            )))
        }
    };
    let body = &bytes[body_start..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(dtype.size()))
        .ok_or_else(|| parse_err("array size overflows"))?;
    if body.len() != expected {
        return Err(parse_err(format!(
            "data section has {} bytes, expected {expected} for shape ({rows}, {cols})",
            body.len()
        )));
    }
    let data = match dtype {
        NpyDtype::F64 => body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        NpyDtype::F32 => body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok(NpyArray {
        shape: (rows, cols),
        data,
    })
}

/// Encodes a row-major 2-D array. Values are narrowed when `dtype` is F32.
pub fn encode(rows: usize, cols: usize, data: &[f64], dtype: NpyDtype) -> Vec<u8> {
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({rows}, {cols}), }}",
        dtype.descr()
    );
    // header text + padding + '\n' so the data section starts aligned
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + padding + 1;

    let mut out = Vec::with_capacity(PREAMBLE_LEN + header_len + data.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', padding));
    out.push(b'\n');
    match dtype {
        NpyDtype::F64 => data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        NpyDtype::F32 => data
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    out
}

pub fn write<W: Write>(w: &mut W, rows: usize, cols: usize, data: &[f64], dtype: NpyDtype) -> std::io::Result<()> {
    w.write_all(&encode(rows, cols, data, dtype))
}

#[derive(Debug, Default)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

impl HeaderDict {
    /// Parses the Python dict literal numpy writes, e.g.
    /// `{'descr': '<f8', 'fortran_order': False, 'shape': (3, 4), }`.
    fn parse(text: &str) -> Result<Self> {
        let body = text
            .trim_end_matches(['\n', ' ', '\0'])
            .trim()
            .strip_prefix('{')
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| parse_err("NPY header is not a dict literal"))?;

        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;
        let mut rest = body.trim();
        while !rest.is_empty() {
            let (key, after) = take_quoted(rest)?;
            let after = after
                .trim_start()
                .strip_prefix(':')
                .ok_or_else(|| parse_err("expected ':' after key in NPY header"))?
                .trim_start();
            let after = match key {
                "descr" => {
                    let (v, a) = take_quoted(after)?;
                    descr = Some(v.to_string());
                    a
                }
                "fortran_order" => {
                    if let Some(a) = after.strip_prefix("False") {
                        fortran_order = Some(false);
                        a
                    } else if let Some(a) = after.strip_prefix("True") {
                        fortran_order = Some(true);
                        a
                    } else {
                        return Err(parse_err("fortran_order must be True or False"));
                    }
                }
                "shape" => {
                    let (v, a) = take_tuple(after)?;
                    shape = Some(v);
                    a
                }
                other => return Err(parse_err(format!("unexpected NPY header key '{other}'"))),
            };
            let after = after.trim_start();
            rest = match after.strip_prefix(',') {
                Some(a) => a.trim_start(),
                None if after.is_empty() => after,
                None => return Err(parse_err("expected ',' between NPY header entries")),
            };
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| parse_err("NPY header lacks 'descr'"))?,
            fortran_order: fortran_order.ok_or_else(|| parse_err("NPY header lacks 'fortran_order'"))?,
            shape: shape.ok_or_else(|| parse_err("NPY header lacks 'shape'"))?,
        })
    }
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| parse_err("expected a quoted string in NPY header"))?;
    let inner = &s[1..];
    let end = inner
        .find(quote)
        .ok_or_else(|| parse_err("unterminated string in NPY header"))?;
    Ok((&inner[..end], &inner[end + 1..]))
}

fn take_tuple(s: &str) -> Result<(Vec<usize>, &str)> {
    let inner = s
        .strip_prefix('(')
        .ok_or_else(|| parse_err("shape must be a tuple"))?;
    let end = inner
        .find(')')
        .ok_or_else(|| parse_err("unterminated shape tuple"))?;
    let dims = inner[..end]
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| parse_err(format!("bad shape entry '{p}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, &inner[end + 1..]))
}
