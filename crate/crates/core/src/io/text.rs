//! Delimited text: one sample per line, comma-separated decimals, LF only,
//! no header.

use crate::error::{Error, Result};

/// Parses text into `(rows, cols, data)`. A single trailing LF is allowed.
pub fn decode(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(Error::DegenerateShape("file contains no rows".into()));
    }
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for (i, line) in body.split('\n').enumerate() {
        let mut width = 0;
        for field in line.split(',') {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("'{}' is not a decimal number", field.escape_debug()),
            })?;
            data.push(v);
            width += 1;
        }
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Shape(format!(
                    "line {} has {width} fields, expected {c}",
                    i + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), data))
}

/// Formats each value with 17 significant digits.
pub fn encode(cols: usize, data: &[f64]) -> String {
    let mut out = String::with_capacity(data.len() * 24);
    for row in data.chunks(cols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parses newline-separated decimal integers into 0-based labels.
pub fn decode_labels(text: &str) -> Result<Vec<usize>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(Error::DegenerateShape("label file is empty".into()));
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let v: i64 = line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("'{}' is not an integer label", line.escape_debug()),
            })?;
            usize::try_from(v).map_err(|_| Error::NegativeLabel { line: i + 1, value: v })
        })
        .collect()
}

pub fn encode_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out
}
