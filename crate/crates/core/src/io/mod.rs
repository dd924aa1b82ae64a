//! Loading and writing prediction matrices, labels and pool manifests.

pub mod manifest;
pub mod npy;
pub mod text;

use std::fs;
use std::path::Path;

pub use manifest::{FileFormat, IdSetEntry, ModelEntry, PoolManifest, ReferenceSource};
pub use npy::NpyDtype;

use crate::error::{Error, Result};
use crate::types::{LabelVector, PredictionMatrix};

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|_| {
        Error::Parse {
            line: 0,
            message: "file is not valid UTF-8".into(),
        }
        .in_file(path)
    })
}

/// Loads and validates a prediction matrix. The model id is left empty.
pub fn load_prediction_matrix(path: &Path, format: FileFormat) -> Result<PredictionMatrix> {
    let parsed = match format {
        FileFormat::BinaryArrayV1 => {
            let bytes = read_bytes(path)?;
            npy::decode(&bytes).map(|a| (a.shape.0, a.shape.1, a.data))
        }
        FileFormat::DelimitedText => read_text(path).and_then(|t| text::decode(&t)),
    };
    parsed
        .and_then(|(rows, cols, data)| PredictionMatrix::new("", rows, cols, data))
        .map_err(|e| attach(e, path))
}

fn attach(e: Error, path: &Path) -> Error {
    match e {
        e @ (Error::InFile { .. } | Error::MissingFile(_) | Error::Io { .. }) => e,
        e => e.in_file(path),
    }
}

/// Writes a matrix in the given format. Binary output is always `<f8`.
pub fn write_prediction_matrix(path: &Path, p: &PredictionMatrix, format: FileFormat) -> Result<()> {
    let bytes = match format {
        FileFormat::BinaryArrayV1 => npy::encode(p.rows(), p.cols(), p.data(), NpyDtype::F64),
        FileFormat::DelimitedText => text::encode(p.cols(), p.data()).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<LabelVector> {
    read_text(path)
        .and_then(|t| text::decode_labels(&t))
        .and_then(LabelVector::new)
        .map_err(|e| attach(e, path))
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    fs::write(path, text::encode_labels(labels.as_slice())).map_err(|e| Error::io(path, e))
}

/// Reads and validates a manifest; relative paths resolve against the
/// manifest's own directory.
pub fn load_manifest(path: &Path) -> Result<PoolManifest> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    PoolManifest::from_json(&text, base).map_err(|e| attach(e, path))
}

/// Keeps the listed columns and renormalizes each row over them.
pub fn restrict_to_subset(p: &PredictionMatrix, subset: &[usize]) -> Result<PredictionMatrix> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let k = p.cols();
    let mut seen = vec![false; k];
    for &c in subset {
        if c >= k {
            return Err(Error::InvalidSubset(format!("class {c} is out of range for {k} classes")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidSubset(format!("class {c} is listed twice")));
        }
    }
    let mut data = Vec::with_capacity(p.rows() * subset.len());
    for (i, row) in p.iter_rows().enumerate() {
        let mass: f64 = subset.iter().map(|&c| row[c]).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroRowMass { row: i });
        }
        data.extend(subset.iter().map(|&c| row[c] / mass));
    }
    PredictionMatrix::new(p.model_id(), p.rows(), subset.len(), data)
}

/// Maps labels from the full class space into subset positions.
pub fn remap_labels(labels: &LabelVector, subset: &[usize]) -> Result<LabelVector> {
    let max = subset.iter().copied().max().unwrap_or(0);
    let mut position = vec![usize::MAX; max + 1];
    for (pos, &c) in subset.iter().enumerate() {
        position[c] = pos;
    }
    labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(index, &l)| match position.get(l) {
            Some(&pos) if pos != usize::MAX => Ok(pos),
            _ => Err(Error::LabelOutOfRange {
                index,
                label: l,
                classes: subset.len(),
            }),
        })
        .collect::<Result<Vec<_>>>()
        .and_then(LabelVector::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_prediction_matrix;

    #[test]
    fn subset_renormalizes_rows() {
        let p = validate_prediction_matrix(&[[0.5, 0.25, 0.25]]).unwrap();
        let r = restrict_to_subset(&p, &[0, 1]).unwrap();
        assert_eq!(r.cols(), 2);
        assert!((r.row(0)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.row(0)[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn full_subset_is_identity() {
        let p = validate_prediction_matrix(&[[1.0, 0.0]]).unwrap();
        assert_eq!(restrict_to_subset(&p, &[0, 1]).unwrap(), p);
    }

    #[test]
    fn subset_errors() {
        let p = validate_prediction_matrix(&[[0.0, 1.0]]).unwrap();
        assert!(matches!(restrict_to_subset(&p, &[0]).unwrap_err(), Error::ZeroRowMass { row: 0 }));
        assert!(matches!(restrict_to_subset(&p, &[]).unwrap_err(), Error::EmptySubset));
        assert!(matches!(restrict_to_subset(&p, &[0, 2]).unwrap_err(), Error::InvalidSubset(_)));
        assert!(matches!(restrict_to_subset(&p, &[1, 1]).unwrap_err(), Error::InvalidSubset(_)));
    }

    #[test]
    fn label_remapping() {
        let labels = LabelVector::new(vec![5, 2, 5]).unwrap();
        assert_eq!(remap_labels(&labels, &[2, 5]).unwrap().as_slice(), &[1, 0, 1]);
        assert!(matches!(
            remap_labels(&labels, &[5]).unwrap_err(),
            Error::LabelOutOfRange { index: 1, label: 2, .. }
        ));
    }
}
