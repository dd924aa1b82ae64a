//! Pool manifests: which prediction files make up a pool, plus optional
//! reference, labels, ID-set calibration data and class subset.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FileFormat {
    /// NPY v1.0, little-endian f4/f8, C order.
    #[serde(rename = "npy")]
    BinaryArrayV1,
    /// Comma-separated decimals, one row per line.
    #[serde(rename = "csv")]
    DelimitedText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub model_id: String,
    pub prediction_path: PathBuf,
    pub format: FileFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSource {
    /// A reference model whose mean prediction estimates the class
    /// distribution.
    Predictions { prediction_path: PathBuf, format: FileFormat },
    /// An explicit class distribution.
    ClassDistribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdSetEntry {
    pub model_id: String,
    pub prediction_path: PathBuf,
    pub format: FileFormat,
    pub labels_path: PathBuf,
}

/// A validated manifest. Paths are resolved against the manifest's
/// directory and known to exist.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolManifest {
    pub models: Vec<ModelEntry>,
    pub reference: Option<ReferenceSource>,
    pub labels_path: Option<PathBuf>,
    pub id_set: Option<Vec<IdSetEntry>>,
    pub class_subset: Option<Vec<usize>>,
}

// On-disk JSON shape.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    models: Vec<RawModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<RawReference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id_set: Option<Vec<RawIdEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_subset: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    id: String,
    path: PathBuf,
    format: FileFormat,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<FileFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_distribution: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIdEntry {
    id: String,
    path: PathBuf,
    format: FileFormat,
    labels: PathBuf,
}

impl PoolManifest {
    /// Parses manifest JSON, resolving relative paths against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawManifest = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        if raw.models.is_empty() {
            return Err(Error::Schema("`models` must list at least one model".into()));
        }
        let mut seen = HashSet::new();
        let mut models = Vec::with_capacity(raw.models.len());
        for m in raw.models {
            if !seen.insert(m.id.clone()) {
                return Err(Error::DuplicateModelId(m.id));
            }
            models.push(ModelEntry {
                model_id: m.id,
                prediction_path: resolve(m.path),
                format: m.format,
            });
        }

        let reference = match raw.reference {
            None => None,
            Some(RawReference {
                path: Some(_),
                class_distribution: Some(_),
                ..
            }) => {
                return Err(Error::Schema(
                    "`reference` takes either `path`/`format` or `class_distribution`, not both".into(),
                ))
            }
            Some(RawReference {
                path: Some(path),
                format: Some(format),
                class_distribution: None,
            }) => Some(ReferenceSource::Predictions {
                prediction_path: resolve(path),
                format,
            }),
            Some(RawReference {
                path: None,
                format: None,
                class_distribution: Some(dist),
            }) => Some(ReferenceSource::ClassDistribution(dist)),
            Some(_) => {
                return Err(Error::Schema(
                    "`reference` needs `path` with `format`, or `class_distribution`".into(),
                ))
            }
        };

        let id_set = match raw.id_set {
            None => None,
            Some(entries) => {
                let mut seen_id = HashSet::new();
                let mut out = Vec::with_capacity(entries.len());
                for e in entries {
                    if !seen.contains(&e.id) {
                        return Err(Error::Schema(format!(
                            "`id_set` entry `{}` does not name a model in `models`",
                            e.id
                        )));
                    }
                    if !seen_id.insert(e.id.clone()) {
                        return Err(Error::DuplicateModelId(e.id));
                    }
                    out.push(IdSetEntry {
                        model_id: e.id,
                        prediction_path: resolve(e.path),
                        format: e.format,
                        labels_path: resolve(e.labels),
                    });
                }
                Some(out)
            }
        };

        if let Some(subset) = &raw.class_subset {
            if subset.is_empty() {
                return Err(Error::EmptySubset);
            }
        }

        let manifest = PoolManifest {
            models,
            reference,
            labels_path: raw.labels.map(resolve),
            id_set,
            class_subset: raw.class_subset,
        };
        manifest.check_files()?;
        Ok(manifest)
    }

    fn check_files(&self) -> Result<()> {
        for path in self.paths() {
            if !path.is_file() {
                return Err(Error::MissingFile(path.to_path_buf()));
            }
        }
        Ok(())
    }

    /// Every file the manifest refers to.
    pub fn paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = self.models.iter().map(|m| m.prediction_path.as_path()).collect();
        if let Some(ReferenceSource::Predictions { prediction_path, .. }) = &self.reference {
            out.push(prediction_path);
        }
        if let Some(l) = &self.labels_path {
            out.push(l);
        }
        for e in self.id_set.iter().flatten() {
            out.push(&e.prediction_path);
            out.push(&e.labels_path);
        }
        out
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|m| m.model_id.as_str())
    }

    /// Serializes to JSON with paths made relative to `base_dir` where
    /// possible.
    pub fn to_json(&self, base_dir: &Path) -> Result<String> {
        let rel = |p: &Path| p.strip_prefix(base_dir).unwrap_or(p).to_path_buf();
        let raw = RawManifest {
            models: self
                .models
                .iter()
                .map(|m| RawModel {
                    id: m.model_id.clone(),
                    path: rel(&m.prediction_path),
                    format: m.format,
                })
                .collect(),
            reference: self.reference.as_ref().map(|r| match r {
                ReferenceSource::Predictions { prediction_path, format } => RawReference {
                    path: Some(rel(prediction_path)),
                    format: Some(*format),
                    class_distribution: None,
                },
                ReferenceSource::ClassDistribution(d) => RawReference {
                    path: None,
                    format: None,
                    class_distribution: Some(d.clone()),
                },
            }),
            labels: self.labels_path.as_deref().map(rel),
            id_set: self.id_set.as_ref().map(|entries| {
                entries
                    .iter()
                    .map(|e| RawIdEntry {
                        id: e.model_id.clone(),
                        path: rel(&e.prediction_path),
                        format: e.format,
                        labels: rel(&e.labels_path),
                    })
                    .collect()
            }),
            class_subset: self.class_subset.clone(),
        };
        let mut s = serde_json::to_string_pretty(&raw)?;
        s.push('\n');
        Ok(s)
    }
}
