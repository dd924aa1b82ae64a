//! Validated numeric domain objects shared by every other module.
//!
//! All types here are immutable once constructed. Constructors enforce the
//! invariants; downstream code relies on them without re-checking.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tolerated deviation of a row sum from 1 before a row is rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Rows closer to 1 than this are left untouched, which keeps validation
/// idempotent. Renormalized rows land well inside this band.
const RENORMALIZE_THRESHOLD: f64 = 1e-10;

/// Slack for binary rounding of decimal inputs sitting exactly on the
/// tolerance boundary (e.g. `0.5 + 0.5001`).
const BOUNDARY_SLACK: f64 = 1e-12;

/// An N×K row-stochastic matrix of Softmax outputs for one model on one
/// test set, stored row-major in 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    model_id: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PredictionMatrix {
    /// Validates a row-major buffer. Rows whose sums drift from 1 by at most
    /// [`ROW_SUM_TOLERANCE`] are renormalized; larger drift is an error.
    pub fn new(model_id: impl Into<String>, rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::DegenerateShape("matrix has no rows".into()));
        }
        if cols < 2 {
            return Err(Error::DegenerateShape(format!("need at least 2 classes, got {cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "buffer of length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        for (row, chunk) in data.chunks_exact_mut(cols).enumerate() {
            let mut sum = 0.0;
            for (col, &v) in chunk.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { row, col });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row, col, value: v });
                }
                sum += v;
            }
            let drift = (sum - 1.0).abs();
            if drift > ROW_SUM_TOLERANCE + BOUNDARY_SLACK {
                return Err(Error::RowSumOutOfTolerance { row, sum });
            }
            if drift > RENORMALIZE_THRESHOLD {
                chunk.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(PredictionMatrix {
            model_id: model_id.into(),
            rows,
            cols,
            data,
        })
    }

    /// Validates a nested-row matrix. Ragged input is a shape error.
    pub fn from_rows<R: AsRef<[f64]>>(model_id: impl Into<String>, raw: &[R]) -> Result<Self> {
        let cols = raw.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(raw.len() * cols);
        for (i, r) in raw.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(model_id, raw.len(), cols, data)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    /// Number of samples N.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of classes K.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    /// Row subset in the given order. Rows are already valid, so no
    /// re-validation happens.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::DegenerateShape("row selection is empty".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::DimensionMismatch {
                    what: "row index",
                    expected: self.rows,
                    got: i,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(PredictionMatrix {
            model_id: self.model_id.clone(),
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Per-row predicted class; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.iter_rows().map(row_argmax).collect()
    }

    /// Per-row maximum probability.
    pub fn max_probs(&self) -> Vec<f64> {
        self.iter_rows()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub(crate) fn ensure_same_shape(&self, other: &PredictionMatrix) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                what: "sample count",
                expected: self.rows,
                got: other.rows,
            });
        }
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                what: "class count",
                expected: self.cols,
                got: other.cols,
            });
        }
        Ok(())
    }
}

pub(crate) fn row_argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Free-function form of [`PredictionMatrix::from_rows`] with an empty id.
pub fn validate_prediction_matrix<R: AsRef<[f64]>>(raw: &[R]) -> Result<PredictionMatrix> {
    PredictionMatrix::from_rows("", raw)
}

/// K×K class-class correlation matrix with its intra/inter-class mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCorrelationMatrix {
    dim: usize,
    data: Vec<f64>,
    intra: f64,
    inter: f64,
}

impl ClassCorrelationMatrix {
    /// Builds a matrix from explicit entries, checking symmetry,
    /// non-negativity and unit total mass.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DegenerateShape(format!("need at least 2 classes, got {dim}")));
        }
        if data.len() != dim * dim {
            return Err(Error::Shape(format!(
                "buffer of length {} is not {dim}x{dim}",
                data.len()
            )));
        }
        let mut total = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let v = data[i * dim + j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value: v });
                }
                if (v - data[j * dim + i]).abs() > 1e-9 {
                    return Err(Error::Shape(format!("matrix is not symmetric at ({i}, {j})")));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Shape(format!("entries sum to {total}, expected 1")));
        }
        Ok(Self::from_parts(dim, data))
    }

    pub(crate) fn from_parts(dim: usize, data: Vec<f64>) -> Self {
        let intra: f64 = (0..dim).map(|k| data[k * dim + k]).sum();
        ClassCorrelationMatrix {
            dim,
            data,
            intra,
            inter: 1.0 - intra,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.get(k, k)).collect()
    }

    /// Intra-class correlation: the trace.
    pub fn intra(&self) -> f64 {
        self.intra
    }

    /// Inter-class correlation: off-diagonal mass, `1 - intra`.
    pub fn inter(&self) -> f64 {
        self.inter
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Diagonal reference matrix, stored as its diagonal: an estimated class
/// marginal distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMatrix {
    diag: Vec<f64>,
}

impl ReferenceMatrix {
    pub fn from_distribution(diag: Vec<f64>) -> Result<Self> {
        if diag.len() < 2 {
            return Err(Error::DegenerateShape(format!(
                "class distribution needs at least 2 entries, got {}",
                diag.len()
            )));
        }
        for &v in &diag {
            if !v.is_finite() {
                return Err(Error::NonFinite(v));
            }
            if v < 0.0 {
                return Err(Error::InvalidDistribution(format!("negative mass {v}")));
            }
        }
        let sum: f64 = diag.iter().sum();
        if sum == 0.0 {
            return Err(Error::ZeroReferenceNorm);
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDistribution(format!("sums to {sum}, expected 1")));
        }
        Ok(ReferenceMatrix { diag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn norm(&self) -> f64 {
        self.diag.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Ground-truth class indices, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::DegenerateShape("label vector is empty".into()));
        }
        Ok(LabelVector { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        LabelVector::new(indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// Checks the labels pair with a matrix: same N, every label below K.
    pub fn check_against(&self, p: &PredictionMatrix) -> Result<()> {
        if self.labels.len() != p.rows() {
            return Err(Error::DimensionMismatch {
                what: "label count vs. sample count",
                expected: p.rows(),
                got: self.labels.len(),
            });
        }
        if let Some((index, &label)) = self.labels.iter().enumerate().find(|(_, &l)| l >= p.cols()) {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                classes: p.cols(),
            });
        }
        Ok(())
    }
}

/// The label-free (or ID-calibrated) measures a pool can be scored with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "softmaxcorr")]
    SoftmaxCorr,
    #[serde(rename = "maxpred")]
    MaxPred,
    #[serde(rename = "softgap")]
    SoftGap,
    #[serde(rename = "atc_mc")]
    AtcMc,
    #[serde(rename = "aol")]
    Aol,
    #[serde(rename = "disagreement")]
    Disagreement,
    #[serde(rename = "certainty")]
    Certainty,
    #[serde(rename = "diversity")]
    Diversity,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::SoftmaxCorr,
        Measure::MaxPred,
        Measure::SoftGap,
        Measure::AtcMc,
        Measure::Aol,
        Measure::Disagreement,
        Measure::Certainty,
        Measure::Diversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::SoftmaxCorr => "softmaxcorr",
            Measure::MaxPred => "maxpred",
            Measure::SoftGap => "softgap",
            Measure::AtcMc => "atc_mc",
            Measure::Aol => "aol",
            Measure::Disagreement => "disagreement",
            Measure::Certainty => "certainty",
            Measure::Diversity => "diversity",
        }
    }

    /// Whether scores live in [0, 1] and can be put on the probit scale.
    pub fn is_bounded(self) -> bool {
        !matches!(self, Measure::Aol | Measure::Diversity)
    }

    pub fn needs_id_set(self) -> bool {
        matches!(self, Measure::AtcMc | Measure::Aol)
    }

    /// Needs a class distribution, from either source.
    pub fn needs_class_distribution(self) -> bool {
        matches!(self, Measure::SoftmaxCorr | Measure::Diversity)
    }

    /// Needs the reference model's full prediction matrix.
    pub fn needs_reference_predictions(self) -> bool {
        matches!(self, Measure::Disagreement)
    }

    /// Parses `all` or a comma-separated list of measure names.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        if s.trim() == "all" {
            return Ok(Measure::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',') {
            let m: Measure = part.trim().parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMeasure(s.to_string()))
    }
}

/// One model's score under one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureScore {
    pub model_id: String,
    pub measure: Measure,
    pub value: f64,
}

impl MeasureScore {
    pub fn new(model_id: impl Into<String>, measure: Measure, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        if measure == Measure::SoftmaxCorr && !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidRequest(format!("softmaxcorr score {value} outside [0, 1]")));
        }
        Ok(MeasureScore {
            model_id: model_id.into(),
            measure,
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Per-measure scores, the induced ranking, and (for correlation studies)
/// agreement statistics against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub measure: Measure,
    pub scores: BTreeMap<String, f64>,
    pub ranking: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_kendall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<LineFit>,
    /// Ground-truth metric per model, on the same scale the statistics used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<BTreeMap<String, f64>>,
    /// Set when this measure could not be evaluated; other measures in the
    /// same study are unaffected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CorrelationReport {
    /// Builds a score-only report with the ranking derived from `scores`.
    pub fn from_scores(measure: Measure, scores: BTreeMap<String, f64>) -> Self {
        let ranking = rank_descending(&scores);
        CorrelationReport {
            measure,
            scores,
            ranking,
            spearman: None,
            weighted_kendall: None,
            pearson: None,
            fit: None,
            ground_truth: None,
            error: None,
        }
    }

    pub fn failed(measure: Measure, error: &Error) -> Self {
        CorrelationReport {
            error: Some(error.to_string()),
            ..Self::from_scores(measure, BTreeMap::new())
        }
    }
}

/// Model ids sorted by descending score, ties broken by id.
pub fn rank_descending(scores: &BTreeMap<String, f64>) -> Vec<String> {
    let mut ids: Vec<(&String, f64)> = scores.iter().map(|(k, &v)| (k, v)).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ids.into_iter().map(|(k, _)| k.clone()).collect()
}
