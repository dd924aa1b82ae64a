//! Pool-level workflows behind the command line: score and rank a pool,
//! correlate scores with ground truth, and measure sensitivity to test-set
//! size by subsampling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, remap_labels, restrict_to_subset, PoolManifest, ReferenceSource};
use crate::measures::{
    aol_score, atc_calibrate, atc_score, certainty, class_correlation, disagreement, diversity, max_pred,
    reference_matrix, soft_gap, softmax_corr,
};
use crate::stats::{accuracy, huber_fit, macro_f1, pearson, probit, spearman, weighted_kendall, PairedSeries};
use crate::types::{CorrelationReport, LabelVector, LineFit, Measure, PredictionMatrix, ReferenceMatrix};

/// Ground-truth generalization metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    #[serde(rename = "accuracy")]
    Accuracy,
    #[serde(rename = "macro_f1")]
    MacroF1,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "macro_f1" => Ok(Metric::MacroF1),
            other => Err(Error::InvalidRequest(format!("unknown metric `{other}`"))),
        }
    }
}

impl Metric {
    pub fn evaluate(self, p: &PredictionMatrix, y: &LabelVector) -> Result<f64> {
        match self {
            Metric::Accuracy => accuracy(p, y),
            Metric::MacroF1 => macro_f1(p, y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedReference {
    Predictions(PredictionMatrix),
    Distribution(ReferenceMatrix),
}

/// A manifest with every file loaded, validated, and remapped to the class
/// subset. Models are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub models: Vec<PredictionMatrix>,
    pub reference: Option<LoadedReference>,
    pub labels: Option<LabelVector>,
    /// Calibration data aligned with `models`; `None` entries have no ID set.
    pub id_set: Vec<Option<(PredictionMatrix, LabelVector)>>,
}

impl Pool {
    /// Loads all files named by the manifest in parallel.
    ///
    /// The class subset, when present, applies to the pool's test-set
    /// matrices, the reference predictions and the test labels (which are
    /// given in the full class space). ID-set data stays in the full space.
    pub fn load(manifest: &PoolManifest) -> Result<Self> {
        let subset = manifest.class_subset.as_deref();
        let restrict = |p: PredictionMatrix, path: &Path| -> Result<PredictionMatrix> {
            match subset {
                Some(s) => restrict_to_subset(&p, s).map_err(|e| e.in_file(path)),
                None => Ok(p),
            }
        };

        let mut models = manifest
            .models
            .par_iter()
            .map(|m| {
                let p = io::load_prediction_matrix(&m.prediction_path, m.format)?;
                let full_k = p.cols();
                Ok((restrict(p, &m.prediction_path)?.with_model_id(&m.model_id), full_k))
            })
            .collect::<Result<Vec<_>>>()?;
        models.sort_by(|a, b| a.0.model_id().cmp(b.0.model_id()));

        let (first, full_k) = (&models[0].0, models[0].1);
        for (m, k) in &models[1..] {
            check(m.rows(), first.rows(), "pool sample count")?;
            check(*k, full_k, "pool class count")?;
        }
        let k = first.cols();
        let n = first.rows();
        let models: Vec<PredictionMatrix> = models.into_iter().map(|(m, _)| m).collect();

        let reference = match &manifest.reference {
            None => None,
            Some(ReferenceSource::Predictions { prediction_path, format }) => {
                let p = io::load_prediction_matrix(prediction_path, *format)?;
                if p.cols() != full_k || p.rows() != n {
                    return Err(Error::DimensionMismatch {
                        what: "reference predictions shape",
                        expected: n * full_k,
                        got: p.rows() * p.cols(),
                    }
                    .in_file(prediction_path));
                }
                Some(LoadedReference::Predictions(
                    restrict(p, prediction_path)?.with_model_id("reference"),
                ))
            }
            Some(ReferenceSource::ClassDistribution(d)) => {
                if d.len() != k {
                    return Err(Error::DimensionMismatch {
                        what: "class_distribution length",
                        expected: k,
                        got: d.len(),
                    });
                }
                Some(LoadedReference::Distribution(ReferenceMatrix::from_distribution(d.clone())?))
            }
        };

        let labels = match &manifest.labels_path {
            None => None,
            Some(path) => {
                let raw = io::load_labels(path)?;
                let labels = match subset {
                    Some(s) => remap_labels(&raw, s).map_err(|e| e.in_file(path))?,
                    None => raw,
                };
                labels.check_against(&models[0]).map_err(|e| e.in_file(path))?;
                Some(labels)
            }
        };

        let mut id_set = vec![None; models.len()];
        if let Some(entries) = &manifest.id_set {
            let loaded = entries
                .par_iter()
                .map(|e| {
                    let p = io::load_prediction_matrix(&e.prediction_path, e.format)?;
                    if p.cols() != full_k {
                        return Err(Error::DimensionMismatch {
                            what: "ID-set class count",
                            expected: full_k,
                            got: p.cols(),
                        }
                        .in_file(&e.prediction_path));
                    }
                    let y = io::load_labels(&e.labels_path)?;
                    y.check_against(&p).map_err(|err| err.in_file(&e.labels_path))?;
                    Ok((e.model_id.clone(), p.with_model_id(&e.model_id), y))
                })
                .collect::<Result<Vec<_>>>()?;
            for (id, p, y) in loaded {
                let slot = models.iter().position(|m| m.model_id() == id).expect("validated id");
                id_set[slot] = Some((p, y));
            }
        }

        Ok(Pool {
            models,
            reference,
            labels,
            id_set,
        })
    }

    pub fn from_manifest_path(path: &Path) -> Result<Self> {
        Pool::load(&io::load_manifest(path)?)
    }

    pub fn classes(&self) -> usize {
        self.models[0].cols()
    }

    pub fn samples(&self) -> usize {
        self.models[0].rows()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.model_id().to_string()).collect()
    }

    /// Class distribution estimate: explicit, or the reference model's
    /// mean prediction.
    pub fn reference_distribution(&self) -> Option<ReferenceMatrix> {
        match &self.reference {
            None => None,
            Some(LoadedReference::Distribution(r)) => Some(r.clone()),
            Some(LoadedReference::Predictions(p)) => Some(reference_matrix(p)),
        }
    }

    /// Checks that every side input the measures need is present.
    pub fn check_side_inputs(&self, measures: &[Measure]) -> Result<()> {
        for &m in measures {
            if m.needs_class_distribution() && self.reference.is_none() {
                return Err(missing(m, "reference"));
            }
            if m.needs_reference_predictions() && !matches!(self.reference, Some(LoadedReference::Predictions(_))) {
                return Err(missing(m, "reference.path"));
            }
            if m.needs_id_set() {
                if let Some(i) = self.id_set.iter().position(Option::is_none) {
                    return Err(missing(m, &format!("id_set entry for `{}`", self.models[i].model_id())));
                }
            }
        }
        Ok(())
    }

    /// Scores every model under one measure.
    pub fn score(&self, measure: Measure) -> Result<BTreeMap<String, f64>> {
        self.check_side_inputs(&[measure])?;
        let reference = self.reference_distribution();
        let values = self
            .models
            .par_iter()
            .zip(&self.id_set)
            .map(|(p, id)| -> Result<f64> {
                match measure {
                    Measure::SoftmaxCorr => softmax_corr(&class_correlation(p), reference.as_ref().unwrap()),
                    Measure::MaxPred => Ok(max_pred(p)),
                    Measure::SoftGap => Ok(soft_gap(p)),
                    Measure::AtcMc => {
                        let (pid, yid) = id.as_ref().unwrap();
                        Ok(atc_score(p, &atc_calibrate(pid, yid)?))
                    }
                    Measure::Aol => {
                        let (pid, yid) = id.as_ref().unwrap();
                        aol_score(pid, yid)
                    }
                    Measure::Disagreement => match &self.reference {
                        Some(LoadedReference::Predictions(r)) => disagreement(p, r),
                        _ => unreachable!("checked above"),
                    },
                    Measure::Certainty => Ok(certainty(&class_correlation(p))),
                    Measure::Diversity => diversity(&class_correlation(p), reference.as_ref().unwrap()),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        self.models
            .iter()
            .zip(values)
            .map(|(p, v)| {
                if !v.is_finite() {
                    return Err(Error::NonFinite(v));
                }
                Ok((p.model_id().to_string(), v))
            })
            .collect()
    }

    /// Ground-truth metric per model on the pool's labels.
    pub fn ground_truth(&self, metric: Metric) -> Result<BTreeMap<String, f64>> {
        let labels = self.labels.as_ref().ok_or_else(|| Error::MissingSideInput {
            measure: "ground truth".into(),
            field: "labels".into(),
        })?;
        self.models
            .par_iter()
            .map(|p| Ok((p.model_id().to_string(), metric.evaluate(p, labels)?)))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().collect())
    }

    /// The pool restricted to the given test-set rows. ID data is untouched.
    pub fn subsample(&self, rows: &[usize]) -> Result<Pool> {
        Ok(Pool {
            models: self
                .models
                .iter()
                .map(|m| m.select_rows(rows))
                .collect::<Result<_>>()?,
            reference: match &self.reference {
                Some(LoadedReference::Predictions(p)) => Some(LoadedReference::Predictions(p.select_rows(rows)?)),
                other => other.clone(),
            },
            labels: self.labels.as_ref().map(|l| l.select(rows)).transpose()?,
            id_set: self.id_set.clone(),
        })
    }
}

fn check(got: usize, expected: usize, what: &'static str) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn missing(m: Measure, field: &str) -> Error {
    Error::MissingSideInput {
        measure: m.name().to_string(),
        field: field.to_string(),
    }
}

fn maybe_probit(values: BTreeMap<String, f64>, apply: bool) -> Result<BTreeMap<String, f64>> {
    if !apply {
        return Ok(values);
    }
    values.into_iter().map(|(k, v)| Ok((k, probit(v)?))).collect()
}

/// Scores and ranks the pool under each measure. Bounded scores are put on
/// the probit scale when `probit_scores` is set.
pub fn rank(pool: &Pool, measures: &[Measure], probit_scores: bool) -> Result<Vec<CorrelationReport>> {
    pool.check_side_inputs(measures)?;
    measures
        .iter()
        .map(|&m| {
            let scores = maybe_probit(pool.score(m)?, probit_scores && m.is_bounded())?;
            Ok(CorrelationReport::from_scores(m, scores))
        })
        .collect()
}

/// ρ, τ_w, Pearson r and a Huber line of ground truth on scores.
///
/// Failures are recorded per statistic; the first one is returned as the
/// error message while the remaining statistics are still reported.
fn correlation_stats(report: &mut CorrelationReport, truth: &BTreeMap<String, f64>) {
    let ids: Vec<&String> = report.scores.keys().collect();
    let x: Vec<f64> = ids.iter().map(|id| report.scores[*id]).collect();
    let y: Vec<f64> = ids.iter().map(|id| truth[*id]).collect();
    let series = match PairedSeries::new(x, y) {
        Ok(s) => s,
        Err(e) => {
            report.error = Some(e.to_string());
            return;
        }
    };
    let mut first_error: Option<String> = None;
    let mut keep = |r: Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            first_error.get_or_insert_with(|| e.to_string());
            None
        }
    };
    report.spearman = keep(spearman(&series));
    report.weighted_kendall = keep(weighted_kendall(&series));
    report.pearson = keep(pearson(&series));
    report.fit = match huber_fit(&series) {
        Ok(f) => Some(LineFit {
            slope: f.slope,
            intercept: f.intercept,
        }),
        Err(e) => {
            first_error.get_or_insert_with(|| e.to_string());
            None
        }
    };
    report.error = first_error;
}

/// Correlation study: every requested measure against the ground-truth
/// metric. A degenerate measure is reported with its error and does not
/// stop the others.
pub fn correlate(pool: &Pool, measures: &[Measure], metric: Metric, probit_scale: bool) -> Result<Vec<CorrelationReport>> {
    if pool.models.len() < 2 {
        return Err(Error::TooFewObservations(pool.models.len()));
    }
    pool.check_side_inputs(measures)?;
    let truth = maybe_probit(pool.ground_truth(metric)?, probit_scale)?;
    Ok(measures
        .iter()
        .map(|&m| {
            let scores = pool
                .score(m)
                .and_then(|s| maybe_probit(s, probit_scale && m.is_bounded()));
            match scores {
                Ok(scores) => {
                    let mut report = CorrelationReport::from_scores(m, scores);
                    correlation_stats(&mut report, &truth);
                    report.ground_truth = Some(truth.clone());
                    report
                }
                Err(e) => CorrelationReport::failed(m, &e),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRequest {
    pub measure: Measure,
    pub fractions: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub fraction: f64,
    pub n_samples: usize,
    pub spearman_runs: Vec<f64>,
    pub mean_spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub measure: Measure,
    pub metric: Metric,
    pub seed: u64,
    pub runs: usize,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityRequest {
    /// Per-fraction subsample sizes, after checking the request.
    pub fn sizes(&self, samples: usize) -> Result<Vec<usize>> {
        if self.fractions.is_empty() {
            return Err(Error::InvalidRequest("no fractions given".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidRequest("runs must be at least 1".into()));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRequest("fractions must be strictly ascending".into()));
        }
        self.fractions
            .iter()
            .map(|&f| {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::InvalidRequest(format!("fraction {f} is outside (0, 1]")));
                }
                let n = (f * samples as f64).round() as usize;
                if n < 2 {
                    return Err(Error::SubsampleTooSmall { fraction: f, samples });
                }
                Ok(n.min(samples))
            })
            .collect()
    }
}

fn spearman_on(pool: &Pool, measure: Measure, metric: Metric) -> Result<f64> {
    let scores = pool.score(measure)?;
    let truth = pool.ground_truth(metric)?;
    let series = PairedSeries::new(scores.values().copied().collect(), truth.values().copied().collect())?;
    spearman(&series)
}

/// For each fraction, draws `runs` uniform subsamples without replacement,
/// re-scores the pool and averages Spearman's ρ. The full-data fraction
/// uses every sample in the original order.
pub fn sensitivity(pool: &Pool, req: &SensitivityRequest) -> Result<SensitivityTable> {
    let n = pool.samples();
    let sizes = req.sizes(n)?;
    pool.check_side_inputs(&[req.measure])?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for (&fraction, &size) in req.fractions.iter().zip(&sizes) {
        let (runs, mean) = if size == n {
            let rho = spearman_on(pool, req.measure, req.metric)?;
            (vec![rho; req.runs], rho)
        } else {
            let mut runs = Vec::with_capacity(req.runs);
            for _ in 0..req.runs {
                let mut rows_idx = sample(&mut rng, n, size).into_vec();
                rows_idx.sort_unstable();
                runs.push(spearman_on(&pool.subsample(&rows_idx)?, req.measure, req.metric)?);
            }
            let mean = runs.iter().sum::<f64>() / runs.len() as f64;
            (runs, mean)
        };
        rows.push(SensitivityRow {
            fraction,
            n_samples: size,
            spearman_runs: runs,
            mean_spearman: mean,
        });
    }
    Ok(SensitivityTable {
        measure: req.measure,
        metric: req.metric,
        seed: req.seed,
        runs: req.runs,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidRequest(format!("unknown output format `{other}`"))),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders reports as a JSON array or a flat CSV table (one row per model
/// per measure, study statistics repeated on each row).
pub fn render_reports(reports: &[CorrelationReport], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut out = String::from(
                "measure,model_id,score,rank,ground_truth,spearman,weighted_kendall,pearson,slope,intercept,error\n",
            );
            for r in reports {
                let slope = r.fit.map(|f| f.slope);
                let intercept = r.fit.map(|f| f.intercept);
                let error = csv_field(r.error.as_deref().unwrap_or(""));
                if r.ranking.is_empty() {
                    let _ = writeln!(out, "{},,,,,,,,,,{error}", r.measure);
                }
                for (pos, id) in r.ranking.iter().enumerate() {
                    let truth = r.ground_truth.as_ref().and_then(|g| g.get(id).copied());
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        r.measure,
                        csv_field(id),
                        r.scores[id],
                        pos + 1,
                        cell(truth),
                        cell(r.spearman),
                        cell(r.weighted_kendall),
                        cell(r.pearson),
                        cell(slope),
                        cell(intercept),
                        error
                    );
                }
            }
            Ok(out)
        }
    }
}

pub fn render_sensitivity(table: &SensitivityTable, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(table)?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut out = String::from("fraction,n_samples,mean_spearman");
            for i in 1..=table.runs {
                let _ = write!(out, ",run_{i}");
            }
            out.push('\n');
            for row in &table.rows {
                let _ = write!(out, "{},{},{}", row.fraction, row.n_samples, row.mean_spearman);
                for v in &row.spearman_runs {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}
