//! Synthetic classifier pools with controllable accuracy, confidence and
//! class bias.
//!
//! Each model draws a target accuracy `a` and a temperature `T`. For every
//! sample it predicts the true class with probability `a`, otherwise a
//! wrong class drawn from the model's class preference. The predicted
//! class gets the largest logit: the maximum of Gumbel noise on the other
//! classes plus a positive margin. Rows are the Softmax of logits / `T`.
//!
//! Margins are larger for correct predictions, so confidence tracks
//! correctness. With `bias_strength > 0` the preference is Dirichlet-skewed
//! and wrong predictions on favoured classes get larger margins, which
//! produces confident-but-biased models.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Gumbel, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{self, FileFormat, IdSetEntry, ModelEntry, PoolManifest, ReferenceSource};
use crate::stats::{accuracy, normal_cdf, probit};
use crate::types::{LabelVector, PredictionMatrix};

const MARGIN_SHAPE: f64 = 2.0;
const CORRECT_MARGIN_SCALE: f64 = 1.5;
const WRONG_MARGIN_SCALE: f64 = 0.4;
const MIN_MARGIN: f64 = 1e-6;
const ID_GAP_NOISE: f64 = 0.15;
const MAX_ID_ACCURACY: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_models: usize,
    pub n_samples: usize,
    pub n_classes: usize,
    pub accuracy_range: (f64, f64),
    pub temperature_range: (f64, f64),
    /// 0 gives uniform wrong-class preference; larger values skew it.
    pub bias_strength: f64,
    /// True class marginal of the test labels.
    pub class_distribution: Vec<f64>,
    pub seed: u64,
    /// Size of the labeled ID calibration set; 0 disables it.
    pub id_samples: usize,
    /// Shift of ID over OOD accuracy on the probit scale.
    pub id_gap: f64,
}

impl SynthConfig {
    /// A config with uniform class distribution and the remaining fields at
    /// their defaults. The default accuracy range is `[0.2, 0.9]`, with the
    /// lower end raised to `1/K + 0.05` when chance is above 0.15.
    pub fn new(n_models: usize, n_classes: usize, n_samples: usize, seed: u64) -> Self {
        let chance = 1.0 / n_classes.max(1) as f64;
        SynthConfig {
            n_models,
            n_samples,
            n_classes,
            accuracy_range: ((chance + 0.05).max(0.2), 0.9),
            temperature_range: (0.9, 1.1),
            bias_strength: 0.1,
            class_distribution: vec![1.0 / n_classes.max(1) as f64; n_classes],
            seed,
            id_samples: 1000,
            id_gap: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleConfig(m));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.n_models == 0 || self.n_samples == 0 {
            return bad("need at least one model and one sample".into());
        }
        let chance = 1.0 / self.n_classes as f64;
        let (lo, hi) = self.accuracy_range;
        if !(lo <= hi && lo > chance && hi < 1.0) {
            return bad(format!(
                "accuracy range [{lo}, {hi}] must be ordered and inside ({chance}, 1)"
            ));
        }
        let (tlo, thi) = self.temperature_range;
        if !(tlo <= thi && tlo > 0.0 && thi.is_finite()) {
            return bad(format!("temperature range [{tlo}, {thi}] must be ordered and positive"));
        }
        if !(self.bias_strength >= 0.0 && self.bias_strength.is_finite()) {
            return bad(format!("bias strength {} must be non-negative", self.bias_strength));
        }
        if !self.id_gap.is_finite() {
            return bad("id gap must be finite".into());
        }
        if self.class_distribution.len() != self.n_classes {
            return bad(format!(
                "class distribution has {} entries for {} classes",
                self.class_distribution.len(),
                self.n_classes
            ));
        }
        if self.class_distribution.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return bad("class distribution has negative or non-finite mass".into());
        }
        let sum: f64 = self.class_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return bad(format!("class distribution sums to {sum}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdSplit {
    pub labels: LabelVector,
    pub matrices: Vec<PredictionMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPool {
    pub labels: LabelVector,
    pub matrices: Vec<PredictionMatrix>,
    /// Realized top-1 accuracy of each model on `labels`.
    pub true_accuracies: Vec<f64>,
    pub target_accuracies: Vec<f64>,
    pub class_distribution: Vec<f64>,
    pub id_split: Option<IdSplit>,
}

impl SynthPool {
    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.matrices.iter().map(|m| m.model_id())
    }

    /// Index of the model with the highest realized accuracy (first on ties).
    pub fn best_model(&self) -> usize {
        let mut best = 0;
        for (i, &a) in self.true_accuracies.iter().enumerate() {
            if a > self.true_accuracies[best] {
                best = i;
            }
        }
        best
    }
}

struct ModelParams {
    temperature: f64,
    preference: Vec<f64>,
    bias_strength: f64,
}

fn sample_labels(rng: &mut ChaCha8Rng, dist: &[f64], n: usize) -> Result<LabelVector> {
    let cumulative: Vec<f64> = dist
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let labels = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(dist.len() - 1)
        })
        .collect();
    LabelVector::new(labels)
}

fn sample_preference(rng: &mut ChaCha8Rng, k: usize, bias: f64) -> Vec<f64> {
    if bias == 0.0 {
        return vec![1.0 / k as f64; k];
    }
    let gamma = Gamma::new(1.0 / bias, 1.0).expect("positive Dirichlet concentration");
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter().map(|d| d / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

fn sample_wrong_class(rng: &mut ChaCha8Rng, preference: &[f64], truth: usize) -> usize {
    let k = preference.len();
    let mass = 1.0 - preference[truth];
    if mass <= 1e-12 {
        // all preference sits on the true class: pick a wrong class uniformly
        let c = rng.random_range(0..k - 1);
        return if c >= truth { c + 1 } else { c };
    }
    let mut u = rng.random::<f64>() * mass;
    let mut last = if truth == k - 1 { k - 2 } else { k - 1 };
    for (c, &p) in preference.iter().enumerate() {
        if c == truth || p == 0.0 {
            continue;
        }
        last = c;
        if u < p {
            return c;
        }
        u -= p;
    }
    last
}

fn sample_matrix(
    rng: &mut ChaCha8Rng,
    model_id: &str,
    labels: &LabelVector,
    accuracy: f64,
    params: &ModelParams,
) -> Result<PredictionMatrix> {
    let k = params.preference.len();
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let correct_margin = Gamma::new(MARGIN_SHAPE, CORRECT_MARGIN_SCALE).expect("valid gamma");
    let mut data = Vec::with_capacity(labels.len() * k);
    let mut logits = vec![0.0; k];
    for &truth in labels.as_slice() {
        let correct = rng.random::<f64>() < accuracy;
        let predicted = if correct {
            truth
        } else {
            sample_wrong_class(rng, &params.preference, truth)
        };
        let margin = if correct {
            correct_margin.sample(rng)
        } else {
            let boost = 1.0 + params.bias_strength * k as f64 * params.preference[predicted];
            Gamma::new(MARGIN_SHAPE, WRONG_MARGIN_SCALE * boost)
                .expect("valid gamma")
                .sample(rng)
        };
        let mut runner_up = f64::NEG_INFINITY;
        for (j, l) in logits.iter_mut().enumerate() {
            if j != predicted {
                *l = gumbel.sample(rng);
                runner_up = runner_up.max(*l);
            }
        }
        logits[predicted] = runner_up + MIN_MARGIN + margin;

        let top = logits[predicted];
        let start = data.len();
        data.extend(logits.iter().map(|l| ((l - top) / params.temperature).exp()));
        let row = &mut data[start..];
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
    }
    PredictionMatrix::new(model_id, labels.len(), k, data)
}

pub fn model_id(index: usize, n_models: usize) -> String {
    let width = n_models.saturating_sub(1).to_string().len().max(2);
    format!("model_{index:0width$}")
}

/// Generates a pool. Identical configs (including the seed) give
/// bit-identical pools.
pub fn generate_pool(cfg: &SynthConfig) -> Result<SynthPool> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.n_classes;
    let labels = sample_labels(&mut rng, &cfg.class_distribution, cfg.n_samples)?;
    let id_labels = if cfg.id_samples > 0 {
        Some(sample_labels(&mut rng, &cfg.class_distribution, cfg.id_samples)?)
    } else {
        None
    };

    let (alo, ahi) = cfg.accuracy_range;
    let (tlo, thi) = cfg.temperature_range;
    let chance = 1.0 / k as f64;

    let mut matrices = Vec::with_capacity(cfg.n_models);
    let mut id_matrices = Vec::new();
    let mut targets = Vec::with_capacity(cfg.n_models);
    let mut realized = Vec::with_capacity(cfg.n_models);
    for m in 0..cfg.n_models {
        let id = model_id(m, cfg.n_models);
        let target = alo + (ahi - alo) * rng.random::<f64>();
        // log-uniform temperature
        let temperature = (tlo.ln() + (thi.ln() - tlo.ln()) * rng.random::<f64>()).exp();
        let preference = sample_preference(&mut rng, k, cfg.bias_strength);
        let noise: f64 = rng.sample(StandardNormal);
        let params = ModelParams {
            temperature,
            preference,
            bias_strength: cfg.bias_strength,
        };

        let p = sample_matrix(&mut rng, &id, &labels, target, &params)?;
        realized.push(accuracy(&p, &labels)?);
        matrices.push(p);
        targets.push(target);

        if let Some(id_labels) = &id_labels {
            let id_target = normal_cdf(probit(target)? + cfg.id_gap + ID_GAP_NOISE * noise)
                .clamp(chance + 1e-3, MAX_ID_ACCURACY);
            id_matrices.push(sample_matrix(&mut rng, &id, id_labels, id_target, &params)?);
        }
    }

    Ok(SynthPool {
        labels,
        matrices,
        true_accuracies: realized,
        target_accuracies: targets,
        class_distribution: cfg.class_distribution.clone(),
        id_split: id_labels.map(|labels| IdSplit {
            labels,
            matrices: id_matrices,
        }),
    })
}

/// Where a written manifest takes its reference from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthReference {
    None,
    /// The generating class distribution, written inline.
    #[default]
    ClassDistribution,
    /// The prediction file of the highest-accuracy model.
    BestModel,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.txt";
pub const ID_LABELS_FILE: &str = "id_labels.txt";
pub const TRUTH_FILE: &str = "truth.csv";

/// Writes one NPY file per model, the labels, the ID split (if any), a
/// ground-truth CSV and `manifest.json` into `dir`.
pub fn write_pool(pool: &SynthPool, dir: &Path, reference: SynthReference) -> Result<PoolManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut models = Vec::with_capacity(pool.matrices.len());
    for p in &pool.matrices {
        let path = dir.join(format!("{}.npy", p.model_id()));
        io::write_prediction_matrix(&path, p, FileFormat::BinaryArrayV1)?;
        models.push(ModelEntry {
            model_id: p.model_id().to_string(),
            prediction_path: path,
            format: FileFormat::BinaryArrayV1,
        });
    }

    let labels_path = dir.join(LABELS_FILE);
    io::write_labels(&labels_path, &pool.labels)?;

    let id_set = match &pool.id_split {
        None => None,
        Some(split) => {
            let id_labels_path = dir.join(ID_LABELS_FILE);
            io::write_labels(&id_labels_path, &split.labels)?;
            let mut entries = Vec::with_capacity(split.matrices.len());
            for p in &split.matrices {
                let path = dir.join(format!("id_{}.npy", p.model_id()));
                io::write_prediction_matrix(&path, p, FileFormat::BinaryArrayV1)?;
                entries.push(IdSetEntry {
                    model_id: p.model_id().to_string(),
                    prediction_path: path,
                    format: FileFormat::BinaryArrayV1,
                    labels_path: id_labels_path.clone(),
                });
            }
            Some(entries)
        }
    };

    let reference = match reference {
        SynthReference::None => None,
        SynthReference::ClassDistribution => Some(ReferenceSource::ClassDistribution(pool.class_distribution.clone())),
        SynthReference::BestModel => Some(ReferenceSource::Predictions {
            prediction_path: models[pool.best_model()].prediction_path.clone(),
            format: FileFormat::BinaryArrayV1,
        }),
    };

    let mut truth = String::from("model_id,accuracy\n");
    for (p, a) in pool.matrices.iter().zip(&pool.true_accuracies) {
        truth.push_str(&format!("{},{a}\n", p.model_id()));
    }
    let truth_path = dir.join(TRUTH_FILE);
    fs::write(&truth_path, truth).map_err(|e| Error::io(&truth_path, e))?;

    let manifest = PoolManifest {
        models,
        reference,
        labels_path: Some(labels_path),
        id_set,
        class_subset: None,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest.to_json(dir)?).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}
