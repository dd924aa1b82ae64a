//! Label-free ranking of classifier generalization under distribution
//! shift.
//!
//! Given a pool of classifiers and their Softmax outputs on one unlabeled
//! test set, `rankshift` scores each model with confidence-based measures
//! (SoftmaxCorr, MaxPred, SoftGap, ATC-MC, AoL, Disagreement, Certainty,
//! Diversity) and ranks the pool. When labels are available, it measures
//! how well each ranking agrees with true accuracy (Spearman ρ, weighted
//! Kendall τ_w, Pearson r, Huber fits on the probit scale).
//!
//! ```
//! use rankshift::measures::{class_correlation, softmax_corr};
//! use rankshift::types::{validate_prediction_matrix, ReferenceMatrix};
//!
//! let p = validate_prediction_matrix(&[[0.9, 0.1], [0.2, 0.8]]).unwrap();
//! let c = class_correlation(&p);
//! let r = ReferenceMatrix::from_distribution(vec![0.5, 0.5]).unwrap();
//! let score = softmax_corr(&c, &r).unwrap();
//! assert!(score > 0.9 && score <= 1.0);
//! ```

pub mod error;
pub mod io;
pub mod measures;
pub mod stats;
pub mod study;
pub mod synth;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use types::{
    ClassCorrelationMatrix, CorrelationReport, LabelVector, Measure, MeasureScore, PredictionMatrix,
    ReferenceMatrix,
};
