//! Ground-truth metrics and the correlation / regression machinery used to
//! compare measure scores against true generalization.

mod linear;
mod metrics;
mod probit;
mod rank;

pub use linear::{huber_fit, ols, pearson, RobustFit, HUBER_K, MAD_SCALE, MAX_ITERATIONS, STEP_TOLERANCE};
pub use metrics::{accuracy, macro_f1};
pub use probit::{normal_cdf, probit, PROBIT_CLAMP};
pub use rank::{spearman, weighted_kendall};

use crate::error::{Error, Result};

/// Scores `x` paired with ground truth `y`, one entry per model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(Error::TooFewObservations(x.len()));
        }
        if let Some(&v) = x.iter().chain(&y).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(v));
        }
        Ok(PairedSeries { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Applies [`probit`] element-wise.
pub fn probit_all(values: &[f64]) -> Result<Vec<f64>> {
    values.iter().map(|&v| probit(v)).collect()
}
