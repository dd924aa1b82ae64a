//! Linear association: Pearson's r, least squares, and Huber IRLS.

use super::PairedSeries;
use crate::error::{Error, Result};

/// Huber tuning constant (95% efficiency under normal errors).
pub const HUBER_K: f64 = 1.345;
/// Consistency factor turning the MAD into a normal-scale estimate.
pub const MAD_SCALE: f64 = 1.4826;
pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOLERANCE: f64 = 1e-10;

/// Pearson product-moment correlation.
pub fn pearson(s: &PairedSeries) -> Result<f64> {
    let n = s.len() as f64;
    let mx = s.x().iter().sum::<f64>() / n;
    let my = s.y().iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in s.x().iter().zip(s.y()) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantSeries("x"));
    }
    if syy == 0.0 {
        return Err(Error::ConstantSeries("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustFit {
    pub slope: f64,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted least squares line. `None` if the weighted design is singular.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    if sw <= 0.0 {
        return None;
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&a, &b), &wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (a - mx) * (a - mx);
        sxy += wi * (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Ordinary least squares line `(slope, intercept)`.
pub fn ols(s: &PairedSeries) -> Result<(f64, f64)> {
    weighted_line(s.x(), s.y(), &vec![1.0; s.len()]).ok_or(Error::DegenerateX)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Huber M-estimate of a line by iteratively reweighted least squares.
///
/// Starts from OLS. Each iteration rescales residuals by `1.4826 · MAD`
/// (re-estimated every pass), assigns weight `min(1, k / |r/scale|)` with
/// `k = 1.345`, and refits. Stops once neither parameter moves by more
/// than 1e-10, or after 100 iterations.
pub fn huber_fit(s: &PairedSeries) -> Result<RobustFit> {
    let (x, y) = (s.x(), s.y());
    let (mut slope, mut intercept) = ols(s)?;
    let mut weights = vec![1.0; s.len()];
    let mut residuals = vec![0.0; s.len()];
    let mut scratch = vec![0.0; s.len()];

    for iteration in 1..=MAX_ITERATIONS {
        for (r, (&a, &b)) in residuals.iter_mut().zip(x.iter().zip(y)) {
            *r = b - (intercept + slope * a);
        }
        scratch.copy_from_slice(&residuals);
        let center = median(&mut scratch);
        scratch
            .iter_mut()
            .zip(&residuals)
            .for_each(|(d, r)| *d = (r - center).abs());
        let scale = MAD_SCALE * median(&mut scratch);

        let cutoff = HUBER_K * scale;
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let r = r.abs();
            *w = if r <= cutoff {
                1.0
            } else if cutoff > 0.0 {
                cutoff / r
            } else {
                0.0
            };
        }

        let Some((new_slope, new_intercept)) = weighted_line(x, y, &weights) else {
            // the points that still carry weight lie on one vertical line
            return Ok(RobustFit {
                slope,
                intercept,
                iterations: iteration,
                converged: true,
            });
        };
        let step = (new_slope - slope).abs().max((new_intercept - intercept).abs());
        slope = new_slope;
        intercept = new_intercept;
        if step < STEP_TOLERANCE {
            return Ok(RobustFit {
                slope,
                intercept,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(RobustFit {
        slope,
        intercept,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}
