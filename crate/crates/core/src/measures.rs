//! Label-free generalization measures.
//!
//! Every measure maps a model's prediction matrix (plus optional side
//! inputs) to a scalar where a higher value predicts better
//! generalization. ATC and Diversity are sign-flipped to follow that
//! convention.

use crate::error::{Error, Result};
use crate::stats::{accuracy, probit};
use crate::types::{ClassCorrelationMatrix, LabelVector, PredictionMatrix, ReferenceMatrix};

/// Class-class correlation matrix `PᵀP / N`.
pub fn class_correlation(p: &PredictionMatrix) -> ClassCorrelationMatrix {
    let k = p.cols();
    let mut acc = vec![0.0; k * k];
    for row in p.iter_rows() {
        for (a, &pa) in row.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let out = &mut acc[a * k..(a + 1) * k];
            for b in a..k {
                out[b] += pa * row[b];
            }
        }
    }
    let n = p.rows() as f64;
    for a in 0..k {
        acc[a * k + a] /= n;
        for b in a + 1..k {
            let v = acc[a * k + b] / n;
            acc[a * k + b] = v;
            acc[b * k + a] = v;
        }
    }
    ClassCorrelationMatrix::from_parts(k, acc)
}

/// Estimated class distribution: the column means of a reference model's
/// predictions.
pub fn reference_matrix(p_ref: &PredictionMatrix) -> ReferenceMatrix {
    let n = p_ref.rows() as f64;
    let mut diag = vec![0.0; p_ref.cols()];
    for row in p_ref.iter_rows() {
        diag.iter_mut().zip(row).for_each(|(d, v)| *d += v);
    }
    diag.iter_mut().for_each(|d| *d /= n);
    ReferenceMatrix::from_distribution(diag).expect("column means of a row-stochastic matrix form a distribution")
}

fn check_dims(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

/// SoftmaxCorr: cosine similarity between `C` and the diagonal reference
/// `R`. Since `R` is diagonal the numerator is `Σ_k C[k,k] · R[k]`.
pub fn softmax_corr(c: &ClassCorrelationMatrix, r: &ReferenceMatrix) -> Result<f64> {
    check_dims("reference classes", c.dim(), r.dim())?;
    let r_norm = r.norm();
    if r_norm == 0.0 {
        return Err(Error::ZeroReferenceNorm);
    }
    let dot: f64 = r.diag().iter().enumerate().map(|(k, &rk)| c.get(k, k) * rk).sum();
    // Cauchy-Schwarz bounds this by 1; min() absorbs the last-bit rounding
    Ok((dot / (c.frobenius_norm() * r_norm)).min(1.0))
}

/// Mean of the per-row maximum probability.
pub fn max_pred(p: &PredictionMatrix) -> f64 {
    p.max_probs().iter().sum::<f64>() / p.rows() as f64
}

/// Mean gap between the largest and second-largest probability per row.
pub fn soft_gap(p: &PredictionMatrix) -> f64 {
    let total: f64 = p
        .iter_rows()
        .map(|row| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &v in row {
                if v > first {
                    second = first;
                    first = v;
                } else if v > second {
                    second = v;
                }
            }
            first - second
        })
        .sum();
    total / p.rows() as f64
}

/// Confidence threshold calibrated on labeled ID data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtcThreshold {
    pub t: f64,
    pub id_error: f64,
    pub source_n: usize,
}

/// Picks `t` so that the number of ID samples with max-probability
/// strictly below `t` equals the number of ID errors.
///
/// With `m` errors, `t` is the `(m+1)`-th smallest confidence. A perfect
/// model gets `t` just below its least confident sample; a model that is
/// always wrong gets `t` just above its most confident one.
pub fn atc_calibrate(p_id: &PredictionMatrix, y_id: &LabelVector) -> Result<AtcThreshold> {
    y_id.check_against(p_id)?;
    let n = p_id.rows();
    let errors = p_id
        .argmax()
        .iter()
        .zip(y_id.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    let mut conf = p_id.max_probs();
    conf.sort_by(f64::total_cmp);
    let t = if errors == 0 {
        conf[0].next_down()
    } else if errors == n {
        conf[n - 1].next_up()
    } else {
        conf[errors]
    };
    Ok(AtcThreshold {
        t,
        id_error: errors as f64 / n as f64,
        source_n: n,
    })
}

/// Fraction of samples whose max-probability is strictly below `t`.
pub fn fraction_below(p: &PredictionMatrix, t: f64) -> f64 {
    let below = p.max_probs().iter().filter(|&&c| c < t).count();
    below as f64 / p.rows() as f64
}

/// `1 −` the fraction of OOD samples with confidence below the threshold.
pub fn atc_score(p_ood: &PredictionMatrix, th: &AtcThreshold) -> f64 {
    1.0 - fraction_below(p_ood, th.t)
}

/// Accuracy-on-the-line score: probit of ID top-1 accuracy.
pub fn aol_score(p_id: &PredictionMatrix, y_id: &LabelVector) -> Result<f64> {
    probit(accuracy(p_id, y_id)?)
}

/// `1 −` the fraction of samples where the model's argmax differs from the
/// reference model's.
pub fn disagreement(p: &PredictionMatrix, p_ref: &PredictionMatrix) -> Result<f64> {
    p.ensure_same_shape(p_ref)?;
    let differ = p
        .argmax()
        .into_iter()
        .zip(p_ref.argmax())
        .filter(|(a, b)| a != b)
        .count();
    Ok(1.0 - differ as f64 / p.rows() as f64)
}

/// Intra-class correlation (trace of `C`).
pub fn certainty(c: &ClassCorrelationMatrix) -> f64 {
    c.intra()
}

/// Negated Euclidean distance between `diag(C)` and the reference
/// distribution.
pub fn diversity(c: &ClassCorrelationMatrix, r: &ReferenceMatrix) -> Result<f64> {
    check_dims("reference classes", c.dim(), r.dim())?;
    let sq: f64 = r
        .diag()
        .iter()
        .enumerate()
        .map(|(k, &rk)| (c.get(k, k) - rk).powi(2))
        .sum();
    Ok(-sq.sqrt())
}

/// Mean Shannon entropy per row in nats, with `0 · ln 0 = 0`.
pub fn prediction_entropy(p: &PredictionMatrix) -> f64 {
    let total: f64 = p
        .iter_rows()
        .map(|row| {
            row.iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| -v * v.ln())
                .sum::<f64>()
        })
        .sum();
    total / p.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_prediction_matrix;

    fn pm<const K: usize>(rows: &[[f64; K]]) -> PredictionMatrix {
        validate_prediction_matrix(rows).unwrap()
    }

    fn refm(d: &[f64]) -> ReferenceMatrix {
        ReferenceMatrix::from_distribution(d.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn class_correlation_examples() {
        let c = class_correlation(&pm(&[[1.0, 0.0], [0.0, 1.0]]));
        assert_eq!(c.data(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!((c.intra(), c.inter()), (1.0, 0.0));

        let c = class_correlation(&pm(&[[0.5, 0.5]]));
        assert_eq!(c.data(), &[0.25; 4]);
        assert_eq!(c.intra(), 0.5);

        // (PᵀP)/2 by hand: [[0.64+0.36, 0.16+0.24], [.., 0.04+0.16]] / 2
        let c = class_correlation(&pm(&[[0.8, 0.2], [0.6, 0.4]]));
        for (got, want) in c.data().iter().zip([0.5, 0.2, 0.2, 0.1]) {
            assert!(close(*got, want, 1e-15), "{got} vs {want}");
        }
    }

    #[test]
    fn reference_examples() {
        assert_eq!(reference_matrix(&pm(&[[1.0, 0.0], [0.0, 1.0]])).diag(), &[0.5, 0.5]);
        let r = reference_matrix(&pm(&[[0.7, 0.3], [0.9, 0.1]]));
        assert!(close(r.diag()[0], 0.8, 1e-15) && close(r.diag()[1], 0.2, 1e-15));
    }

    #[test]
    fn softmax_corr_examples() {
        let c = ClassCorrelationMatrix::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(close(softmax_corr(&c, &refm(&[0.5, 0.5])).unwrap(), 1.0, 1e-15));

        let c = ClassCorrelationMatrix::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(softmax_corr(&c, &refm(&[0.0, 1.0])).unwrap(), 0.0);

        // 0.25 / (0.5 · √0.5)
        let c = ClassCorrelationMatrix::new(2, vec![0.25; 4]).unwrap();
        let v = softmax_corr(&c, &refm(&[0.5, 0.5])).unwrap();
        assert!(close(v, std::f64::consts::FRAC_1_SQRT_2, 1e-15));
    }

    #[test]
    fn softmax_corr_dimension_mismatch() {
        let c = ClassCorrelationMatrix::new(2, vec![0.25; 4]).unwrap();
        assert!(matches!(
            softmax_corr(&c, &refm(&[0.2, 0.3, 0.5])).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn max_pred_and_soft_gap() {
        let one_hot = pm(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let uniform = pm(&[[0.25; 4], [0.25; 4]]);
        let mixed = pm(&[[0.8, 0.2], [0.6, 0.4]]);
        assert_eq!(max_pred(&one_hot), 1.0);
        assert_eq!(max_pred(&uniform), 0.25);
        assert!(close(max_pred(&mixed), 0.7, 1e-15));
        assert_eq!(soft_gap(&one_hot), 1.0);
        assert_eq!(soft_gap(&uniform), 0.0);
        assert!(close(soft_gap(&mixed), 0.4, 1e-15));
    }

    #[test]
    fn atc_hand_example() {
        // maxprobs 0.9, 0.8, 0.6, 0.5; the 0.6 sample is the only error
        let p = pm(&[[0.9, 0.1], [0.8, 0.2], [0.4, 0.6], [0.5, 0.5]]);
        let y = LabelVector::new(vec![0, 0, 0, 0]).unwrap();
        let th = atc_calibrate(&p, &y).unwrap();
        assert_eq!(th.t, 0.6);
        assert_eq!(th.id_error, 0.25);
        assert_eq!(fraction_below(&p, th.t), 0.25);
    }

    #[test]
    fn atc_extremes() {
        let p = pm(&[[0.9, 0.1], [0.3, 0.7], [0.6, 0.4]]);
        let all_right = LabelVector::new(vec![0, 1, 0]).unwrap();
        let th = atc_calibrate(&p, &all_right).unwrap();
        assert!(th.t < 0.6);
        assert_eq!(fraction_below(&p, th.t), 0.0);

        let all_wrong = LabelVector::new(vec![1, 0, 1]).unwrap();
        let th = atc_calibrate(&p, &all_wrong).unwrap();
        assert!(th.t > 0.9);
        assert_eq!(fraction_below(&p, th.t), 1.0);
    }

    #[test]
    fn atc_score_examples() {
        let th = AtcThreshold { t: 0.6, id_error: 0.0, source_n: 1 };
        assert_eq!(atc_score(&pm(&[[0.9, 0.1], [0.7, 0.3]]), &th), 1.0);
        assert_eq!(atc_score(&pm(&[[0.5, 0.5], [0.55, 0.45]]), &th), 0.0);
        // exactly at t counts as not below
        assert_eq!(atc_score(&pm(&[[0.6, 0.4]]), &th), 1.0);
        // maxprobs 0.9, 0.5, 0.4 against t = 0.6
        let three = validate_prediction_matrix(&[vec![0.9, 0.1, 0.0], vec![0.5, 0.25, 0.25], vec![0.4, 0.3, 0.3]]).unwrap();
        assert!(close(atc_score(&three, &th), 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn aol_examples() {
        let p = pm(&[[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.4, 0.6]]);
        let half = LabelVector::new(vec![0, 0, 0, 0]).unwrap();
        assert_eq!(aol_score(&p, &half).unwrap(), 0.0);
        let all = LabelVector::new(vec![0, 0, 1, 1]).unwrap();
        assert!(close(aol_score(&p, &all).unwrap(), 4.753_424_308_817_088, 1e-9));
        let three = LabelVector::new(vec![0, 0, 1, 0]).unwrap();
        assert!(close(aol_score(&p, &three).unwrap(), 0.674_489_750_196_081_7, 1e-12));
        assert!(aol_score(&p, &LabelVector::new(vec![0]).unwrap()).is_err());
    }

    #[test]
    fn disagreement_examples() {
        let p = pm(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]]);
        assert_eq!(disagreement(&p, &p).unwrap(), 1.0);
        let flipped = pm(&[[0.1, 0.9], [0.8, 0.2], [0.4, 0.6], [0.7, 0.3]]);
        assert_eq!(disagreement(&p, &flipped).unwrap(), 0.0);
        let one_off = pm(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]]);
        assert_eq!(disagreement(&p, &one_off).unwrap(), 0.75);
        assert!(disagreement(&p, &pm(&[[1.0, 0.0]])).is_err());
    }

    #[test]
    fn certainty_examples() {
        assert_eq!(certainty(&class_correlation(&pm(&[[1.0, 0.0], [0.0, 1.0]]))), 1.0);
        assert_eq!(certainty(&class_correlation(&pm(&[[0.5, 0.5]]))), 0.5);
        let c = ClassCorrelationMatrix::new(2, vec![0.5, 0.2, 0.2, 0.1]).unwrap();
        assert!(close(certainty(&c), 0.6, 1e-15));
    }

    #[test]
    fn diversity_examples() {
        let c = ClassCorrelationMatrix::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(diversity(&c, &refm(&[0.5, 0.5])).unwrap(), 0.0);
        let c = ClassCorrelationMatrix::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(close(diversity(&c, &refm(&[0.0, 1.0])).unwrap(), -std::f64::consts::SQRT_2, 1e-15));
        let c = ClassCorrelationMatrix::new(2, vec![0.6, 0.0, 0.0, 0.4]).unwrap();
        assert!(close(diversity(&c, &refm(&[0.5, 0.5])).unwrap(), -0.02f64.sqrt(), 1e-15));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(prediction_entropy(&pm(&[[1.0, 0.0], [0.0, 1.0]])), 0.0);
        assert!(close(prediction_entropy(&pm(&[[0.5, 0.5]])), std::f64::consts::LN_2, 1e-15));
        let want = -0.8 * 0.8f64.ln() - 0.2 * 0.2f64.ln();
        assert!(close(prediction_entropy(&pm(&[[0.8, 0.2]])), want, 1e-15));
        assert!(close(want, 0.500_40, 1e-5));
    }
}
