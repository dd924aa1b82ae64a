//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Pairwise weighted tau: hyperbolic additive weights on the rank induced by
/// sorting on (primary, secondary) descending, averaged over both orders.
pub fn weighted_tau_oracle(x: &[f64], y: &[f64]) -> f64 {
    let one = |a: &[f64], b: &[f64]| {
        let n = a.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(b[j].total_cmp(&b[i])));
        let mut rank = vec![0usize; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let w = 1.0 / (rank[i] as f64 + 1.0) + 1.0 / (rank[j] as f64 + 1.0);
                let sa = (a[i] - a[j]).signum() * f64::from(a[i] != a[j]);
                let sb = (b[i] - b[j]).signum() * f64::from(b[i] != b[j]);
                num += w * sa * sb;
                da += w * sa * sa;
                db += w * sb * sb;
            }
        }
        num / (da.sqrt() * db.sqrt())
    };
    (one(x, y) + one(y, x)) / 2.0
}

pub fn closed_form_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0i64; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as i64 + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let d2: i64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    let n = x.len() as i64;
    1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64
}
