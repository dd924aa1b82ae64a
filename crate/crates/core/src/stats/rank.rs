//! Rank correlations: Spearman's ρ and the additive-hyperbolic weighted
//! Kendall τ_w.

use std::cmp::Ordering;

use super::PairedSeries;
use crate::error::{Error, Result};

/// Twice the 1-based average rank of every element (ties share the mean
/// rank). Doubling keeps tied ranks integral.
fn doubled_average_ranks(values: &[f64]) -> Vec<i64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0i64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end, mean doubled = start + 1 + end
        let doubled = (start + 1 + end) as i64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of average ranks.
///
/// Rank sums are accumulated in exact integer arithmetic. On tie-free data
/// the result is evaluated as `1 - 6 Σd² / (n(n² - 1))`, so it agrees bit for
/// bit with the textbook formula.
pub fn spearman(s: &PairedSeries) -> Result<f64> {
    let rx = doubled_average_ranks(s.x());
    let ry = doubled_average_ranks(s.y());
    let n = s.len() as i128;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (&a, &b) in rx.iter().zip(&ry) {
        let (a, b) = (a as i128, b as i128);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 {
        return Err(Error::ConstantSeries("x"));
    }
    if vy == 0 {
        return Err(Error::ConstantSeries("y"));
    }
    // doubled ranks of a permutation have variance n²(n² - 1)/3; ties lower it
    let permutation = n * n * (n * n - 1) / 3;
    if vx == permutation && vy == permutation {
        let d2: i128 = rx.iter().zip(&ry).map(|(&a, &b)| (a as i128 - b as i128).pow(2)).sum::<i128>() / 4;
        return Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64);
    }
    let cov = n * sxy - sx * sy;
    let denom = if vx == vy {
        vx as f64
    } else {
        (vx as f64).sqrt() * (vy as f64).sqrt()
    };
    Ok((cov as f64 / denom).clamp(-1.0, 1.0))
}

fn hyperbolic(rank: usize) -> f64 {
    1.0 / (1.0 + rank as f64)
}

/// Weighted Kendall τ_w with additive hyperbolic weights.
///
/// Each pair (i, j) carries weight `1/(1 + r_i) + 1/(1 + r_j)`, where `r`
/// is the 0-based position in decreasing lexicographic order of
/// `(first, second)`. The statistic is `(concordant − discordant weight) /
/// sqrt(weight untied in first · weight untied in second)`, computed once
/// with ranks induced by `x` and once by `y`, then averaged. Without ties
/// this is `Σ w · sign agreement / Σ w`.
///
/// Runs in O(n log n) via a weighted merge sort on the second coordinate.
pub fn weighted_kendall(s: &PairedSeries) -> Result<f64> {
    let a = weighted_ranked_tau(s.x(), s.y()).ok_or(Error::ConstantSeries("x"))?;
    let b = weighted_ranked_tau(s.y(), s.x()).ok_or(Error::ConstantSeries("y"))?;
    Ok(((a + b) / 2.0).clamp(-1.0, 1.0))
}

struct Weigher<'a> {
    rank: &'a [usize],
}

impl Weigher<'_> {
    fn of(&self, i: usize) -> f64 {
        hyperbolic(self.rank[i])
    }
}

/// Returns `None` when either coordinate is constant.
fn weighted_ranked_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let cmp_xy = |a: &usize, b: &usize| {
        x[*a]
            .total_cmp(&x[*b])
            .then_with(|| y[*a].total_cmp(&y[*b]))
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(cmp_xy);

    // position in decreasing (x, y) order
    let mut rank = vec![0usize; n];
    for (pos, &i) in perm.iter().rev().enumerate() {
        rank[i] = pos;
    }
    let w = Weigher { rank: &rank };

    // Sum over groups of consecutive equal elements of Σ_{pairs}(w_i + w_j),
    // which for a group of size g with weight sum s is s·(g − 1).
    let tied_weight = |perm: &[usize], same: &dyn Fn(usize, usize) -> bool| -> (f64, bool) {
        let mut total = 0.0;
        let mut first = 0;
        let mut s = w.of(perm[0]);
        let mut groups = 1;
        for i in 1..n {
            if !same(perm[first], perm[i]) {
                total += s * (i - first - 1) as f64;
                first = i;
                s = 0.0;
                groups += 1;
            }
            s += w.of(perm[i]);
        }
        total += s * (n - first - 1) as f64;
        (total, groups > 1)
    };

    let (joint, _) = tied_weight(&perm, &|a, b| x[a] == x[b] && y[a] == y[b]);
    let (ties_x, x_varies) = tied_weight(&perm, &|a, b| x[a] == x[b]);
    if !x_varies {
        return None;
    }

    let mut temp = vec![0usize; n];
    let mut exchanges = 0.0;
    merge_weigh(&mut perm, &mut temp, 0, n, y, &w, &mut exchanges);

    let (ties_y, y_varies) = tied_weight(&perm, &|a, b| y[a] == y[b]);
    if !y_varies {
        return None;
    }

    let total_w: f64 = perm.iter().map(|&i| w.of(i)).sum::<f64>() * (n - 1) as f64;

    let tau = ((total_w - (ties_y + ties_x - joint)) - 2.0 * exchanges)
        / (total_w - ties_x).sqrt()
        / (total_w - ties_y).sqrt();
    Some(tau.clamp(-1.0, 1.0))
}

/// Stable merge sort of `perm[offset..offset+len]` by `y`, accumulating the
/// weight of every discordant pair moved past. Returns the weight sum of
/// the segment.
fn merge_weigh(
    perm: &mut [usize],
    temp: &mut [usize],
    offset: usize,
    len: usize,
    y: &[f64],
    w: &Weigher<'_>,
    exchanges: &mut f64,
) -> f64 {
    if len == 1 {
        return w.of(perm[offset]);
    }
    let left_len = len / 2;
    let right_len = len - left_len;
    let middle = offset + left_len;
    let mut residual = merge_weigh(perm, temp, offset, left_len, y, w, exchanges);
    let weight = merge_weigh(perm, temp, middle, right_len, y, w, exchanges) + residual;
    if y[perm[middle - 1]].total_cmp(&y[perm[middle]]) == Ordering::Less {
        return weight;
    }

    let (mut i, mut j, mut k) = (0, 0, 0);
    while j < left_len && k < right_len {
        if y[perm[offset + j]].total_cmp(&y[perm[middle + k]]) != Ordering::Greater {
            temp[i] = perm[offset + j];
            residual -= w.of(temp[i]);
            j += 1;
        } else {
            temp[i] = perm[middle + k];
            *exchanges += w.of(temp[i]) * (left_len - j) as f64 + residual;
            k += 1;
        }
        i += 1;
    }
    perm.copy_within(offset + j..offset + left_len, offset + i);
    perm[offset..offset + i].copy_from_slice(&temp[..i]);
    weight
}
