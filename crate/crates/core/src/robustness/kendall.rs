//! Kendall's tau-b in O(n log n) with a tie-corrected normal p-value.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::RobustnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub tau: f64,
    pub p_value: f64,
    pub n: usize,
    pub stars: String,
}

/// Significance marker: `*` below 0.05, `**` below 0.01, `***` below 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Pair counts behind tau-b. `score` is concordant minus discordant pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauCounts {
    pub pairs: i64,
    pub x_ties: i64,
    pub y_ties: i64,
    pub joint_ties: i64,
    pub score: i64,
}

#[derive(Default)]
struct TieSums {
    // sum of t(t-1)/2
    pairs: i64,
    // sum of t(t-1)(2t+5)
    v0: f64,
    // sum of t(t-1)(t-2)
    v2: f64,
}

impl TieSums {
    fn add(&mut self, t: i64) {
        if t > 1 {
            let tf = t as f64;
            self.pairs += t * (t - 1) / 2;
            self.v0 += tf * (tf - 1.0) * (2.0 * tf + 5.0);
            self.v2 += tf * (tf - 1.0) * (tf - 2.0);
        }
    }
}

fn tie_runs<F: Fn(usize, usize) -> bool>(order: &[usize], same: F) -> TieSums {
    let mut sums = TieSums::default();
    let mut run = 1i64;
    for w in order.windows(2) {
        if same(w[0], w[1]) {
            run += 1;
        } else {
            sums.add(run);
            run = 1;
        }
    }
    sums.add(run);
    sums
}

/// Stable merge sort of `order` by `key`, returning the number of inversions.
fn sort_counting_swaps(order: &mut Vec<usize>, key: &[f64]) -> i64 {
    let n = order.len();
    let mut src = std::mem::take(order);
    let mut dst = vec![0; n];
    let mut swaps = 0i64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if key[src[j]].total_cmp(&key[src[i]]) == Ordering::Less {
                    dst[k] = src[j];
                    swaps += (mid - i) as i64;
                    j += 1;
                } else {
                    dst[k] = src[i];
                    i += 1;
                }
                k += 1;
            }
            dst[k..k + mid - i].copy_from_slice(&src[i..mid]);
            k += mid - i;
            dst[k..k + end - j].copy_from_slice(&src[j..end]);
            start = end;
        }
        std::mem::swap(&mut src, &mut dst);
        width *= 2;
    }
    *order = src;
    swaps
}

fn check(xs: &[f64], ys: &[f64]) -> Result<(), RobustnessError> {
    if xs.len() != ys.len() {
        return Err(RobustnessError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(RobustnessError::Degenerate(format!("{} observations", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(RobustnessError::NonFinite);
    }
    Ok(())
}

/// Concordance counts computed by Knight's sort-and-merge algorithm.
pub fn tau_counts(xs: &[f64], ys: &[f64]) -> Result<TauCounts, RobustnessError> {
    check(xs, ys)?;
    Ok(counts_and_ties(xs, ys).0)
}

fn counts_and_ties(xs: &[f64], ys: &[f64]) -> (TauCounts, TieSums, TieSums) {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
    let x_ties = tie_runs(&order, |a, b| xs[a] == xs[b]);
    let joint = tie_runs(&order, |a, b| xs[a] == xs[b] && ys[a] == ys[b]);
    let swaps = sort_counting_swaps(&mut order, ys);
    let y_ties = tie_runs(&order, |a, b| ys[a] == ys[b]);

    let pairs = (n as i64) * (n as i64 - 1) / 2;
    let score = pairs - x_ties.pairs - y_ties.pairs + joint.pairs - 2 * swaps;
    let counts = TauCounts {
        pairs,
        x_ties: x_ties.pairs,
        y_ties: y_ties.pairs,
        joint_ties: joint.pairs,
        score,
    };
    (counts, x_ties, y_ties)
}

/// Kendall's tau-b between two paired samples.
///
/// Fails with [`RobustnessError::Degenerate`] when fewer than two
/// observations are given or either side is constant.
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, RobustnessError> {
    check(xs, ys)?;
    let (c, xt, yt) = counts_and_ties(xs, ys);
    if c.x_ties == c.pairs || c.y_ties == c.pairs {
        return Err(RobustnessError::Degenerate("a side is constant".into()));
    }
    let denom = ((c.pairs - c.x_ties) as f64 * (c.pairs - c.y_ties) as f64).sqrt();
    let tau = (c.score as f64 / denom).clamp(-1.0, 1.0);

    let n = xs.len() as f64;
    let m = n * (n - 1.0);
    let mut var = (m * (2.0 * n + 5.0) - xt.v0 - yt.v0) / 18.0 + 2.0 * (xt.pairs as f64) * (yt.pairs as f64) / m;
    if xs.len() > 2 {
        var += xt.v2 * yt.v2 / (9.0 * m * (n - 2.0));
    }
    let p_value = if var > 0.0 {
        let z = c.score as f64 / var.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(CorrelationResult {
        tau,
        p_value,
        n: xs.len(),
        stars: stars(p_value).to_string(),
    })
}
