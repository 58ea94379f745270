//! Rank-based depths: ID, MBD, EXD, ERLD and their upper-tail variants.

use serde::Serialize;

use super::{DepthParams, DepthResult, Metric, Orientation};
use crate::ensemble::RankMatrix;
use crate::error::{Error, Result};
use crate::Scalar;

/// `N·d_i(t) = N − |2R_i(t) − N − 1|`, an integer in `[1, N]`.
fn depth_numerator(n: usize, twice_rank: u32) -> u32 {
    let centre = n as i64 + 1;
    (n as i64 - (i64::from(twice_rank) - centre).abs()) as u32
}

fn ratio<F: Scalar>(num: u64, den: u64) -> F {
    F::of_count(num) / F::of_count(den)
}

fn require(rm: &RankMatrix, min: usize, what: &str) -> Result<()> {
    if rm.n_scenarios() < min {
        return Err(Error::InvalidParameter(format!(
            "{what} needs at least {min} scenarios, got {}",
            rm.n_scenarios()
        )));
    }
    Ok(())
}

/// Pointwise depth `d_i(t) = 1 − |2R_i(t) − N − 1| / N`, row-major `N×T`.
pub fn pointwise_depth<F: Scalar>(rm: &RankMatrix) -> Vec<F> {
    let n = rm.n_scenarios();
    (0..n)
        .flat_map(|i| {
            rm.twice_row(i)
                .iter()
                .map(move |&r| ratio(u64::from(depth_numerator(n, r)), n as u64))
        })
        .collect()
}

fn depth_numerators(rm: &RankMatrix, i: usize) -> Vec<u32> {
    let n = rm.n_scenarios();
    rm.twice_row(i).iter().map(|&r| depth_numerator(n, r)).collect()
}

/// `ID_i = 1 − (1/T) Σ_t |1/2 − R_i(t)/N|`.
pub fn integrated_depth<F: Scalar>(rm: &RankMatrix) -> Result<DepthResult<F>> {
    require(rm, 2, "integrated depth")?;
    let n = rm.n_scenarios() as u64;
    let t = rm.n_hours() as u64;
    // |1/2 − R/N| = |N − 2R| / 2N
    let den = 2 * n * t;
    let scores = (0..rm.n_scenarios())
        .map(|i| {
            let dev: u64 = rm
                .twice_row(i)
                .iter()
                .map(|&r| (n as i64 - i64::from(r)).unsigned_abs())
                .sum();
            ratio(den - dev, den)
        })
        .collect();
    Ok(DepthResult::new(
        Metric::Id,
        scores,
        Orientation::Depth,
        DepthParams::default(),
    ))
}

/// Time-average of `(R−1)(N−R)` normalised by `C(N,2)`.
pub fn modified_band_depth<F: Scalar>(rm: &RankMatrix) -> Result<DepthResult<F>> {
    require(rm, 3, "modified band depth")?;
    let n = rm.n_scenarios() as u64;
    let t = rm.n_hours() as u64;
    // (R−1)(N−R) = (2R−2)(2N−2R)/4, and C(N,2) = N(N−1)/2
    let den = 2 * t * n * (n - 1);
    let scores = (0..rm.n_scenarios())
        .map(|i| {
            let num: u64 = rm
                .twice_row(i)
                .iter()
                .map(|&r| (u64::from(r) - 2) * (2 * n - u64::from(r)))
                .sum();
            ratio(num, den)
        })
        .collect();
    Ok(DepthResult::new(
        Metric::Mbd,
        scores,
        Orientation::Depth,
        DepthParams::default(),
    ))
}

/// Per-scenario cumulative distribution of pointwise depth over the hours.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthCdf {
    n_scenarios: usize,
    n_hours: usize,
    /// Distinct `N·d` values occurring anywhere, ascending.
    level_numerators: Vec<u32>,
    /// `counts[i][l]` = hours with `N·d_i(t) ≤ level_numerators[l]`.
    counts: Vec<Vec<u32>>,
}

impl DepthCdf {
    pub fn levels<F: Scalar>(&self) -> Vec<F> {
        self.level_numerators
            .iter()
            .map(|&l| ratio(u64::from(l), self.n_scenarios as u64))
            .collect()
    }

    /// `Φ_i(r)` at every level.
    pub fn mass<F: Scalar>(&self, i: usize) -> Vec<F> {
        self.counts[i]
            .iter()
            .map(|&c| ratio(u64::from(c), self.n_hours as u64))
            .collect()
    }
}

pub fn depth_cdf(rm: &RankMatrix) -> DepthCdf {
    let n = rm.n_scenarios();
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|i| {
            let mut d = depth_numerators(rm, i);
            d.sort_unstable();
            d
        })
        .collect();
    let mut levels: Vec<u32> = rows.iter().flatten().copied().collect();
    levels.sort_unstable();
    levels.dedup();
    let counts = rows
        .iter()
        .map(|d| levels.iter().map(|&l| d.partition_point(|&x| x <= l) as u32).collect())
        .collect();
    DepthCdf {
        n_scenarios: n,
        n_hours: rm.n_hours(),
        level_numerators: levels,
        counts,
    }
}

/// For keys under a total preorder, `#{j : key_j <= key_i}` for every `i`.
fn count_at_or_below<K: Ord>(keys: &[K]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut out = vec![0u64; keys.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && keys[order[end + 1]] == keys[order[start]] {
            end += 1;
        }
        for &i in &order[start..=end] {
            out[i] = (end + 1) as u64;
        }
        start = end + 1;
    }
    out
}

/// Extremal depth: left-tail ordering of the depth CDFs.
///
/// `i` is at least as deep as `j` when `Φ_i = Φ_j`, or `Φ_i < Φ_j` at the
/// smallest level where they differ (less time spent at extreme ranks).
pub fn extremal_depth<F: Scalar>(rm: &RankMatrix) -> Result<DepthResult<F>> {
    require(rm, 2, "extremal depth")?;
    let cdf = depth_cdf(rm);
    // deeper ⇔ lexicographically smaller count vector; score counts the j it dominates
    let keys: Vec<std::cmp::Reverse<&Vec<u32>>> = cdf.counts.iter().map(std::cmp::Reverse).collect();
    let n = rm.n_scenarios() as u64;
    let scores = count_at_or_below(&keys).into_iter().map(|c| ratio(c, n)).collect();
    Ok(DepthResult::new(
        Metric::Exd,
        scores,
        Orientation::Depth,
        DepthParams::default(),
    ))
}

/// Extreme rank length depth: lexicographic order of the ascending-sorted
/// pointwise depths, larger first difference = deeper.
pub fn extreme_rank_length_depth<F: Scalar>(rm: &RankMatrix) -> Result<DepthResult<F>> {
    require(rm, 2, "extreme rank length depth")?;
    let keys: Vec<Vec<u32>> = (0..rm.n_scenarios())
        .map(|i| {
            let mut d = depth_numerators(rm, i);
            d.sort_unstable();
            d
        })
        .collect();
    let n = rm.n_scenarios() as u64;
    let scores = count_at_or_below(&keys).into_iter().map(|c| ratio(c, n)).collect();
    Ok(DepthResult::new(
        Metric::Erld,
        scores,
        Orientation::Depth,
        DepthParams::default(),
    ))
}

/// Upper-tail rank variants, oriented as outlyingness.
///
/// * `Erld`: raw ranks sorted descending, compared lexicographically; the
///   score is the fraction of scenarios it lexicographically matches or beats.
/// * `Mbd`: the modified hypograph index `(1/T) Σ_t (R_i(t) − 1)/(N − 1)`,
///   the share of (other curve, hour) pairs lying below the curve.
pub fn one_sided_rank_variant<F: Scalar>(rm: &RankMatrix, metric: Metric) -> Result<DepthResult<F>> {
    require(rm, 2, "one-sided rank variant")?;
    let n = rm.n_scenarios() as u64;
    let t = rm.n_hours() as u64;
    let scores = match metric {
        Metric::Erld => {
            let keys: Vec<Vec<u32>> = (0..rm.n_scenarios())
                .map(|i| {
                    let mut r = rm.twice_row(i).to_vec();
                    r.sort_unstable_by(|a, b| b.cmp(a));
                    r
                })
                .collect();
            count_at_or_below(&keys).into_iter().map(|c| ratio(c, n)).collect()
        }
        Metric::Mbd => (0..rm.n_scenarios())
            .map(|i| {
                let num: u64 = rm.twice_row(i).iter().map(|&r| u64::from(r) - 2).sum();
                ratio(num, 2 * t * (n - 1))
            })
            .collect(),
        other => {
            return Err(Error::InvalidParameter(format!(
                "no rank-based one-sided variant for {other}"
            )))
        }
    };
    let mut params = DepthParams::default();
    params.one_sided = true;
    Ok(DepthResult::new(metric, scores, Orientation::Outlyingness, params))
}
