//! Distance-based depths: L-infinity depth, h-mode depth, directional quantile.

use rayon::prelude::*;

use super::{Bandwidth, DepthFlag, DepthParams, DepthResult, Metric, Orientation};
use crate::ensemble::{pointwise_stats, quantile_sorted, FacetMatrix};
use crate::error::{Error, Result};
use crate::Scalar;

/// Share of the off-diagonal pairwise distances used as the automatic bandwidth.
pub const AUTO_BANDWIDTH_QUANTILE: f64 = 0.15;

fn chebyshev<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

fn squared_l2<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `LID_i = 1 / (1 + (1/N) Σ_j ‖f_j − f_i‖_∞)`, self-distance included.
pub fn l_infinity_depth<F: Scalar>(fm: &FacetMatrix<F>) -> Result<DepthResult<F>> {
    fm.require_scenarios(2, "L-infinity depth")?;
    let n = fm.n_scenarios();
    let nf = F::of_count(n as u64);
    let scores = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = fm.row(i);
            let total: F = fm.rows().map(|fj| chebyshev(fj, fi)).sum();
            F::one() / (F::one() + total / nf)
        })
        .collect();
    Ok(DepthResult::new(
        Metric::Lid,
        scores,
        Orientation::Depth,
        DepthParams::default(),
    ))
}

/// Row-major `N×N` matrix of squared L2 distances.
fn pairwise_squared_l2<F: Scalar>(fm: &FacetMatrix<F>) -> Vec<F> {
    let n = fm.n_scenarios();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let fi = fm.row(i);
            fm.rows().map(move |fj| squared_l2(fi, fj))
        })
        .collect()
}

/// h-mode depth with a Gaussian kernel on L2 distances, normalised by `K(0)`
/// so scores fall in `(0, 1]`.
pub fn h_mode_depth<F: Scalar>(fm: &FacetMatrix<F>, bandwidth: Bandwidth) -> Result<DepthResult<F>> {
    fm.require_scenarios(2, "h-mode depth")?;
    if let Bandwidth::Fixed(h) = bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
        }
    }
    let n = fm.n_scenarios();
    let sq = pairwise_squared_l2(fm);
    let mut flags = Vec::new();

    let h = match bandwidth {
        Bandwidth::Fixed(h) => F::of(h),
        Bandwidth::Auto => {
            let mut upper: Vec<F> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| sq[i * n + j].sqrt())
                .collect();
            let h = selected_quantile(&mut upper, AUTO_BANDWIDTH_QUANTILE);
            if h > F::zero() {
                h
            } else {
                let (lo, hi) = fm
                    .values()
                    .iter()
                    .fold((F::infinity(), F::neg_infinity()), |(lo, hi), &x| {
                        (lo.min(x), hi.max(x))
                    });
                let range = hi - lo;
                if range == F::zero() {
                    let mut res = DepthResult::new(
                        Metric::Hmd,
                        vec![F::one(); n],
                        Orientation::Depth,
                        DepthParams::default(),
                    );
                    res.flags = vec![DepthFlag::IdenticalCurves];
                    return Ok(res);
                }
                flags.push(DepthFlag::FallbackBandwidth);
                F::epsilon() * range
            }
        }
    };

    let nf = F::of_count(n as u64);
    let two_h2 = F::of(2.0) * h * h;
    let scores = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &sq[i * n..(i + 1) * n];
            row.iter().map(|&d2| (-d2 / two_h2).exp()).sum::<F>() / nf
        })
        .collect();
    let mut res = DepthResult::new(Metric::Hmd, scores, Orientation::Depth, DepthParams::default());
    res.bandwidth_used = Some(h.as_f64());
    res.flags = flags;
    Ok(res)
}

/// Interpolated quantile without a full sort.
fn selected_quantile<F: Scalar>(values: &mut [F], p: f64) -> F {
    let len = values.len();
    if len == 1 {
        return values[0];
    }
    let h = (len - 1) as f64 * p;
    let lo = h.floor() as usize;
    let cmp = |a: &F, b: &F| a.partial_cmp(b).expect("finite distances");
    let (_, &mut lo_val, rest) = values.select_nth_unstable_by(lo, cmp);
    if lo + 1 >= len {
        return lo_val;
    }
    let hi_val = rest.iter().copied().fold(F::infinity(), F::min);
    quantile_sorted(&[lo_val, hi_val], h - lo as f64)
}

struct QuantileBands<F> {
    mean: Vec<F>,
    lo: Vec<F>,
    hi: Vec<F>,
}

fn bands<F: Scalar>(fm: &FacetMatrix<F>, p_lo: f64, p_hi: f64) -> Result<QuantileBands<F>> {
    fm.require_scenarios(3, "directional quantile")?;
    if !(p_lo < p_hi) {
        return Err(Error::InvalidParameter(format!(
            "quantile pair must satisfy p_lo < p_hi, got ({p_lo}, {p_hi})"
        )));
    }
    let stats = pointwise_stats(fm, &[p_lo, p_hi])?;
    let mut q = stats.quantiles.into_iter();
    let lo = q.next().expect("two quantiles").1;
    let hi = q.next().expect("two quantiles").1;
    Ok(QuantileBands {
        mean: stats.mean,
        lo,
        hi,
    })
}

/// Normalised deviation of one value; `None` marks a zero spread with a
/// non-zero deviation.
fn branch<F: Scalar>(x: F, mean: F, spread_end: F) -> Option<F> {
    let num = x - mean;
    let den = (spread_end - mean).abs();
    if den > F::zero() {
        Some(num / den)
    } else if num == F::zero() {
        Some(F::zero())
    } else {
        None
    }
}

/// `DQ_i = max_t` of the deviation from the pointwise mean, scaled by the
/// distance from the mean to the upper quantile (above the mean) or the lower
/// quantile (below). The below-mean branch keeps its sign. Oriented as
/// outlyingness.
pub fn directional_quantile<F: Scalar>(fm: &FacetMatrix<F>, p_lo: f64, p_hi: f64) -> Result<DepthResult<F>> {
    dq_impl(fm, p_lo, p_hi, false)
}

/// DQ restricted to its upper branch; hours below the mean contribute zero.
pub fn directional_quantile_upper<F: Scalar>(fm: &FacetMatrix<F>, p_lo: f64, p_hi: f64) -> Result<DepthResult<F>> {
    let mut r = dq_impl(fm, p_lo, p_hi, true)?;
    r.params.one_sided = true;
    Ok(r)
}

fn dq_impl<F: Scalar>(fm: &FacetMatrix<F>, p_lo: f64, p_hi: f64, upper_only: bool) -> Result<DepthResult<F>> {
    let b = bands(fm, p_lo, p_hi)?;
    let mut degenerate = false;
    let scores = fm
        .rows()
        .map(|row| {
            let mut best = F::neg_infinity();
            for (t, &x) in row.iter().enumerate() {
                let v = if x >= b.mean[t] {
                    branch(x, b.mean[t], b.hi[t])
                } else if upper_only {
                    Some(F::zero())
                } else {
                    branch(x, b.mean[t], b.lo[t])
                };
                let v = v.unwrap_or_else(|| {
                    degenerate = true;
                    F::max_value()
                });
                best = best.max(v);
            }
            best
        })
        .collect();
    let mut res = DepthResult::new(Metric::Dq, scores, Orientation::Outlyingness, DepthParams::default());
    res.params.quantiles = (p_lo, p_hi);
    if degenerate {
        res.flags.push(DepthFlag::DegenerateQuantileSpread);
    }
    Ok(res)
}
