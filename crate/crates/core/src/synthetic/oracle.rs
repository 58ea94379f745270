//! Brute-force depth metrics written straight from their definitions.
//!
//! Slow on purpose: explicit double loops, exact rationals for the rank
//! metrics, no shared code with [`crate::depth`] beyond the tie policy and the
//! quantile rule. Meant for small inputs (N ≤ 64, T ≤ 24) in tests.

use num_rational::Ratio;
use num_traits::Signed;

use crate::depth::{random_directions, Bandwidth, DepthParams, DepthResult, Metric, Orientation};
use crate::ensemble::{quantile_sorted, FacetMatrix, TiePolicy};
use crate::error::{Error, Result};

type Q = Ratio<i64>;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

fn to_f64(r: Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Rank of `x[i]` among `x`, 1-based, as an exact rational.
pub fn rank_of(x: &[f64], i: usize, tie: TiePolicy) -> Q {
    let mut below = 0i64;
    let mut equal_before = 0i64;
    let mut equal = 0i64;
    for (j, &v) in x.iter().enumerate() {
        if v < x[i] {
            below += 1;
        }
        if v == x[i] {
            equal += 1;
            if j < i {
                equal_before += 1;
            }
        }
    }
    match tie {
        TiePolicy::OrdinalByIndex => q(1 + below + equal_before),
        TiePolicy::Midrank => q(1 + below) + Q::new(equal - 1, 2),
    }
}

/// `R[i][t]`.
pub fn ranks(rows: &[Vec<f64>], tie: TiePolicy) -> Vec<Vec<Q>> {
    let n = rows.len();
    let t = rows[0].len();
    let mut r = vec![vec![q(0); t]; n];
    for h in 0..t {
        let col: Vec<f64> = rows.iter().map(|row| row[h]).collect();
        for i in 0..n {
            r[i][h] = rank_of(&col, i, tie);
        }
    }
    r
}

/// `d = 1 − |2R − N − 1| / N`.
pub fn pointwise(r: Q, n: i64) -> Q {
    q(1) - (q(2) * r - q(n) - q(1)).abs() / q(n)
}

fn rows_of(fm: &FacetMatrix<f64>) -> Vec<Vec<f64>> {
    fm.rows().map(<[f64]>::to_vec).collect()
}

fn integrated(r: &[Vec<Q>], n: i64) -> Vec<f64> {
    r.iter()
        .map(|ri| {
            let t = ri.len() as i64;
            let mut s = q(0);
            for &rit in ri {
                s += (Q::new(1, 2) - rit / q(n)).abs();
            }
            to_f64(q(1) - s / q(t))
        })
        .collect()
}

fn band(r: &[Vec<Q>], n: i64) -> Vec<f64> {
    let pairs = q(n * (n - 1) / 2);
    r.iter()
        .map(|ri| {
            let t = ri.len() as i64;
            let mut s = q(0);
            for &rit in ri {
                s += (rit - q(1)) * (q(n) - rit) / pairs;
            }
            to_f64(s / q(t))
        })
        .collect()
}

/// `Φ_i(r)` at `r = k/N`, `k = 1..N`.
fn depth_cdfs(d: &[Vec<Q>], n: i64) -> Vec<Vec<Q>> {
    d.iter()
        .map(|di| {
            let t = di.len() as i64;
            (1..=n)
                .map(|k| {
                    let level = Q::new(k, n);
                    let mut c = 0;
                    for &v in di {
                        if v <= level {
                            c += 1;
                        }
                    }
                    Q::new(c, t)
                })
                .collect()
        })
        .collect()
}

/// `Φ_i ⪰ Φ_j`: equal, or smaller at the first level where they differ.
fn cdf_at_least_as_deep(pi: &[Q], pj: &[Q]) -> bool {
    for (a, b) in pi.iter().zip(pj) {
        if a != b {
            return a < b;
        }
    }
    true
}

/// Sorted depth vectors: equal, or larger at the first differing position.
fn sorted_at_least_as_deep(si: &[Q], sj: &[Q]) -> bool {
    for (a, b) in si.iter().zip(sj) {
        if a != b {
            return a > b;
        }
    }
    true
}

fn dominance_share(n: usize, dominates: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut c = 0;
            for j in 0..n {
                if dominates(i, j) {
                    c += 1;
                }
            }
            to_f64(Q::new(c, n as i64))
        })
        .collect()
}

fn linf(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut total = 0.0;
        for j in 0..n {
            let mut m = 0.0f64;
            for t in 0..rows[i].len() {
                let diff = (rows[j][t] - rows[i][t]).abs();
                if diff > m {
                    m = diff;
                }
            }
            total += m;
        }
        out.push(1.0 / (1.0 + total / n as f64));
    }
    out
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        s += (a[t] - b[t]) * (a[t] - b[t]);
    }
    s.sqrt()
}

fn hmode(rows: &[Vec<f64>], bandwidth: Bandwidth) -> (Vec<f64>, Option<f64>) {
    let n = rows.len();
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => {
            let mut dists = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    dists.push(l2(&rows[i], &rows[j]));
                }
            }
            dists.sort_by(f64::total_cmp);
            let h = quantile_sorted(&dists, 0.15);
            if h > 0.0 {
                h
            } else {
                let lo = rows.iter().flatten().copied().fold(f64::INFINITY, f64::min);
                let hi = rows.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi == lo {
                    return (vec![1.0; n], None);
                }
                f64::EPSILON * (hi - lo)
            }
        }
    };
    let kernel = |z: f64| (-(z * z) / (2.0 * h * h)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h);
    let k0 = kernel(0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += kernel(l2(&rows[i], &rows[j])) / k0;
        }
        out.push(s / n as f64);
    }
    (out, Some(h))
}

fn dir_quantile(rows: &[Vec<f64>], p_lo: f64, p_hi: f64) -> Vec<f64> {
    let n = rows.len();
    let t = rows[0].len();
    let mut mu = vec![0.0; t];
    let mut lo = vec![0.0; t];
    let mut hi = vec![0.0; t];
    for h in 0..t {
        let mut col: Vec<f64> = rows.iter().map(|r| r[h]).collect();
        let mut s = 0.0;
        for v in &col {
            s += v;
        }
        mu[h] = s / n as f64;
        col.sort_by(f64::total_cmp);
        lo[h] = quantile_sorted(&col, p_lo);
        hi[h] = quantile_sorted(&col, p_hi);
    }
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if num == 0.0 {
            0.0
        } else {
            f64::MAX
        }
    };
    rows.iter()
        .map(|r| {
            let mut best = f64::NEG_INFINITY;
            for h in 0..t {
                let v = if r[h] >= mu[h] {
                    ratio(r[h] - mu[h], (hi[h] - mu[h]).abs())
                } else {
                    ratio(r[h] - mu[h], (lo[h] - mu[h]).abs())
                };
                if v > best {
                    best = v;
                }
            }
            best
        })
        .collect()
}

fn tukey(rows: &[Vec<f64>], directions: &[Vec<f64>], tie: TiePolicy) -> Vec<f64> {
    let n = rows.len();
    let mut best = vec![q(1); n];
    for v in directions {
        let mut proj = Vec::with_capacity(n);
        for row in rows {
            let mut s = 0.0;
            for t in 0..row.len() {
                s += row[t] * v[t];
            }
            proj.push(s);
        }
        for i in 0..n {
            let d = pointwise(rank_of(&proj, i, tie), n as i64);
            if d < best[i] {
                best[i] = d;
            }
        }
    }
    best.into_iter().map(to_f64).collect()
}

/// The projection depth written with the "≤" count instead of ranks. Agrees
/// with [`oracle_depth`] for RTD whenever no two projections tie.
pub fn tukey_by_counting(fm: &FacetMatrix<f64>, directions: &[Vec<f64>]) -> Vec<f64> {
    let rows = rows_of(fm);
    let n = rows.len() as i64;
    let proj: Vec<Vec<f64>> = directions
        .iter()
        .map(|v| {
            rows.iter()
                .map(|r| r.iter().zip(v).fold(0.0, |s, (x, w)| s + x * w))
                .collect()
        })
        .collect();
    (0..rows.len())
        .map(|i| {
            let mut best = q(1);
            for p in &proj {
                let mut c = 0;
                for j in 0..rows.len() {
                    if p[i] <= p[j] {
                        c += 1;
                    }
                }
                let d = q(1) - (q(2 * c) - q(n) - q(1)).abs() / q(n);
                if d < best {
                    best = d;
                }
            }
            to_f64(best)
        })
        .collect()
}

/// Reference value of one metric. RTD uses `directions` when given,
/// otherwise the same seeded directions as the fast path.
pub fn oracle_depth(
    fm: &FacetMatrix<f64>,
    metric: Metric,
    params: &DepthParams,
    directions: Option<&[Vec<f64>]>,
) -> Result<DepthResult<f64>> {
    let rows = rows_of(fm);
    let n = rows.len();
    if n < 2 || (n < 3 && matches!(metric, Metric::Mbd | Metric::Dq)) {
        return Err(Error::Shape(format!("{metric} oracle needs more scenarios, got {n}")));
    }
    let ni = n as i64;
    let mut bandwidth_used = None;
    let (scores, orientation) = match metric {
        Metric::Id => (integrated(&ranks(&rows, params.tie_policy), ni), Orientation::Depth),
        Metric::Mbd => (band(&ranks(&rows, params.tie_policy), ni), Orientation::Depth),
        Metric::Exd | Metric::Erld => {
            let d: Vec<Vec<Q>> = ranks(&rows, params.tie_policy)
                .iter()
                .map(|ri| ri.iter().map(|&r| pointwise(r, ni)).collect())
                .collect();
            let s = if metric == Metric::Exd {
                let cdf = depth_cdfs(&d, ni);
                dominance_share(n, |i, j| cdf_at_least_as_deep(&cdf[i], &cdf[j]))
            } else {
                let sorted: Vec<Vec<Q>> = d
                    .into_iter()
                    .map(|mut di| {
                        di.sort();
                        di
                    })
                    .collect();
                dominance_share(n, |i, j| sorted_at_least_as_deep(&sorted[i], &sorted[j]))
            };
            (s, Orientation::Depth)
        }
        Metric::Lid => (linf(&rows), Orientation::Depth),
        Metric::Hmd => {
            let (s, h) = hmode(&rows, params.bandwidth);
            bandwidth_used = h;
            (s, Orientation::Depth)
        }
        Metric::Dq => (
            dir_quantile(&rows, params.quantiles.0, params.quantiles.1),
            Orientation::Outlyingness,
        ),
        Metric::Rtd => {
            let drawn;
            let dirs = match directions {
                Some(d) => d,
                None => {
                    drawn = random_directions::<f64>(params.k, fm.n_hours(), params.seed);
                    &drawn[..]
                }
            };
            (tukey(&rows, dirs, params.tie_policy), Orientation::Depth)
        }
    };
    let mut res = DepthResult::new(metric, scores, orientation, params.clone());
    res.bandwidth_used = bandwidth_used;
    Ok(res)
}
