//! Random Tukey depth over Gaussian projection directions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{DepthParams, DepthResult, Metric, Orientation};
use crate::ensemble::{twice_ranks, FacetMatrix, TiePolicy};
use crate::error::{Error, Result};
use crate::Scalar;

/// `k` directions in `R^t` with i.i.d. standard normal entries, drawn in
/// order from one seeded stream: the first `k` directions of a longer
/// sequence with the same seed are the shorter sequence.
pub fn random_directions<F: Scalar>(k: usize, t: usize, seed: u64) -> Vec<Vec<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|_| (0..t).map(|_| F::of(StandardNormal.sample(&mut rng))).collect())
        .collect()
}

/// `RTD_i = min_k (N − |2R_ik − N − 1|) / N`, with `R_ik` the rank of
/// `⟨f_i, v_k⟩` among all projections on direction `k`.
///
/// `directions`, when given, replaces the random draw (and `k`, `seed`).
pub fn random_tukey_depth<F: Scalar>(
    fm: &FacetMatrix<F>,
    k: usize,
    seed: u64,
    directions: Option<&[Vec<F>]>,
    tie_policy: TiePolicy,
) -> Result<DepthResult<F>> {
    fm.require_scenarios(2, "random Tukey depth")?;
    let drawn;
    let dirs: &[Vec<F>] = match directions {
        Some(d) => d,
        None => {
            if k == 0 {
                return Err(Error::InvalidParameter(
                    "random Tukey depth needs K >= 1 projections".into(),
                ));
            }
            drawn = random_directions::<F>(k, fm.n_hours(), seed);
            &drawn
        }
    };
    if dirs.is_empty() {
        return Err(Error::InvalidParameter(
            "random Tukey depth needs at least one direction".into(),
        ));
    }
    for (idx, v) in dirs.iter().enumerate() {
        if v.len() != fm.n_hours() {
            return Err(Error::Shape(format!(
                "direction {idx} has length {}, expected {}",
                v.len(),
                fm.n_hours()
            )));
        }
        if v.iter().all(|x| *x == F::zero()) {
            return Err(Error::InvalidParameter(format!("direction {idx} is the zero vector")));
        }
    }

    let n = fm.n_scenarios();
    let centre = n as i64 + 1;
    // every direction's depth numerators, then the elementwise minimum
    let per_direction: Vec<Vec<u32>> = dirs
        .par_iter()
        .map(|v| {
            let proj: Vec<F> = fm
                .rows()
                .map(|row| row.iter().zip(v).map(|(&x, &w)| x * w).sum())
                .collect();
            twice_ranks(&proj, tie_policy)
                .into_iter()
                .map(|r| (n as i64 - (i64::from(r) - centre).abs()) as u32)
                .collect()
        })
        .collect();
    let scores = (0..n)
        .map(|i| {
            let m = per_direction.iter().map(|d| d[i]).min().expect("non-empty");
            F::of_count(u64::from(m)) / F::of_count(n as u64)
        })
        .collect();

    let params = DepthParams {
        k: dirs.len(),
        seed,
        tie_policy,
        ..DepthParams::default()
    };
    Ok(DepthResult::new(Metric::Rtd, scores, Orientation::Depth, params))
}
