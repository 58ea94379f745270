//! Functional depth metrics over the scenarios of one facet matrix.
//!
//! Rank-based metrics (ID, MBD, EXD, ERLD) work from a [`RankMatrix`] and are
//! computed in integer arithmetic with a single final division, so their
//! scores are exactly reproducible. Distance-based metrics (LID, HMD, DQ)
//! work from the raw values. RTD ranks random one-dimensional projections.

mod distance;
mod rank;
mod tukey;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use distance::{directional_quantile, h_mode_depth, l_infinity_depth};
pub use rank::{
    depth_cdf, extremal_depth, extreme_rank_length_depth, integrated_depth, modified_band_depth,
    one_sided_rank_variant, pointwise_depth, DepthCdf,
};
pub use tukey::{random_directions, random_tukey_depth};

use crate::ensemble::{rank_matrix, FacetMatrix, TiePolicy};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "MBD")]
    Mbd,
    #[serde(rename = "EXD")]
    Exd,
    #[serde(rename = "ERLD", alias = "ERD")]
    Erld,
    #[serde(rename = "LID")]
    Lid,
    #[serde(rename = "HMD")]
    Hmd,
    #[serde(rename = "DQ")]
    Dq,
    #[serde(rename = "RTD")]
    Rtd,
}

impl Metric {
    /// Report column order.
    pub const ALL: [Metric; 8] = [
        Metric::Id,
        Metric::Mbd,
        Metric::Exd,
        Metric::Erld,
        Metric::Lid,
        Metric::Hmd,
        Metric::Dq,
        Metric::Rtd,
    ];

    /// Short column label used in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Id => "ID",
            Metric::Mbd => "MBD",
            Metric::Exd => "EXD",
            Metric::Erld => "ERD",
            Metric::Lid => "LID",
            Metric::Hmd => "HMD",
            Metric::Dq => "DQ",
            Metric::Rtd => "RTD",
        }
    }

    pub fn is_rank_based(self) -> bool {
        matches!(self, Metric::Id | Metric::Mbd | Metric::Exd | Metric::Erld)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ID" => Ok(Metric::Id),
            "MBD" => Ok(Metric::Mbd),
            "EXD" | "ED" => Ok(Metric::Exd),
            "ERLD" | "ERD" => Ok(Metric::Erld),
            "LID" | "LD" => Ok(Metric::Lid),
            "HMD" => Ok(Metric::Hmd),
            "DQ" => Ok(Metric::Dq),
            "RTD" | "TD" => Ok(Metric::Rtd),
            _ => Err(Error::InvalidParameter(format!("unknown depth metric `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Larger score = more central.
    Depth,
    /// Larger score = more extreme.
    Outlyingness,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// 15% quantile of the pairwise L2 distances.
    #[default]
    Auto,
    Fixed(f64),
}

/// Every tunable of every metric; each metric reads the fields it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepthParams {
    pub tie_policy: TiePolicy,
    pub bandwidth: Bandwidth,
    /// Number of random projections for RTD.
    pub k: usize,
    pub seed: u64,
    /// `(p_lo, p_hi)` for DQ.
    pub quantiles: (f64, f64),
    pub one_sided: bool,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            tie_policy: TiePolicy::OrdinalByIndex,
            bandwidth: Bandwidth::Auto,
            k: 50,
            seed: 0,
            quantiles: (0.025, 0.975),
            one_sided: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthFlag {
    /// Automatic HMD bandwidth was zero and a tiny fallback was used.
    FallbackBandwidth,
    /// Every curve is identical; HMD returned uniform scores.
    IdenticalCurves,
    /// DQ hit a zero quantile spread with a non-zero deviation.
    DegenerateQuantileSpread,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthResult<F> {
    pub metric: Metric,
    pub scores: Vec<F>,
    pub orientation: Orientation,
    /// Scenario indices from most to least outlying.
    pub outlying_order: Vec<usize>,
    pub params: DepthParams,
    /// Bandwidth actually used (HMD only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_used: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<DepthFlag>,
}

impl<F: Scalar> DepthResult<F> {
    pub(crate) fn new(metric: Metric, scores: Vec<F>, orientation: Orientation, params: DepthParams) -> Self {
        let outlying_order = outlying_order(&scores, orientation);
        Self {
            metric,
            scores,
            orientation,
            outlying_order,
            params,
            bandwidth_used: None,
            flags: Vec::new(),
        }
    }

    pub fn n_scenarios(&self) -> usize {
        self.scores.len()
    }

    /// Position of each scenario in `outlying_order` (0 = most outlying).
    pub fn outlyingness_rank(&self) -> Vec<usize> {
        let mut pos = vec![0; self.scores.len()];
        for (p, &i) in self.outlying_order.iter().enumerate() {
            pos[i] = p;
        }
        pos
    }

    /// The `n` most outlying scenarios.
    pub fn most_outlying(&self, n: usize) -> &[usize] {
        &self.outlying_order[..n.min(self.outlying_order.len())]
    }

    /// Scores remapped so that larger is always more extreme.
    pub fn outlyingness(&self) -> Vec<F> {
        match self.orientation {
            Orientation::Outlyingness => self.scores.clone(),
            Orientation::Depth => self.scores.iter().map(|&s| F::one() - s).collect(),
        }
    }
}

/// Ascending by depth (descending by outlyingness), ties by index.
fn outlying_order<F: Scalar>(scores: &[F], orientation: Orientation) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].partial_cmp(&scores[b]).expect("finite scores");
        match orientation {
            Orientation::Depth => ord,
            Orientation::Outlyingness => ord.reverse(),
        }
        .then(a.cmp(&b))
    });
    order
}

/// Computes one metric on a facet matrix.
pub fn compute<F: Scalar>(fm: &FacetMatrix<F>, metric: Metric, params: &DepthParams) -> Result<DepthResult<F>> {
    if params.one_sided {
        return match metric {
            Metric::Lid | Metric::Hmd => Err(Error::InvalidParameter(format!(
                "{metric} has no one-sided variant: its distance-based construction carries no direction"
            ))),
            Metric::Mbd | Metric::Erld | Metric::Dq => one_sided_variant(fm, metric, params),
            _ => Err(Error::InvalidParameter(format!(
                "one-sided variants exist for MBD, ERLD and DQ, not {metric}"
            ))),
        };
    }
    match metric {
        Metric::Id | Metric::Mbd | Metric::Exd | Metric::Erld => {
            let rm = rank_matrix(fm, params.tie_policy);
            let mut res = match metric {
                Metric::Id => integrated_depth(&rm)?,
                Metric::Mbd => modified_band_depth(&rm)?,
                Metric::Exd => extremal_depth(&rm)?,
                _ => extreme_rank_length_depth(&rm)?,
            };
            res.params = params.clone();
            Ok(res)
        }
        Metric::Lid => l_infinity_depth(fm).map(|r| with_params(r, params)),
        Metric::Hmd => h_mode_depth(fm, params.bandwidth).map(|r| with_params(r, params)),
        Metric::Dq => directional_quantile(fm, params.quantiles.0, params.quantiles.1).map(|r| with_params(r, params)),
        Metric::Rtd => {
            random_tukey_depth(fm, params.k, params.seed, None, params.tie_policy).map(|r| with_params(r, params))
        }
    }
}

fn with_params<F>(mut r: DepthResult<F>, params: &DepthParams) -> DepthResult<F> {
    r.params = params.clone();
    r
}

/// Upper-tail variants: MBD and ERLD through ranks, DQ through its upper branch.
pub fn one_sided_variant<F: Scalar>(
    fm: &FacetMatrix<F>,
    metric: Metric,
    params: &DepthParams,
) -> Result<DepthResult<F>> {
    let mut res = match metric {
        Metric::Dq => distance::directional_quantile_upper(fm, params.quantiles.0, params.quantiles.1)?,
        Metric::Mbd | Metric::Erld => {
            let rm = rank_matrix(fm, params.tie_policy);
            one_sided_rank_variant(&rm, metric)?
        }
        _ => {
            return Err(Error::InvalidParameter(format!("no one-sided variant for {metric}")));
        }
    };
    res.params = params.clone();
    res.params.one_sided = true;
    Ok(res)
}

/// All eight metrics on one facet, computed in parallel, in [`Metric::ALL`] order.
pub fn compute_all<F: Scalar>(fm: &FacetMatrix<F>, params: &DepthParams) -> Result<Vec<DepthResult<F>>> {
    Metric::ALL.par_iter().map(|&m| compute(fm, m, params)).collect()
}
