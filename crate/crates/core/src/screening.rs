//! Selection pipelines: AUC pre-screen, depth ranking, grid/zonal union merge
//! and adaptive selection sizing.
//!
//! A pipeline for one day runs
//!
//! 1. an optional pre-screen keeping the `n1` scenarios with the highest (or
//!    lowest) daily AUC of a chosen facet;
//! 2. a depth ranking of the survivors on the grid facet;
//! 3. optionally a second ranking on a zonal facet, merged with the first by
//!    growing equal-length prefixes of both until their union holds `n2`;
//! 4. otherwise, the `n2` most outlying survivors of the grid ranking.
//!
//! With no depth metric configured the pipeline reduces to "top `n2` by AUC".

use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::depth::{self, DepthParams, Metric};
use crate::ensemble::{auc, Facet, FacetMatrix, ScenarioEnsemble, GRID};
use crate::error::{Error, Result};
use crate::Scalar;

/// Default base selection size of the adaptive rule.
pub const ADAPTIVE_N2_BASE: usize = 100;
/// Default grid-level peak net load (MWh in one hour, i.e. 62.5 GWh) counted by the adaptive rule.
pub const ADAPTIVE_PEAK_THRESHOLD_MWH: f64 = 62_500.0;

/// Zone used by the zonal load-shedding preset (North Central).
pub const LS_ZONE: &str = "NC";
/// Zone used by the warm-season curtailment preset (Far West).
pub const VC_ZONE: &str = "FW";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Cost,
    ReservesShortfall,
    LoadShedding,
    VreCurtailment,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Top,
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetRef {
    pub entity: String,
    pub facet: Facet,
}

impl FacetRef {
    pub fn new(entity: impl Into<String>, facet: Facet) -> Self {
        Self {
            entity: entity.into(),
            facet,
        }
    }

    pub fn grid_net_load() -> Self {
        Self::new(GRID, Facet::NetLoad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum N2Rule {
    Fixed {
        n2: usize,
    },
    /// `base + #{i : max_t grid net load_i(t) ≥ peak_threshold_mwh}`, capped at N.
    Adaptive {
        base: usize,
        peak_threshold_mwh: f64,
    },
}

impl N2Rule {
    pub fn adaptive_default() -> Self {
        N2Rule::Adaptive {
            base: ADAPTIVE_N2_BASE,
            peak_threshold_mwh: ADAPTIVE_PEAK_THRESHOLD_MWH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seasonal {
    /// Calendar months (1–12) dispatched to `warm`.
    pub warm_months: Vec<u32>,
    pub warm: Box<PipelineConfig>,
    pub cold: Box<PipelineConfig>,
}

/// Warm season: June through November.
pub const WARM_MONTHS: [u32; 6] = [6, 7, 8, 9, 10, 11];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub target: Target,
    #[serde(default = "FacetRef::grid_net_load")]
    pub prescreen_facet: FacetRef,
    #[serde(default)]
    pub prescreen_direction: Direction,
    /// Survivors of the AUC pre-screen; `None` disables it.
    #[serde(default)]
    pub n1: Option<usize>,
    /// `None` selects purely by AUC.
    #[serde(default)]
    pub depth_metric: Option<Metric>,
    #[serde(default)]
    pub depth_params: DepthParams,
    #[serde(default = "FacetRef::grid_net_load")]
    pub grid_facet: FacetRef,
    #[serde(default)]
    pub zonal_facet: Option<FacetRef>,
    pub n2_rule: N2Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seasonal: Option<Seasonal>,
}

impl PipelineConfig {
    fn base(name: &str, target: Target) -> Self {
        Self {
            name: Some(name.to_string()),
            target,
            prescreen_facet: FacetRef::grid_net_load(),
            prescreen_direction: Direction::Top,
            n1: None,
            depth_metric: None,
            depth_params: DepthParams::default(),
            grid_facet: FacetRef::grid_net_load(),
            zonal_facet: None,
            n2_rule: N2Rule::Fixed { n2: 75 },
            seasonal: None,
        }
    }

    /// Named presets: `cost`, `rs`, `ls`, `ls-zonal`, `vc`, `vc-seasonal`.
    pub fn preset(name: &str) -> Result<Self> {
        let cfg = match name {
            // top 75 by grid net-load AUC
            "cost" => Self::base(name, Target::Cost),
            "rs" => Self {
                n1: Some(150),
                depth_metric: Some(Metric::Hmd),
                ..Self::base(name, Target::ReservesShortfall)
            },
            "ls" => Self {
                n1: Some(550),
                depth_metric: Some(Metric::Lid),
                n2_rule: N2Rule::adaptive_default(),
                ..Self::base(name, Target::LoadShedding)
            },
            "ls-zonal" => Self {
                n1: Some(650),
                depth_metric: Some(Metric::Exd),
                zonal_facet: Some(FacetRef::new(LS_ZONE, Facet::NetLoad)),
                n2_rule: N2Rule::adaptive_default(),
                ..Self::base(name, Target::LoadShedding)
            },
            "vc" => Self {
                depth_metric: Some(Metric::Dq),
                n2_rule: N2Rule::Fixed { n2: 76 },
                ..Self::base(name, Target::VreCurtailment)
            },
            "vc-seasonal" => {
                let warm = Self {
                    n1: Some(450),
                    depth_metric: Some(Metric::Dq),
                    grid_facet: FacetRef::new(VC_ZONE, Facet::Load),
                    n2_rule: N2Rule::Fixed { n2: 76 },
                    ..Self::base("vc-warm", Target::VreCurtailment)
                };
                let cold = Self {
                    name: Some("vc-cold".into()),
                    ..Self::preset("vc")?
                };
                Self {
                    seasonal: Some(Seasonal {
                        warm_months: WARM_MONTHS.to_vec(),
                        warm: Box::new(warm.clone()),
                        cold: Box::new(cold),
                    }),
                    ..Self {
                        name: Some(name.into()),
                        ..warm
                    }
                }
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset `{other}` (expected one of: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// The configuration that applies to a given calendar month.
    pub fn resolve(&self, month: u32) -> &PipelineConfig {
        match &self.seasonal {
            Some(s) if s.warm_months.contains(&month) => s.warm.resolve(month),
            Some(s) => s.cold.resolve(month),
            None => self,
        }
    }

    /// Checks size constraints against an ensemble of `n` scenarios.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(n1) = self.n1 {
            if n1 == 0 || n1 > n {
                return Err(Error::Infeasible(format!("n1={n1} must lie in 1..={n}")));
            }
        }
        match self.n2_rule {
            N2Rule::Fixed { n2 } => {
                let cap = self.n1.filter(|_| self.depth_metric.is_some()).unwrap_or(n);
                if n2 == 0 || n2 > cap {
                    return Err(Error::Infeasible(format!("fixed n2={n2} must lie in 1..={cap}")));
                }
            }
            N2Rule::Adaptive {
                base,
                peak_threshold_mwh,
            } => {
                if base == 0 {
                    return Err(Error::Infeasible("adaptive n2 base must be positive".into()));
                }
                if !peak_threshold_mwh.is_finite() {
                    return Err(Error::Infeasible("adaptive n2 threshold must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

pub const PRESETS: [&str; 6] = ["cost", "rs", "ls", "ls-zonal", "vc", "vc-seasonal"];

/// Scenario indices ordered by value, highest first for `Top`; ties by index.
fn order_by_value<F: Scalar>(values: &[F], direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].partial_cmp(&values[b]).expect("finite AUC");
        match direction {
            Direction::Top => ord.reverse(),
            Direction::Bottom => ord,
        }
        .then(a.cmp(&b))
    });
    order
}

/// The `n1` scenarios with the greatest (or least) AUC, best first.
pub fn auc_prescreen<F: Scalar>(fm: &FacetMatrix<F>, n1: usize, direction: Direction) -> Result<Vec<usize>> {
    select_by_auc(&auc(fm), n1, direction)
}

fn select_by_auc<F: Scalar>(aucs: &[F], n1: usize, direction: Direction) -> Result<Vec<usize>> {
    if n1 == 0 || n1 > aucs.len() {
        return Err(Error::Infeasible(format!(
            "pre-screen size {n1} must lie in 1..={}",
            aucs.len()
        )));
    }
    let mut order = order_by_value(aucs, direction);
    order.truncate(n1);
    Ok(order)
}

/// `base + #{i : max_t f_i(t) ≥ threshold}`, capped at N.
pub fn adaptive_n2<F: Scalar>(net_load_grid: &FacetMatrix<F>, base: usize, peak_threshold: f64) -> usize {
    let thr = F::of(peak_threshold);
    let count = net_load_grid
        .rows()
        .filter(|row| row.iter().copied().fold(F::neg_infinity(), F::max) >= thr)
        .count();
    (base + count).min(net_load_grid.n_scenarios())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MergeOutcome {
    /// Selected scenarios, interleaving the two rankings (grid first).
    pub indices: Vec<usize>,
    /// Smallest prefix length whose union reached `n2`.
    pub cut: usize,
    /// Prefix lengths actually used after trimming an overshoot.
    pub grid_prefix: usize,
    pub zonal_prefix: usize,
}

fn union_size(grid: &[usize], zonal: &[usize]) -> usize {
    grid.iter().chain(zonal).collect::<HashSet<_>>().len()
}

/// Smallest `j` with `|grid[..j] ∪ zonal[..j]| ≥ n2`; an overshoot is trimmed
/// by shortening the zonal prefix, then the grid prefix, alternately.
pub fn merge_union(grid_order: &[usize], zonal_order: &[usize], n2: usize) -> Result<MergeOutcome> {
    if grid_order.len() != zonal_order.len() {
        return Err(Error::Shape(format!(
            "rankings cover {} and {} candidates",
            grid_order.len(),
            zonal_order.len()
        )));
    }
    let candidates = grid_order.len();
    if n2 > candidates {
        return Err(Error::Infeasible(format!(
            "n2={n2} exceeds the {candidates} candidates"
        )));
    }
    let mut seen = HashSet::with_capacity(2 * n2);
    let mut cut = 0;
    while seen.len() < n2 {
        seen.insert(grid_order[cut]);
        seen.insert(zonal_order[cut]);
        cut += 1;
    }
    let (mut jg, mut jz) = (cut, cut);
    let mut zonal_turn = true;
    // each step removes at most one element, so this lands exactly on n2
    while union_size(&grid_order[..jg], &zonal_order[..jz]) > n2 {
        if zonal_turn {
            jz -= 1;
        } else {
            jg -= 1;
        }
        zonal_turn = !zonal_turn;
    }
    let mut indices = Vec::with_capacity(n2);
    let mut taken = HashSet::with_capacity(n2);
    for p in 0..jg.max(jz) {
        for (list, len) in [(grid_order, jg), (zonal_order, jz)] {
            if p < len && taken.insert(list[p]) {
                indices.push(list[p]);
            }
        }
    }
    Ok(MergeOutcome {
        indices,
        cut,
        grid_prefix: jg,
        zonal_prefix: jz,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageLog {
    pub n2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prescreen_survivors: Option<Vec<usize>>,
    /// Set when the adaptive `n2` exceeded `n1` and selection fell back to AUC.
    pub depth_bypassed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_ranking: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zonal_ranking: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge: Option<MergeOutcome>,
}

/// Predicted-extreme scenarios for one day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionSet<F> {
    pub day: NaiveDate,
    /// Most outlying first.
    pub indices: Vec<usize>,
    /// Outlyingness of each selected scenario on the grid stage (its AUC when
    /// selection was by AUC alone).
    pub scores: Vec<F>,
    pub stage_log: StageLog,
    pub config: PipelineConfig,
}

/// Depth ranking of a subset of scenarios, returned as outlying-first
/// scenario ids and the outlyingness of every scenario in `subset`.
fn rank_subset<F: Scalar>(
    ens: &ScenarioEnsemble<F>,
    facet: &FacetRef,
    subset: &[usize],
    metric: Metric,
    params: &DepthParams,
) -> Result<(Vec<usize>, Vec<(usize, F)>)> {
    let fm = ens.facet(&facet.entity, facet.facet)?.select_rows(subset)?;
    let res = depth::compute(&fm, metric, params)?;
    let order = res.outlying_order.iter().map(|&k| subset[k]).collect();
    let out = res.outlyingness();
    let scores = subset.iter().copied().zip(out).collect();
    Ok((order, scores))
}

/// Runs a pipeline on one day's ensemble.
pub fn run_pipeline<F: Scalar>(ens: &ScenarioEnsemble<F>, config: &PipelineConfig) -> Result<SelectionSet<F>> {
    let cfg = config.resolve(ens.month());
    let n = ens.n_scenarios();
    cfg.validate(n)?;

    let n2 = match cfg.n2_rule {
        N2Rule::Fixed { n2 } => n2,
        N2Rule::Adaptive {
            base,
            peak_threshold_mwh,
        } => adaptive_n2(ens.facet(GRID, Facet::NetLoad)?, base, peak_threshold_mwh),
    };
    let mut log = StageLog {
        n2,
        ..StageLog::default()
    };
    let pre = &cfg.prescreen_facet;
    let aucs = auc(ens.facet(&pre.entity, pre.facet)?);
    let by_auc = |k: usize| -> Result<(Vec<usize>, Vec<F>)> {
        let idx = select_by_auc(&aucs, k, cfg.prescreen_direction)?;
        let s = idx.iter().map(|&i| aucs[i]).collect();
        Ok((idx, s))
    };

    let Some(metric) = cfg.depth_metric else {
        let (indices, scores) = by_auc(n2)?;
        return Ok(finish(ens, indices, scores, log, cfg));
    };

    let survivors: Vec<usize> = match cfg.n1 {
        Some(n1) => {
            let mut s = select_by_auc(&aucs, n1, cfg.prescreen_direction)?;
            // depth ties break by scenario index, so hand the depth stage an index-sorted subset
            s.sort_unstable();
            log.prescreen_survivors = Some(s.clone());
            s
        }
        None => (0..n).collect(),
    };
    if n2 > survivors.len() {
        if !matches!(cfg.n2_rule, N2Rule::Adaptive { .. }) {
            return Err(Error::Infeasible(format!(
                "n2={n2} exceeds the {} pre-screen survivors",
                survivors.len()
            )));
        }
        log.depth_bypassed = true;
        let (indices, scores) = by_auc(n2)?;
        return Ok(finish(ens, indices, scores, log, cfg));
    }

    let (grid_order, grid_scores) = rank_subset(ens, &cfg.grid_facet, &survivors, metric, &cfg.depth_params)?;
    let indices = match &cfg.zonal_facet {
        Some(zonal) => {
            let (zonal_order, _) = rank_subset(ens, zonal, &survivors, metric, &cfg.depth_params)?;
            let merged = merge_union(&grid_order, &zonal_order, n2)?;
            let idx = merged.indices.clone();
            log.zonal_ranking = Some(zonal_order);
            log.merge = Some(merged);
            idx
        }
        None => grid_order[..n2].to_vec(),
    };
    log.grid_ranking = Some(grid_order);
    let lookup: std::collections::HashMap<usize, F> = grid_scores.into_iter().collect();
    let scores = indices.iter().map(|i| lookup[i]).collect();
    Ok(finish(ens, indices, scores, log, cfg))
}

fn finish<F: Scalar>(
    ens: &ScenarioEnsemble<F>,
    indices: Vec<usize>,
    scores: Vec<F>,
    stage_log: StageLog,
    cfg: &PipelineConfig,
) -> SelectionSet<F> {
    SelectionSet {
        day: ens.day(),
        indices,
        scores,
        stage_log,
        config: cfg.clone(),
    }
}
