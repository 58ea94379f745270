//! Synthetic ensembles with planted outliers and stand-in dispatch outcomes.
//!
//! Scenarios are Gaussian draws around per-facet mean profiles, correlated
//! across hours by a squared-exponential kernel. Each scenario draws from its
//! own counter-indexed random stream, so output does not depend on thread count.

pub mod oracle;

use std::collections::HashSet;

use chrono::NaiveDate;
use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{auc, quantile_sorted, Facet, FacetMatrix, ScenarioEnsemble, GRID};
use crate::error::{Error, Result};
use crate::evaluation::{EdOutcomes, OutcomeMatrix, OutcomeMetric};
use crate::Scalar;

/// Daylight window for solar, in hour-of-day.
pub const DAYLIGHT_HOURS: (usize, usize) = (7, 19);

/// Mean profile over the day: explicit values or a daily cosine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanProfile {
    Values(Vec<f64>),
    Sinusoid { level: f64, amplitude: f64, peak_hour: f64 },
}

impl MeanProfile {
    pub fn values(&self, n_hours: usize) -> Vec<f64> {
        match self {
            MeanProfile::Values(v) => v.clone(),
            MeanProfile::Sinusoid {
                level,
                amplitude,
                peak_hour,
            } => (0..n_hours)
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * (t as f64 - peak_hour) / n_hours as f64;
                    level + amplitude * phase.cos()
                })
                .collect(),
        }
    }
}

fn default_length_scale() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetSpec {
    pub mean: MeanProfile,
    /// Standard deviation at every hour.
    #[serde(default)]
    pub sigma: f64,
    /// Correlation length of the squared-exponential kernel, in hours.
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    /// Explicit `T×T` covariance; replaces `sigma` and `length_scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl FacetSpec {
    pub fn new(mean: MeanProfile, sigma: f64, length_scale: f64) -> Self {
        Self {
            mean,
            sigma,
            length_scale,
            covariance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<FacetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solar: Option<FacetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wind: Option<FacetSpec>,
}

impl EntitySpec {
    fn facets(&self) -> [(Facet, Option<&FacetSpec>); 3] {
        [
            (Facet::Load, self.load.as_ref()),
            (Facet::Solar, self.solar.as_ref()),
            (Facet::Wind, self.wind.as_ref()),
        ]
    }
}

fn default_hours() -> usize {
    24
}

fn default_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date")
}

/// Generator configuration.
///
/// With a single entity labelled `grid` the grid is drawn directly. With zone
/// entities only, the grid is the per-facet sum of the zones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_scenarios: usize,
    #[serde(default = "default_hours")]
    pub n_hours: usize,
    #[serde(default = "default_day")]
    pub day: NaiveDate,
    #[serde(default)]
    pub seed: u64,
    /// Correlation of solar and wind innovations with the same entity's load.
    #[serde(default)]
    pub rho: f64,
    /// Share of load innovation variance common to all entities.
    #[serde(default)]
    pub zone_correlation: f64,
    pub entities: Vec<EntitySpec>,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_scenarios == 0 || self.n_hours == 0 {
            return bad("generator needs n_scenarios >= 1 and n_hours >= 1".into());
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.zone_correlation) {
            return bad(format!(
                "zone_correlation must lie in [0, 1], got {}",
                self.zone_correlation
            ));
        }
        if self.entities.is_empty() {
            return bad("generator needs at least one entity".into());
        }
        let mut seen = HashSet::new();
        for e in &self.entities {
            if !seen.insert(e.label.as_str()) {
                return bad(format!("duplicate entity `{}`", e.label));
            }
            if e.facets().iter().all(|(_, s)| s.is_none()) {
                return bad(format!("entity `{}` has no facets", e.label));
            }
            for (facet, spec) in e.facets() {
                let Some(spec) = spec else { continue };
                let what = format!("{}/{facet}", e.label);
                let mean = spec.mean.values(self.n_hours);
                if mean.len() != self.n_hours {
                    return bad(format!(
                        "{what}: mean has {} values, expected {}",
                        mean.len(),
                        self.n_hours
                    ));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return bad(format!("{what}: mean is not finite"));
                }
                if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
                    return bad(format!("{what}: sigma must be finite and >= 0, got {}", spec.sigma));
                }
                if !(spec.length_scale > 0.0 && spec.length_scale.is_finite()) {
                    return bad(format!("{what}: length_scale must be > 0, got {}", spec.length_scale));
                }
                if let Some(c) = &spec.covariance {
                    if c.len() != self.n_hours || c.iter().any(|r| r.len() != self.n_hours) {
                        return bad(format!("{what}: covariance must be {0}x{0}", self.n_hours));
                    }
                }
            }
        }
        if self.entities.len() > 1 && seen.contains(GRID) {
            return bad("the grid is the sum of the zones; do not specify it alongside them".into());
        }
        Ok(())
    }
}

/// `sin(π (h − 7) / 12)` inside the daylight window, zero outside.
pub fn daylight_mask(hour: usize) -> f64 {
    let h = hour % 24;
    let (start, end) = DAYLIGHT_HOURS;
    if h < start || h > end {
        0.0
    } else {
        (std::f64::consts::PI * (h - start) as f64 / (end - start) as f64).sin()
    }
}

/// Lower Cholesky factor of `cov`, with a little diagonal jitter if needed.
fn cholesky_factor(cov: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let scale = (0..cov.nrows())
        .map(|i| cov[(i, i)])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for jitter in [0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        let mut c = cov.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter * scale;
        }
        if let Some(ch) = Cholesky::<f64, Dyn>::new(c) {
            return Ok(ch.l());
        }
    }
    Err(Error::InvalidParameter(format!(
        "{what}: covariance is not positive semi-definite"
    )))
}

struct FacetPlan {
    mean: Vec<f64>,
    /// `None` when the facet is deterministic.
    factor: Option<DMatrix<f64>>,
    solar: bool,
}

impl FacetPlan {
    fn new(spec: &FacetSpec, facet: Facet, n_hours: usize, what: &str) -> Result<Self> {
        let factor = match &spec.covariance {
            Some(c) => {
                let m = DMatrix::from_fn(n_hours, n_hours, |s, t| c[s][t]);
                if (0..n_hours).any(|s| (0..n_hours).any(|t| m[(s, t)] != m[(t, s)])) {
                    return Err(Error::InvalidParameter(format!("{what}: covariance is not symmetric")));
                }
                Some(cholesky_factor(m, what)?)
            }
            None if spec.sigma == 0.0 => None,
            None => {
                let l2 = 2.0 * spec.length_scale * spec.length_scale;
                let corr = DMatrix::from_fn(n_hours, n_hours, |s, t| {
                    let d = s as f64 - t as f64;
                    (-d * d / l2).exp()
                });
                Some(cholesky_factor(corr, what)? * spec.sigma)
            }
        };
        Ok(Self {
            mean: spec.mean.values(n_hours),
            factor,
            solar: facet == Facet::Solar,
        })
    }

    fn realise(&self, innovation: &[f64]) -> Vec<f64> {
        let t = self.mean.len();
        let noise = match &self.factor {
            Some(l) => l * nalgebra::DVector::from_column_slice(innovation),
            None => nalgebra::DVector::zeros(t),
        };
        (0..t)
            .map(|h| {
                let v = if self.solar {
                    let m = daylight_mask(h);
                    if m == 0.0 {
                        0.0
                    } else {
                        self.mean[h] + m * noise[h]
                    }
                } else {
                    self.mean[h] + noise[h]
                };
                v.max(0.0)
            })
            .collect()
    }
}

fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random stream for scenario `i`: the seed picks the key, `i` the stream.
fn scenario_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Draws an ensemble. Values are clipped at zero; solar is zero outside the
/// daylight window and its noise follows a half-sine inside it.
pub fn generate_ensemble<F: Scalar>(spec: &GeneratorSpec) -> Result<ScenarioEnsemble<F>> {
    spec.validate()?;
    let (n, t) = (spec.n_scenarios, spec.n_hours);
    let mut plans: Vec<[Option<FacetPlan>; 3]> = Vec::new();
    for e in &spec.entities {
        let mut slots: [Option<FacetPlan>; 3] = [None, None, None];
        for (k, (facet, fs)) in e.facets().into_iter().enumerate() {
            if let Some(fs) = fs {
                slots[k] = Some(FacetPlan::new(fs, facet, t, &format!("{}/{facet}", e.label))?);
            }
        }
        plans.push(slots);
    }

    let common_w = spec.zone_correlation.sqrt();
    let own_w = (1.0 - spec.zone_correlation).sqrt();
    let rho_own = (1.0 - spec.rho * spec.rho).sqrt();
    // scenario → entity → facet → hourly values
    let draws: Vec<Vec<[Vec<f64>; 3]>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = scenario_rng(spec.seed, i);
            let common = standard_normals(&mut rng, t);
            plans
                .iter()
                .map(|slots| {
                    let own_load = standard_normals(&mut rng, t);
                    let load_eps: Vec<f64> = common
                        .iter()
                        .zip(&own_load)
                        .map(|(c, o)| common_w * c + own_w * o)
                        .collect();
                    let mut out: [Vec<f64>; 3] = Default::default();
                    for (k, slot) in slots.iter().enumerate() {
                        let eps = if k == 0 {
                            load_eps.clone()
                        } else {
                            let own = standard_normals(&mut rng, t);
                            if slots[0].is_some() {
                                load_eps
                                    .iter()
                                    .zip(&own)
                                    .map(|(l, o)| spec.rho * l + rho_own * o)
                                    .collect()
                            } else {
                                own
                            }
                        };
                        if let Some(p) = slot {
                            out[k] = p.realise(&eps);
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();

    let mut ens = ScenarioEnsemble::new(spec.day, n, t)?;
    let facets = [Facet::Load, Facet::Solar, Facet::Wind];
    let mut grid: [Option<Vec<F>>; 3] = [None, None, None];
    let derive_grid = spec.entities.len() > 1 || spec.entities[0].label != GRID;
    for (e_idx, e) in spec.entities.iter().enumerate() {
        for (k, facet) in facets.into_iter().enumerate() {
            if plans[e_idx][k].is_none() {
                continue;
            }
            let values: Vec<F> = draws
                .iter()
                .flat_map(|d| d[e_idx][k].iter().map(|&v| F::of(v)))
                .collect();
            if derive_grid {
                let acc = grid[k].get_or_insert_with(|| vec![F::zero(); n * t]);
                acc.iter_mut().zip(&values).for_each(|(a, &v)| *a = *a + v);
            }
            ens.insert(FacetMatrix::new(e.label.clone(), facet, n, t, values)?)?;
        }
    }
    if derive_grid {
        for (k, facet) in facets.into_iter().enumerate() {
            if let Some(values) = grid[k].take() {
                ens.insert(FacetMatrix::new(GRID, facet, n, t, values)?)?;
            }
        }
    }
    Ok(ens)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierKind {
    /// Adds `delta · σ` at every hour.
    MagnitudeShift { delta: f64 },
    /// Circular shift: hour `t` takes the value of hour `t − hours`.
    ShapeTimewarp { hours: i64 },
    /// Adds `slope · σ · (t − (T−1)/2)`.
    Ramp { slope: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedOutlier {
    pub index: usize,
    pub kind: OutlierKind,
}

/// Outliers to plant into one base facet of one entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierPlan {
    pub entity: String,
    pub facet: Facet,
    /// Unit for shifts and slopes.
    pub sigma: f64,
    pub outliers: Vec<PlantedOutlier>,
}

impl OutlierPlan {
    pub fn indices(&self) -> Vec<usize> {
        self.outliers.iter().map(|o| o.index).collect()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !self.facet.is_base() {
            return Err(Error::InvalidParameter(format!(
                "cannot plant into derived facet `{}`",
                self.facet
            )));
        }
        if !self.sigma.is_finite() {
            return Err(Error::InvalidParameter("outlier sigma must be finite".into()));
        }
        let mut seen = HashSet::new();
        for o in &self.outliers {
            if o.index >= n {
                return Err(Error::InvalidParameter(format!(
                    "outlier index {} out of range for N={n}",
                    o.index
                )));
            }
            if !seen.insert(o.index) {
                return Err(Error::InvalidParameter(format!(
                    "outlier index {} planted twice",
                    o.index
                )));
            }
            let finite = match o.kind {
                OutlierKind::MagnitudeShift { delta } => delta.is_finite(),
                OutlierKind::Ramp { slope } => slope.is_finite(),
                OutlierKind::ShapeTimewarp { .. } => true,
            };
            if !finite {
                return Err(Error::InvalidParameter(format!(
                    "outlier {} has a non-finite size",
                    o.index
                )));
            }
        }
        Ok(())
    }
}

fn apply_outlier(row: &[f64], kind: OutlierKind, sigma: f64) -> Vec<f64> {
    let t = row.len();
    let centre = (t as f64 - 1.0) / 2.0;
    let out: Vec<f64> = match kind {
        OutlierKind::MagnitudeShift { delta } => row.iter().map(|x| x + delta * sigma).collect(),
        OutlierKind::ShapeTimewarp { hours } => {
            let shift = hours.rem_euclid(t as i64) as usize;
            (0..t).map(|h| row[(h + t - shift) % t]).collect()
        }
        OutlierKind::Ramp { slope } => row
            .iter()
            .enumerate()
            .map(|(h, x)| x + slope * sigma * (h as f64 - centre))
            .collect(),
    };
    out.into_iter().map(|v| v.max(0.0)).collect()
}

/// Modifies the planned scenarios of one facet, clipping at zero. Planting
/// into a zone updates the grid by the same change; planting into the grid of
/// a zoned ensemble is refused.
pub fn plant_outliers<F: Scalar>(mut ens: ScenarioEnsemble<F>, plan: &OutlierPlan) -> Result<ScenarioEnsemble<F>> {
    plan.validate(ens.n_scenarios())?;
    let zoned = ens.zones().next().is_some();
    if plan.entity == GRID && zoned {
        return Err(Error::InvalidParameter(
            "plant outliers into a zone; the grid is the sum of the zones".into(),
        ));
    }
    let propagate = plan.entity != GRID && ens.has_entity(GRID);
    let mut deltas: Vec<(usize, Vec<F>)> = Vec::new();
    {
        let fm = ens.base_mut(&plan.entity, plan.facet)?;
        for o in &plan.outliers {
            let old: Vec<f64> = fm.row(o.index).iter().map(|v| v.as_f64()).collect();
            let new = apply_outlier(&old, o.kind, plan.sigma);
            let row = fm.row_mut(o.index);
            let mut delta = Vec::with_capacity(new.len());
            for (slot, v) in row.iter_mut().zip(new) {
                let v = F::of(v);
                delta.push(v - *slot);
                *slot = v;
            }
            deltas.push((o.index, delta));
        }
    }
    if propagate {
        let grid = ens.base_mut(GRID, plan.facet)?;
        for (i, delta) in deltas {
            for (slot, d) in grid.row_mut(i).iter_mut().zip(delta) {
                *slot = (*slot + d).max(F::zero());
            }
        }
    }
    Ok(ens)
}

fn default_grid() -> String {
    GRID.to_string()
}

fn default_one() -> f64 {
    1.0
}

fn default_q90() -> f64 {
    0.9
}

/// How synthetic outcomes depend on net load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "link")]
pub enum OutcomeLink {
    /// Daily total `max(0, offset + scale · AUC + noise · sd(AUC) · ε)`, spread
    /// over hours in proportion to positive net load.
    Auc {
        metric: OutcomeMetric,
        #[serde(default = "default_grid")]
        entity: String,
        #[serde(default = "default_one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        noise: f64,
    },
    /// `scale · max(0, NL(t) − q)`, with `q` the given quantile of daily peaks.
    PeakThreshold {
        metric: OutcomeMetric,
        #[serde(default = "default_grid")]
        entity: String,
        #[serde(default = "default_q90")]
        quantile: f64,
        #[serde(default = "default_one")]
        scale: f64,
    },
    /// Peak exceedance of one zone's net load, optionally plus the grid's.
    ZonalTrigger {
        metric: OutcomeMetric,
        zone: String,
        #[serde(default = "default_q90")]
        quantile: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid_quantile: Option<f64>,
        #[serde(default = "default_one")]
        scale: f64,
    },
}

impl OutcomeLink {
    pub fn metric(&self) -> OutcomeMetric {
        match self {
            OutcomeLink::Auc { metric, .. }
            | OutcomeLink::PeakThreshold { metric, .. }
            | OutcomeLink::ZonalTrigger { metric, .. } => *metric,
        }
    }
}

/// Everything the `synth` command reads: a generator, optional outlier plans
/// applied in order, and optional outcome links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    #[serde(flatten)]
    pub generator: GeneratorSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outliers: Vec<OutlierPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcome_links: Vec<OutcomeLink>,
}

impl SynthConfig {
    /// Generates the ensemble and plants every outlier plan.
    pub fn build<F: Scalar>(&self) -> Result<ScenarioEnsemble<F>> {
        let mut ens = generate_ensemble(&self.generator)?;
        for plan in &self.outliers {
            ens = plant_outliers(ens, plan)?;
        }
        Ok(ens)
    }

    /// The configured links, or cost by grid net-load AUC plus load shed
    /// above the 90% peak quantile.
    pub fn links(&self) -> Vec<OutcomeLink> {
        if !self.outcome_links.is_empty() {
            return self.outcome_links.clone();
        }
        vec![
            OutcomeLink::Auc {
                metric: OutcomeMetric::Cost,
                entity: default_grid(),
                scale: 1.0,
                offset: 0.0,
                noise: 0.0,
            },
            OutcomeLink::PeakThreshold {
                metric: OutcomeMetric::LoadShed,
                entity: default_grid(),
                quantile: 0.9,
                scale: 1.0,
            },
        ]
    }
}

fn rows_f64<F: Scalar>(fm: &FacetMatrix<F>) -> Vec<Vec<f64>> {
    fm.rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
}

fn peak_exceedance(rows: &[Vec<f64>], quantile: f64, scale: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidParameter(format!(
            "quantile must lie in [0, 1], got {quantile}"
        )));
    }
    let mut peaks: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    peaks.sort_by(f64::total_cmp);
    let q = quantile_sorted(&peaks, quantile);
    Ok(rows
        .iter()
        .map(|r| r.iter().map(|&x| scale * (x - q).max(0.0)).collect())
        .collect())
}

/// Outcomes for each link; metrics without a link are absent.
pub fn synth_outcomes<F: Scalar>(ens: &ScenarioEnsemble<F>, links: &[OutcomeLink], seed: u64) -> Result<EdOutcomes<F>> {
    let (n, t) = (ens.n_scenarios(), ens.n_hours());
    let mut out = EdOutcomes::new(ens.day(), n, t);
    for (li, link) in links.iter().enumerate() {
        let hourly: Vec<Vec<f64>> = match link {
            OutcomeLink::Auc {
                entity,
                scale,
                offset,
                noise,
                ..
            } => {
                let nl = ens.facet(entity, Facet::NetLoad)?;
                let areas: Vec<f64> = auc(nl).iter().map(|a| a.as_f64()).collect();
                let mean = areas.iter().sum::<f64>() / n as f64;
                let sd = (areas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(li as u64);
                rows_f64(nl)
                    .into_iter()
                    .zip(&areas)
                    .map(|(row, a)| {
                        let eps: f64 = if *noise != 0.0 {
                            StandardNormal.sample(&mut rng)
                        } else {
                            0.0
                        };
                        let total = (offset + scale * a + noise * sd * eps).max(0.0);
                        let weights: Vec<f64> = row.iter().map(|x| x.max(0.0)).collect();
                        let wsum: f64 = weights.iter().sum();
                        if wsum > 0.0 {
                            weights.iter().map(|w| total * w / wsum).collect()
                        } else {
                            vec![total / t as f64; t]
                        }
                    })
                    .collect()
            }
            OutcomeLink::PeakThreshold {
                entity,
                quantile,
                scale,
                ..
            } => peak_exceedance(&rows_f64(ens.facet(entity, Facet::NetLoad)?), *quantile, *scale)?,
            OutcomeLink::ZonalTrigger {
                zone,
                quantile,
                grid_quantile,
                scale,
                ..
            } => {
                let mut x = peak_exceedance(&rows_f64(ens.facet(zone, Facet::NetLoad)?), *quantile, *scale)?;
                if let Some(gq) = grid_quantile {
                    let g = peak_exceedance(&rows_f64(ens.facet(GRID, Facet::NetLoad)?), *gq, *scale)?;
                    for (xr, gr) in x.iter_mut().zip(g) {
                        xr.iter_mut().zip(gr).for_each(|(a, b)| *a += b);
                    }
                }
                x
            }
        };
        let values: Vec<F> = hourly.into_iter().flatten().map(F::of).collect();
        out.insert(link.metric(), OutcomeMatrix::new(n, t, values)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, sigma: f64) -> GeneratorSpec {
        GeneratorSpec {
            n_scenarios: n,
            n_hours: 24,
            day: default_day(),
            seed: 5,
            rho: 0.0,
            zone_correlation: 0.0,
            entities: vec![EntitySpec {
                label: GRID.into(),
                load: Some(FacetSpec::new(
                    MeanProfile::Sinusoid {
                        level: 1000.0,
                        amplitude: 200.0,
                        peak_hour: 17.0,
                    },
                    sigma,
                    3.0,
                )),
                solar: Some(FacetSpec::new(MeanProfile::Values(vec![0.0; 24]), 0.0, 3.0)),
                wind: Some(FacetSpec::new(MeanProfile::Values(vec![0.0; 24]), 0.0, 3.0)),
            }],
        }
    }

    #[test]
    fn zero_variance_reproduces_mean() {
        let s = spec(4, 0.0);
        let ens = generate_ensemble::<f64>(&s).unwrap();
        let mean = s.entities[0].load.as_ref().unwrap().mean.values(24);
        for row in ens.facet(GRID, Facet::Load).unwrap().rows() {
            assert_eq!(row, &mean[..]);
        }
    }

    #[test]
    fn same_seed_same_ensemble() {
        let s = spec(20, 50.0);
        let a = generate_ensemble::<f64>(&s).unwrap();
        let b = generate_ensemble::<f64>(&s).unwrap();
        assert_eq!(a.facet(GRID, Facet::Load).unwrap(), b.facet(GRID, Facet::Load).unwrap());
    }

    #[test]
    fn column_means_converge() {
        let s = spec(10_000, 50.0);
        let ens = generate_ensemble::<f64>(&s).unwrap();
        let fm = ens.facet(GRID, Facet::Load).unwrap();
        let mean = s.entities[0].load.as_ref().unwrap().mean.values(24);
        let bound = 3.0 * 50.0 / (10_000f64).sqrt();
        for (t, m) in mean.iter().enumerate() {
            let col = fm.column(t);
            let emp = col.iter().sum::<f64>() / col.len() as f64;
            assert!((emp - m).abs() < bound, "hour {t}: {emp} vs {m}");
        }
    }

    #[test]
    fn zoned_grid_is_the_sum() {
        let mut s = spec(30, 40.0);
        let mut z2 = s.entities[0].clone();
        s.entities[0].label = "NC".into();
        s.entities[0].solar = Some(FacetSpec::new(MeanProfile::Values(vec![100.0; 24]), 20.0, 2.0));
        z2.label = "FW".into();
        s.entities.push(z2);
        let ens = generate_ensemble::<f64>(&s).unwrap();
        assert!(ens.check_aggregation(1e-12).consistent);
        let solar = ens.facet("NC", Facet::Solar).unwrap();
        for row in solar.rows() {
            assert_eq!(row[3], 0.0);
            assert_eq!(row[21], 0.0);
        }
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let mut s = spec(3, 1.0);
        s.n_hours = 2;
        s.entities[0].solar = None;
        s.entities[0].wind = None;
        s.entities[0].load = Some(FacetSpec {
            mean: MeanProfile::Values(vec![10.0, 10.0]),
            sigma: 1.0,
            length_scale: 1.0,
            covariance: Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
        });
        let err = generate_ensemble::<f64>(&s).unwrap_err().to_string();
        assert!(err.contains("positive semi-definite"), "{err}");
    }

    fn plan(outliers: Vec<PlantedOutlier>) -> OutlierPlan {
        OutlierPlan {
            entity: GRID.into(),
            facet: Facet::Load,
            sigma: 50.0,
            outliers,
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let ens = generate_ensemble::<f64>(&spec(10, 50.0)).unwrap();
        let before = ens.facet(GRID, Facet::Load).unwrap().clone();
        let p = plan(vec![PlantedOutlier {
            index: 3,
            kind: OutlierKind::MagnitudeShift { delta: 0.0 },
        }]);
        let after = plant_outliers(ens, &p).unwrap();
        assert_eq!(after.facet(GRID, Facet::Load).unwrap(), &before);
    }

    #[test]
    fn timewarp_keeps_auc() {
        let ens = generate_ensemble::<f64>(&spec(10, 50.0)).unwrap();
        let before = auc(ens.facet(GRID, Facet::Load).unwrap());
        let p = plan(vec![PlantedOutlier {
            index: 2,
            kind: OutlierKind::ShapeTimewarp { hours: 12 },
        }]);
        let after = plant_outliers(ens, &p).unwrap();
        let fm = after.facet(GRID, Facet::Load).unwrap();
        let after_auc = auc(fm);
        assert!((after_auc[2] - before[2]).abs() < 1e-9);
        assert_eq!(&after_auc[..2], &before[..2]);
    }

    #[test]
    fn collisions_rejected() {
        let ens = generate_ensemble::<f64>(&spec(10, 50.0)).unwrap();
        let o = PlantedOutlier {
            index: 1,
            kind: OutlierKind::Ramp { slope: 1.0 },
        };
        assert!(plant_outliers(ens.clone(), &plan(vec![o, o])).is_err());
        let far = PlantedOutlier { index: 10, ..o };
        assert!(plant_outliers(ens, &plan(vec![far])).is_err());
    }

    #[test]
    fn identity_link_preserves_auc_order() {
        let ens = generate_ensemble::<f64>(&spec(50, 50.0)).unwrap();
        let link = OutcomeLink::Auc {
            metric: OutcomeMetric::Cost,
            entity: GRID.into(),
            scale: 1.0,
            offset: 0.0,
            noise: 0.0,
        };
        let out = synth_outcomes(&ens, &[link], 1).unwrap();
        let totals = out.get(OutcomeMetric::Cost).unwrap().daily_totals();
        let areas: Vec<f64> = auc(ens.facet(GRID, Facet::NetLoad).unwrap());
        let order = |v: &[f64]| {
            let mut o: Vec<usize> = (0..v.len()).collect();
            o.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            o
        };
        assert_eq!(order(&totals), order(&areas));
    }

    #[test]
    fn threshold_link_marks_top_decile() {
        let ens = generate_ensemble::<f64>(&spec(100, 50.0)).unwrap();
        let link = OutcomeLink::PeakThreshold {
            metric: OutcomeMetric::LoadShed,
            entity: GRID.into(),
            quantile: 0.9,
            scale: 1.0,
        };
        let out = synth_outcomes(&ens, &[link], 1).unwrap();
        let shed = out.get(OutcomeMetric::LoadShed).unwrap().daily_totals();
        let positive = shed.iter().filter(|&&s| s > 0.0).count();
        assert_eq!(positive, 10);
    }
}
