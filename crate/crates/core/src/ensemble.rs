//! Scenario ensembles, facet matrices, marginal ranks and pointwise statistics.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Label of the system-wide aggregate entity.
pub const GRID: &str = "grid";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Load,
    Solar,
    Wind,
    /// Solar plus wind.
    Vre,
    /// Load minus solar minus wind.
    NetLoad,
}

impl Facet {
    pub const BASE: [Facet; 3] = [Facet::Load, Facet::Solar, Facet::Wind];
    pub const ALL: [Facet; 5] = [Facet::Load, Facet::Solar, Facet::Wind, Facet::Vre, Facet::NetLoad];

    pub fn is_base(self) -> bool {
        matches!(self, Facet::Load | Facet::Solar | Facet::Wind)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Load => "load",
            Facet::Solar => "solar",
            Facet::Wind => "wind",
            Facet::Vre => "vre",
            Facet::NetLoad => "net_load",
        }
    }

    fn base_slot(self) -> Option<usize> {
        match self {
            Facet::Load => Some(0),
            Facet::Solar => Some(1),
            Facet::Wind => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load" => Ok(Facet::Load),
            "solar" => Ok(Facet::Solar),
            "wind" => Ok(Facet::Wind),
            "vre" => Ok(Facet::Vre),
            "net_load" | "netload" | "nl" => Ok(Facet::NetLoad),
            other => Err(Error::InvalidParameter(format!("unknown facet `{other}`"))),
        }
    }
}

/// An `N×T` matrix of one facet for one entity: row `i` is scenario `i`'s
/// hourly curve.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetMatrix<F> {
    entity: String,
    facet: Facet,
    n_rows: usize,
    n_cols: usize,
    values: Vec<F>,
}

impl<F: Scalar> FacetMatrix<F> {
    /// Builds a matrix from row-major values, rejecting NaN and infinities.
    pub fn new(entity: impl Into<String>, facet: Facet, n_rows: usize, n_cols: usize, values: Vec<F>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Shape(format!("empty matrix ({n_rows}x{n_cols})")));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "expected {} values for {n_rows}x{n_cols}, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / n_cols,
                col: k % n_cols,
            });
        }
        Ok(Self {
            entity: entity.into(),
            facet,
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(entity: impl Into<String>, facet: Facet, rows: &[Vec<F>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} hours, expected {n_cols}",
                rows[bad].len()
            )));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(entity, facet, rows.len(), n_cols, values)
    }

    /// Convenience for tests and examples: an unlabeled matrix of a given facet.
    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<F>> = rows.iter().map(|r| r.iter().map(|&x| F::of(x)).collect()).collect();
        Self::from_rows(GRID, Facet::NetLoad, &rows)
    }

    pub fn entity(&self) -> &str {
        &self.entity
    }

    pub fn facet(&self) -> Facet {
        self.facet
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_rows
    }

    pub fn n_hours(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn get(&self, i: usize, t: usize) -> F {
        self.values[i * self.n_cols + t]
    }

    pub fn column(&self, t: usize) -> Vec<F> {
        (0..self.n_rows).map(|i| self.get(i, t)).collect()
    }

    /// Sub-ensemble made of the given scenario rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::Shape(format!("scenario {i} out of range (N={})", self.n_rows)));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(self.entity.clone(), self.facet, indices.len(), self.n_cols, values)
    }

    /// Applies `g(t, x)` elementwise; used for transforms in tests and synthesis.
    pub fn map_elements(&self, g: impl Fn(usize, F) -> F) -> Result<Self> {
        let n_cols = self.n_cols;
        let values = self.values.iter().enumerate().map(|(k, &x)| g(k % n_cols, x)).collect();
        Self::new(self.entity.clone(), self.facet, self.n_rows, self.n_cols, values)
    }

    pub fn relabel(mut self, entity: impl Into<String>, facet: Facet) -> Self {
        self.entity = entity.into();
        self.facet = facet;
        self
    }

    pub(crate) fn require_scenarios(&self, min: usize, what: &str) -> Result<()> {
        if self.n_rows < min {
            return Err(Error::InvalidParameter(format!(
                "{what} needs at least {min} scenarios, got {}",
                self.n_rows
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct EntityData<F> {
    label: String,
    base: [Option<FacetMatrix<F>>; 3],
    // vre, net_load; filled on first request
    derived: [OnceLock<FacetMatrix<F>>; 2],
}

impl<F> EntityData<F> {
    fn new(label: String) -> Self {
        Self {
            label,
            base: [None, None, None],
            derived: [OnceLock::new(), OnceLock::new()],
        }
    }
}

/// One day's scenario set: `N` scenarios × `T` hours for a grid entity and
/// zero or more zones, each carrying load, solar and wind.
///
/// Derived facets (`vre`, `net_load`) are computed lazily and cached; the
/// cache is safe to populate from several threads.
#[derive(Clone, Debug)]
pub struct ScenarioEnsemble<F> {
    day: NaiveDate,
    n_scenarios: usize,
    n_hours: usize,
    entities: Vec<EntityData<F>>,
}

/// Result of checking that the grid entity equals the sum of the zones.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregationReport {
    pub checked: bool,
    pub max_relative_error: f64,
    pub consistent: bool,
}

impl<F: Scalar> ScenarioEnsemble<F> {
    pub fn new(day: NaiveDate, n_scenarios: usize, n_hours: usize) -> Result<Self> {
        if n_scenarios == 0 || n_hours == 0 {
            return Err(Error::Shape(format!(
                "ensemble needs N>0 and T>0 (got N={n_scenarios}, T={n_hours})"
            )));
        }
        Ok(Self {
            day,
            n_scenarios,
            n_hours,
            entities: Vec::new(),
        })
    }

    /// Builds an ensemble from base-facet matrices; `N` and `T` come from the first one.
    pub fn from_matrices(day: NaiveDate, matrices: Vec<FacetMatrix<F>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Shape("ensemble needs at least one facet matrix".into()))?;
        let mut ens = Self::new(day, first.n_scenarios(), first.n_hours())?;
        for m in matrices {
            ens.insert(m)?;
        }
        Ok(ens)
    }

    /// Adds a base-facet matrix, enforcing shape and sign invariants.
    pub fn insert(&mut self, matrix: FacetMatrix<F>) -> Result<()> {
        let slot = matrix.facet().base_slot().ok_or_else(|| {
            Error::InvalidParameter(format!("only base facets can be inserted, got `{}`", matrix.facet()))
        })?;
        if matrix.n_scenarios() != self.n_scenarios || matrix.n_hours() != self.n_hours {
            return Err(Error::Shape(format!(
                "{}/{} is {}x{}, ensemble is {}x{}",
                matrix.entity(),
                matrix.facet(),
                matrix.n_scenarios(),
                matrix.n_hours(),
                self.n_scenarios,
                self.n_hours
            )));
        }
        check_non_negative(&matrix)?;
        let idx = match self.entity_index(matrix.entity()) {
            Some(idx) => idx,
            None => {
                self.entities.push(EntityData::new(matrix.entity().to_string()));
                self.entities.len() - 1
            }
        };
        let data = &mut self.entities[idx];
        if data.base[slot].is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate facet {}/{}",
                matrix.entity(),
                matrix.facet()
            )));
        }
        data.base[slot] = Some(matrix);
        data.derived = [OnceLock::new(), OnceLock::new()];
        Ok(())
    }

    pub fn day(&self) -> NaiveDate {
        self.day
    }

    pub fn month(&self) -> u32 {
        self.day.month()
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn n_hours(&self) -> usize {
        self.n_hours
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> + '_ {
        self.entities.iter().map(|e| e.label.as_str())
    }

    pub fn zones(&self) -> impl Iterator<Item = &str> + '_ {
        self.entities().filter(|e| *e != GRID)
    }

    pub fn has_entity(&self, entity: &str) -> bool {
        self.entity_index(entity).is_some()
    }

    fn entity_index(&self, entity: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.label == entity)
    }

    fn entity_data(&self, entity: &str) -> Result<&EntityData<F>> {
        self.entity_index(entity)
            .map(|i| &self.entities[i])
            .ok_or_else(|| Error::MissingEntity(entity.to_string()))
    }

    fn base<'a>(&self, data: &'a EntityData<F>, want: Facet, facet: Facet) -> Result<&'a FacetMatrix<F>> {
        data.base[want.base_slot().expect("base facet")]
            .as_ref()
            .ok_or_else(|| Error::MissingFacet {
                entity: data.label.clone(),
                facet: facet.to_string(),
                missing: want.to_string(),
            })
    }

    /// Returns the requested facet, deriving `vre = solar + wind` and
    /// `net_load = load − solar − wind` on first use.
    pub fn facet(&self, entity: &str, facet: Facet) -> Result<&FacetMatrix<F>> {
        let data = self.entity_data(entity)?;
        let (slot, needed): (usize, &[Facet]) = match facet {
            Facet::Load | Facet::Solar | Facet::Wind => return self.base(data, facet, facet),
            Facet::Vre => (0, &[Facet::Solar, Facet::Wind]),
            Facet::NetLoad => (1, &[Facet::Load, Facet::Solar, Facet::Wind]),
        };
        if let Some(m) = data.derived[slot].get() {
            return Ok(m);
        }
        let parts = needed
            .iter()
            .map(|&b| self.base(data, b, facet))
            .collect::<Result<Vec<_>>>()?;
        Ok(data.derived[slot].get_or_init(|| {
            let values = match facet {
                Facet::Vre => parts[0]
                    .values()
                    .iter()
                    .zip(parts[1].values())
                    .map(|(&s, &w)| s + w)
                    .collect(),
                _ => parts[0]
                    .values()
                    .iter()
                    .zip(parts[1].values())
                    .zip(parts[2].values())
                    .map(|((&l, &s), &w)| l - s - w)
                    .collect(),
            };
            FacetMatrix::new(entity, facet, self.n_scenarios, self.n_hours, values)
                .expect("sums of finite values of matching shape")
        }))
    }

    /// Mutable access to a base facet; clears the entity's derived cache.
    pub(crate) fn base_mut(&mut self, entity: &str, facet: Facet) -> Result<&mut FacetMatrix<F>> {
        let idx = self
            .entity_index(entity)
            .ok_or_else(|| Error::MissingEntity(entity.to_string()))?;
        let slot = facet
            .base_slot()
            .ok_or_else(|| Error::InvalidParameter(format!("`{facet}` is not a base facet")))?;
        let data = &mut self.entities[idx];
        data.derived = [OnceLock::new(), OnceLock::new()];
        data.base[slot].as_mut().ok_or_else(|| Error::MissingFacet {
            entity: entity.to_string(),
            facet: facet.to_string(),
            missing: facet.to_string(),
        })
    }

    /// All base matrices, entity-major in insertion order.
    pub fn base_matrices(&self) -> impl Iterator<Item = &FacetMatrix<F>> + '_ {
        self.entities.iter().flat_map(|e| e.base.iter().flatten())
    }

    /// Compares the grid entity against the per-zone sum for every base facet
    /// present in both. Reported, never enforced.
    pub fn check_aggregation(&self, rel_tol: f64) -> AggregationReport {
        let zones: Vec<&EntityData<F>> = self.entities.iter().filter(|e| e.label != GRID).collect();
        let Some(grid) = self.entities.iter().find(|e| e.label == GRID) else {
            return AggregationReport {
                checked: false,
                max_relative_error: 0.0,
                consistent: true,
            };
        };
        let mut checked = false;
        let mut worst = 0.0f64;
        for slot in 0..3 {
            let Some(g) = grid.base[slot].as_ref() else { continue };
            let parts: Option<Vec<&FacetMatrix<F>>> = zones.iter().map(|z| z.base[slot].as_ref()).collect();
            let Some(parts) = parts.filter(|p| !p.is_empty()) else {
                continue;
            };
            checked = true;
            for (k, gv) in g.values().iter().enumerate() {
                let sum: f64 = parts.iter().map(|p| p.values()[k].as_f64()).sum();
                let gv = gv.as_f64();
                let scale = gv.abs().max(sum.abs()).max(f64::MIN_POSITIVE);
                let err = (gv - sum).abs() / scale;
                if (gv - sum).abs() > 0.0 {
                    worst = worst.max(err);
                }
            }
        }
        AggregationReport {
            checked,
            max_relative_error: worst,
            consistent: worst <= rel_tol,
        }
    }
}

fn check_non_negative<F: Scalar>(m: &FacetMatrix<F>) -> Result<()> {
    if let Some(k) = m.values().iter().position(|v| *v < F::zero()) {
        return Err(Error::Negative {
            what: format!("{}/{}", m.entity(), m.facet()),
            row: k / m.n_hours(),
            col: k % m.n_hours(),
            value: m.values()[k].as_f64(),
        });
    }
    Ok(())
}

/// Daily area under each scenario's curve (unit-weight hourly sum).
pub fn auc<F: Scalar>(fm: &FacetMatrix<F>) -> Vec<F> {
    fm.rows().map(|r| r.iter().copied().sum()).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Ties broken by scenario index; every column is a permutation of 1..=N.
    #[default]
    OrdinalByIndex,
    /// Tied values share the mean of their ordinal ranks.
    Midrank,
}

/// Marginal ranks `R_i(t) ∈ [1, N]` of every scenario within every hour.
///
/// Ranks are stored doubled so midranks stay integral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankMatrix {
    n_rows: usize,
    n_cols: usize,
    tie_policy: TiePolicy,
    twice: Vec<u32>,
}

impl RankMatrix {
    pub fn n_scenarios(&self) -> usize {
        self.n_rows
    }

    pub fn n_hours(&self) -> usize {
        self.n_cols
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    pub fn rank(&self, i: usize, t: usize) -> f64 {
        f64::from(self.twice[i * self.n_cols + t]) / 2.0
    }

    /// `2·R_i(t)`, always an integer.
    pub fn twice_rank(&self, i: usize, t: usize) -> u32 {
        self.twice[i * self.n_cols + t]
    }

    pub fn twice_row(&self, i: usize) -> &[u32] {
        &self.twice[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Builds from explicit ordinal ranks (each in `1..=N`); mostly for tests.
    pub fn from_ranks(rows: &[Vec<u32>], tie_policy: TiePolicy) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("rank rows must be non-empty and rectangular".into()));
        }
        let mut twice = Vec::with_capacity(n_rows * n_cols);
        for r in rows.iter().flatten() {
            if *r == 0 || *r as usize > n_rows {
                return Err(Error::InvalidParameter(format!("rank {r} outside 1..={n_rows}")));
            }
            twice.push(2 * r);
        }
        Ok(Self {
            n_rows,
            n_cols,
            tie_policy,
            twice,
        })
    }
}

/// Doubled ranks of one column of values.
pub(crate) fn twice_ranks<F: Scalar>(values: &[F], tie_policy: TiePolicy) -> Vec<u32> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values stay in index order
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut out = vec![0u32; n];
    match tie_policy {
        TiePolicy::OrdinalByIndex => {
            for (pos, &i) in order.iter().enumerate() {
                out[i] = 2 * (pos as u32 + 1);
            }
        }
        TiePolicy::Midrank => {
            let mut start = 0;
            while start < n {
                let mut end = start;
                while end + 1 < n && values[order[end + 1]] == values[order[start]] {
                    end += 1;
                }
                // mean of ordinal ranks start+1..=end+1, doubled
                let shared = (start + end + 2) as u32;
                for &i in &order[start..=end] {
                    out[i] = shared;
                }
                start = end + 1;
            }
        }
    }
    out
}

pub fn rank_matrix<F: Scalar>(fm: &FacetMatrix<F>, tie_policy: TiePolicy) -> RankMatrix {
    let (n, t_len) = (fm.n_scenarios(), fm.n_hours());
    let mut twice = vec![0u32; n * t_len];
    for t in 0..t_len {
        for (i, r) in twice_ranks(&fm.column(t), tie_policy).into_iter().enumerate() {
            twice[i * t_len + t] = r;
        }
    }
    RankMatrix {
        n_rows: n,
        n_cols: t_len,
        tie_policy,
        twice,
    }
}

/// Interpolated order statistic of ascending `sorted` at probability `p`,
/// placing the `i`-th order statistic at `(i−1)/(N−1)`.
pub fn quantile_sorted<F: Scalar>(sorted: &[F], p: f64) -> F {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = F::of(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Hour-by-hour mean and quantiles across scenarios.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointwiseStats<F> {
    pub mean: Vec<F>,
    pub quantiles: Vec<(f64, Vec<F>)>,
}

impl<F: Scalar> PointwiseStats<F> {
    pub fn quantile(&self, p: f64) -> Option<&[F]> {
        self.quantiles.iter().find(|(q, _)| *q == p).map(|(_, v)| v.as_slice())
    }
}

pub fn pointwise_stats<F: Scalar>(fm: &FacetMatrix<F>, probs: &[f64]) -> Result<PointwiseStats<F>> {
    fm.require_scenarios(2, "pointwise statistics")?;
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "quantile probability {p} not in (0,1)"
        )));
    }
    let n = F::of_count(fm.n_scenarios() as u64);
    let mut mean = Vec::with_capacity(fm.n_hours());
    let mut quantiles: Vec<(f64, Vec<F>)> = probs.iter().map(|&p| (p, Vec::with_capacity(fm.n_hours()))).collect();
    for t in 0..fm.n_hours() {
        let mut col = fm.column(t);
        mean.push(col.iter().copied().sum::<F>() / n);
        col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        for (p, q) in quantiles.iter_mut() {
            q.push(quantile_sorted(&col, *p));
        }
    }
    Ok(PointwiseStats { mean, quantiles })
}
