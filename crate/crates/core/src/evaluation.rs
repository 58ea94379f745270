//! Scoring selections against dispatch outcomes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::depth::Metric;
use crate::ensemble::ScenarioEnsemble;
use crate::error::{Error, Result};
use crate::screening::{run_pipeline, PipelineConfig, SelectionSet, Target};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeMetric {
    Cost,
    ReserveShortfall,
    LoadShed,
    #[serde(alias = "vre_curtail")]
    VreCurtailment,
}

impl OutcomeMetric {
    pub const ALL: [OutcomeMetric; 4] = [
        OutcomeMetric::Cost,
        OutcomeMetric::ReserveShortfall,
        OutcomeMetric::LoadShed,
        OutcomeMetric::VreCurtailment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeMetric::Cost => "cost",
            OutcomeMetric::ReserveShortfall => "reserve_shortfall",
            OutcomeMetric::LoadShed => "load_shed",
            OutcomeMetric::VreCurtailment => "vre_curtailment",
        }
    }

    pub fn for_target(target: Target) -> Self {
        match target {
            Target::Cost => OutcomeMetric::Cost,
            Target::ReservesShortfall => OutcomeMetric::ReserveShortfall,
            Target::LoadShedding => OutcomeMetric::LoadShed,
            Target::VreCurtailment => OutcomeMetric::VreCurtailment,
        }
    }
}

impl fmt::Display for OutcomeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cost" => Ok(OutcomeMetric::Cost),
            "reserve_shortfall" => Ok(OutcomeMetric::ReserveShortfall),
            "load_shed" => Ok(OutcomeMetric::LoadShed),
            "vre_curtailment" | "vre_curtail" => Ok(OutcomeMetric::VreCurtailment),
            other => Err(Error::InvalidParameter(format!("unknown outcome metric `{other}`"))),
        }
    }
}

/// Hourly outcome values, `N×T` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeMatrix<F> {
    n_rows: usize,
    n_cols: usize,
    values: Vec<F>,
}

impl<F: Scalar> OutcomeMatrix<F> {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<F>) -> Result<Self> {
        if values.len() != n_rows * n_cols || n_cols == 0 {
            return Err(Error::Shape(format!(
                "outcome matrix {n_rows}x{n_cols} given {} values",
                values.len()
            )));
        }
        for (k, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: k / n_cols,
                    col: k % n_cols,
                });
            }
            if *v < F::zero() {
                return Err(Error::Negative {
                    what: "outcome".into(),
                    row: k / n_cols,
                    col: k % n_cols,
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self { n_rows, n_cols, values })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged outcome rows".into()));
        }
        Self::new(rows.len(), n_cols, rows.iter().flatten().copied().collect())
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_rows
    }

    pub fn n_hours(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// `X_i = Σ_t X_i(t)` for every scenario.
    pub fn daily_totals(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.n_cols)
            .map(|r| r.iter().map(|v| v.as_f64()).sum())
            .collect()
    }
}

/// Per-scenario hourly dispatch outcomes for one day.
#[derive(Clone, Debug, PartialEq)]
pub struct EdOutcomes<F> {
    pub day: NaiveDate,
    n_scenarios: usize,
    n_hours: usize,
    metrics: BTreeMap<OutcomeMetric, OutcomeMatrix<F>>,
}

impl<F: Scalar> EdOutcomes<F> {
    pub fn new(day: NaiveDate, n_scenarios: usize, n_hours: usize) -> Self {
        Self {
            day,
            n_scenarios,
            n_hours,
            metrics: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, metric: OutcomeMetric, matrix: OutcomeMatrix<F>) -> Result<()> {
        if matrix.n_scenarios() != self.n_scenarios || matrix.n_hours() != self.n_hours {
            return Err(Error::Shape(format!(
                "{metric} is {}x{}, outcomes are {}x{}",
                matrix.n_scenarios(),
                matrix.n_hours(),
                self.n_scenarios,
                self.n_hours
            )));
        }
        self.metrics.insert(metric, matrix);
        Ok(())
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn n_hours(&self) -> usize {
        self.n_hours
    }

    pub fn get(&self, metric: OutcomeMetric) -> Result<&OutcomeMatrix<F>> {
        self.metrics
            .get(&metric)
            .ok_or_else(|| Error::InvalidParameter(format!("no `{metric}` outcomes for {}", self.day)))
    }

    pub fn metrics(&self) -> impl Iterator<Item = (OutcomeMetric, &OutcomeMatrix<F>)> + '_ {
        self.metrics.iter().map(|(k, v)| (*k, v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum LabelRule {
    /// The `m` largest daily totals, ties by index.
    TopM { m: usize },
    /// Any positive daily total.
    Positive,
    /// Daily total at or above `x`.
    Threshold { x: f64 },
}

impl LabelRule {
    /// Extremality rule for each target: top 5% of 1000 for cost and
    /// shortfall, any shedding, curtailment of at least 100 MWh.
    pub fn default_for(target: Target) -> Self {
        match target {
            Target::Cost | Target::ReservesShortfall => LabelRule::TopM { m: 50 },
            Target::LoadShedding => LabelRule::Positive,
            Target::VreCurtailment => LabelRule::Threshold { x: 100.0 },
        }
    }
}

/// The operationally extreme scenarios of a day.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremeLabel {
    pub metric: OutcomeMetric,
    pub rule: LabelRule,
    pub extreme_set: Vec<usize>,
}

impl ExtremeLabel {
    pub fn from_totals(metric: OutcomeMetric, rule: LabelRule, totals: &[f64]) -> Self {
        let extreme_set = match rule {
            LabelRule::TopM { m } => {
                let mut order: Vec<usize> = (0..totals.len()).collect();
                order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]).then(a.cmp(&b)));
                order.truncate(m);
                order.sort_unstable();
                order
            }
            LabelRule::Positive => (0..totals.len()).filter(|&i| totals[i] > 0.0).collect(),
            LabelRule::Threshold { x } => (0..totals.len()).filter(|&i| totals[i] >= x).collect(),
        };
        Self {
            metric,
            rule,
            extreme_set,
        }
    }

    pub fn compute<F: Scalar>(outcomes: &EdOutcomes<F>, metric: OutcomeMetric, rule: LabelRule) -> Result<Self> {
        Ok(Self::from_totals(metric, rule, &outcomes.get(metric)?.daily_totals()))
    }
}

/// `|E ∩ O| / |E|`; `None` when `E` is empty.
pub fn count_accuracy(extreme: &[usize], selected: &[usize]) -> Option<f64> {
    let e: HashSet<usize> = extreme.iter().copied().collect();
    if e.is_empty() {
        return None;
    }
    let o: HashSet<usize> = selected.iter().copied().collect();
    Some(e.intersection(&o).count() as f64 / e.len() as f64)
}

/// Captured and total outcome magnitude over the extreme set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Magnitude {
    pub captured: f64,
    pub total: f64,
}

impl Magnitude {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0.0).then(|| self.captured / self.total)
    }
}

/// Outcome totals of `E ∩ O` and of `E`.
pub fn magnitude<F: Scalar>(extreme: &[usize], selected: &[usize], x: &OutcomeMatrix<F>) -> Magnitude {
    let totals = x.daily_totals();
    let o: HashSet<usize> = selected.iter().copied().collect();
    let e: HashSet<usize> = extreme.iter().copied().collect();
    let mut e_sorted: Vec<usize> = e.into_iter().collect();
    e_sorted.sort_unstable();
    let total = e_sorted.iter().map(|&i| totals[i]).sum();
    let captured = e_sorted.iter().filter(|i| o.contains(i)).map(|&i| totals[i]).sum();
    Magnitude { captured, total }
}

/// Magnitude-weighted accuracy; `None` when `E` is empty or carries no mass.
pub fn magnitude_accuracy<F: Scalar>(extreme: &[usize], selected: &[usize], x: &OutcomeMatrix<F>) -> Option<f64> {
    if extreme.is_empty() {
        return None;
    }
    magnitude(extreme, selected, x).accuracy()
}

/// Counts inversions of `v` while merge-sorting it; tied elements are not inversions.
fn sort_counting_swaps(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid]) + sort_counting_swaps(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Σ over runs of equal values of `t(t−1)/2`, for a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau-b in `O(N log N)`; `None` if either input is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "kendall_tau needs equal-length inputs");
    let n = a.len() as u64;
    if n < 2 || a.iter().chain(b).any(|x| !x.is_finite()) {
        return None;
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let n0 = n * (n - 1) / 2;
    let ties_a = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ties_joint = tied_pairs(&pairs);
    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = sort_counting_swaps(&mut bs);
    let ties_b = tied_pairs(&bs);
    if ties_a == n0 || ties_b == n0 {
        return None;
    }
    let s = n0 as i64 - ties_a as i64 - ties_b as i64 + ties_joint as i64 - 2 * swaps as i64;
    Some(s as f64 / (((n0 - ties_a) as f64) * ((n0 - ties_b) as f64)).sqrt())
}

fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut s = 0;
    while s < order.len() {
        let mut e = s;
        while e + 1 < order.len() && x[order[e + 1]] == x[order[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        for &i in &order[s..=e] {
            r[i] = avg;
        }
        s = e + 1;
    }
    r
}

/// Spearman's rho as the Pearson correlation of midranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman_rho needs equal-length inputs");
    if a.len() < 2 {
        return None;
    }
    let (ra, rb) = (midranks(a), midranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Accuracy of one day's selection against its outcomes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DayEvaluation {
    pub day: NaiveDate,
    pub metric: OutcomeMetric,
    pub rule: LabelRule,
    pub extreme_set: Vec<usize>,
    /// `None` on days with no extreme scenarios.
    pub count_accuracy: Option<f64>,
    pub magnitude: Magnitude,
    pub magnitude_accuracy: Option<f64>,
}

/// Scores a selection; the label rule defaults to the target's.
pub fn evaluate_selection<F: Scalar>(
    selection: &SelectionSet<F>,
    outcomes: &EdOutcomes<F>,
    rule: Option<LabelRule>,
) -> Result<DayEvaluation> {
    if selection.day != outcomes.day {
        return Err(Error::InvalidParameter(format!(
            "selection for {} scored against outcomes for {}",
            selection.day, outcomes.day
        )));
    }
    let target = selection.config.target;
    let metric = OutcomeMetric::for_target(target);
    let rule = rule.unwrap_or_else(|| LabelRule::default_for(target));
    let x = outcomes.get(metric)?;
    let label = ExtremeLabel::from_totals(metric, rule, &x.daily_totals());
    let magnitude = magnitude(&label.extreme_set, &selection.indices, x);
    Ok(DayEvaluation {
        day: selection.day,
        metric,
        rule,
        count_accuracy: count_accuracy(&label.extreme_set, &selection.indices),
        magnitude_accuracy: (!label.extreme_set.is_empty()).then(|| magnitude.accuracy()).flatten(),
        magnitude,
        extreme_set: label.extreme_set,
    })
}

/// One day's result for one column (a depth metric, or a baseline).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DayScore {
    pub day: NaiveDate,
    pub column: String,
    pub n_extreme: usize,
    pub n_selected: usize,
    pub count_accuracy: Option<f64>,
    pub magnitude_accuracy: Option<f64>,
    pub magnitude: Magnitude,
}

impl DayScore {
    pub fn new(column: impl Into<String>, n_selected: usize, eval: &DayEvaluation) -> Self {
        Self {
            day: eval.day,
            column: column.into(),
            n_extreme: eval.extreme_set.len(),
            n_selected,
            count_accuracy: eval.count_accuracy,
            magnitude_accuracy: eval.magnitude_accuracy,
            magnitude: eval.magnitude,
        }
    }
}

/// Runs the pipeline once per depth metric (or once, by AUC, when the
/// configuration has no depth stage) and scores every run.
pub fn sweep_metrics<F: Scalar>(
    ens: &ScenarioEnsemble<F>,
    outcomes: &EdOutcomes<F>,
    config: &PipelineConfig,
    rule: Option<LabelRule>,
) -> Result<Vec<DayScore>> {
    let resolved = config.resolve(ens.month());
    let runs: Vec<(String, PipelineConfig)> = match resolved.depth_metric {
        None => vec![("AUC".to_string(), resolved.clone())],
        Some(_) => Metric::ALL
            .iter()
            .map(|&m| {
                let mut c = resolved.clone();
                c.depth_metric = Some(m);
                (m.label().to_string(), c)
            })
            .collect(),
    };
    runs.into_iter()
        .map(|(column, cfg)| {
            let sel = run_pipeline(ens, &cfg)?;
            let eval = evaluate_selection(&sel, outcomes, rule)?;
            Ok(DayScore::new(column, sel.indices.len(), &eval))
        })
        .collect()
}

/// Min / median / average / max over the applicable days.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Stats {
    pub days: usize,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub avg: Option<f64>,
    pub max: Option<f64>,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        let median = match v.len() {
            0 => None,
            k if k % 2 == 1 => Some(v[k / 2]),
            k => Some((v[k / 2 - 1] + v[k / 2]) / 2.0),
        };
        Self {
            days: v.len(),
            min: v.first().copied(),
            median,
            avg: (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64),
            max: v.last().copied(),
        }
    }
}

/// Per-column summary over days.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub column: String,
    pub count: Stats,
    pub magnitude: Stats,
    /// Sums over days of captured and total extreme-set magnitude.
    pub captured_total: f64,
    pub magnitude_total: f64,
}

impl SummaryRow {
    /// Total captured over total magnitude.
    pub fn pooled_accuracy(&self) -> Option<f64> {
        (self.magnitude_total > 0.0).then(|| self.captured_total / self.magnitude_total)
    }
}

/// Summarises day scores per column, columns in first-appearance order.
pub fn summarize_days(scores: &[DayScore]) -> Vec<SummaryRow> {
    let mut columns: Vec<&str> = Vec::new();
    for s in scores {
        if !columns.contains(&s.column.as_str()) {
            columns.push(&s.column);
        }
    }
    columns
        .into_iter()
        .map(|col| {
            let rows: Vec<&DayScore> = scores.iter().filter(|s| s.column == col).collect();
            // days in date order so totals do not depend on input order
            let mut by_day: Vec<&DayScore> = rows.clone();
            by_day.sort_by_key(|s| s.day);
            SummaryRow {
                column: col.to_string(),
                count: Stats::of(rows.iter().filter_map(|s| s.count_accuracy)),
                magnitude: Stats::of(rows.iter().filter_map(|s| s.magnitude_accuracy)),
                captured_total: by_day.iter().map(|s| s.magnitude.captured).sum(),
                magnitude_total: by_day.iter().map(|s| s.magnitude.total).sum(),
            }
        })
        .collect()
}
