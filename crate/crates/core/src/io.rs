//! Wide CSV files (one row per scenario and series, columns `h01..hNN`) and
//! report output.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::depth::DepthResult;
use crate::ensemble::{Facet, FacetMatrix, ScenarioEnsemble};
use crate::error::{Error, Result};
use crate::evaluation::{DayEvaluation, EdOutcomes, OutcomeMatrix, OutcomeMetric, Stats, SummaryRow};
use crate::screening::{PipelineConfig, SelectionSet};
use crate::Scalar;

pub const DEFAULT_HOURS: usize = 24;

pub fn hour_column(t: usize) -> String {
    format!("h{:02}", t + 1)
}

fn parse_err(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(source: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(source, line, e.to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A parsed data row: its line, key fields and hourly values.
struct WideRow<F> {
    line: u64,
    keys: Vec<String>,
    values: Vec<F>,
}

/// Reads a wide file with the given key columns followed by `h01..hT`.
fn read_wide<F: Scalar, R: Read>(
    reader: R,
    source: &str,
    key_columns: &[&str],
    n_hours: usize,
) -> Result<Vec<WideRow<F>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(source, e))?.clone();
    if header.is_empty() {
        return Err(parse_err(source, 1, "missing header row"));
    }
    let hours: Vec<String> = (0..n_hours).map(hour_column).collect();
    let mut wanted: Vec<&str> = key_columns.to_vec();
    wanted.extend(hours.iter().map(String::as_str));
    let mut pos = Vec::with_capacity(wanted.len());
    for name in &wanted {
        match header.iter().position(|h| h == *name) {
            Some(p) => pos.push(p),
            None => return Err(parse_err(source, 1, format!("missing column `{name}`"))),
        }
    }
    for (k, h) in header.iter().enumerate() {
        if !wanted.contains(&h) {
            return Err(parse_err(
                source,
                1,
                format!("unexpected column `{h}` (expected {n_hours} hour columns)"),
            ));
        }
        if header.iter().take(k).any(|prev| prev == h) {
            return Err(parse_err(source, 1, format!("duplicate column `{h}`")));
        }
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(source, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let keys: Vec<String> = pos[..key_columns.len()].iter().map(|&p| rec[p].to_string()).collect();
        let mut values = Vec::with_capacity(n_hours);
        for (t, &p) in pos[key_columns.len()..].iter().enumerate() {
            let raw = &rec[p];
            let v: F = raw
                .parse()
                .map_err(|_| parse_err(source, line, format!("column `{}`: `{raw}` is not a number", hours[t])))?;
            if !v.is_finite() {
                return Err(parse_err(
                    source,
                    line,
                    format!("column `{}`: value is not finite", hours[t]),
                ));
            }
            if v < F::zero() {
                return Err(parse_err(
                    source,
                    line,
                    format!("column `{}`: negative value {raw}", hours[t]),
                ));
            }
            values.push(v);
        }
        rows.push(WideRow { line, keys, values });
    }
    Ok(rows)
}

fn parse_day(source: &str, line: u64, raw: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .map_err(|_| parse_err(source, line, format!("`{raw}` is not an ISO-8601 date")))
}

fn parse_scenario(source: &str, line: u64, raw: &str) -> Result<usize> {
    raw.parse()
        .map_err(|_| parse_err(source, line, format!("scenario `{raw}` is not a non-negative integer")))
}

/// Series of one day, keyed in first-appearance order, each a map of scenario id → row.
struct DayGroup<K, F> {
    order: Vec<K>,
    series: HashMap<K, (u64, BTreeMap<usize, Vec<F>>)>,
}

impl<K: Clone + Eq + std::hash::Hash, F> DayGroup<K, F> {
    fn new() -> Self {
        Self {
            order: Vec::new(),
            series: HashMap::new(),
        }
    }

    /// Adds one row; `false` if the scenario is already present.
    fn push(&mut self, key: K, line: u64, scenario: usize, values: Vec<F>) -> bool {
        let entry = self.series.entry(key.clone()).or_insert_with(|| {
            self.order.push(key);
            (line, BTreeMap::new())
        });
        entry.1.insert(scenario, values).is_none()
    }

    /// Checks every series holds scenarios `0..N` for one common `N`.
    fn scenario_count(&self, source: &str, day: NaiveDate, describe: impl Fn(&K) -> String) -> Result<usize> {
        let mut n = None;
        for key in &self.order {
            let (line, rows) = &self.series[key];
            let count = rows.len();
            if rows.keys().next_back().is_some_and(|&last| last + 1 != count) {
                return Err(parse_err(
                    source,
                    *line,
                    format!("{day} {}: scenario ids are not 0..{}", describe(key), count - 1),
                ));
            }
            match n {
                None => n = Some(count),
                Some(m) if m != count => {
                    return Err(parse_err(
                        source,
                        *line,
                        format!("{day} {}: {count} scenarios, other series have {m}", describe(key)),
                    ))
                }
                _ => {}
            }
        }
        Ok(n.unwrap_or(0))
    }
}

/// Reads scenario ensembles with `n_hours` hour columns, one ensemble per day.
pub fn read_scenarios<F: Scalar, R: Read>(
    reader: R,
    source: &str,
    n_hours: usize,
) -> Result<BTreeMap<NaiveDate, ScenarioEnsemble<F>>> {
    let rows = read_wide::<F, _>(reader, source, &["day", "scenario", "entity", "facet"], n_hours)?;
    let mut days: BTreeMap<NaiveDate, DayGroup<(String, Facet), F>> = BTreeMap::new();
    for row in rows {
        let day = parse_day(source, row.line, &row.keys[0])?;
        let scenario = parse_scenario(source, row.line, &row.keys[1])?;
        let entity = row.keys[2].clone();
        if entity.is_empty() {
            return Err(parse_err(source, row.line, "empty entity"));
        }
        let facet: Facet = row.keys[3]
            .parse()
            .ok()
            .filter(|f: &Facet| f.is_base())
            .ok_or_else(|| {
                parse_err(
                    source,
                    row.line,
                    format!("facet `{}` is not one of load, solar, wind", row.keys[3]),
                )
            })?;
        let group = days.entry(day).or_insert_with(DayGroup::new);
        if !group.push((entity.clone(), facet), row.line, scenario, row.values) {
            return Err(parse_err(
                source,
                row.line,
                format!("duplicate row for {day}, scenario {scenario}, {entity}/{facet}"),
            ));
        }
    }

    let mut out = BTreeMap::new();
    for (day, group) in days {
        let n = group.scenario_count(source, day, |(e, f)| format!("{e}/{f}"))?;
        let mut ens = ScenarioEnsemble::new(day, n, n_hours)?;
        for key in &group.order {
            let (_, rows) = &group.series[key];
            let values = rows.values().flatten().copied().collect();
            ens.insert(FacetMatrix::new(key.0.clone(), key.1, n, n_hours, values)?)?;
        }
        out.insert(day, ens);
    }
    Ok(out)
}

/// Loads a scenario file with 24 hour columns.
pub fn load_scenarios<F: Scalar>(path: impl AsRef<Path>) -> Result<BTreeMap<NaiveDate, ScenarioEnsemble<F>>> {
    load_scenarios_with_hours(path, DEFAULT_HOURS)
}

pub fn load_scenarios_with_hours<F: Scalar>(
    path: impl AsRef<Path>,
    n_hours: usize,
) -> Result<BTreeMap<NaiveDate, ScenarioEnsemble<F>>> {
    let path = path.as_ref();
    read_scenarios(open(path)?, &path.display().to_string(), n_hours)
}

fn header(keys: &[&str], n_hours: usize) -> String {
    let mut h = keys.join(",");
    for t in 0..n_hours {
        h.push(',');
        h.push_str(&hour_column(t));
    }
    h.push('\n');
    h
}

/// Canonical text: days ascending, entities in ensemble order, base facets
/// as load/solar/wind, scenarios ascending. Values use the shortest decimal
/// that reads back to the same number.
pub fn render_scenarios<'a, F: Scalar>(ensembles: impl IntoIterator<Item = &'a ScenarioEnsemble<F>>) -> String {
    let mut ens: Vec<&ScenarioEnsemble<F>> = ensembles.into_iter().collect();
    ens.sort_by_key(|e| e.day());
    let n_hours = ens.first().map_or(DEFAULT_HOURS, |e| e.n_hours());
    let mut out = header(&["day", "scenario", "entity", "facet"], n_hours);
    for e in ens {
        for fm in e.base_matrices() {
            for (i, row) in fm.rows().enumerate() {
                let _ = write!(out, "{},{i},{},{}", e.day(), fm.entity(), fm.facet());
                for v in row {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_scenarios<'a, F: Scalar>(
    path: impl AsRef<Path>,
    ensembles: impl IntoIterator<Item = &'a ScenarioEnsemble<F>>,
) -> Result<()> {
    write_text(path.as_ref(), &render_scenarios(ensembles))
}

/// Reads outcome files (`day, scenario, metric, h01..`), one set per day.
pub fn read_outcomes<F: Scalar, R: Read>(
    reader: R,
    source: &str,
    n_hours: usize,
) -> Result<BTreeMap<NaiveDate, EdOutcomes<F>>> {
    let rows = read_wide::<F, _>(reader, source, &["day", "scenario", "metric"], n_hours)?;
    let mut days: BTreeMap<NaiveDate, DayGroup<OutcomeMetric, F>> = BTreeMap::new();
    for row in rows {
        let day = parse_day(source, row.line, &row.keys[0])?;
        let scenario = parse_scenario(source, row.line, &row.keys[1])?;
        let metric: OutcomeMetric = row.keys[2]
            .parse()
            .map_err(|_| parse_err(source, row.line, format!("unknown outcome metric `{}`", row.keys[2])))?;
        let group = days.entry(day).or_insert_with(DayGroup::new);
        if !group.push(metric, row.line, scenario, row.values) {
            return Err(parse_err(
                source,
                row.line,
                format!("duplicate row for {day}, scenario {scenario}, {metric}"),
            ));
        }
    }
    let mut out = BTreeMap::new();
    for (day, group) in days {
        let n = group.scenario_count(source, day, |m| m.to_string())?;
        let mut o = EdOutcomes::new(day, n, n_hours);
        for m in &group.order {
            let values = group.series[m].1.values().flatten().copied().collect();
            o.insert(*m, OutcomeMatrix::new(n, n_hours, values)?)?;
        }
        out.insert(day, o);
    }
    Ok(out)
}

pub fn load_outcomes<F: Scalar>(path: impl AsRef<Path>) -> Result<BTreeMap<NaiveDate, EdOutcomes<F>>> {
    load_outcomes_with_hours(path, DEFAULT_HOURS)
}

pub fn load_outcomes_with_hours<F: Scalar>(
    path: impl AsRef<Path>,
    n_hours: usize,
) -> Result<BTreeMap<NaiveDate, EdOutcomes<F>>> {
    let path = path.as_ref();
    read_outcomes(open(path)?, &path.display().to_string(), n_hours)
}

pub fn render_outcomes<'a, F: Scalar>(outcomes: impl IntoIterator<Item = &'a EdOutcomes<F>>) -> String {
    let mut all: Vec<&EdOutcomes<F>> = outcomes.into_iter().collect();
    all.sort_by_key(|o| o.day);
    let n_hours = all.first().map_or(DEFAULT_HOURS, |o| o.n_hours());
    let mut out = header(&["day", "scenario", "metric"], n_hours);
    for o in all {
        for (metric, x) in o.metrics() {
            for i in 0..x.n_scenarios() {
                let _ = write!(out, "{},{i},{metric}", o.day);
                for v in x.row(i) {
                    let _ = write!(out, ",{v}");
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_outcomes<'a, F: Scalar>(
    path: impl AsRef<Path>,
    outcomes: impl IntoIterator<Item = &'a EdOutcomes<F>>,
) -> Result<()> {
    write_text(path.as_ref(), &render_outcomes(outcomes))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// `.csv` means CSV; anything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DayReport<F> {
    pub day: NaiveDate,
    pub selection: SelectionSet<F>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<DayEvaluation>,
}

/// Selections for every day, with evaluation and a per-metric summary when
/// outcomes were supplied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report<F> {
    pub config: PipelineConfig,
    pub days: Vec<DayReport<F>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Vec<SummaryRow>>,
}

pub fn render_report_json<F: Scalar + Serialize>(report: &Report<F>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{:.2}", 100.0 * x))
}

/// Selection-only reports list `day,rank,scenario,score`; evaluated reports
/// give a statistic × column grid with accuracies in percent.
pub fn render_report_csv<F: Scalar>(report: &Report<F>) -> String {
    let mut out = String::new();
    match &report.summary {
        None => {
            out.push_str("day,rank,scenario,score\n");
            for d in &report.days {
                for (rank, (i, s)) in d.selection.indices.iter().zip(&d.selection.scores).enumerate() {
                    let _ = writeln!(out, "{},{},{i},{s}", d.day, rank + 1);
                }
            }
        }
        Some(rows) => {
            out.push_str("statistic");
            for r in rows {
                out.push(',');
                out.push_str(&r.column);
            }
            out.push('\n');
            let stat_rows: [(&str, fn(&Stats) -> Option<f64>, bool); 8] = [
                ("Min.", |s| s.min, false),
                ("Median", |s| s.median, false),
                ("Avg.", |s| s.avg, false),
                ("Max.", |s| s.max, false),
                ("Mag. Min.", |s| s.min, true),
                ("Mag. Median", |s| s.median, true),
                ("Mag. Avg.", |s| s.avg, true),
                ("Mag. Max.", |s| s.max, true),
            ];
            for (name, get, magnitude) in stat_rows {
                out.push_str(name);
                for r in rows {
                    out.push(',');
                    out.push_str(&pct(get(if magnitude { &r.magnitude } else { &r.count })));
                }
                out.push('\n');
            }
            let totals: [(&str, fn(&SummaryRow) -> String); 3] = [
                ("Captured", |r| format!("{:.3}", r.captured_total)),
                ("Total", |r| format!("{:.3}", r.magnitude_total)),
                ("Pooled", |r| pct(r.pooled_accuracy())),
            ];
            for (name, get) in totals {
                out.push_str(name);
                for r in rows {
                    out.push(',');
                    out.push_str(&get(r));
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_report<F: Scalar + Serialize>(
    path: impl AsRef<Path>,
    report: &Report<F>,
    format: ReportFormat,
) -> Result<()> {
    let text = match format {
        ReportFormat::Json => render_report_json(report)?,
        ReportFormat::Csv => render_report_csv(report),
    };
    write_text(path.as_ref(), &text)
}

/// `scenario,score,outlying_rank` rows, rank 1 = most outlying.
pub fn render_depth_csv<F: Scalar>(result: &DepthResult<F>) -> String {
    let rank = result.outlyingness_rank();
    let mut out = format!("scenario,{},outlying_rank\n", result.metric);
    for (i, s) in result.scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{s},{}", rank[i] + 1);
    }
    out
}

pub fn write_depth<F: Scalar + Serialize>(path: impl AsRef<Path>, result: &DepthResult<F>) -> Result<()> {
    let path = path.as_ref();
    let text = match ReportFormat::from_path(path) {
        ReportFormat::Csv => render_depth_csv(result),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(result)?;
            s.push('\n');
            s
        }
    };
    write_text(path, &text)
}
