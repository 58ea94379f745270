//! `depthscreen`: depth scores, screening and evaluation from the command line.
//!
//! Exit codes: 0 on success, 1 for bad input, 2 when a configuration cannot
//! be satisfied by the data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use depthscreen::depth::{self, Bandwidth, DepthParams, Metric};
use depthscreen::evaluation::{evaluate_selection, summarize_days, sweep_metrics, EdOutcomes};
use depthscreen::io::{self, DayReport, Report, ReportFormat};
use depthscreen::screening::{run_pipeline, PipelineConfig};
use depthscreen::synthetic::{synth_outcomes, SynthConfig};
use depthscreen::{Facet, ScenarioEnsemble};

#[derive(Parser)]
#[command(
    name = "depthscreen",
    version,
    about = "Functional-depth screening of day-ahead scenarios"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Hour columns per row in scenario and outcome files.
    #[arg(long, global = true, default_value_t = io::DEFAULT_HOURS)]
    hours: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Per-scenario depth scores of one facet.
    Depth {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value = "grid")]
        entity: String,
        #[arg(long, default_value = "net_load")]
        facet: Facet,
        #[arg(long)]
        metric: Metric,
        /// Day to score when the file holds several.
        #[arg(long)]
        day: Option<NaiveDate>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random projections for RTD.
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Fixed HMD bandwidth (default: automatic).
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        one_sided: bool,
        /// `.csv` for a table, anything else JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a screening pipeline on every day.
    Screen {
        #[arg(long)]
        scenarios: PathBuf,
        /// Preset name or path to a JSON pipeline configuration.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output file's extension.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Screen and score against dispatch outcomes.
    Eval {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Generate a synthetic ensemble and, optionally, outcomes.
    Synth {
        /// JSON generator specification.
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the specification.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e
                .chain()
                .filter_map(|c| c.downcast_ref::<depthscreen::Error>())
                .any(depthscreen::Error::is_infeasible);
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Depth {
            scenarios,
            entity,
            facet,
            metric,
            day,
            seed,
            k,
            bandwidth,
            one_sided,
            out,
        } => {
            let days = io::load_scenarios_with_hours::<f64>(&scenarios, cli.hours)?;
            let ens = pick_day(&days, day)?;
            let params = DepthParams {
                seed,
                k,
                bandwidth: bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
                one_sided,
                ..DepthParams::default()
            };
            let fm = ens.facet(&entity, facet)?;
            let result = depth::compute(fm, metric, &params)?;
            io::write_depth(&out, &result)?;
        }
        Command::Screen {
            scenarios,
            config,
            out,
            format,
        } => {
            let cfg = load_config(&config)?;
            let days = io::load_scenarios_with_hours::<f64>(&scenarios, cli.hours)?;
            let reports: Vec<DayReport<f64>> = days
                .par_iter()
                .map(|(day, ens)| {
                    let selection = run_pipeline(ens, &cfg).with_context(|| format!("screening {day}"))?;
                    Ok(DayReport {
                        day: *day,
                        selection,
                        evaluation: None,
                    })
                })
                .collect::<Result<_>>()?;
            let report = Report {
                config: cfg,
                days: reports,
                summary: None,
            };
            io::write_report(&out, &report, resolve_format(format, &out))?;
        }
        Command::Eval {
            scenarios,
            outcomes,
            config,
            out,
            format,
        } => {
            let cfg = load_config(&config)?;
            let days = io::load_scenarios_with_hours::<f64>(&scenarios, cli.hours)?;
            let truth = io::load_outcomes_with_hours::<f64>(&outcomes, cli.hours)?;
            let per_day: Vec<(DayReport<f64>, Vec<_>)> = days
                .par_iter()
                .map(|(day, ens)| {
                    let o = outcomes_for(&truth, *day, ens)?;
                    let selection = run_pipeline(ens, &cfg).with_context(|| format!("screening {day}"))?;
                    let evaluation =
                        evaluate_selection(&selection, o, None).with_context(|| format!("scoring {day}"))?;
                    let sweep = sweep_metrics(ens, o, &cfg, None).with_context(|| format!("metric sweep on {day}"))?;
                    Ok((
                        DayReport {
                            day: *day,
                            selection,
                            evaluation: Some(evaluation),
                        },
                        sweep,
                    ))
                })
                .collect::<Result<_>>()?;
            let scores: Vec<_> = per_day.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
            let report = Report {
                config: cfg,
                days: per_day.into_iter().map(|(d, _)| d).collect(),
                summary: Some(summarize_days(&scores)),
            };
            io::write_report(&out, &report, resolve_format(format, &out))?;
        }
        Command::Synth {
            spec,
            seed,
            out,
            outcomes,
        } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut synth: SynthConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            if let Some(seed) = seed {
                synth.generator.seed = seed;
            }
            let ens = synth.build::<f64>()?;
            io::write_scenarios(&out, [&ens])?;
            if let Some(path) = outcomes {
                let o = synth_outcomes(&ens, &synth.links(), synth.generator.seed)?;
                io::write_outcomes(&path, [&o])?;
            }
        }
    }
    Ok(())
}

fn resolve_format(format: Option<Format>, out: &Path) -> ReportFormat {
    match format {
        Some(Format::Json) => ReportFormat::Json,
        Some(Format::Csv) => ReportFormat::Csv,
        None => ReportFormat::from_path(out),
    }
}

/// A preset name, or a JSON file when the argument names an existing file.
fn load_config(arg: &str) -> Result<PipelineConfig> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing pipeline configuration {arg}"));
    }
    Ok(PipelineConfig::preset(arg)?)
}

fn pick_day<'a>(
    days: &'a BTreeMap<NaiveDate, ScenarioEnsemble<f64>>,
    day: Option<NaiveDate>,
) -> Result<&'a ScenarioEnsemble<f64>> {
    match day {
        Some(d) => days.get(&d).ok_or_else(|| anyhow!("no scenarios for {d}")),
        None if days.len() == 1 => Ok(days.values().next().expect("one day")),
        None if days.is_empty() => bail!("scenario file holds no rows"),
        None => bail!("scenario file holds {} days; pick one with --day", days.len()),
    }
}

fn outcomes_for<'a>(
    truth: &'a BTreeMap<NaiveDate, EdOutcomes<f64>>,
    day: NaiveDate,
    ens: &ScenarioEnsemble<f64>,
) -> Result<&'a EdOutcomes<f64>> {
    let o = truth.get(&day).ok_or_else(|| anyhow!("no outcomes for {day}"))?;
    if o.n_scenarios() != ens.n_scenarios() {
        bail!(
            "{day}: outcomes cover {} scenarios, ensemble has {}",
            o.n_scenarios(),
            ens.n_scenarios()
        );
    }
    Ok(o)
}
