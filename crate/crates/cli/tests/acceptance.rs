//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! criterion fails, unless that criterion is listed in `KNOWN_FAILURES`;
//! set `ACCEPTANCE_STRICT=1` to fail on those as well.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use depthscreen::depth::{self, random_directions, random_tukey_depth, DepthParams, Metric};
use depthscreen::ensemble::auc;
use depthscreen::evaluation::{
    count_accuracy, evaluate_selection, kendall_tau, magnitude, magnitude_accuracy, Magnitude,
};
use depthscreen::io;
use depthscreen::screening::{
    adaptive_n2, run_pipeline, PipelineConfig, ADAPTIVE_N2_BASE, ADAPTIVE_PEAK_THRESHOLD_MWH,
};
use depthscreen::synthetic::oracle::oracle_depth;
use depthscreen::synthetic::{
    generate_ensemble, plant_outliers, synth_outcomes, EntitySpec, FacetSpec, GeneratorSpec, MeanProfile, OutcomeLink,
    OutlierKind, OutlierPlan, PlantedOutlier,
};
use depthscreen::{Facet, FacetMatrix64, OutcomeMatrix, OutcomeMetric, ScenarioEnsemble64, TiePolicy};

/// Criteria allowed to fail without failing the run.
const KNOWN_FAILURES: &[u32] = &[4];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "oracle equivalence", oracle_equivalence),
        (2, "golden micro-cases", golden_cases),
        (3, "invariance suite", invariances),
        (4, "planted magnitude outliers", planted_magnitude),
        (5, "shape outliers vs AUC", shape_vs_auc),
        (6, "pipeline on synthetic labels", pipeline_end_to_end),
        (7, "adaptive selection size", adaptive_size),
        (8, "accuracy metrics", accuracy_metrics),
        (9, "determinism", determinism),
        (10, "performance", performance),
    ];
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1");
    let mut unexpected = 0;
    let mut passed = 0;
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} [{:.2?}]: {}", t0.elapsed(), v.detail);
        if v.pass {
            passed += 1;
        } else if strict || !KNOWN_FAILURES.contains(&id) {
            unexpected += 1;
        }
    }
    println!("{passed}/10 criteria passed");
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn matrix(rows: &[Vec<f64>]) -> FacetMatrix64 {
    FacetMatrix64::from_f64_rows(rows).unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, t: usize, ints: Option<i32>) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..t)
                .map(|_| match ints {
                    Some(k) => f64::from(rng.random_range(0..k)),
                    None => rng.random_range(-100.0..100.0),
                })
                .collect()
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("{elapsed:.2?} of {limit:?} allowed"))
}

fn oracle_equivalence() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(3..=16);
        let t = rng.random_range(1..=6);
        let ints = (case % 2 == 1).then_some(4);
        let fm = matrix(&random_rows(&mut rng, n, t, ints));
        let p = DepthParams {
            seed: case,
            ..DepthParams::default()
        };
        for metric in Metric::ALL {
            let fast = depth::compute(&fm, metric, &p).unwrap().scores;
            let slow = oracle_depth(&fm, metric, &p, None).unwrap().scores;
            let ok = match metric {
                Metric::Lid | Metric::Hmd | Metric::Dq => fast.iter().zip(&slow).all(|(&a, &b)| {
                    worst = worst.max(rel_err(a, b));
                    rel_err(a, b) <= 1e-10
                }),
                _ => fast == slow,
            };
            if !ok {
                mismatches.push(format!("case {case} {metric}"));
            }
        }
        let dirs = random_directions::<f64>(rng.random_range(1..10), t, case);
        let fast = random_tukey_depth(&fm, 0, 0, Some(&dirs), TiePolicy::OrdinalByIndex)
            .unwrap()
            .scores;
        let slow = oracle_depth(&fm, Metric::Rtd, &DepthParams::default(), Some(&dirs))
            .unwrap()
            .scores;
        if fast != slow {
            mismatches.push(format!("case {case} RTD injected"));
        }
    }
    let (fast_enough, timing) = within(t0.elapsed(), Duration::from_secs(10));
    verdict(
        mismatches.is_empty() && fast_enough,
        format!(
            "200 instances x 8 metrics, {} mismatches {:?}, worst relative error {worst:.1e}, {timing}",
            mismatches.len(),
            mismatches.iter().take(5).collect::<Vec<_>>()
        ),
    )
}

fn golden_cases() -> Verdict {
    let fm = matrix(&[vec![0.0; 3], vec![1.0; 3], vec![2.0; 3]]);
    let p = DepthParams::default();
    let third = 1.0 / 3.0;
    let cases: [(Metric, [f64; 3]); 5] = [
        (Metric::Id, [5.0 / 6.0, 5.0 / 6.0, 0.5]),
        (Metric::Mbd, [0.0, third, 0.0]),
        (Metric::Exd, [2.0 / 3.0, 1.0, 2.0 / 3.0]),
        (Metric::Erld, [2.0 / 3.0, 1.0, 2.0 / 3.0]),
        (Metric::Lid, [0.5, 0.6, 0.5]),
    ];
    let mut failures = Vec::new();
    for (metric, want) in cases {
        let slow = oracle_depth(&fm, metric, &p, None).unwrap().scores;
        let fast = depth::compute(&fm, metric, &p).unwrap().scores;
        // LID evaluates 1 / (1 + 2/3), one ulp above 0.6 in binary
        let agrees = |got: &[f64]| {
            got.iter().zip(want).all(|(&g, w)| {
                if metric == Metric::Lid {
                    (g - w).abs() <= f64::EPSILON * w
                } else {
                    g == w
                }
            })
        };
        if !agrees(&slow) {
            failures.push(format!("{metric} oracle {slow:?}"));
        } else if fast != slow {
            failures.push(format!("{metric} {fast:?}"));
        }
    }
    let ones = vec![vec![1.0; 3]];
    let slow = oracle_depth(&fm, Metric::Rtd, &p, Some(&ones)).unwrap().scores;
    let fast = random_tukey_depth(&fm, 0, 0, Some(&ones), TiePolicy::OrdinalByIndex)
        .unwrap()
        .scores;
    if slow != [third, 1.0, third] || fast != slow {
        failures.push(format!("RTD {fast:?}"));
    }
    verdict(
        failures.is_empty(),
        format!("6 metrics on three constant curves, failures {failures:?}"),
    )
}

fn invariances() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = DepthParams::default();
    let mut violations = [0usize; 4];
    for trial in 0..100 {
        let n = rng.random_range(3..=20);
        let t = rng.random_range(1..=8);
        let rows = random_rows(&mut rng, n, t, Some(30));
        let fm = matrix(&rows);

        let coefs: Vec<(f64, f64, f64)> = (0..t)
            .map(|_| {
                (
                    f64::from(rng.random_range(1..4)),
                    f64::from(rng.random_range(0..5)),
                    f64::from(rng.random_range(-50..50)),
                )
            })
            .collect();
        let warped = fm
            .map_elements(|h, x| {
                let (a, b, c) = coefs[h];
                a * x * x * x + b * x + c
            })
            .unwrap();
        for metric in [Metric::Id, Metric::Mbd, Metric::Exd, Metric::Erld] {
            for tie_policy in [TiePolicy::OrdinalByIndex, TiePolicy::Midrank] {
                let q = DepthParams {
                    tie_policy,
                    ..p.clone()
                };
                if depth::compute(&fm, metric, &q).unwrap().scores
                    != depth::compute(&warped, metric, &q).unwrap().scores
                {
                    violations[0] += 1;
                }
            }
        }

        let shift = f64::from(rng.random_range(-1000..1000));
        let scale = 2f64.powi(rng.random_range(-4..5));
        let moved = fm.map_elements(|_, x| (x + shift) * scale).unwrap();
        for metric in [Metric::Lid, Metric::Hmd] {
            if depth::compute(&fm, metric, &p).unwrap().outlying_order
                != depth::compute(&moved, metric, &p).unwrap().outlying_order
            {
                violations[1] += 1;
            }
        }

        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let continuous = random_rows(&mut rng, n, t, None);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| continuous[i].clone()).collect();
        let tied_shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let midrank = DepthParams {
            tie_policy: TiePolicy::Midrank,
            ..p.clone()
        };
        for metric in Metric::ALL {
            let a = depth::compute(&matrix(&continuous), metric, &p).unwrap().scores;
            let b = depth::compute(&matrix(&shuffled), metric, &p).unwrap().scores;
            let exact = metric.is_rank_based() || metric == Metric::Rtd;
            if perm.iter().enumerate().any(|(k, &i)| {
                if exact {
                    b[k] != a[i]
                } else {
                    rel_err(b[k], a[i]) > 1e-12
                }
            }) {
                violations[2] += 1;
            }
            if exact {
                let a = depth::compute(&fm, metric, &midrank).unwrap().scores;
                let b = depth::compute(&matrix(&tied_shuffled), metric, &midrank)
                    .unwrap()
                    .scores;
                if perm.iter().enumerate().any(|(k, &i)| b[k] != a[i]) {
                    violations[2] += 1;
                }
            }
        }

        let k = rng.random_range(1..30);
        let dirs = random_directions::<f64>(k + 30, t, trial);
        let few = random_tukey_depth(&fm, 0, 0, Some(&dirs[..k]), TiePolicy::OrdinalByIndex)
            .unwrap()
            .scores;
        let many = random_tukey_depth(&fm, k + 30, trial, None, TiePolicy::OrdinalByIndex)
            .unwrap()
            .scores;
        if many.iter().zip(&few).any(|(m, f)| m > f) {
            violations[3] += 1;
        }
    }
    verdict(
        violations.iter().all(|&v| v == 0),
        format!(
            "100 trials each; violations: monotone transforms {}, shift/scale {}, permutation {}, nested directions {}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 2, 14).unwrap()
}

fn grid_load_only(n: usize, seed: u64, mean: MeanProfile, sigma: f64, ell: f64) -> GeneratorSpec {
    GeneratorSpec {
        n_scenarios: n,
        n_hours: 24,
        day: day(),
        seed,
        rho: 0.0,
        zone_correlation: 0.0,
        entities: vec![EntitySpec {
            label: "grid".into(),
            load: Some(FacetSpec::new(mean, sigma, ell)),
            solar: None,
            wind: None,
        }],
    }
}

fn planted_magnitude() -> Verdict {
    let t0 = Instant::now();
    let sigma = 100.0;
    let metrics = [Metric::Lid, Metric::Hmd, Metric::Exd, Metric::Erld];
    let mut good_seeds = [0usize; 4];
    let mut fewest = [25usize; 4];
    for seed in 0..100 {
        let mean = MeanProfile::Sinusoid {
            level: 50_000.0,
            amplitude: 1_000.0,
            peak_hour: 17.0,
        };
        let ens: ScenarioEnsemble64 = generate_ensemble(&grid_load_only(1000, seed, mean, sigma, 3.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let planted = sample(&mut rng, 1000, 25).into_vec();
        let plan = OutlierPlan {
            entity: "grid".into(),
            facet: Facet::Load,
            sigma,
            outliers: planted
                .iter()
                .map(|&index| PlantedOutlier {
                    index,
                    kind: OutlierKind::MagnitudeShift { delta: 3.0 },
                })
                .collect(),
        };
        let ens = plant_outliers(ens, &plan).unwrap();
        let fm = ens.facet("grid", Facet::Load).unwrap();
        for (k, &metric) in metrics.iter().enumerate() {
            let r = depth::compute(fm, metric, &DepthParams::default()).unwrap();
            let bottom: HashSet<usize> = r.most_outlying(50).iter().copied().collect();
            let hits = planted.iter().filter(|i| bottom.contains(i)).count();
            fewest[k] = fewest[k].min(hits);
            if hits >= 24 {
                good_seeds[k] += 1;
            }
        }
    }
    let (fast_enough, timing) = within(t0.elapsed(), Duration::from_secs(120));
    let per_metric: Vec<String> = metrics
        .iter()
        .zip(good_seeds.iter().zip(fewest))
        .map(|(m, (g, f))| format!("{m} {g}/100 (min {f}/25)"))
        .collect();
    verdict(
        good_seeds.iter().all(|&g| g >= 95) && fast_enough,
        format!("seeds with >=24/25 in bottom 50: {}; {timing}", per_metric.join(", ")),
    )
}

fn descending_positions(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut pos = vec![0; values.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    pos
}

fn shape_vs_auc() -> Verdict {
    let (n, sigma) = (1000, 100.0);
    let middle = (n * 3 / 10)..(n * 7 / 10);
    let mut good = 0;
    let mut misses = Vec::new();
    for seed in 0..100 {
        let mean = MeanProfile::Sinusoid {
            level: 50_000.0,
            amplitude: 10.0 * sigma,
            peak_hour: 17.0,
        };
        let ens: ScenarioEnsemble64 = generate_ensemble(&grid_load_only(n, seed, mean, sigma, 3.0)).unwrap();
        // shift scenarios whose daily total is typical, so AUC alone cannot single them out
        let pos = descending_positions(&auc(ens.facet("grid", Facet::Load).unwrap()));
        let typical: Vec<usize> = (0..n).filter(|&i| middle.contains(&pos[i])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<usize> = sample(&mut rng, typical.len(), 10)
            .into_iter()
            .map(|j| typical[j])
            .collect();
        let plan = OutlierPlan {
            entity: "grid".into(),
            facet: Facet::Load,
            sigma,
            outliers: targets
                .iter()
                .map(|&index| PlantedOutlier {
                    index,
                    kind: OutlierKind::ShapeTimewarp { hours: 12 },
                })
                .collect(),
        };
        let ens = plant_outliers(ens, &plan).unwrap();
        let fm = ens.facet("grid", Facet::Load).unwrap();
        let pos = descending_positions(&auc(fm));
        let auc_typical = targets.iter().all(|&i| middle.contains(&pos[i]));
        let mut deepest = 0;
        for metric in [Metric::Exd, Metric::Erld] {
            let rank = depth::compute(fm, metric, &DepthParams::default())
                .unwrap()
                .outlyingness_rank();
            deepest = deepest.max(targets.iter().map(|&i| rank[i]).max().unwrap());
        }
        if auc_typical && deepest < n / 10 {
            good += 1;
        } else {
            misses.push((seed, auc_typical, deepest));
        }
    }
    verdict(
        good >= 90,
        format!("{good}/100 seeds with all 10 shifted curves AUC-typical and in the top 100 by EXD and ERLD; misses {misses:?}"),
    )
}

fn zone(label: &str, peak_hour: f64) -> EntitySpec {
    let flat = |level: f64| {
        FacetSpec::new(
            MeanProfile::Sinusoid {
                level,
                amplitude: 0.0,
                peak_hour: 0.0,
            },
            360.0,
            3.0,
        )
    };
    EntitySpec {
        label: label.into(),
        load: Some(FacetSpec::new(
            MeanProfile::Sinusoid {
                level: 12_000.0,
                amplitude: 2_500.0,
                peak_hour,
            },
            600.0,
            3.0,
        )),
        solar: Some(flat(1_200.0)),
        wind: Some(flat(1_200.0)),
    }
}

fn four_zones(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        n_scenarios: 1000,
        n_hours: 24,
        day: NaiveDate::from_ymd_opt(2018, 7, 2).unwrap(),
        seed,
        rho: 0.0,
        zone_correlation: 0.3,
        entities: vec![zone("NC", 17.0), zone("NE", 16.0), zone("SC", 18.0), zone("FW", 15.0)],
    }
}

/// Two-sided exact sign test.
fn sign_test(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    let k = wins.min(losses);
    let mut tail = 0.0;
    let mut c = 1.0f64;
    for i in 0..=k {
        if i > 0 {
            c = c * (n - i + 1) as f64 / i as f64;
        }
        tail += c;
    }
    (2.0 * tail / 2f64.powi(n as i32)).min(1.0)
}

fn pipeline_end_to_end() -> Verdict {
    let zonal = PipelineConfig::preset("ls-zonal").unwrap();
    let grid_only = PipelineConfig {
        zonal_facet: None,
        ..zonal.clone()
    };
    let shed = vec![OutcomeLink::ZonalTrigger {
        metric: OutcomeMetric::LoadShed,
        zone: "NC".into(),
        quantile: 0.9,
        grid_quantile: None,
        scale: 1.0,
    }];
    let cost = vec![OutcomeLink::Auc {
        metric: OutcomeMetric::Cost,
        entity: "grid".into(),
        scale: 1.0,
        offset: 0.0,
        noise: 0.0,
    }];
    let auc_only = PipelineConfig::preset("cost").unwrap();
    let (mut wins, mut losses) = (0u64, 0u64);
    let (mut sum_zonal, mut sum_grid, mut sum_count, mut sum_mag) = (0.0, 0.0, 0.0, 0.0);
    for seed in 0..50 {
        let ens: ScenarioEnsemble64 = generate_ensemble(&four_zones(seed)).unwrap();
        let o = synth_outcomes(&ens, &shed, seed).unwrap();
        let score = |cfg: &PipelineConfig| {
            let sel = run_pipeline(&ens, cfg).unwrap();
            evaluate_selection(&sel, &o, None).unwrap().magnitude_accuracy.unwrap()
        };
        let (z, g) = (score(&zonal), score(&grid_only));
        sum_zonal += z;
        sum_grid += g;
        if z > g {
            wins += 1;
        } else if z < g {
            losses += 1;
        }

        let o = synth_outcomes(&ens, &cost, seed).unwrap();
        let eval = evaluate_selection(&run_pipeline(&ens, &auc_only).unwrap(), &o, None).unwrap();
        sum_count += eval.count_accuracy.unwrap();
        sum_mag += eval.magnitude_accuracy.unwrap();
    }
    let p = sign_test(wins, losses);
    let (mz, mg, mc, mm) = (sum_zonal / 50.0, sum_grid / 50.0, sum_count / 50.0, sum_mag / 50.0);
    verdict(
        mz > mg && p < 0.01 && mc >= 0.99 && mm >= 0.99,
        format!(
            "zonal trigger: grid+zonal {mz:.3} vs grid-only {mg:.3} mean magnitude accuracy, {wins} wins / {losses} losses, sign test p={p:.1e}; \
             AUC cost link: count accuracy {mc:.3}, magnitude accuracy {mm:.3}"
        ),
    )
}

/// An ensemble whose grid net load equals `load`, with the given per-scenario peaks.
fn peaked(peaks: &[f64]) -> ScenarioEnsemble64 {
    let t = 4;
    let load: Vec<Vec<f64>> = peaks
        .iter()
        .enumerate()
        .map(|(i, &p)| vec![0.5 * p, p, 0.25 * p + i as f64, 0.5 * p])
        .collect();
    let zeros = vec![vec![0.0; t]; peaks.len()];
    let fm = |rows: &[Vec<f64>], facet| FacetMatrix64::from_rows("grid", facet, rows).unwrap();
    ScenarioEnsemble64::from_matrices(
        day(),
        vec![
            fm(&load, Facet::Load),
            fm(&zeros, Facet::Solar),
            fm(&zeros, Facet::Wind),
        ],
    )
    .unwrap()
}

fn adaptive_size() -> Verdict {
    let mut failures = Vec::new();
    if ADAPTIVE_N2_BASE != 100 || ADAPTIVE_PEAK_THRESHOLD_MWH != 62_500.0 {
        failures.push("constants".to_string());
    }
    let thr = ADAPTIVE_PEAK_THRESHOLD_MWH;
    let crafted: [(Vec<f64>, usize); 4] = [
        // (peaks, expected n2)
        ([vec![thr - 1.0; 150], vec![thr + 1.0; 30]].concat(), 130),
        ([vec![thr; 20], vec![thr - 1e-6; 200]].concat(), 120),
        (vec![70_000.0; 120], 120),
        (vec![10_000.0; 50], 50),
    ];
    for (peaks, want) in &crafted {
        let ens = peaked(peaks);
        let got = adaptive_n2(ens.facet("grid", Facet::NetLoad).unwrap(), ADAPTIVE_N2_BASE, thr);
        if got != *want {
            failures.push(format!("{} scenarios: n2 {got} != {want}", peaks.len()));
        }
    }

    let peaks: Vec<f64> = (0..300)
        .map(|i| {
            if i % 6 == 0 {
                thr + i as f64
            } else {
                40_000.0 + i as f64
            }
        })
        .collect();
    let ens = peaked(&peaks);
    let cfg = PipelineConfig {
        n1: Some(120),
        ..PipelineConfig::preset("ls").unwrap()
    };
    let sel = run_pipeline(&ens, &cfg).unwrap();
    let by_auc = descending_positions(&auc(ens.facet("grid", Facet::NetLoad).unwrap()));
    let mut top: Vec<usize> = (0..300).filter(|&i| by_auc[i] < 150).collect();
    top.sort_by_key(|&i| by_auc[i]);
    if !(sel.stage_log.n2 == 150 && sel.stage_log.depth_bypassed && sel.indices == top) {
        failures.push(format!(
            "bypass: n2 {} bypassed {}",
            sel.stage_log.n2, sel.stage_log.depth_bypassed
        ));
    }
    let cfg = PipelineConfig { n1: Some(200), ..cfg };
    let sel = run_pipeline(&ens, &cfg).unwrap();
    if !(sel.stage_log.n2 == 150 && !sel.stage_log.depth_bypassed && sel.indices.len() == 150) {
        failures.push("depth path".into());
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} crafted peak vectors, bypass and depth paths; failures {failures:?}",
            crafted.len()
        ),
    )
}

fn tau_by_pairs(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut s, mut ties_a, mut ties_b, mut pairs) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let da = a[i].partial_cmp(&a[j]).unwrap() as i64;
            let db = b[i].partial_cmp(&b[j]).unwrap() as i64;
            s += da * db;
            ties_a += i64::from(da == 0);
            ties_b += i64::from(db == 0);
        }
    }
    let denom = ((pairs - ties_a) as f64) * ((pairs - ties_b) as f64);
    (denom > 0.0).then(|| s as f64 / denom.sqrt())
}

fn accuracy_metrics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad_sets = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
            (0..rng.random_range(0..n)).map(|_| rng.random_range(0..n)).collect()
        };
        let (e, o) = (draw(&mut rng), draw(&mut rng));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..4)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            0.0
                        } else {
                            rng.random_range(0.0..100.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let x = OutcomeMatrix::from_rows(&rows).unwrap();
        let es: BTreeSet<usize> = e.iter().copied().collect();
        let hit: Vec<usize> = es.iter().copied().filter(|i| o.contains(i)).collect();
        let count = (!es.is_empty()).then(|| hit.len() as f64 / es.len() as f64);
        let totals = x.daily_totals();
        let total: f64 = es.iter().map(|&i| totals[i]).sum();
        let captured: f64 = hit.iter().map(|&i| totals[i]).sum();
        let mag = (!es.is_empty() && total > 0.0).then(|| captured / total);
        if count_accuracy(&e, &o) != count
            || magnitude(&e, &o, &x) != (Magnitude { captured, total })
            || magnitude_accuracy(&e, &o, &x) != mag
        {
            bad_sets += 1;
        }
    }
    let mut bad_tau = 0;
    for case in 0..300 {
        let n = rng.random_range(2..=200);
        let levels = if case % 3 == 0 { 1000 } else { rng.random_range(2..20) };
        let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect();
        let b: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels))).collect();
        if kendall_tau(&a, &b) != tau_by_pairs(&a, &b) {
            bad_tau += 1;
        }
    }
    verdict(
        bad_sets == 0 && bad_tau == 0,
        format!("1000 (E, O, X) triples: {bad_sets} mismatches; 300 Kendall cases with N <= 200: {bad_tau} mismatches"),
    )
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_depthscreen"))
}

fn docs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios.csv");
    let outcomes = dir.path().join("outcomes.csv");
    let links = vec![
        OutcomeLink::ZonalTrigger {
            metric: OutcomeMetric::LoadShed,
            zone: "NC".into(),
            quantile: 0.9,
            grid_quantile: Some(0.95),
            scale: 1.0,
        },
        OutcomeLink::Auc {
            metric: OutcomeMetric::ReserveShortfall,
            entity: "grid".into(),
            scale: 0.01,
            offset: -400.0,
            noise: 1.0,
        },
    ];
    let mut days = Vec::new();
    let mut truths = Vec::new();
    for (k, (month, dom)) in [(3u32, 5u32), (7, 2), (11, 20)].into_iter().enumerate() {
        let spec = GeneratorSpec {
            n_scenarios: 700,
            day: NaiveDate::from_ymd_opt(2018, month, dom).unwrap(),
            ..four_zones(100 + k as u64)
        };
        let ens: ScenarioEnsemble64 = generate_ensemble(&spec).unwrap();
        truths.push(synth_outcomes(&ens, &links, k as u64).unwrap());
        days.push(ens);
    }
    io::write_scenarios(&scenarios, &days).unwrap();
    io::write_outcomes(&outcomes, &truths).unwrap();

    let mut failures = Vec::new();
    let mut runs = 0;
    for config in [docs().join("presets/ls-zonal.json"), PathBuf::from("rs")] {
        for ext in ["json", "csv"] {
            let mut reports = Vec::new();
            let settings: [Option<&str>; 8] = [None, None, None, None, None, Some("1"), Some("4"), Some("8")];
            for (r, threads) in settings.iter().enumerate() {
                let out = dir.path().join(format!("report{r}.{ext}"));
                let mut cmd = cli();
                cmd.arg("eval")
                    .arg("--scenarios")
                    .arg(&scenarios)
                    .arg("--outcomes")
                    .arg(&outcomes)
                    .arg("--config")
                    .arg(&config)
                    .arg("--out")
                    .arg(&out);
                if let Some(t) = threads {
                    cmd.args(["--threads", t]);
                }
                let status = cmd.status().unwrap();
                runs += 1;
                if !status.success() {
                    failures.push(format!("{} exited with {status}", config.display()));
                    continue;
                }
                reports.push(std::fs::read(&out).unwrap());
            }
            if reports.is_empty() || reports.iter().any(|r| r != &reports[0]) {
                failures.push(format!("{} .{ext} reports differ", config.display()));
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!("{runs} eval runs (5 default, threads 1/4/8; two configs; JSON and CSV), failures {failures:?}"),
    )
}

fn performance() -> Verdict {
    let zones = ["FW", "NC", "NE", "SC", "WE", "ES", "CE", "SO"];
    let spec = GeneratorSpec {
        n_scenarios: 1000,
        n_hours: 24,
        day: day(),
        seed: 10,
        rho: 0.3,
        zone_correlation: 0.4,
        entities: zones
            .iter()
            .enumerate()
            .map(|(k, z)| zone(z, 13.0 + k as f64))
            .collect(),
    };
    let ens: ScenarioEnsemble64 = generate_ensemble(&spec).unwrap();
    let t0 = Instant::now();
    let mut results = 0;
    for entity in std::iter::once("grid").chain(zones) {
        for facet in [Facet::Load, Facet::Solar, Facet::Wind, Facet::Vre, Facet::NetLoad] {
            let fm = ens.facet(entity, facet).unwrap();
            results += depth::compute_all(fm, &DepthParams::default()).unwrap().len();
        }
    }
    let (ok, timing) = within(t0.elapsed(), Duration::from_secs(5));
    verdict(
        ok && results == 360,
        format!("{results} depth results (45 facets x 8 metrics, N=1000, T=24), {timing}"),
    )
}
