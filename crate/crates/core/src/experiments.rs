//! Seeded experiment drivers behind the command-line tool.
//!
//! Every random draw descends from `master_seed` through [`derive_seed`]:
//! run `r` uses `derive_seed(master_seed, r)` and its `k`-th cascade uses
//! `derive_seed(run_seed, k)`. Records store the seeds and sources, so any
//! single cascade can be replayed with [`simulate_fpp`] alone. Wall-clock
//! timings go to a separate `timings.json` so that reports stay byte-for-byte
//! reproducible.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind, HardnessConfig, SourceSpec, FIGURE3_DELTA};
use crate::error::{Error, Result};
use crate::estimator::{
    derivative_series, estimate_highdeg, write_derivative_csv, EstimatorConfig, HighDegEstimate,
};
use crate::graph::{validate_class, GenSpec, Generated, Graph};
use crate::hardness::{
    check_event_e, detection_report, likelihood_ratio_sup_bound, quantile, sample_mu,
    tensorized_tv_bound, DetectionReport, HardEnsembleSpec, Hypothesis, LeafTraceMatrix,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::{check_event_a, simulate_fpp, CascadeTrace};
use crate::trace_io::{fmt_f64, load_trace, save_trace, trace_file_name};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "CASCADE_SCOPE_THREADS";
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const GRAPH_FILE: &str = "graph.txt";
pub const RECOVERY_CSV: &str = "recovery_sweep.csv";
pub const RECOVERY_HEADER: &str = "K,runs,successes,success_rate";
pub const HARDNESS_CSV: &str = "hardness.csv";
pub const HARDNESS_HEADER: &str = "K,N,L,D,chi2,tv_bound,tv_mc,lr_sup_p99";

/// Wall-clock limit for simulating one figure3 cascade.
pub const FIGURE3_BUDGET_S: u64 = 60;

const SOURCE_STREAM: u64 = 1 << 32;

pub fn figure3_csv_name(run: usize) -> String {
    format!("figure3_{run}.csv")
}

pub fn estimate_csv_name(run: usize) -> String {
    format!("estimate_{run}.csv")
}

/// The instance from the figure: a 5-ary tree of height 8 with one vertex in
/// layer 6 raised to degree 7500.
pub fn figure3_default_graph() -> GenSpec {
    GenSpec::PlantedStarTree {
        branching: 5,
        height: 8,
        layer: 6,
        planted_degree: 7500,
        hubs: 1,
    }
}

/// Runs `f` inside a pool sized by `CASCADE_SCOPE_THREADS` when it is set.
pub fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => {
            let threads: usize = s.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "{THREADS_ENV} must be a positive integer, got {s:?}"
                ))
            })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure3Record {
    pub run: usize,
    pub seed: u64,
    pub source: usize,
    pub planted: Option<usize>,
    pub planted_time: Option<f64>,
    pub planted_deg_hat: Option<f64>,
    /// Grid time where the second-derivative series peaks (earliest on ties).
    pub argmax_time: f64,
    pub peak_value: f64,
    pub within_delta: Option<bool>,
    /// Whether the planted vertex has the largest `deg_hat` of all vertices.
    pub planted_is_max_deg_hat: Option<bool>,
    pub total_time: f64,
    pub rows: usize,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub run: usize,
    pub seed: u64,
    pub sources: Vec<usize>,
    pub trace_seeds: Vec<u64>,
    pub estimated: Vec<usize>,
    pub truth: Vec<usize>,
    pub exact_match: bool,
    /// Entry `k - 1` is whether the first `k` traces alone recover the truth.
    pub prefix_match: Vec<bool>,
    pub prefix_sizes: Vec<usize>,
    pub event_a_ok: Vec<bool>,
    pub max_front_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub k: usize,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardnessRow {
    pub k: usize,
    pub core_size: usize,
    pub path_len: usize,
    pub planted_degree: f64,
    pub reps: usize,
    /// Means over repetitions.
    pub chi2: f64,
    pub chi2_stderr: f64,
    pub tv_bound: f64,
    pub tv_mc: f64,
    pub tv_mc_stderr: f64,
    /// 99th percentile of the sup likelihood-ratio bound over all leaves
    /// and repetitions.
    pub lr_sup_p99: f64,
    pub event_e_freq: f64,
    pub mean_attempts: f64,
    pub reports: Vec<DetectionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub run: usize,
    pub k: usize,
    pub seed: u64,
    pub source: usize,
    pub total_time: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub run: usize,
    pub files: Vec<String>,
    pub estimator: EstimatorConfig,
    pub estimated: Vec<usize>,
    pub truth: Option<Vec<usize>>,
    pub exact_match: Option<bool>,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum Records {
    Figure3(Vec<Figure3Record>),
    RecoverySweep(Vec<RecoveryRecord>),
    HardnessSweep(Vec<HardnessRow>),
    Simulate(Vec<SimulateRecord>),
    Estimate(Vec<EstimateRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ablation: Vec<AblationPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_a_freq: Option<f64>,
    pub records: Records,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub per_run_ms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub timings: Timings,
}

/// Runs the configured experiment and writes its outputs under
/// `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    let outcome = with_thread_pool(|| match config.experiment {
        ExperimentKind::Figure3 => run_figure3(config),
        ExperimentKind::RecoverySweep => run_recovery_sweep(config),
        ExperimentKind::HardnessSweep => run_hardness_sweep(config),
        ExperimentKind::Simulate => run_simulate(config),
        ExperimentKind::Estimate => run_estimate(config),
    })??;
    write_outcome(&config.output_dir, &outcome)?;
    Ok(outcome)
}

pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<()> {
    write_json(&dir.join(REPORT_FILE), &outcome.report)?;
    write_json(&dir.join(TIMINGS_FILE), &outcome.timings)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn report(config: &ExperimentConfig, records: Records) -> ExperimentReport {
    ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        experiment: config.experiment,
        master_seed: config.master_seed,
        config: config.clone(),
        estimator: None,
        success_rate: None,
        ablation: Vec::new(),
        event_a_freq: None,
        records,
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn generate(config: &ExperimentConfig, fallback: Option<GenSpec>) -> Result<Generated> {
    match config.graph.clone().or(fallback) {
        Some(spec) => spec.generate(),
        None => Err(Error::InvalidParameter("no graph configured".into())),
    }
}

pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, run as u64)
}

pub fn trace_seed(run_seed: u64, k: usize) -> u64 {
    derive_seed(run_seed, k as u64)
}

/// Source of cascade `k` in the run with seed `run_seed`.
pub fn pick_source(sources: &SourceSpec, n: usize, run_seed: u64, k: usize) -> Result<usize> {
    match sources {
        SourceSpec::Uniform => {
            let mut rng = rng_from_seed(derive_seed(run_seed, SOURCE_STREAM + k as u64));
            Ok(rng.random_range(0..n))
        }
        SourceSpec::Fixed { vertices } => {
            let v = vertices[k % vertices.len()];
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            Ok(v)
        }
    }
}

/// The `count` cascades of one run, simulated in parallel.
pub fn run_cascades(
    g: &Graph,
    sources: &SourceSpec,
    lambda: f64,
    run_seed: u64,
    count: usize,
) -> Result<Vec<CascadeTrace>> {
    (0..count)
        .into_par_iter()
        .map(|k| {
            let source = pick_source(sources, g.vertex_count(), run_seed, k)?;
            simulate_fpp(g, source, lambda, trace_seed(run_seed, k))
        })
        .collect()
}

pub fn run_figure3(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let generated = generate(config, Some(figure3_default_graph()))?;
    let g = &generated.graph;
    let planted = generated.planted.first().copied();
    let delta = config
        .delta
        .or(config.estimator.map(|e| e.delta))
        .unwrap_or(FIGURE3_DELTA);
    let step = config.grid_step();
    let sources = config
        .sources
        .clone()
        .unwrap_or(SourceSpec::Fixed { vertices: vec![0] });

    let mut records = Vec::with_capacity(config.runs);
    let mut per_run_ms = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let t0 = Instant::now();
        let seed = trace_seed(run_seed(config.master_seed, run), 0);
        let source = pick_source(
            &sources,
            g.vertex_count(),
            run_seed(config.master_seed, run),
            0,
        )?;
        let trace = simulate_fpp(g, source, config.lambda, seed)?;
        let sim_s = t0.elapsed().as_secs_f64();
        if sim_s > FIGURE3_BUDGET_S as f64 {
            return Err(Error::BudgetExceeded {
                what: format!("simulating one cascade on {} vertices", g.vertex_count()),
                elapsed_s: sim_s,
                limit_s: FIGURE3_BUDGET_S,
                hint: "build with --release, or profile simulate_fpp with a smaller height".into(),
            });
        }

        let series = derivative_series(&trace, delta, step)?;
        let csv = figure3_csv_name(run);
        let mut w = BufWriter::new(fs::File::create(config.output_dir.join(&csv))?);
        write_derivative_csv(&series, &mut w)?;
        w.flush()?;

        let (argmax_time, peak_value) = series.iter().fold((0.0, f64::NEG_INFINITY), |best, p| {
            if p.second > best.1 {
                (p.time, p.second)
            } else {
                best
            }
        });
        let (planted_time, planted_deg_hat, within_delta, planted_is_max) = match planted {
            Some(v) => {
                let dh: Vec<f64> = (0..g.vertex_count())
                    .into_par_iter()
                    .map(|u| crate::estimator::deg_hat(&trace, u, delta))
                    .collect::<Result<_>>()?;
                let others = dh
                    .iter()
                    .enumerate()
                    .filter(|&(u, _)| u != v)
                    .map(|(_, &x)| x)
                    .fold(f64::NEG_INFINITY, f64::max);
                let tv = trace.time(v);
                (
                    Some(tv),
                    Some(dh[v]),
                    Some((argmax_time - tv).abs() <= delta),
                    Some(dh[v] >= others),
                )
            }
            None => (None, None, None, None),
        };
        records.push(Figure3Record {
            run,
            seed,
            source,
            planted,
            planted_time,
            planted_deg_hat,
            argmax_time,
            peak_value,
            within_delta,
            planted_is_max_deg_hat: planted_is_max,
            total_time: trace.total_time(),
            rows: series.len(),
            csv,
        });
        per_run_ms.push(elapsed_ms(t0));
    }

    let mut rep = report(config, Records::Figure3(Vec::new()));
    if planted.is_some() {
        let hits = records
            .iter()
            .filter(|r| r.within_delta == Some(true))
            .count();
        rep.success_rate = Some(hits as f64 / config.runs as f64);
    }
    rep.records = Records::Figure3(records);
    Ok(Outcome {
        report: rep,
        timings: Timings {
            total_ms: elapsed_ms(start),
            per_run_ms,
        },
    })
}

/// Vertices passing the threshold in each of the first `k` traces.
fn prefix_set(est: &HighDegEstimate, tau: f64, k: usize) -> Vec<usize> {
    est.table
        .iter()
        .filter(|e| e.per_trace[..k].iter().all(|&x| x >= tau))
        .map(|e| e.vertex)
        .collect()
}

pub fn run_recovery_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let generated = generate(config, None)?;
    let g = &generated.graph;
    let n = g.vertex_count();
    let mut est_cfg = config.estimator_for(n)?;
    if let Some(k) = config.traces_per_run {
        est_cfg = est_cfg.with_k(k);
    }
    let class = config.class.expect("validated");
    let big_d = match (class.big_d, config.alpha) {
        (Some(b), _) => b,
        (None, Some(alpha)) => (n as f64).powf(alpha).ceil() as usize,
        (None, None) => {
            return Err(Error::InvalidParameter(
                "class.big_d is required when alpha is not given".into(),
            ))
        }
    };
    let class_report = validate_class(g, class.m, class.d, big_d)?;
    if !class_report.is_member {
        return Err(Error::InvalidParameter(format!(
            "instance is not in G(n={n}, m={}, d={}, D={big_d}): connected={}, {} violation(s), first {:?}",
            class.m,
            class.d,
            class_report.connected,
            class_report.violations.len(),
            class_report.violations.first()
        )));
    }
    let truth = class_report.highdeg_set.clone();
    let sources = config.sources.clone().unwrap_or(SourceSpec::Uniform);
    let k = est_cfg.k;

    let results: Vec<(RecoveryRecord, f64)> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let t0 = Instant::now();
            let seed = run_seed(config.master_seed, run);
            let traces = run_cascades(g, &sources, config.lambda, seed, k)?;
            let est = estimate_highdeg(&traces, &est_cfg)?;
            let prefixes: Vec<Vec<usize>> = (1..=k)
                .map(|kk| prefix_set(&est, est_cfg.tau, kk))
                .collect();
            let stats: Vec<_> = traces
                .iter()
                .map(|t| check_event_a(g, t, class.d))
                .collect();
            let record = RecoveryRecord {
                run,
                seed,
                sources: traces.iter().map(CascadeTrace::source).collect(),
                trace_seeds: (0..k).map(|i| trace_seed(seed, i)).collect(),
                exact_match: est.vertices == truth,
                estimated: est.vertices,
                truth: truth.clone(),
                prefix_match: prefixes.iter().map(|s| *s == truth).collect(),
                prefix_sizes: prefixes.iter().map(Vec::len).collect(),
                event_a_ok: stats.iter().map(|s| s.event_a_ok).collect(),
                max_front_degree: stats.iter().map(|s| s.max_front_degree).max().unwrap_or(0),
            };
            Ok((record, elapsed_ms(t0)))
        })
        .collect::<Result<_>>()?;
    let (records, per_run_ms): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let runs = config.runs;
    let ablation: Vec<AblationPoint> = (1..=k)
        .map(|kk| {
            let successes = records.iter().filter(|r| r.prefix_match[kk - 1]).count();
            AblationPoint {
                k: kk,
                runs,
                successes,
                success_rate: successes as f64 / runs as f64,
            }
        })
        .collect();
    let mut w = BufWriter::new(fs::File::create(config.output_dir.join(RECOVERY_CSV))?);
    writeln!(w, "{RECOVERY_HEADER}")?;
    for a in &ablation {
        writeln!(
            w,
            "{},{},{},{}",
            a.k,
            a.runs,
            a.successes,
            fmt_f64(a.success_rate)
        )?;
    }
    w.flush()?;

    let traces_total = (runs * k) as f64;
    let a_ok = records
        .iter()
        .flat_map(|r| r.event_a_ok.iter())
        .filter(|&&ok| ok)
        .count() as f64;
    let mut rep = report(config, Records::RecoverySweep(Vec::new()));
    rep.estimator = Some(est_cfg);
    rep.success_rate = Some(records.iter().filter(|r| r.exact_match).count() as f64 / runs as f64);
    rep.ablation = ablation;
    rep.event_a_freq = Some(a_ok / traces_total);
    rep.records = Records::RecoverySweep(records);
    Ok(Outcome {
        report: rep,
        timings: Timings {
            total_ms: elapsed_ms(start),
            per_run_ms,
        },
    })
}

/// One repetition of the hardness sweep at a fixed planted degree: the
/// leaf times of `K_max` cascades and the planted leaf.
struct HardnessRep {
    scaffold: crate::graph::Scaffold,
    traces: Vec<CascadeTrace>,
    leaves: LeafTraceMatrix,
    v_index: usize,
    attempts: usize,
    seed: u64,
}

fn hardness_rep(
    h: &HardnessConfig,
    d: f64,
    lambda: f64,
    sources: Option<&SourceSpec>,
    seed: u64,
) -> Result<HardnessRep> {
    let mut spec = HardEnsembleSpec::new(h.core_size, h.path_len, d.max(2.0))?;
    if let Some(cap) = h.deg_cap {
        spec.deg_cap = cap;
    }
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let v_index = rng.random_range(0..h.core_size);
    let probe = crate::graph::gen_h_scaffold(h.core_size, h.path_len)?;
    let x = if d >= 2.0 {
        Hypothesis::Planted(probe.leaves[v_index])
    } else {
        Hypothesis::Null
    };
    let mu = sample_mu(&spec, x, derive_seed(seed, 0), h.rejection_cap)?;
    let k_max = *h.k_values.iter().max().expect("validated");
    let traces: Vec<CascadeTrace> = (0..k_max)
        .into_par_iter()
        .map(|k| {
            let source = match sources {
                Some(s @ SourceSpec::Fixed { .. }) => {
                    pick_source(s, mu.graph.vertex_count(), seed, k)?
                }
                _ => {
                    let mut rng = rng_from_seed(derive_seed(seed, SOURCE_STREAM + k as u64));
                    rng.random_range(0..h.core_size)
                }
            };
            simulate_fpp(&mu.graph, source, lambda, trace_seed(seed, 2 + k))
        })
        .collect::<Result<_>>()?;
    let leaves = LeafTraceMatrix::from_traces(&mu.scaffold, &traces)?;
    Ok(HardnessRep {
        scaffold: mu.scaffold,
        traces,
        leaves,
        v_index,
        attempts: mu.attempts,
        seed,
    })
}

pub fn run_hardness_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let h = config.hardness.as_ref().expect("validated");
    let reps = config.runs;
    let mut rows: Vec<HardnessRow> = Vec::new();
    let mut per_run_ms = Vec::new();

    for (di, &d) in h.planted_degrees.iter().enumerate() {
        let t0 = Instant::now();
        let sampled: Result<Vec<HardnessRep>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let seed = run_seed(config.master_seed, di * reps + r);
                hardness_rep(h, d, config.lambda, config.sources.as_ref(), seed)
            })
            .collect();
        let sampled = match sampled {
            Ok(s) => s,
            Err(e) => {
                for &k in &h.k_values {
                    rows.push(failed_row(h, k, d, reps, &e));
                }
                per_run_ms.push(elapsed_ms(t0));
                continue;
            }
        };
        for &k in &h.k_values {
            rows.push(hardness_row(h, k, d, &sampled)?);
        }
        per_run_ms.push(elapsed_ms(t0));
    }

    let mut w = BufWriter::new(fs::File::create(config.output_dir.join(HARDNESS_CSV))?);
    writeln!(w, "{HARDNESS_HEADER}")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.k,
            r.core_size,
            r.path_len,
            fmt_f64(r.planted_degree),
            fmt_f64(r.chi2),
            fmt_f64(r.tv_bound),
            fmt_f64(r.tv_mc),
            fmt_f64(r.lr_sup_p99)
        )?;
    }
    w.flush()?;

    let rep = report(config, Records::HardnessSweep(rows));
    Ok(Outcome {
        report: rep,
        timings: Timings {
            total_ms: elapsed_ms(start),
            per_run_ms,
        },
    })
}

fn failed_row(h: &HardnessConfig, k: usize, d: f64, reps: usize, e: &Error) -> HardnessRow {
    HardnessRow {
        k,
        core_size: h.core_size,
        path_len: h.path_len,
        planted_degree: d,
        reps,
        chi2: f64::NAN,
        chi2_stderr: f64::NAN,
        tv_bound: f64::NAN,
        tv_mc: f64::NAN,
        tv_mc_stderr: f64::NAN,
        lr_sup_p99: f64::NAN,
        event_e_freq: f64::NAN,
        mean_attempts: f64::NAN,
        reports: Vec::new(),
        error: Some(e.to_string()),
    }
}

fn hardness_row(
    h: &HardnessConfig,
    k: usize,
    d: f64,
    sampled: &[HardnessRep],
) -> Result<HardnessRow> {
    let n = h.core_size;
    let per_rep: Vec<(DetectionReport, Vec<f64>)> = sampled
        .par_iter()
        .map(|s| {
            let leaves = s.leaves.truncate(k);
            let e = check_event_e(&s.scaffold, &s.traces[..k], s.scaffold.leaves[s.v_index])?;
            let report = detection_report(
                &leaves,
                s.v_index,
                d,
                h.samples,
                derive_seed(s.seed, 1000 + k as u64),
                if e.holds { 1.0 } else { 0.0 },
            )?;
            let bounds: Vec<f64> = (0..n)
                .map(|w| likelihood_ratio_sup_bound(&leaves, leaves.row(w)))
                .collect();
            Ok((report, bounds))
        })
        .collect::<Result<_>>()?;
    let reps = sampled.len() as f64;
    let mean =
        |f: &dyn Fn(&DetectionReport) -> f64| per_rep.iter().map(|(r, _)| f(r)).sum::<f64>() / reps;
    let pooled = |f: &dyn Fn(&DetectionReport) -> f64| {
        per_rep
            .iter()
            .map(|(r, _)| f(r).powi(2))
            .sum::<f64>()
            .sqrt()
            / reps
    };
    let chi2 = mean(&|r| r.chi2_single);
    let bounds: Vec<f64> = per_rep
        .iter()
        .flat_map(|(_, b)| b.iter().copied())
        .collect();
    Ok(HardnessRow {
        k,
        core_size: n,
        path_len: h.path_len,
        planted_degree: d,
        reps: sampled.len(),
        chi2,
        chi2_stderr: pooled(&|r| r.chi2_stderr),
        tv_bound: tensorized_tv_bound(chi2, n)?,
        tv_mc: mean(&|r| r.tv_mc),
        tv_mc_stderr: pooled(&|r| r.tv_mc_stderr),
        lr_sup_p99: quantile(&bounds, 0.99),
        event_e_freq: mean(&|r| r.event_e_freq),
        mean_attempts: sampled.iter().map(|s| s.attempts as f64).sum::<f64>() / reps,
        reports: per_rep.into_iter().map(|(r, _)| r).collect(),
        error: None,
    })
}

pub fn run_simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let generated = generate(config, None)?;
    let g = &generated.graph;
    g.save(&config.output_dir.join(GRAPH_FILE))?;
    let sources = config.sources.clone().unwrap_or(SourceSpec::Uniform);
    let per_run = config.traces_per_run.unwrap_or(1);

    let mut records = Vec::new();
    let mut per_run_ms = Vec::new();
    for run in 0..config.runs {
        let t0 = Instant::now();
        let seed = run_seed(config.master_seed, run);
        let traces = run_cascades(g, &sources, config.lambda, seed, per_run)?;
        for (k, t) in traces.iter().enumerate() {
            let file = trace_file_name(run, k);
            save_trace(t, &config.output_dir.join(&file))?;
            records.push(SimulateRecord {
                run,
                k,
                seed: trace_seed(seed, k),
                source: t.source(),
                total_time: t.total_time(),
                file,
            });
        }
        per_run_ms.push(elapsed_ms(t0));
    }
    Ok(Outcome {
        report: report(config, Records::Simulate(records)),
        timings: Timings {
            total_ms: elapsed_ms(start),
            per_run_ms,
        },
    })
}

/// Trace files `trace_{run}_0.csv, trace_{run}_1.csv, ..` present in `dir`.
pub fn trace_files(dir: &Path, run: usize) -> Vec<PathBuf> {
    (0..)
        .map(|k| dir.join(trace_file_name(run, k)))
        .take_while(|p| p.is_file())
        .collect()
}

pub fn run_estimate(config: &ExperimentConfig) -> Result<Outcome> {
    let start = Instant::now();
    let dir = config.traces_dir.as_ref().expect("validated");
    let truth = match (&config.graph, config.class) {
        (Some(spec), Some(class)) => {
            let g = spec.generate()?.graph;
            let big_d = class
                .big_d
                .or(config
                    .alpha
                    .map(|a| (g.vertex_count() as f64).powf(a).ceil() as usize))
                .ok_or_else(|| {
                    Error::InvalidParameter("class.big_d or alpha is required".into())
                })?;
            Some(validate_class(&g, class.m, class.d, big_d)?.highdeg_set)
        }
        _ => None,
    };

    let mut records = Vec::new();
    let mut per_run_ms = Vec::new();
    let mut used = None;
    for run in 0..config.runs {
        let t0 = Instant::now();
        let files = trace_files(dir, run);
        if files.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "no {} found in {}",
                trace_file_name(run, 0),
                dir.display()
            )));
        }
        let traces: Vec<CascadeTrace> = files
            .iter()
            .map(|p| load_trace(p, config.lambda))
            .collect::<Result<_>>()?;
        let mut est_cfg = config.estimator_for(traces[0].vertex_count())?;
        if config.estimator.is_none() {
            est_cfg = est_cfg.with_k(config.traces_per_run.unwrap_or(est_cfg.k));
        }
        let est = estimate_highdeg(&traces, &est_cfg)?;
        let csv = estimate_csv_name(run);
        write_estimate_csv(&est, &config.output_dir.join(&csv))?;
        records.push(EstimateRecord {
            run,
            files: files
                .iter()
                .map(|p| {
                    p.file_name()
                        .unwrap_or_default()
                        .to_string_lossy()
                        .into_owned()
                })
                .collect(),
            estimator: est_cfg,
            exact_match: truth.as_ref().map(|t| *t == est.vertices),
            truth: truth.clone(),
            estimated: est.vertices,
            csv,
        });
        used = Some(est_cfg);
        per_run_ms.push(elapsed_ms(t0));
    }
    let mut rep = report(config, Records::Estimate(Vec::new()));
    rep.estimator = used;
    if truth.is_some() {
        let hits = records
            .iter()
            .filter(|r| r.exact_match == Some(true))
            .count();
        rep.success_rate = Some(hits as f64 / config.runs as f64);
    }
    rep.records = Records::Estimate(records);
    Ok(Outcome {
        report: rep,
        timings: Timings {
            total_ms: elapsed_ms(start),
            per_run_ms,
        },
    })
}

/// Per-vertex table: `vertex,passed_all,deg_hat_0,..,deg_hat_{K-1}`.
pub fn write_estimate_csv(est: &HighDegEstimate, path: &Path) -> Result<()> {
    let k = est.table.first().map_or(0, |e| e.per_trace.len());
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "vertex,passed_all")?;
    for i in 0..k {
        write!(w, ",deg_hat_{i}")?;
    }
    writeln!(w)?;
    for e in &est.table {
        write!(w, "{},{}", e.vertex, e.passed_all)?;
        for &x in &e.per_trace {
            write!(w, ",{}", fmt_f64(x))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
