//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cascade_scope::config::{ClassSpec, ExperimentConfig, ExperimentKind, HardnessConfig};
use cascade_scope::experiments::{figure3_default_graph, run_experiment, trace_seed, Records};
use cascade_scope::graph::{gen_h_scaffold, GenSpec, Graph};
use cascade_scope::hardness::{
    chi2_mc, likelihood_ratio, likelihood_ratio_sup_bound, log_density_f0, log_density_fv,
    tensorized_tv_bound, Chi2Form, LeafTraceMatrix,
};
use cascade_scope::rng::{derive_seed, rng_from_seed};
use cascade_scope::stats::chi2_two_sample;
use cascade_scope::{deg_hat, simulate_fpp, simulate_gillespie};
use rand::Rng;
use rand_distr::Exp1;
use serde_json::json;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(n, edges).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let cases = [
        ("K3", graph(3, &[(0, 1), (1, 2), (0, 2)])),
        ("C4", graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])),
        ("star3", graph(4, &[(0, 1), (0, 2), (0, 3)])),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g) in &cases {
        let mut counts = [BTreeMap::new(), BTreeMap::new()];
        for i in 0..10_000u64 {
            let a = simulate_fpp(g, 0, 1.0, derive_seed(1, i)).unwrap();
            let b = simulate_gillespie(g, 0, 1.0, derive_seed(2, i)).unwrap();
            *counts[0].entry(a.order().to_vec()).or_insert(0usize) += 1;
            *counts[1].entry(b.order().to_vec()).or_insert(0usize) += 1;
        }
        let r = chi2_two_sample(&counts[0], &counts[1]);
        pass &= r.p_value > 0.01;
        parts.push(format!("{name} p={:.3}", r.p_value));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 30.0;
    verdict(pass, format!("{}; {secs:.2} s", parts.join(", ")))
}

fn criterion_2() -> Verdict {
    let path = graph(2, &[(0, 1)]);
    let k3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
    let runs = 10_000u64;
    let path_mean = mean(
        &(0..runs)
            .map(|i| {
                simulate_fpp(&path, 0, 1.0, derive_seed(3, i))
                    .unwrap()
                    .time(1)
            })
            .collect::<Vec<_>>(),
    );
    let k3_mean = mean(
        &(0..runs)
            .map(|i| {
                simulate_fpp(&k3, 0, 1.0, derive_seed(4, i))
                    .unwrap()
                    .total_time()
            })
            .collect::<Vec<_>>(),
    );
    let pass = (path_mean - 1.0).abs() <= 0.03 && (k3_mean - 1.0).abs() <= 0.03;
    verdict(
        pass,
        format!("path mean {path_mean:.4}, K3 last-infection mean {k3_mean:.4}"),
    )
}

fn criterion_3(scratch: &Path) -> Verdict {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Figure3);
    cfg.graph = Some(figure3_default_graph());
    cfg.runs = 20;
    cfg.master_seed = 2023;
    cfg.output_dir = scratch.join("c3");
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("figure3 failed: {e}")),
    };
    let Records::Figure3(records) = &outcome.report.records else {
        return verdict(false, "unexpected record kind".into());
    };
    let hits = records
        .iter()
        .filter(|r| r.within_delta == Some(true))
        .count();
    let slowest = outcome
        .timings
        .per_run_ms
        .iter()
        .copied()
        .fold(0.0, f64::max)
        / 1000.0;
    verdict(
        hits >= 18 && slowest < 60.0,
        format!("peak within delta in {hits}/20 runs; slowest run {slowest:.2} s"),
    )
}

fn recovery_config(seed: u64, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::RecoverySweep);
    cfg.graph = Some(GenSpec::PlantedStarTree {
        branching: 3,
        height: 9,
        layer: 4,
        planted_degree: 26_739,
        hubs: 2,
    });
    cfg.alpha = Some(0.9);
    cfg.class = Some(ClassSpec {
        m: 2,
        d: 8,
        big_d: None,
    });
    cfg.runs = 20;
    cfg.master_seed = seed;
    cfg.output_dir = out.to_path_buf();
    cfg
}

/// Runs the three criterion-4 sweeps once; criteria 4 and 5 both read them.
fn recovery_sweeps(
    scratch: &Path,
) -> Result<Vec<cascade_scope::experiments::ExperimentReport>, String> {
    (1..=3)
        .map(|s| {
            run_experiment(&recovery_config(s, &scratch.join(format!("c4_{s}"))))
                .map(|o| o.report)
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn criterion_4(
    sweeps: &Result<Vec<cascade_scope::experiments::ExperimentReport>, String>,
) -> Verdict {
    let sweeps = match sweeps {
        Ok(s) => s,
        Err(e) => return verdict(false, format!("recovery sweep failed: {e}")),
    };
    let k_default = sweeps[0].estimator.map_or(0, |e| e.k);
    let full: Vec<f64> = sweeps
        .iter()
        .map(|r| r.success_rate.unwrap_or(0.0))
        .collect();
    let one: Vec<f64> = sweeps
        .iter()
        .map(|r| {
            r.ablation
                .iter()
                .find(|a| a.k == 1)
                .map_or(0.0, |a| a.success_rate)
        })
        .collect();
    let (m_full, m_one) = (median(full.clone()), median(one.clone()));
    let sizes: Vec<f64> = sweeps
        .iter()
        .flat_map(|r| match &r.records {
            Records::RecoverySweep(recs) => recs.iter().map(|x| x.estimated.len() as f64).collect(),
            _ => Vec::new(),
        })
        .collect();
    verdict(
        m_full >= 0.9 && m_one < m_full,
        format!(
            "K={k_default} success rates {full:?} (median {m_full}); K=1 rates {one:?} (median {m_one}); mean estimated set size {:.1} vs 2 true",
            mean(&sizes)
        ),
    )
}

fn criterion_5(
    sweeps: &Result<Vec<cascade_scope::experiments::ExperimentReport>, String>,
) -> Verdict {
    let edges: Vec<_> = (1..=10_000).map(|v| (0, v)).collect();
    let star = graph(10_001, &edges);
    let est: Vec<f64> = (0..200u64)
        .map(|i| {
            let t = simulate_fpp(&star, 0, 1.0, derive_seed(5, i)).unwrap();
            deg_hat(&t, 0, 0.01).unwrap()
        })
        .collect();
    let m = mean(&est);
    let hub_ok = (m - 10_000.0).abs() <= 1_000.0;

    let (event_ok, freq) = match sweeps {
        Ok(s) => {
            let mut held = 0usize;
            let mut total = 0usize;
            for r in s {
                if let Records::RecoverySweep(recs) = &r.records {
                    for rec in recs {
                        held += rec.event_a_ok.iter().filter(|&&b| b).count();
                        total += rec.event_a_ok.len();
                    }
                }
            }
            let f = held as f64 / total.max(1) as f64;
            (total > 0 && f >= 0.95, f)
        }
        Err(_) => (false, f64::NAN),
    };
    verdict(
        hub_ok && event_ok,
        format!("star hub mean deg_hat {m:.1} (degree 10000); event A frequency {freq:.3}"),
    )
}

fn criterion_6(scratch: &Path) -> Verdict {
    let n = 2000usize;
    let mut cfg = ExperimentConfig::new(ExperimentKind::HardnessSweep);
    cfg.hardness = Some(HardnessConfig {
        core_size: n,
        path_len: 50,
        planted_degrees: vec![(n as f64).powf(0.3)],
        k_values: vec![1, 2, 3],
        samples: 2000,
        deg_cap: None,
        rejection_cap: 1000,
    });
    cfg.runs = 10;
    cfg.master_seed = 6;
    cfg.output_dir = scratch.join("c6");
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return verdict(false, format!("hardness sweep failed: {e}")),
    };
    let Records::HardnessSweep(rows) = &outcome.report.records else {
        return verdict(false, "unexpected record kind".into());
    };
    let tv_ok = rows.iter().all(|r| r.error.is_none() && r.tv_mc <= 0.1);
    let tv_text: Vec<String> = rows
        .iter()
        .map(|r| format!("K={} {:.4} (se {:.1e})", r.k, r.tv_mc, r.tv_mc_stderr))
        .collect();

    // two-leaf quadrature: chi2 = eps^2 * integral of f_v^2 / f_0 over [1, inf)
    let eps = 0.1;
    let fv = |t: f64| if t >= 1.0 { (1.0 - t).exp() } else { 0.0 };
    let fw = |t: f64| if t > 2.0 { (2.0 - t).exp() } else { 0.0 };
    let integrand = |t: f64| fv(t).powi(2) / (0.5 * (fv(t) + fw(t)));
    let simpson = |a: f64, b: f64, m: usize| {
        let h = (b - a) / m as f64;
        let inner: f64 = (1..m)
            .map(|i| integrand(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        (integrand(a) + integrand(b) + inner) * h / 3.0
    };
    let quad = eps * eps * (simpson(1.0, 2.0, 2000) + simpson(2.0 + 1e-13, 60.0, 200_000));
    let two = LeafTraceMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
    let mc = chi2_mc(&two, &[1.0], 0.2, 2, 200_000, 61, Chi2Form::UpperBound).unwrap();
    let quad_ok = (mc.mean - quad).abs() <= 3.0 * mc.stderr;

    // pointwise bound on 10^3 points from f_v on a sampled scaffold
    let s = gen_h_scaffold(n, 50).unwrap();
    let traces: Vec<_> = (0..3)
        .map(|k| {
            let ts = trace_seed(62, k);
            simulate_fpp(&s.graph, rng_from_seed(ts).random_range(0..n), 1.0, ts).unwrap()
        })
        .collect();
    let leaves = LeafTraceMatrix::from_traces(&s, &traces).unwrap();
    let mut rng = rng_from_seed(63);
    let mut violations = 0;
    for _ in 0..1000 {
        let t_v = leaves.row(rng.random_range(0..n)).to_vec();
        let t: Vec<f64> = t_v
            .iter()
            .map(|&x| x + rng.sample::<f64, _>(Exp1))
            .collect();
        if likelihood_ratio(&leaves, &t_v, &t) > likelihood_ratio_sup_bound(&leaves, &t_v) {
            violations += 1;
        }
    }

    verdict(
        tv_ok && quad_ok && violations == 0,
        format!(
            "tv_mc {}; two-leaf chi2 {:.6}+-{:.6} vs quadrature {quad:.6}; {violations} bound violations in 1000 points",
            tv_text.join(", "),
            mc.mean,
            mc.stderr
        ),
    )
}

fn criterion_7() -> Verdict {
    let rel = |got: f64, want: f64| {
        if want == got {
            0.0
        } else {
            ((got - want) / want).abs()
        }
    };
    let two = LeafTraceMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
    let one = LeafTraceMatrix::from_rows(&[vec![0.5, 1.5]]).unwrap();
    let e = std::f64::consts::E;
    let cases: Vec<(&str, f64, f64)> = vec![
        (
            "fv at corner",
            log_density_fv(&[1.0, 2.0], &[1.0, 2.0]),
            0.0,
        ),
        ("fv K=1 t=3", log_density_fv(&[1.0], &[3.0]), -2.0),
        (
            "f0 single leaf",
            log_density_f0(&one, &[2.0, 4.0]),
            log_density_fv(&[0.5, 1.5], &[2.0, 4.0]),
        ),
        (
            "f0 two leaves",
            log_density_f0(&two, &[3.0]),
            ((e.powi(-2) + e.powi(-1)) / 2.0).ln(),
        ),
        (
            "sup bound N=1",
            likelihood_ratio_sup_bound(&one, &[0.5, 1.5]),
            1.0,
        ),
        (
            "sup bound two leaves",
            likelihood_ratio_sup_bound(&two, &[1.0]),
            2.0,
        ),
        ("tv bound zero", tensorized_tv_bound(0.0, 17).unwrap(), 0.0),
        (
            "tv bound ln2/N",
            tensorized_tv_bound(2f64.ln() / 37.0, 37).unwrap(),
            2.0,
        ),
        (
            "tv bound 1e-6",
            tensorized_tv_bound(1e-6, 10_000).unwrap(),
            2.0 * (0.01f64.exp() - 1.0).sqrt(),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for (name, got, want) in &cases {
        let r = rel(*got, *want);
        worst = worst.max(r);
        if r > 1e-12 {
            failed.push(format!("{name}: {got} vs {want}"));
        }
    }
    let outside = log_density_fv(&[1.0, 2.0], &[5.0, 1.5]) == f64::NEG_INFINITY;
    let approx = (tensorized_tv_bound(1e-6, 10_000).unwrap() - 0.2005).abs() < 1e-4;
    let pass = failed.is_empty() && outside && approx;
    let detail = if failed.is_empty() {
        format!("{} cases, worst relative error {worst:.1e}", cases.len())
    } else {
        failed.join("; ")
    };
    verdict(pass, detail)
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cascade-scope"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|name| name != "timings.json")
                .map(|name| {
                    let bytes = fs::read(dir.join(&name)).unwrap_or_default();
                    (name, bytes)
                })
                .collect()
        })
        .unwrap_or_default()
}

fn criterion_8(scratch: &Path) -> Verdict {
    let root = scratch.join("c8");
    fs::create_dir_all(&root).unwrap();
    let tree = json!({ "kind": "planted_star_tree", "branching": 3, "height": 5, "layer": 2, "planted_degree": 60 });
    let traces = root.join("sim_a");
    let configs = [
        (
            "gen-graph",
            json!({ "experiment": "simulate", "graph": tree, "runs": 2, "traces_per_run": 3 }),
        ),
        (
            "simulate",
            json!({ "experiment": "simulate", "graph": tree, "runs": 2, "traces_per_run": 3 }),
        ),
        (
            "estimate",
            json!({ "experiment": "estimate", "estimator": { "delta": 0.05, "tau": 10.0, "k": 3 }, "runs": 2, "traces_dir": traces }),
        ),
        (
            "figure3",
            json!({ "experiment": "figure3", "graph": tree, "runs": 2, "grid_step": 0.01, "sources": { "kind": "uniform" } }),
        ),
        (
            "recovery-sweep",
            json!({ "experiment": "recovery_sweep", "graph": tree, "alpha": 0.8, "class": { "m": 1, "d": 4, "big_d": 40 }, "runs": 3, "traces_per_run": 3 }),
        ),
        (
            "hardness-sweep",
            json!({ "experiment": "hardness_sweep", "hardness": { "core_size": 100, "path_len": 10, "planted_degrees": [0, 5], "k_values": [1, 2], "samples": 200 }, "runs": 2 }),
        ),
    ];
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (cmd, body) in &configs {
        let path = root.join(format!("{cmd}.json"));
        fs::write(&path, serde_json::to_string(body).unwrap()).unwrap();
        let mut outputs = Vec::new();
        for tag in ["a", "b"] {
            let out = if *cmd == "simulate" {
                root.join(format!("sim_{tag}"))
            } else {
                root.join(format!("{cmd}_{tag}"))
            };
            if let Err(e) = run_cli(&[
                cmd,
                "--config",
                path.to_str().unwrap(),
                "--seed",
                "8",
                "--out",
                out.to_str().unwrap(),
            ]) {
                return verdict(false, e);
            }
            outputs.push(dir_bytes(&out));
        }
        if outputs[0].is_empty() {
            return verdict(false, format!("{cmd} wrote nothing"));
        }
        for (name, bytes) in &outputs[0] {
            checked += 1;
            if outputs[1].get(name) != Some(bytes) {
                mismatches.push(format!("{cmd}/{name}"));
            }
        }
        if outputs[0].len() != outputs[1].len() {
            mismatches.push(format!("{cmd}: file sets differ"));
        }
    }
    let pass = mismatches.is_empty();
    let detail = if pass {
        format!("{checked} files byte-identical across repeated runs of 6 subcommands")
    } else {
        format!("differing: {}", mismatches.join(", "))
    };
    verdict(pass, detail)
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let scratch = scratch.path();
    let sweeps = recovery_sweeps(scratch);
    let results: Vec<(usize, &str, Verdict)> = vec![
        (1, "simulator equivalence", criterion_1()),
        (2, "analytic means", criterion_2()),
        (
            3,
            "second-derivative peak at the planted vertex",
            criterion_3(scratch),
        ),
        (4, "exact recovery at n ~ 1e5", criterion_4(&sweeps)),
        (5, "degree estimate and event A", criterion_5(&sweeps)),
        (6, "hardness indistinguishability", criterion_6(scratch)),
        (7, "closed-form hand cases", criterion_7()),
        (8, "CLI determinism", criterion_8(scratch)),
    ];
    let mut failed = 0;
    for (id, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {tag}: {name}: {}", v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
