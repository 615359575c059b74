//! Desk-scale version of the hard ensemble behind the lower bound for
//! estimating vertices of degree below `sqrt(n)`.
//!
//! The scaffold is a binary core tree with a long path hanging from every
//! core vertex ([`gen_h_scaffold`]). `N` extra vertices each attach to one
//! path endpoint ("leaf"): uniformly at random under the null, or to a
//! planted leaf `v` with probability `D/N` under the alternative. Given the
//! leaf infection times, an attachment vertex's times follow
//!
//! ```text
//! f_v(t)  = prod_i exp(-(t_i - T_i(v))) 1(t_i >= T_i(v))
//! f_0(t)  = (1/N) sum_{w in leaves} f_w(t)
//! ```
//!
//! and the two hypotheses are `f_0` versus `(1 - D/N) f_0 + (D/N) f_v`.
//! Rate is fixed to 1 throughout.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{gen_h_scaffold, Graph, Scaffold};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sim::CascadeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardEnsembleSpec {
    /// Core size `N`; also the number of leaves and of attachment vertices.
    pub core_size: usize,
    pub path_len: usize,
    /// Target planted degree `D`.
    pub planted_degree: f64,
    /// Maximum degree allowed for non-planted leaves.
    pub deg_cap: usize,
}

impl HardEnsembleSpec {
    /// Spec with the default cap `ceil(ln^2 n)` for the full vertex count.
    pub fn new(core_size: usize, path_len: usize, planted_degree: f64) -> Result<Self> {
        let total = (core_size * (path_len + 1) + core_size) as f64;
        let spec = Self {
            core_size,
            path_len,
            planted_degree,
            deg_cap: total.ln().powi(2).ceil() as usize,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.core_size < 2 || self.path_len < 1 || self.deg_cap < 1 {
            return Err(Error::InvalidParameter(format!(
                "hard ensemble needs N >= 2, L >= 1, deg_cap >= 1; got {self:?}"
            )));
        }
        if !(self.planted_degree >= 2.0 && self.planted_degree <= self.core_size as f64) {
            return Err(Error::InvalidParameter(format!(
                "planted degree must lie in [2, N], got {}",
                self.planted_degree
            )));
        }
        Ok(())
    }

    pub fn total_vertices(&self) -> usize {
        self.core_size * (self.path_len + 1) + self.core_size
    }

    pub fn epsilon(&self) -> f64 {
        self.planted_degree / self.core_size as f64
    }
}

/// Which hypothesis to sample a graph from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Planted(usize),
}

#[derive(Debug, Clone)]
pub struct MuSample {
    pub graph: Graph,
    pub scaffold: Scaffold,
    /// Leaf chosen by each attachment vertex `j`, which is vertex
    /// `scaffold.graph.vertex_count() + j`.
    pub parents: Vec<usize>,
    /// Draws needed before the sample satisfied the degree conditions.
    pub attempts: usize,
}

pub const DEFAULT_REJECTION_CAP: usize = 1000;

/// Draws attachment parents for all `N` attachment vertices without
/// conditioning.
pub fn sample_parents(
    scaffold: &Scaffold,
    spec: &HardEnsembleSpec,
    x: Hypothesis,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let eps = spec.epsilon();
    (0..spec.core_size)
        .map(|_| match x {
            Hypothesis::Planted(v) if rng.random::<f64>() < eps => v,
            _ => scaffold.leaves[rng.random_range(0..scaffold.leaves.len())],
        })
        .collect()
}

fn in_ensemble(
    scaffold: &Scaffold,
    spec: &HardEnsembleSpec,
    x: Hypothesis,
    parents: &[usize],
) -> bool {
    let mut extra = vec![0usize; scaffold.leaves.len()];
    for &p in parents {
        extra[scaffold.anchor(p).expect("parent is a leaf")] += 1;
    }
    scaffold.leaves.iter().enumerate().all(|(u, &leaf)| {
        let deg = 1 + extra[u];
        match x {
            Hypothesis::Planted(v) if v == leaf => deg as f64 >= spec.planted_degree / 2.0,
            _ => deg <= spec.deg_cap,
        }
    })
}

/// Samples a graph from the ensemble conditioned on its degree constraints,
/// by rejection with at most `max_attempts` draws.
pub fn sample_mu(
    spec: &HardEnsembleSpec,
    x: Hypothesis,
    seed: u64,
    max_attempts: usize,
) -> Result<MuSample> {
    spec.validate()?;
    let scaffold = gen_h_scaffold(spec.core_size, spec.path_len)?;
    if let Hypothesis::Planted(v) = x {
        if scaffold.anchor(v).is_none() {
            return Err(Error::InvalidParameter(format!(
                "planted vertex {v} is not a leaf of the scaffold"
            )));
        }
    }
    let mut rng = rng_from_seed(seed);
    for attempt in 1..=max_attempts {
        let parents = sample_parents(&scaffold, spec, x, &mut rng);
        if in_ensemble(&scaffold, spec, x, &parents) {
            let base = scaffold.graph.vertex_count();
            let mut edges: Vec<_> = scaffold.graph.edges().collect();
            edges.extend(parents.iter().enumerate().map(|(j, &p)| (base + j, p)));
            let graph = Graph::from_edges(base + parents.len(), &edges)?;
            return Ok(MuSample {
                graph,
                scaffold,
                parents,
                attempts: attempt,
            });
        }
    }
    Err(Error::RejectionCapExceeded {
        attempts: max_attempts,
        rate: 0.0,
    })
}

/// Infection times of every leaf in `K` cascades; row `w` is leaf `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafTraceMatrix {
    k: usize,
    leaf_times: Vec<f64>,
    core_times: Vec<f64>,
    core_size: usize,
}

impl LeafTraceMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter(
                "leaf rows must be non-empty and of equal length".into(),
            ));
        }
        Ok(Self {
            k,
            leaf_times: rows.concat(),
            core_times: Vec::new(),
            core_size: 0,
        })
    }

    /// Collects leaf and core times from `K` traces on a scaffold (or on a
    /// graph containing it with the same vertex ids).
    pub fn from_traces(scaffold: &Scaffold, traces: &[CascadeTrace]) -> Result<Self> {
        let k = traces.len();
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one trace".into()));
        }
        let mut leaf_times = Vec::with_capacity(scaffold.leaves.len() * k);
        for &leaf in &scaffold.leaves {
            leaf_times.extend(traces.iter().map(|t| t.time(leaf)));
        }
        let mut core_times = Vec::with_capacity(scaffold.core_size * k);
        for z in 0..scaffold.core_size {
            core_times.extend(traces.iter().map(|t| t.time(z)));
        }
        Ok(Self {
            k,
            leaf_times,
            core_times,
            core_size: scaffold.core_size,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_times.len() / self.k
    }

    /// `T(w)` for the leaf with index `w`.
    pub fn row(&self, w: usize) -> &[f64] {
        &self.leaf_times[w * self.k..(w + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.leaf_times.chunks_exact(self.k)
    }

    pub fn core_row(&self, z: usize) -> &[f64] {
        &self.core_times[z * self.k..(z + 1) * self.k]
    }

    pub fn core_size(&self) -> usize {
        self.core_size
    }

    /// Keeps only the first `k` coordinates.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.clamp(1, self.k);
        let cut = |v: &[f64]| -> Vec<f64> {
            v.chunks_exact(self.k)
                .flat_map(|r| r[..k].to_vec())
                .collect()
        };
        Self {
            k,
            leaf_times: cut(&self.leaf_times),
            core_times: cut(&self.core_times),
            core_size: self.core_size,
        }
    }
}

/// `log f_v(t)`; `-inf` outside the support.
pub fn log_density_fv(t_v: &[f64], t: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&ti, &vi) in t.iter().zip(t_v) {
        if ti < vi {
            return f64::NEG_INFINITY;
        }
        acc -= ti - vi;
    }
    acc
}

/// `log f_0(t)`, the uniform mixture over leaves, via log-sum-exp.
pub fn log_density_f0(leaves: &LeafTraceMatrix, t: &[f64]) -> f64 {
    let logs: Vec<f64> = leaves.rows().map(|r| log_density_fv(r, t)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logs.iter().map(|&l| (l - max).exp()).sum();
    max + sum.ln() - (leaves.leaf_count() as f64).ln()
}

/// `(1/N) sum_w exp(sum_i (T_i(w) - T_i(v))) 1(anchor_i >= T_i(w) for all i)`.
/// Terms are accumulated in leaf order so that enlarging the indicator set
/// never decreases the result under floating point.
fn anchored_mass(leaves: &LeafTraceMatrix, t_v: &[f64], anchor: &[f64]) -> f64 {
    let mut sum = 0.0;
    for row in leaves.rows() {
        if row.iter().zip(anchor).all(|(&w, &a)| a >= w) {
            let exponent: f64 = row.iter().zip(t_v).map(|(&w, &v)| w - v).sum();
            sum += exponent.exp();
        }
    }
    sum / leaves.leaf_count() as f64
}

/// Pointwise likelihood ratio `f_v(t) / f_0(t)`, zero outside the support
/// of `f_v`.
pub fn likelihood_ratio(leaves: &LeafTraceMatrix, t_v: &[f64], t: &[f64]) -> f64 {
    if t.iter().zip(t_v).any(|(&ti, &vi)| ti < vi) {
        return 0.0;
    }
    1.0 / anchored_mass(leaves, t_v, t)
}

/// `t`-free upper bound on `sup_t f_v(t) / f_0(t)`; `+inf` when no leaf is
/// earlier than `v` in every coordinate.
pub fn likelihood_ratio_sup_bound(leaves: &LeafTraceMatrix, t_v: &[f64]) -> f64 {
    1.0 / anchored_mass(leaves, t_v, t_v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

impl McEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    fn scaled(self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            stderr: self.stderr * c,
        }
    }
}

/// Which integrand the chi-square estimate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Chi2Form {
    /// `(D/N)^2 E_{f_v}[f_v / f_0]`, an upper bound.
    #[default]
    UpperBound,
    /// `(D/N)^2 (E_{f_v}[f_v / f_0] - 1)`, the exact divergence.
    Exact,
}

fn sample_fv(t_v: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    t_v.iter()
        .map(|&v| v + rng.sample::<f64, _>(Exp1))
        .collect()
}

/// Per-sample likelihood ratios under `t ~ f_v`, one seed stream per sample.
fn ratios_under_fv(leaves: &LeafTraceMatrix, t_v: &[f64], samples: usize, seed: u64) -> Vec<f64> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let t = sample_fv(t_v, &mut rng);
            likelihood_ratio(leaves, t_v, &t)
        })
        .collect()
}

fn check_mc_args(samples: usize, d: f64, n: usize) -> Result<()> {
    if samples == 0 || n == 0 || !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need samples >= 1, N >= 1, D >= 0; got ({samples}, {n}, {d})"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of the per-coordinate chi-square divergence between
/// the planted mixture and the null.
pub fn chi2_mc(
    leaves: &LeafTraceMatrix,
    t_v: &[f64],
    d: f64,
    n: usize,
    samples: usize,
    seed: u64,
    form: Chi2Form,
) -> Result<McEstimate> {
    check_mc_args(samples, d, n)?;
    if leaves.leaf_count() == 1 {
        return Ok(McEstimate {
            mean: 0.0,
            stderr: 0.0,
        });
    }
    let ratios = ratios_under_fv(leaves, t_v, samples, seed);
    let eps2 = (d / n as f64).powi(2);
    let est = McEstimate::from_samples(&ratios);
    Ok(match form {
        Chi2Form::UpperBound => est.scaled(eps2),
        Chi2Form::Exact => McEstimate {
            mean: est.mean - 1.0,
            stderr: est.stderr,
        }
        .scaled(eps2),
    })
}

/// `2 sqrt(exp(N chi2) - 1)`; `+inf` on overflow.
pub fn tensorized_tv_bound(chi2_single: f64, n: usize) -> Result<f64> {
    if !(chi2_single >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "chi-square must be non-negative, got {chi2_single}"
        )));
    }
    let e = (n as f64 * chi2_single).exp_m1();
    Ok(if e.is_finite() {
        2.0 * e.sqrt()
    } else {
        f64::INFINITY
    })
}

/// Monte Carlo estimate of `TV((1 - D/N) f_0 + (D/N) f_v, f_0)` for a single
/// attachment vertex, as `E_{f_0}[(1 - P/Q)_+]`.
pub fn tv_mc(
    leaves: &LeafTraceMatrix,
    t_v: &[f64],
    d: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_mc_args(samples, d, n)?;
    let eps = d / n as f64;
    if eps == 0.0 || leaves.leaf_count() == 1 {
        return Ok(McEstimate {
            mean: 0.0,
            stderr: 0.0,
        });
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let w = rng.random_range(0..leaves.leaf_count());
            let t = sample_fv(leaves.row(w), &mut rng);
            let r = likelihood_ratio(leaves, t_v, &t);
            // 1 - P/Q = eps (1 - f_v/f_0)
            (eps * (1.0 - r)).max(0.0)
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}

/// Thresholds of the "typical scaffold" event, expressed through the path
/// length `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventEThresholds {
    pub core_time_cap: f64,
    pub leaf_time_floor: f64,
    pub deviation_cap: f64,
}

impl EventEThresholds {
    /// Core times at most `ln^2 N`; `T_i(v) >= 2L/3`;
    /// `sum_i (X_i(v) - L)^2 <= 2KL`.
    pub fn new(core_size: usize, path_len: usize, k: usize) -> Self {
        let l = path_len as f64;
        Self {
            core_time_cap: (core_size as f64).ln().powi(2),
            leaf_time_floor: 2.0 * l / 3.0,
            deviation_cap: 2.0 * k as f64 * l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventEReport {
    pub holds: bool,
    pub core_times_ok: bool,
    pub leaf_time_ok: bool,
    pub path_deviation_ok: bool,
    pub max_core_time: f64,
    pub min_leaf_time: f64,
    /// `sum_i (X_i(v) - L)^2`, where `X_i(v)` is the travel time along v's path.
    pub path_deviation: f64,
}

/// Evaluates the typical-scaffold event for leaf `v` over the given traces.
pub fn check_event_e(
    scaffold: &Scaffold,
    traces: &[CascadeTrace],
    v: usize,
) -> Result<EventEReport> {
    let anchor = scaffold.anchor(v).ok_or_else(|| {
        Error::InvalidParameter(format!("vertex {v} is not a leaf of the scaffold"))
    })?;
    let th = EventEThresholds::new(scaffold.core_size, scaffold.path_len, traces.len());
    let l = scaffold.path_len as f64;
    let max_core_time = traces
        .iter()
        .flat_map(|t| (0..scaffold.core_size).map(move |z| t.time(z)))
        .fold(0.0, f64::max);
    let min_leaf_time = traces
        .iter()
        .map(|t| t.time(v))
        .fold(f64::INFINITY, f64::min);
    let path_deviation: f64 = traces
        .iter()
        .map(|t| (t.time(v) - t.time(anchor) - l).powi(2))
        .sum();
    let core_times_ok = max_core_time <= th.core_time_cap;
    let leaf_time_ok = min_leaf_time >= th.leaf_time_floor;
    let path_deviation_ok = path_deviation <= th.deviation_cap;
    Ok(EventEReport {
        holds: core_times_ok && leaf_time_ok && path_deviation_ok,
        core_times_ok,
        leaf_time_ok,
        path_deviation_ok,
        max_core_time,
        min_leaf_time,
        path_deviation,
    })
}

/// Indistinguishability diagnostics for one leaf-time sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub chi2_single: f64,
    pub chi2_stderr: f64,
    pub tv_bound: f64,
    pub tv_mc: f64,
    pub tv_mc_stderr: f64,
    /// Largest observed `f_v / f_0` over the chi-square samples.
    pub lr_sup: f64,
    pub event_e_freq: f64,
}

/// Quantile by linear interpolation between order statistics; infinite
/// values sort last.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi || v[hi].is_infinite() {
        v[hi]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

/// Computes every diagnostic for planted leaf index `v_index`.
pub fn detection_report(
    leaves: &LeafTraceMatrix,
    v_index: usize,
    d: f64,
    samples: usize,
    seed: u64,
    event_e_freq: f64,
) -> Result<DetectionReport> {
    let n = leaves.leaf_count();
    let t_v = leaves.row(v_index).to_vec();
    let ratios = ratios_under_fv(leaves, &t_v, samples, derive_seed(seed, 0));
    let chi2 = McEstimate::from_samples(&ratios).scaled((d / n as f64).powi(2));
    let chi2 = if n == 1 {
        McEstimate {
            mean: 0.0,
            stderr: 0.0,
        }
    } else {
        chi2
    };
    let tv = tv_mc(leaves, &t_v, d, n, samples, derive_seed(seed, 1))?;
    Ok(DetectionReport {
        chi2_single: chi2.mean,
        chi2_stderr: chi2.stderr,
        tv_bound: tensorized_tv_bound(chi2.mean, n)?,
        tv_mc: tv.mean,
        tv_mc_stderr: tv.stderr,
        lr_sup: ratios.iter().copied().fold(0.0, f64::max),
        event_e_freq,
    })
}
