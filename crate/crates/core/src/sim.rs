//! Exact sampling of the continuous-time SI cascade.
//!
//! Two independent samplers are provided. [`simulate_fpp`] uses the
//! first-passage-percolation representation: infection times are weighted
//! shortest-path distances from the source under i.i.d. `Exp(lambda)` edge
//! weights. [`simulate_gillespie`] runs the Markov chain directly as an
//! exponential race over the edges crossing the infected boundary. Both
//! produce a [`CascadeTrace`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng_from_seed;

/// Infection times of every vertex in one cascade, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTrace {
    source: usize,
    lambda: f64,
    seed: Option<u64>,
    order: Vec<usize>,
    times: Vec<f64>,
    time_of: Vec<f64>,
}

fn event_cmp(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

impl CascadeTrace {
    /// Builds a trace from `(vertex, time)` events over vertices `0..n`.
    ///
    /// Every vertex must appear exactly once and the source must be the only
    /// vertex infected at time 0. Exact ties are ordered by vertex id.
    pub fn from_events(
        n: usize,
        lambda: f64,
        seed: Option<u64>,
        mut events: Vec<(usize, f64)>,
    ) -> Result<Self> {
        if events.len() != n {
            return Err(Error::InvalidParameter(format!(
                "trace has {} events for {n} vertices",
                events.len()
            )));
        }
        let mut time_of = vec![f64::NAN; n];
        for &(v, t) in &events {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} has invalid infection time {t}"
                )));
            }
            if !time_of[v].is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "vertex {v} appears twice in trace"
                )));
            }
            time_of[v] = t;
        }
        events.sort_by(event_cmp);
        let source = match events.first() {
            Some(&(v, 0.0)) => v,
            Some(&(_, t)) => {
                return Err(Error::InvalidParameter(format!(
                    "earliest infection is at {t}, expected the source at 0"
                )))
            }
            None => return Err(Error::InvalidParameter("empty trace".into())),
        };
        if events.get(1).is_some_and(|&(_, t)| t == 0.0) {
            return Err(Error::InvalidParameter(
                "more than one vertex infected at time 0".into(),
            ));
        }
        let (order, times) = events.into_iter().unzip();
        Ok(Self {
            source,
            lambda,
            seed,
            order,
            times,
            time_of,
        })
    }

    /// Trace from a per-vertex time vector.
    pub fn from_times(lambda: f64, times: &[f64]) -> Result<Self> {
        let events = times.iter().copied().enumerate().collect();
        Self::from_events(times.len(), lambda, None, events)
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn vertex_count(&self) -> usize {
        self.time_of.len()
    }

    /// Infection time `T(v)`.
    #[inline]
    pub fn time(&self, v: usize) -> f64 {
        self.time_of[v]
    }

    pub fn times_by_vertex(&self) -> &[f64] {
        &self.time_of
    }

    /// Sorted infection times.
    pub fn sorted_times(&self) -> &[f64] {
        &self.times
    }

    /// Vertices in infection order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn events(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.order.iter().copied().zip(self.times.iter().copied())
    }

    /// Time of the last infection.
    pub fn total_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Same cascade with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let events = self.events().map(|(v, t)| (perm[v], t)).collect();
        Self::from_events(self.vertex_count(), self.lambda, self.seed, events)
    }

    /// Number of infections with `a <= T(v) <= b`.
    #[inline]
    pub(crate) fn count_closed(&self, a: f64, b: f64) -> usize {
        let lo = self.times.partition_point(|&t| t < a);
        let hi = self.times.partition_point(|&t| t <= b);
        hi.saturating_sub(lo)
    }
}

/// Number of infections in a closed time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCount {
    pub a: f64,
    pub b: f64,
    pub count: usize,
}

/// `I[a, b]`: infections with `a <= T(v) <= b`.
pub fn infection_count(trace: &CascadeTrace, a: f64, b: f64) -> Result<IntervalCount> {
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::ReversedInterval { a, b });
    }
    Ok(IntervalCount {
        a,
        b,
        count: trace.count_closed(a, b),
    })
}

fn check_inputs(g: &Graph, source: usize, lambda: f64) -> Result<()> {
    if source >= g.vertex_count() {
        return Err(Error::VertexOutOfRange {
            vertex: source,
            n: g.vertex_count(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

#[derive(PartialEq)]
struct Pending {
    time: f64,
    vertex: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // Reversed so the max-heap pops the earliest time, then the smallest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Samples a cascade as first-passage percolation with `Exp(lambda)` edge
/// weights, via Dijkstra from `source`.
///
/// Each edge weight is drawn when the edge is first relaxed, which happens
/// exactly once: from whichever endpoint settles first. The run is
/// deterministic in `(g, source, lambda, seed)`.
pub fn simulate_fpp(g: &Graph, source: usize, lambda: f64, seed: u64) -> Result<CascadeTrace> {
    check_inputs(g, source, lambda)?;
    let n = g.vertex_count();
    let mut rng = rng_from_seed(seed);
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut order = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);

    dist[source] = 0.0;
    heap.push(Pending {
        time: 0.0,
        vertex: source,
    });
    while let Some(Pending { time, vertex: u }) = heap.pop() {
        if settled[u] {
            continue;
        }
        settled[u] = true;
        order.push(u);
        times.push(time);
        for &w in g.neighbors(u) {
            if settled[w] {
                continue;
            }
            let weight: f64 = rng.sample::<f64, _>(Exp1) / lambda;
            let candidate = time + weight;
            if candidate < dist[w] {
                dist[w] = candidate;
                heap.push(Pending {
                    time: candidate,
                    vertex: w,
                });
            }
        }
    }

    if order.len() != n {
        return Err(Error::Disconnected {
            source_vertex: source,
            unreached: n - order.len(),
            n,
        });
    }
    Ok(CascadeTrace {
        source,
        lambda,
        seed: Some(seed),
        order,
        times,
        time_of: dist,
    })
}

const ABSENT: usize = usize::MAX;

/// Samples a cascade by simulating the Markov chain: the next infection
/// happens after an `Exp(lambda * |boundary|)` wait along a uniformly chosen
/// boundary edge. Independent of [`simulate_fpp`]; used as its oracle.
pub fn simulate_gillespie(
    g: &Graph,
    source: usize,
    lambda: f64,
    seed: u64,
) -> Result<CascadeTrace> {
    check_inputs(g, source, lambda)?;
    let n = g.vertex_count();
    let mut rng = rng_from_seed(seed);
    let mut infected = vec![false; n];
    let mut time_of = vec![f64::INFINITY; n];
    // Directed slots u -> w with u infected and w susceptible.
    let mut boundary: Vec<usize> = Vec::new();
    let mut position = vec![ABSENT; g.slot_count()];
    let mut order = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);

    let mut infect = |v: usize,
                      t: f64,
                      infected: &mut Vec<bool>,
                      boundary: &mut Vec<usize>,
                      position: &mut Vec<usize>| {
        infected[v] = true;
        time_of[v] = t;
        order.push(v);
        times.push(t);
        for &x in g.neighbors(v) {
            if infected[x] {
                let slot = g.slot(x, v).expect("adjacency is symmetric");
                let at = position[slot];
                if at != ABSENT {
                    boundary.swap_remove(at);
                    if at < boundary.len() {
                        position[boundary[at]] = at;
                    }
                    position[slot] = ABSENT;
                }
            }
        }
        for slot in g.slot_range(v) {
            if !infected[g.slot_target(slot)] {
                position[slot] = boundary.len();
                boundary.push(slot);
            }
        }
    };

    infect(source, 0.0, &mut infected, &mut boundary, &mut position);
    let mut t = 0.0;
    while !boundary.is_empty() {
        let rate = lambda * boundary.len() as f64;
        t += rng.sample::<f64, _>(Exp1) / rate;
        let pick = rng.random_range(0..boundary.len());
        let target = g.slot_target(boundary[pick]);
        infect(target, t, &mut infected, &mut boundary, &mut position);
    }

    if order.len() != n {
        return Err(Error::Disconnected {
            source_vertex: source,
            unreached: n - order.len(),
            n,
        });
    }
    Ok(CascadeTrace {
        source,
        lambda,
        seed: Some(seed),
        order,
        times,
        time_of,
    })
}

/// Number of edges with exactly one endpoint infected by time `t`.
pub fn cut_size(g: &Graph, trace: &CascadeTrace, t: f64) -> usize {
    g.edges()
        .filter(|&(u, v)| (trace.time(u) <= t) != (trace.time(v) <= t))
        .count()
}

/// Neighbors of `v` infected strictly before `v`.
pub fn front_degree(g: &Graph, trace: &CascadeTrace, v: usize) -> usize {
    let tv = trace.time(v);
    g.neighbors(v)
        .iter()
        .filter(|&&u| trace.time(u) < tv)
        .count()
}

/// Jump of the expected infection rate when `v` is infected:
/// `lambda * (deg(v) - 2 * |infected neighbors before v|)`.
pub fn d_i_exact(g: &Graph, trace: &CascadeTrace, v: usize) -> f64 {
    let before = front_degree(g, trace, v) as f64;
    trace.lambda() * (g.degree(v) as f64 - 2.0 * before)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub total_time: f64,
    pub event_a_ok: bool,
    pub max_front_degree: usize,
}

/// Threshold `2 d sqrt(n) ln^2 n` on infected neighbors at infection time.
pub fn event_a_threshold(n: usize, d: usize) -> f64 {
    let n = n as f64;
    2.0 * d as f64 * n.sqrt() * n.ln().powi(2)
}

/// Checks that no vertex had more than `2 d sqrt(n) ln^2 n` infected
/// neighbors at the moment it was infected.
pub fn check_event_a(g: &Graph, trace: &CascadeTrace, d: usize) -> SimStats {
    let max_front_degree = (0..g.vertex_count())
        .map(|v| front_degree(g, trace, v))
        .max()
        .unwrap_or(0);
    SimStats {
        total_time: trace.total_time(),
        event_a_ok: (max_front_degree as f64) <= event_a_threshold(g.vertex_count(), d),
        max_front_degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_balanced_tree;

    fn path2() -> Graph {
        Graph::from_edges(2, &[(0, 1)]).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Graph::from_edges(leaves + 1, &edges).unwrap()
    }

    #[test]
    fn trace_invariants_hold_for_both_samplers() {
        let g = gen_balanced_tree(3, 3).unwrap();
        for trace in [
            simulate_fpp(&g, 5, 1.5, 11).unwrap(),
            simulate_gillespie(&g, 5, 1.5, 11).unwrap(),
        ] {
            assert_eq!(trace.source(), 5);
            assert_eq!(trace.order()[0], 5);
            assert_eq!(trace.sorted_times()[0], 0.0);
            assert!(trace.sorted_times().windows(2).all(|w| w[0] < w[1]));
            let mut seen = trace.order().to_vec();
            seen.sort_unstable();
            assert_eq!(seen, (0..g.vertex_count()).collect::<Vec<_>>());
            for (v, t) in trace.events() {
                assert_eq!(trace.time(v), t);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let g = gen_balanced_tree(2, 6).unwrap();
        assert_eq!(
            simulate_fpp(&g, 0, 1.0, 42).unwrap(),
            simulate_fpp(&g, 0, 1.0, 42).unwrap()
        );
        assert_eq!(
            simulate_gillespie(&g, 0, 1.0, 42).unwrap(),
            simulate_gillespie(&g, 0, 1.0, 42).unwrap()
        );
        assert_ne!(
            simulate_fpp(&g, 0, 1.0, 42).unwrap(),
            simulate_fpp(&g, 0, 1.0, 43).unwrap()
        );
    }

    #[test]
    fn disconnected_graph_is_an_error() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            simulate_fpp(&g, 0, 1.0, 1),
            Err(Error::Disconnected { unreached: 2, .. })
        ));
        assert!(matches!(
            simulate_gillespie(&g, 0, 1.0, 1),
            Err(Error::Disconnected { unreached: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_rate_and_source() {
        let g = path2();
        assert!(simulate_fpp(&g, 0, 0.0, 1).is_err());
        assert!(simulate_fpp(&g, 0, f64::NAN, 1).is_err());
        assert!(simulate_gillespie(&g, 2, 1.0, 1).is_err());
    }

    #[test]
    fn two_vertex_path_means() {
        let g = path2();
        let runs = 10_000;
        let fpp: f64 = (0..runs)
            .map(|s| simulate_fpp(&g, 0, 1.0, s).unwrap().time(1))
            .sum::<f64>()
            / runs as f64;
        assert!((fpp - 1.0).abs() <= 0.03, "fpp mean {fpp}");
        let gil: f64 = (0..runs)
            .map(|s| simulate_gillespie(&g, 0, 2.0, s).unwrap().time(1))
            .sum::<f64>()
            / runs as f64;
        assert!((gil - 0.5).abs() <= 0.02, "gillespie mean {gil}");
    }

    #[test]
    fn star_orders_are_exchangeable() {
        let g = star(3);
        let runs = 10_000u64;
        let mut counts = std::collections::HashMap::new();
        for s in 0..runs {
            let t = simulate_fpp(&g, 0, 1.0, s).unwrap();
            *counts.entry(t.order()[1..].to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (order, c) in counts {
            let f = c as f64 / runs as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.02, "{order:?}: {f}");
        }
    }

    #[test]
    fn infection_count_edges() {
        let g = gen_balanced_tree(2, 4).unwrap();
        let t = simulate_fpp(&g, 0, 1.0, 3).unwrap();
        assert_eq!(infection_count(&t, -1.0, 0.0).unwrap().count, 1);
        assert_eq!(
            infection_count(&t, t.total_time(), f64::INFINITY)
                .unwrap()
                .count,
            1
        );
        assert_eq!(
            infection_count(&t, 0.0, f64::INFINITY).unwrap().count,
            g.vertex_count()
        );
        assert!(matches!(
            infection_count(&t, 2.0, 1.0),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn infection_count_matches_linear_scan() {
        let g = gen_balanced_tree(3, 4).unwrap();
        let t = simulate_gillespie(&g, 7, 1.0, 9).unwrap();
        let times = t.times_by_vertex();
        let probes = [0.0, 0.3, 1.1, 2.5, t.total_time()];
        for &a in &probes {
            for &b in &probes {
                if a > b {
                    continue;
                }
                let brute = times.iter().filter(|&&x| a <= x && x <= b).count();
                assert_eq!(infection_count(&t, a, b).unwrap().count, brute);
            }
        }
        // endpoints exactly at event times are included
        let tv = t.sorted_times()[10];
        assert_eq!(infection_count(&t, tv, tv).unwrap().count, 1);
    }

    #[test]
    fn cut_size_edges_and_oracle() {
        let g = gen_balanced_tree(2, 5).unwrap();
        let t = simulate_fpp(&g, 3, 1.0, 5).unwrap();
        assert_eq!(cut_size(&g, &t, 0.0), g.degree(3));
        assert_eq!(cut_size(&g, &t, t.total_time()), 0);
        for &probe in &[0.2, 0.9, 1.7, 3.0] {
            let mut brute = 0;
            for u in 0..g.vertex_count() {
                for v in 0..g.vertex_count() {
                    if g.has_edge(u, v) && t.time(u) <= probe && probe < t.time(v) {
                        brute += 1;
                    }
                }
            }
            assert_eq!(cut_size(&g, &t, probe), brute);
        }
    }

    #[test]
    fn d_i_exact_cases() {
        let g = path2();
        let t = simulate_fpp(&g, 0, 1.0, 1).unwrap();
        assert_eq!(d_i_exact(&g, &t, 1), -1.0);

        let g = star(6);
        let t = simulate_fpp(&g, 0, 1.0, 2).unwrap();
        assert_eq!(d_i_exact(&g, &t, 0), 6.0);
    }

    #[test]
    fn d_i_exact_equals_cut_jump() {
        let g = gen_balanced_tree(3, 3).unwrap();
        let lambda = 0.7;
        let t = simulate_gillespie(&g, 2, lambda, 21).unwrap();
        let times = t.sorted_times();
        for (i, v) in t.order().iter().copied().enumerate() {
            // just before T(v): midpoint to the previous event (or -1 for the source)
            let before = if i == 0 {
                -1.0
            } else {
                0.5 * (times[i - 1] + times[i])
            };
            let after = cut_size(&g, &t, times[i]) as f64;
            let prior = if i == 0 {
                0.0
            } else {
                cut_size(&g, &t, before) as f64
            };
            assert_eq!(d_i_exact(&g, &t, v), lambda * (after - prior));
        }
    }

    #[test]
    fn event_a_basic() {
        let g = path2();
        let t = simulate_fpp(&g, 0, 1.0, 1).unwrap();
        let stats = check_event_a(&g, &t, 1);
        assert_eq!(stats.max_front_degree, 1);
        assert!(stats.event_a_ok);
        assert_eq!(stats.total_time, t.time(1));
    }

    #[test]
    fn event_a_holds_when_degree_bound_dominates() {
        let g = gen_balanced_tree(4, 4).unwrap();
        let t = simulate_fpp(&g, 0, 1.0, 8).unwrap();
        assert!((g.max_degree() as f64) <= event_a_threshold(g.vertex_count(), 1));
        assert!(check_event_a(&g, &t, 1).event_a_ok);
    }

    #[test]
    fn trace_construction_errors() {
        assert!(CascadeTrace::from_times(1.0, &[0.0, 0.0]).is_err());
        assert!(CascadeTrace::from_times(1.0, &[0.5, 1.0]).is_err());
        assert!(CascadeTrace::from_times(1.0, &[0.0, -1.0]).is_err());
        assert!(CascadeTrace::from_events(2, 1.0, None, vec![(0, 0.0), (0, 1.0)]).is_err());
        let t = CascadeTrace::from_times(1.0, &[0.7, 0.0, 0.7]).unwrap();
        assert_eq!(t.source(), 1);
        // exact tie broken by vertex id
        assert_eq!(t.order(), &[1, 0, 2]);
    }
}
