//! Immutable undirected graphs, class-membership checks and the generators
//! used by the experiments.
//!
//! Vertices are dense ids `0..n`. Generators number vertices in BFS order
//! from the root so that traces are reproducible across runs.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of vertices a generator may produce.
pub const MAX_VERTICES: usize = 50_000_000;

/// Undirected simple graph in compressed adjacency form.
///
/// Neighbor lists are sorted ascending and contain no duplicates or
/// self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Builds a canonical graph from an edge list, collapsing duplicates.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > MAX_VERTICES {
            return Err(Error::TooLarge {
                requested: n as u128,
                limit: MAX_VERTICES,
            });
        }
        let mut degree = vec![0usize; n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in edges {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }

        // Sort and dedup each list, compacting in place.
        let mut compact = Vec::with_capacity(neighbors.len());
        let mut new_offsets = Vec::with_capacity(n + 1);
        new_offsets.push(0);
        for v in 0..n {
            let list = &mut neighbors[offsets[v]..offsets[v + 1]];
            list.sort_unstable();
            let start = compact.len();
            for &w in list.iter() {
                if compact.len() == start || *compact.last().unwrap() != w {
                    compact.push(w);
                }
            }
            new_offsets.push(compact.len());
        }
        let edge_count = compact.len() / 2;
        Ok(Self {
            offsets: new_offsets,
            neighbors: compact,
            edge_count,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.vertex_count()).map(|v| self.degree(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Position of `v` inside the flat neighbor array of `u`, if adjacent.
    pub(crate) fn slot(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|i| self.offsets[u] + i)
    }

    pub(crate) fn slot_range(&self, u: usize) -> std::ops::Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub(crate) fn slot_target(&self, slot: usize) -> usize {
        self.neighbors[slot]
    }

    pub(crate) fn slot_count(&self) -> usize {
        self.neighbors.len()
    }

    /// BFS hop distances from `source`; `usize::MAX` marks unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &w in self.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        n == 0 || self.bfs_distances(0).iter().all(|&d| d != usize::MAX)
    }

    /// Returns the same graph with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        Self::from_edges(self.vertex_count(), &edges)
    }

    /// Writes the plain-text format: `n m` header then one `u v` line per edge.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.vertex_count(), self.edge_count)?;
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))??;
        let mut it = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| parse_err(1, format!("missing {name}")))?
                .parse()
                .map_err(|e| parse_err(1, format!("{name}: {e}")))
        };
        let n = field("vertex count")?;
        let m = field("edge count")?;
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 2;
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| parse_err(lineno, "expected two vertex ids".into()))?
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("{e}")))
            };
            edges.push((next()?, next()?));
        }
        if edges.len() != m {
            return Err(parse_err(
                1,
                format!("header declares {m} edges, found {}", edges.len()),
            ));
        }
        Self::from_edges(n, &edges)
    }
}

/// Outcome of checking membership in the class of graphs with at most `m`
/// vertices of degree at least `D` and all other degrees at most `d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    pub is_member: bool,
    pub connected: bool,
    pub highdeg_set: Vec<usize>,
    pub max_lowdeg: usize,
    /// Vertices breaking the degree conditions, with their degrees.
    pub violations: Vec<(usize, usize)>,
}

pub fn validate_class(g: &Graph, m: usize, d: usize, big_d: usize) -> Result<ClassReport> {
    if d >= big_d {
        return Err(Error::InvalidParameter(format!(
            "low-degree bound d = {d} must be below high-degree threshold D = {big_d}"
        )));
    }
    let connected = g.is_connected();
    let mut highdeg_set = Vec::new();
    let mut max_lowdeg = 0;
    let mut violations = Vec::new();
    for v in 0..g.vertex_count() {
        let deg = g.degree(v);
        if deg >= big_d {
            highdeg_set.push(v);
        } else {
            max_lowdeg = max_lowdeg.max(deg);
            if deg > d {
                violations.push((v, deg));
            }
        }
    }
    if highdeg_set.len() > m {
        violations.extend(highdeg_set.iter().map(|&v| (v, g.degree(v))));
        violations.sort_unstable();
    }
    Ok(ClassReport {
        is_member: connected && violations.is_empty(),
        connected,
        highdeg_set,
        max_lowdeg,
        violations,
    })
}

/// Size of a complete `b`-ary tree of the given height.
pub fn balanced_tree_size(branching: usize, height: usize) -> Result<usize> {
    if branching < 2 || height < 1 {
        return Err(Error::InvalidParameter(format!(
            "balanced tree needs branching >= 2 and height >= 1, got ({branching}, {height})"
        )));
    }
    let mut total: u128 = 0;
    let mut layer: u128 = 1;
    for _ in 0..=height {
        total += layer;
        layer = layer.saturating_mul(branching as u128);
        if total > MAX_VERTICES as u128 {
            return Err(Error::TooLarge {
                requested: total,
                limit: MAX_VERTICES,
            });
        }
    }
    Ok(total as usize)
}

/// First vertex id of `layer` in BFS numbering.
pub fn layer_start(branching: usize, layer: usize) -> usize {
    (0..layer).map(|l| branching.pow(l as u32)).sum()
}

fn balanced_tree_edges(branching: usize, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|v| ((v - 1) / branching, v)).collect()
}

/// Complete `b`-ary tree of the given height; the root is vertex 0 and the
/// children of `v` are `b*v + 1 ..= b*v + b`.
pub fn gen_balanced_tree(branching: usize, height: usize) -> Result<Graph> {
    let n = balanced_tree_size(branching, height)?;
    Graph::from_edges(n, &balanced_tree_edges(branching, n))
}

/// Balanced tree with `hubs` vertices of `layer` raised to degree
/// `planted_degree` by attaching fresh leaves.
#[derive(Debug, Clone)]
pub struct PlantedTree {
    pub graph: Graph,
    pub planted: Vec<usize>,
}

/// Balanced tree where the first BFS vertex of `layer` receives enough
/// fresh leaves to reach total degree `planted_degree`.
pub fn gen_planted_star_tree(
    branching: usize,
    height: usize,
    layer: usize,
    planted_degree: usize,
) -> Result<(Graph, usize)> {
    let t = gen_planted_hubs_tree(branching, height, layer, planted_degree, 1)?;
    Ok((t.graph, t.planted[0]))
}

/// Generalization of [`gen_planted_star_tree`] with `hubs` planted vertices
/// spread evenly across `layer`.
pub fn gen_planted_hubs_tree(
    branching: usize,
    height: usize,
    layer: usize,
    planted_degree: usize,
    hubs: usize,
) -> Result<PlantedTree> {
    let base = balanced_tree_size(branching, height)?;
    if layer < 1 || layer > height {
        return Err(Error::InvalidParameter(format!(
            "planted layer {layer} must lie in 1..={height}"
        )));
    }
    // Internal vertices have degree b+1; the last layer holds leaves of degree 1.
    let base_degree = if layer == height { 1 } else { branching + 1 };
    if planted_degree <= branching + 1 {
        return Err(Error::InvalidParameter(format!(
            "planted degree {planted_degree} must exceed b+1 = {}",
            branching + 1
        )));
    }
    let layer_size = branching.pow(layer as u32);
    if hubs < 1 || hubs > layer_size {
        return Err(Error::InvalidParameter(format!(
            "cannot plant {hubs} hubs in a layer of {layer_size} vertices"
        )));
    }
    let extra = planted_degree - base_degree;
    let n = base as u128 + (extra as u128) * (hubs as u128);
    if n > MAX_VERTICES as u128 {
        return Err(Error::TooLarge {
            requested: n,
            limit: MAX_VERTICES,
        });
    }
    let n = n as usize;
    let start = layer_start(branching, layer);
    let planted: Vec<usize> = (0..hubs).map(|j| start + j * layer_size / hubs).collect();
    let mut edges = balanced_tree_edges(branching, base);
    edges.reserve(extra * hubs);
    let mut next = base;
    for &hub in &planted {
        for _ in 0..extra {
            edges.push((hub, next));
            next += 1;
        }
    }
    Ok(PlantedTree {
        graph: Graph::from_edges(n, &edges)?,
        planted,
    })
}

/// Low-diameter core tree with a disjoint path hanging off every core vertex.
#[derive(Debug, Clone)]
pub struct Scaffold {
    pub graph: Graph,
    /// Core vertices are `0..core_size`.
    pub core_size: usize,
    pub path_len: usize,
    /// Path endpoints; `leaves[u]` hangs off core vertex `u`.
    pub leaves: Vec<usize>,
}

impl Scaffold {
    /// Core vertex the path ending at `leaf` starts from.
    pub fn anchor(&self, leaf: usize) -> Option<usize> {
        if leaf < self.core_size {
            return None;
        }
        let u = (leaf - self.core_size) / self.path_len;
        (self.leaves.get(u) == Some(&leaf)).then_some(u)
    }
}

/// Core = heap-ordered binary tree on `core_size` vertices (max degree 3);
/// every core vertex `u` gets a path of `path_len` new vertices
/// `core_size + u*path_len ..`, the last of which is a leaf.
pub fn gen_h_scaffold(core_size: usize, path_len: usize) -> Result<Scaffold> {
    if core_size < 2 || path_len < 1 {
        return Err(Error::InvalidParameter(format!(
            "scaffold needs N >= 2 and L >= 1, got ({core_size}, {path_len})"
        )));
    }
    let n = (core_size as u128) * (path_len as u128 + 1);
    if n > MAX_VERTICES as u128 {
        return Err(Error::TooLarge {
            requested: n,
            limit: MAX_VERTICES,
        });
    }
    let n = n as usize;
    let mut edges = Vec::with_capacity(n - 1);
    edges.extend((1..core_size).map(|v| ((v - 1) / 2, v)));
    let mut leaves = Vec::with_capacity(core_size);
    for u in 0..core_size {
        let first = core_size + u * path_len;
        edges.push((u, first));
        for j in 1..path_len {
            edges.push((first + j - 1, first + j));
        }
        leaves.push(first + path_len - 1);
    }
    Ok(Scaffold {
        graph: Graph::from_edges(n, &edges)?,
        core_size,
        path_len,
        leaves,
    })
}

/// Which generator to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenSpec {
    BalancedTree {
        branching: usize,
        height: usize,
    },
    PlantedStarTree {
        branching: usize,
        height: usize,
        layer: usize,
        planted_degree: usize,
        #[serde(default = "one")]
        hubs: usize,
    },
    HScaffold {
        core_size: usize,
        path_len: usize,
    },
    EdgeList {
        path: std::path::PathBuf,
    },
}

fn one() -> usize {
    1
}

/// A generated graph plus the vertices the generator planted, if any.
#[derive(Debug, Clone)]
pub struct Generated {
    pub graph: Graph,
    pub planted: Vec<usize>,
}

impl GenSpec {
    pub fn generate(&self) -> Result<Generated> {
        match *self {
            GenSpec::BalancedTree { branching, height } => Ok(Generated {
                graph: gen_balanced_tree(branching, height)?,
                planted: Vec::new(),
            }),
            GenSpec::PlantedStarTree {
                branching,
                height,
                layer,
                planted_degree,
                hubs,
            } => {
                let t = gen_planted_hubs_tree(branching, height, layer, planted_degree, hubs)?;
                Ok(Generated {
                    graph: t.graph,
                    planted: t.planted,
                })
            }
            GenSpec::HScaffold {
                core_size,
                path_len,
            } => Ok(Generated {
                graph: gen_h_scaffold(core_size, path_len)?.graph,
                planted: Vec::new(),
            }),
            GenSpec::EdgeList { ref path } => Ok(Generated {
                graph: Graph::load(path)?,
                planted: Vec::new(),
            }),
        }
    }
}
