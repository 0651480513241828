//! Grid topology: a connected weighted graph with symmetric couplings.
//!
//! Edge-list files are plain CSV `i,j,K` with zero-based node indices and
//! `#` comment lines. Synthetic generators provide desk-scale stand-ins for
//! transmission-grid geometries that are not publicly available.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Undirected edge with coupling strength, stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Synthetic topology families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Ring,
    RandomRegular,
    RewiredLattice,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Ring => write!(f, "ring"),
            TopologyKind::RandomRegular => write!(f, "random-regular"),
            TopologyKind::RewiredLattice => write!(f, "rewired-lattice"),
        }
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(TopologyKind::Ring),
            "random-regular" => Ok(TopologyKind::RandomRegular),
            "rewired-lattice" => Ok(TopologyKind::RewiredLattice),
            other => Err(Error::InvalidParameter(format!(
                "unknown topology kind '{other}' (expected ring | random-regular | rewired-lattice)"
            ))),
        }
    }
}

/// Connected weighted graph over `node_count` nodes.
#[derive(Debug, Clone)]
pub struct GridTopology {
    node_count: usize,
    edges: Vec<Edge>,
    /// Adjacency list: per node, (neighbor, coupling).
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl GridTopology {
    /// Validates no self-loops, no duplicate edges, positive couplings,
    /// in-range indices, and connectivity.
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTopology("node count must be positive".into()));
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for e in &edges {
            if e.i == e.j {
                return Err(Error::InvalidTopology(format!("self-loop at node {}", e.i)));
            }
            if e.i >= node_count || e.j >= node_count {
                return Err(Error::InvalidTopology(format!(
                    "edge ({}, {}) out of range for {} nodes",
                    e.i, e.j, node_count
                )));
            }
            if e.coupling <= 0.0 || !e.coupling.is_finite() {
                return Err(Error::InvalidTopology(format!(
                    "non-positive coupling {} on edge ({}, {})",
                    e.coupling, e.i, e.j
                )));
            }
            let (a, b) = if e.i < e.j { (e.i, e.j) } else { (e.j, e.i) };
            if !seen.insert((a, b)) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({a}, {b})")));
            }
            normalized.push(Edge {
                i: a,
                j: b,
                coupling: e.coupling,
            });
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for e in &normalized {
            adjacency[e.i].push((e.j, e.coupling));
            adjacency[e.j].push((e.i, e.coupling));
        }
        let topo = Self {
            node_count,
            edges: normalized,
            adjacency,
        };
        if !topo.is_connected() {
            let (reached, total) = topo.component_of(0);
            return Err(Error::Disconnected(format!(
                "only {reached} of {total} nodes reachable from node 0"
            )));
        }
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Same graph with every coupling replaced by `k`.
    pub fn with_uniform_coupling(&self, k: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                i: e.i,
                j: e.j,
                coupling: k,
            })
            .collect();
        Self::new(self.node_count, edges)
    }

    fn component_of(&self, start: usize) -> (usize, usize) {
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        (count, self.node_count)
    }

    pub fn is_connected(&self) -> bool {
        self.component_of(0).0 == self.node_count
    }

    /// Hop distances from `start` to every node (BFS).
    pub fn hop_distances(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Articulation points (cut vertices) via iterative Tarjan lowlink.
    pub fn articulation_points(&self) -> Vec<bool> {
        let n = self.node_count;
        let mut is_art = vec![false; n];
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut parent = vec![usize::MAX; n];
        let mut timer = 0usize;
        // (node, neighbor cursor)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            let mut root_children = 0usize;
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, 0));
            while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
                if *cursor < self.adjacency[v].len() {
                    let (w, _) = self.adjacency[v][*cursor];
                    *cursor += 1;
                    if disc[w] == usize::MAX {
                        parent[w] = v;
                        if v == root {
                            root_children += 1;
                        }
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, 0));
                    } else if w != parent[v] {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(u, _)) = stack.last() {
                        low[u] = low[u].min(low[v]);
                        if u != root && low[v] >= disc[u] {
                            is_art[u] = true;
                        }
                    }
                }
            }
            if root_children > 1 {
                is_art[root] = true;
            }
        }
        is_art
    }
}

/// Load a topology from a CSV edge list `i,j,K` (zero-based, `#` comments).
pub fn load_topology<P: AsRef<Path>>(path: P) -> Result<GridTopology> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut edges = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path_str.clone(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields `i,j,K`, got {}: '{trimmed}'",
                fields.len()
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("bad node index '{}': {e}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| parse_err(format!("bad node index '{}': {e}", fields[1])))?;
        let k: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(format!("bad coupling '{}': {e}", fields[2])))?;
        if k <= 0.0 {
            return Err(parse_err(format!("non-positive coupling {k}")));
        }
        max_index = max_index.max(i).max(j);
        edges.push(Edge { i, j, coupling: k });
    }
    if edges.is_empty() {
        return Err(Error::InvalidTopology(format!("{path_str}: no edges")));
    }
    GridTopology::new(max_index + 1, edges)
}

/// Generate a connected synthetic topology with exactly `n` nodes and
/// `edge_count` edges. Deterministic for a fixed seed. All couplings are
/// set to `coupling`.
pub fn generate_topology(
    kind: TopologyKind,
    n: usize,
    edge_count: usize,
    seed: u64,
    coupling: f64,
) -> Result<GridTopology> {
    if n < 2 {
        return Err(Error::Infeasible("need at least 2 nodes".into()));
    }
    if edge_count < n - 1 {
        return Err(Error::Infeasible(format!(
            "edge_count {edge_count} < n-1 = {} cannot be connected",
            n - 1
        )));
    }
    if edge_count > n * (n - 1) / 2 {
        return Err(Error::Infeasible(format!(
            "edge_count {edge_count} exceeds the simple-graph maximum {}",
            n * (n - 1) / 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        TopologyKind::Ring => {
            if edge_count != n {
                return Err(Error::Infeasible(format!(
                    "ring on {n} nodes has exactly {n} edges, requested {edge_count}"
                )));
            }
            let edges = (0..n)
                .map(|i| Edge {
                    i: i.min((i + 1) % n),
                    j: i.max((i + 1) % n),
                    coupling,
                })
                .collect();
            GridTopology::new(n, edges)
        }
        TopologyKind::RandomRegular => {
            let two_e = 2 * edge_count;
            if two_e % n != 0 {
                return Err(Error::Infeasible(format!(
                    "random-regular needs 2*edge_count divisible by n (2*{edge_count} vs {n})"
                )));
            }
            let degree = two_e / n;
            if degree < 2 {
                return Err(Error::Infeasible(format!(
                    "random-regular degree {degree} < 2 cannot be connected"
                )));
            }
            random_regular(n, degree, coupling, &mut rng)
        }
        TopologyKind::RewiredLattice => {
            // Path backbone guarantees connectivity; remaining edges are
            // random chords, giving a sparse small-world-like graph.
            let mut seen: HashSet<(usize, usize)> = HashSet::new();
            let mut edges = Vec::with_capacity(edge_count);
            for i in 0..n - 1 {
                seen.insert((i, i + 1));
                edges.push(Edge {
                    i,
                    j: i + 1,
                    coupling,
                });
            }
            while edges.len() < edge_count {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if a == b {
                    continue;
                }
                let key = (a.min(b), a.max(b));
                if seen.insert(key) {
                    edges.push(Edge {
                        i: key.0,
                        j: key.1,
                        coupling,
                    });
                }
            }
            GridTopology::new(n, edges)
        }
    }
}

/// Pairing-model k-regular graph with retries until simple and connected.
fn random_regular(n: usize, degree: usize, coupling: f64, rng: &mut ChaCha8Rng) -> Result<GridTopology> {
    const MAX_TRIES: usize = 200;
    for _ in 0..MAX_TRIES {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(degree)).collect();
        stubs.shuffle(rng);
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        let mut edges = Vec::with_capacity(n * degree / 2);
        let mut ok = true;
        for pair in stubs.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b {
                ok = false;
                break;
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                ok = false;
                break;
            }
            edges.push(Edge {
                i: key.0,
                j: key.1,
                coupling,
            });
        }
        if !ok {
            continue;
        }
        if let Ok(topo) = GridTopology::new(n, edges) {
            return Ok(topo);
        }
    }
    Err(Error::Infeasible(format!(
        "random-regular generation failed to reach a connected simple graph after {MAX_TRIES} tries"
    )))
}
