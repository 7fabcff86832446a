//! Shortest-path betweenness on pipe-length weighted networks.
//!
//! Betweenness is accumulated one source vertex at a time (Brandes): a
//! Dijkstra pass counts shortest paths, then dependencies are folded back
//! along the predecessor DAG. Sums run over unordered pairs `{s, t}`.
//!
//! Per-source contributions are exposed so callers can fan the sources out
//! across threads; [`Betweenness::accumulate`] in source order gives the same
//! bits as the serial routine.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::network::{Network, NetworkError};

/// Relative tolerance under which two path lengths count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub fn lengths_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.max(b).max(1.0)
}

/// Shortest-path data for a single source.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCounts {
    pub source: usize,
    pub distance: Vec<f64>,
    /// Number of shortest paths from the source to each node.
    pub sigma: Vec<f64>,
    /// `(predecessor node, edge)` pairs on shortest paths.
    pub predecessors: Vec<Vec<(usize, usize)>>,
    /// Nodes in order of non-decreasing distance.
    pub order: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index for determinism
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn shortest_paths(net: &Network, source: usize) -> PathCounts {
    let n = net.node_count();
    let mut distance = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0; n];
    let mut predecessors: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();

    distance[source] = 0.0;
    sigma[source] = 1.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });

    while let Some(HeapEntry { dist, node: v }) = heap.pop() {
        if settled[v] || dist > distance[v] {
            continue;
        }
        settled[v] = true;
        order.push(v);
        for &(w, e) in net.neighbors(v) {
            if settled[w] {
                continue;
            }
            let alt = distance[v] + net.edges()[e].length;
            if distance[w].is_infinite() || (alt < distance[w] && !lengths_equal(alt, distance[w])) {
                distance[w] = alt;
                sigma[w] = sigma[v];
                predecessors[w].clear();
                predecessors[w].push((v, e));
                heap.push(HeapEntry { dist: alt, node: w });
            } else if lengths_equal(alt, distance[w]) {
                sigma[w] += sigma[v];
                predecessors[w].push((v, e));
            }
        }
    }

    PathCounts {
        source,
        distance,
        sigma,
        predecessors,
        order,
    }
}

/// Raw betweenness, node and edge values indexed like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Betweenness {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl Betweenness {
    pub fn zeros(net: &Network) -> Self {
        Betweenness {
            node: vec![0.0; net.node_count()],
            edge: vec![0.0; net.edge_count()],
        }
    }

    /// Dependencies of every target on `source`, counted over ordered pairs
    /// `(source, t)`.
    pub fn single_source(net: &Network, source: usize) -> Self {
        let paths = shortest_paths(net, source);
        let mut out = Betweenness::zeros(net);
        let mut delta = vec![0.0; net.node_count()];
        for &w in paths.order.iter().rev() {
            for &(v, e) in &paths.predecessors[w] {
                let c = paths.sigma[v] / paths.sigma[w] * (1.0 + delta[w]);
                out.edge[e] += c;
                delta[v] += c;
            }
            if w != source {
                out.node[w] += delta[w];
            }
        }
        out
    }

    pub fn accumulate(&mut self, other: &Betweenness) {
        for (a, b) in self.node.iter_mut().zip(&other.node) {
            *a += b;
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a += b;
        }
    }

    /// Converts ordered-pair sums into unordered-pair sums.
    pub fn halve(mut self) -> Self {
        self.node.iter_mut().for_each(|v| *v *= 0.5);
        self.edge.iter_mut().for_each(|v| *v *= 0.5);
        self
    }
}

/// Node and edge betweenness over all unordered pairs.
pub fn betweenness(net: &Network) -> Betweenness {
    let mut total = Betweenness::zeros(net);
    for s in 0..net.node_count() {
        total.accumulate(&Betweenness::single_source(net, s));
    }
    total.halve()
}

/// Raw node betweenness keyed by node id.
pub fn node_betweenness(net: &Network) -> BTreeMap<String, f64> {
    let b = betweenness(net);
    net.nodes()
        .iter()
        .zip(b.node)
        .map(|(n, v)| (n.id.clone(), v))
        .collect()
}

/// Raw edge betweenness keyed by edge id.
pub fn edge_betweenness(net: &Network) -> BTreeMap<String, f64> {
    let b = betweenness(net);
    net.edges()
        .iter()
        .zip(b.edge)
        .map(|(e, v)| (e.id.clone(), v))
        .collect()
}

/// Normalized edge weights in `[0, 1]` over the real pipes of a network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CentralityMap {
    pub values: BTreeMap<String, f64>,
}

impl CentralityMap {
    pub fn get(&self, edge_id: &str) -> Option<f64> {
        self.values.get(edge_id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Every real edge with weight 1, the unweighted cover.
    pub fn uniform(net: &Network) -> Self {
        CentralityMap {
            values: net
                .edges()
                .iter()
                .filter(|e| !e.is_fictitious())
                .map(|e| (e.id.clone(), 1.0))
                .collect(),
        }
    }

    /// Restricts raw edge betweenness of an augmented network to its real
    /// edges and divides by the maximum. All-zero input yields all ones.
    pub fn from_raw(augmented: &Network, raw_edges: &[f64]) -> Self {
        let real: Vec<(String, f64)> = augmented
            .edges()
            .iter()
            .zip(raw_edges)
            .filter(|(e, _)| !e.is_fictitious())
            .map(|(e, &v)| (e.id.clone(), v))
            .collect();
        let max = real.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        let values = real
            .into_iter()
            .map(|(id, v)| (id, if max > 0.0 { v / max } else { 1.0 }))
            .collect();
        CentralityMap { values }
    }
}

/// Edge betweenness with supply hubs: sources get a fan of fictitious
/// neighbours, pipe lengths weight the paths, and the result is normalized
/// over real pipes.
pub fn tailored_centrality(net: &Network) -> Result<CentralityMap, NetworkError> {
    let augmented = net.augment_with_fictitious()?;
    let raw = betweenness(&augmented);
    Ok(CentralityMap::from_raw(&augmented, &raw.edge))
}
