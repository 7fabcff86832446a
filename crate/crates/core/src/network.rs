//! Water distribution network graph.
//!
//! A [`Network`] is an undirected graph of junctions and sources (tanks,
//! reservoirs) joined by pipes. Construction validates the whole graph:
//! unique ids, no dangling or self-loop pipes, positive lengths, non-negative
//! demands, at least one source and a single connected component. Once built
//! a network is immutable.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

/// Fictitious edges are this fraction of the shortest real pipe.
pub const FICTITIOUS_LENGTH_FACTOR: f64 = 1e-6;

/// Prefix reserved for the ids of fictitious nodes and edges.
pub const FICTITIOUS_PREFIX: &str = "~fict";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Junction,
    Source,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub coords: Option<(f64, f64)>,
    pub kind: NodeKind,
    /// Water volume per year, in network-wide consistent units.
    pub demand: f64,
    pub accessible: bool,
    fictitious: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind, demand: f64, accessible: bool) -> Self {
        Node {
            id: id.into(),
            coords: None,
            kind,
            demand,
            accessible,
            fictitious: false,
        }
    }

    pub fn junction(id: impl Into<String>, demand: f64) -> Self {
        Node::new(id, NodeKind::Junction, demand, true)
    }

    pub fn source(id: impl Into<String>) -> Self {
        Node::new(id, NodeKind::Source, 0.0, true)
    }

    pub fn with_coords(mut self, x: f64, y: f64) -> Self {
        self.coords = Some((x, y));
        self
    }

    pub fn with_accessible(mut self, accessible: bool) -> Self {
        self.accessible = accessible;
        self
    }

    pub fn is_source(&self) -> bool {
        self.kind == NodeKind::Source
    }

    /// True for nodes added by [`Network::augment_with_fictitious`].
    pub fn is_fictitious(&self) -> bool {
        self.fictitious
    }
}

/// A pipe as supplied by the caller, endpoints given by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

impl EdgeSpec {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>, length: f64) -> Self {
        EdgeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
        }
    }
}

/// A validated pipe. Endpoints are node indices into [`Network::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub endpoints: (usize, usize),
    pub length: f64,
    fictitious: bool,
}

impl Edge {
    pub fn is_fictitious(&self) -> bool {
        self.fictitious
    }

    /// The endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network has no nodes")]
    Empty,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown node `{node}`")]
    DanglingEndpoint { edge: String, node: String },
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("edge `{edge}` has non-positive length {length}")]
    NonPositiveLength { edge: String, length: f64 },
    #[error("node `{node}` has invalid demand {demand}")]
    InvalidDemand { node: String, demand: f64 },
    #[error("network is disconnected: node `{unreachable}` is not reachable from `{root}`")]
    Disconnected { root: String, unreachable: String },
    #[error("network has no source node")]
    NoSource,
    #[error("all demands are zero; normalized demand is undefined")]
    ZeroDemand,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    /// Per node: `(neighbor, edge)` index pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
    node_index: BTreeMap<String, usize>,
}

impl Network {
    /// Builds and validates a network.
    pub fn new(nodes: Vec<Node>, edges: Vec<EdgeSpec>) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut node_index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if !node.demand.is_finite() || node.demand < 0.0 {
                return Err(NetworkError::InvalidDemand {
                    node: node.id.clone(),
                    demand: node.demand,
                });
            }
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(NetworkError::DuplicateNode(node.id.clone()));
            }
        }

        let mut seen_edges = BTreeMap::new();
        let mut validated = Vec::with_capacity(edges.len());
        for spec in edges {
            if seen_edges.insert(spec.id.clone(), ()).is_some() {
                return Err(NetworkError::DuplicateEdge(spec.id));
            }
            let lookup = |id: &String| {
                node_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| NetworkError::DanglingEndpoint {
                        edge: spec.id.clone(),
                        node: id.clone(),
                    })
            };
            let a = lookup(&spec.from)?;
            let b = lookup(&spec.to)?;
            if a == b {
                return Err(NetworkError::SelfLoop(spec.id));
            }
            if !spec.length.is_finite() || spec.length <= 0.0 {
                return Err(NetworkError::NonPositiveLength {
                    edge: spec.id,
                    length: spec.length,
                });
            }
            let fictitious = spec.id.starts_with(FICTITIOUS_PREFIX);
            validated.push(Edge {
                id: spec.id,
                endpoints: (a, b),
                length: spec.length,
                fictitious,
            });
        }

        let mut nodes = nodes;
        for node in &mut nodes {
            node.fictitious = node.id.starts_with(FICTITIOUS_PREFIX);
        }

        let net = Network::assemble(nodes, validated, node_index);
        net.check_sources()?;
        net.check_connected()?;
        Ok(net)
    }

    fn assemble(nodes: Vec<Node>, edges: Vec<Edge>, node_index: BTreeMap<String, usize>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (e, edge) in edges.iter().enumerate() {
            let (a, b) = edge.endpoints;
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        Network {
            nodes,
            edges,
            adjacency,
            node_index,
        }
    }

    fn check_sources(&self) -> Result<(), NetworkError> {
        if self.nodes.iter().any(Node::is_source) {
            Ok(())
        } else {
            Err(NetworkError::NoSource)
        }
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(i) => Err(NetworkError::Disconnected {
                root: self.nodes[0].id.clone(),
                unreachable: self.nodes[i].id.clone(),
            }),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn require_index(&self, id: &str) -> Result<usize, NetworkError> {
        self.index_of(id)
            .ok_or_else(|| NetworkError::UnknownNode(String::from(id)))
    }

    pub fn source_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_source() && !n.fictitious).count()
    }

    /// Edge specs in the form accepted by [`Network::new`].
    pub fn edge_specs(&self) -> Vec<EdgeSpec> {
        self.edges
            .iter()
            .map(|e| EdgeSpec {
                id: e.id.clone(),
                from: self.nodes[e.endpoints.0].id.clone(),
                to: self.nodes[e.endpoints.1].id.clone(),
                length: e.length,
            })
            .collect()
    }

    /// `demand_i / max_j demand_j`, indexed like [`Network::nodes`].
    pub fn normalized_demands(&self) -> Result<Vec<f64>, NetworkError> {
        let max = self.nodes.iter().map(|n| n.demand).fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(NetworkError::ZeroDemand);
        }
        Ok(self.nodes.iter().map(|n| n.demand / max).collect())
    }

    /// Number of fictitious nodes attached to each source: the integer part
    /// of `n_demand / n_sources`, where `n_demand` counts the non-source nodes.
    pub fn fictitious_per_source(&self) -> usize {
        fictitious_per_source(self.nodes.len() - self.source_count(), self.source_count())
    }

    /// Returns a copy of the network with a fan of fictitious leaf nodes hung
    /// off every source, so that sources act as supply hubs for betweenness.
    ///
    /// Fictitious nodes and edges are appended after the real ones, so real
    /// node and edge indices are unchanged in the augmented graph.
    pub fn augment_with_fictitious(&self) -> Result<Network, NetworkError> {
        let per_source = self.fictitious_per_source();
        let min_length = self
            .edges
            .iter()
            .filter(|e| !e.fictitious)
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min);
        // Single-node networks have no pipes to take a scale from.
        let length = if min_length.is_finite() {
            FICTITIOUS_LENGTH_FACTOR * min_length
        } else {
            FICTITIOUS_LENGTH_FACTOR
        };

        let mut nodes = self.nodes.clone();
        let mut edges = self.edge_specs();
        for source in self.nodes.iter().filter(|n| n.is_source() && !n.fictitious) {
            for k in 0..per_source {
                let id = format!("{FICTITIOUS_PREFIX}:{}:{k}", source.id);
                let mut node = Node::new(id.clone(), NodeKind::Junction, 0.0, false);
                node.coords = source.coords;
                nodes.push(node);
                edges.push(EdgeSpec::new(id.clone(), source.id.clone(), id, length));
            }
        }
        Network::new(nodes, edges)
    }
}

/// Integer part of `demand_nodes / sources`.
pub fn fictitious_per_source(demand_nodes: usize, sources: usize) -> usize {
    demand_nodes.checked_div(sources).unwrap_or(0)
}
