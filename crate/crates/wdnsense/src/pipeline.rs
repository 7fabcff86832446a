//! Steps shared by the CLI and the service.

use std::path::Path;

use wdnsense_core::anneal::{AnnealConfig, ExactSolver, Solver};
use wdnsense_core::placement::{decode, PlacementReport};
use wdnsense_core::{CentralityMap, Hyperparams, Network, QuboModel};

use crate::error::{Error, Result};
use crate::files;
use crate::formats::{CentralityDoc, NetworkDoc};
use crate::parallel::{self, ParallelAnnealer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Multi-start simulated annealing.
    #[default]
    Sa,
    /// Exhaustive enumeration; small models only.
    Exact,
}

impl SolverKind {
    pub fn build(self, config: AnnealConfig, exact_limit: usize) -> Box<dyn Solver + Send + Sync> {
        match self {
            SolverKind::Sa => Box::new(ParallelAnnealer::new(config)),
            SolverKind::Exact => Box::new(ExactSolver { limit: exact_limit }),
        }
    }
}

pub fn load_network(path: &Path, strict: bool) -> Result<Network> {
    let doc: NetworkDoc = files::read_doc(path, strict)?;
    files::in_file(path, doc.into_network())
}

/// Reads weights from `path`, or computes tailored centrality when absent.
pub fn load_or_compute_centrality(net: &Network, path: Option<&Path>, strict: bool) -> Result<CentralityMap> {
    match path {
        Some(path) => {
            let doc: CentralityDoc = files::read_doc(path, strict)?;
            files::in_file(path, doc.into_map(net))
        }
        None => Ok(parallel::tailored_centrality(net)?.0),
    }
}

/// Report for an explicit selection of node ids.
pub fn evaluate_selection(
    net: &Network,
    weights: &CentralityMap,
    hp: &Hyperparams,
    selected: &[String],
    energy: f64,
) -> Result<PlacementReport> {
    let ids: Vec<&str> = net.nodes().iter().map(|n| n.id.as_str()).collect();
    let model = QuboModel::with_nodes(ids.iter().copied())?;
    let mut x = vec![0u8; ids.len()];
    for id in selected {
        let i = model
            .registry()
            .node_index(id)
            .ok_or_else(|| Error::Placement(wdnsense_core::PlacementError::UnknownNode(id.clone())))?;
        x[i] = 1;
    }
    Ok(decode(net, weights, hp, model.registry(), &x, energy))
}
