//! Multi-threaded drivers for the core algorithms. Results are merged in a
//! fixed order, so they match the serial routines bit for bit.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use wdnsense_core::anneal::{anneal_run, AnnealConfig, AnnealError, AnnealResult, Solver};
use wdnsense_core::centrality::Betweenness;
use wdnsense_core::{CentralityMap, FrozenQubo, Network, NetworkError};

/// Simulated annealing with runs spread over the rayon pool. Each run
/// records its wall time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParallelAnnealer {
    pub config: AnnealConfig,
}

impl ParallelAnnealer {
    pub fn new(config: AnnealConfig) -> Self {
        ParallelAnnealer { config }
    }
}

impl Solver for ParallelAnnealer {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn minimize(&self, model: &FrozenQubo) -> Result<AnnealResult, AnnealError> {
        let schedule = self.config.resolve(model)?;
        let runs = (0..schedule.runs)
            .into_par_iter()
            .map(|run| {
                let start = Instant::now();
                let mut record = anneal_run(model, &schedule, run);
                record.wall_time = Some(start.elapsed());
                record
            })
            .collect();
        let mut result = AnnealResult::from_runs(runs)?;
        result.schedule = Some(schedule);
        Ok(result)
    }
}

/// Sources handled per parallel batch; bounds the number of per-source
/// partial results alive at once.
const SOURCE_CHUNK: usize = 64;

/// Betweenness with the single-source passes fanned out over threads and
/// summed in source order.
pub fn betweenness(net: &Network) -> Betweenness {
    let mut total = Betweenness::zeros(net);
    let sources: Vec<usize> = (0..net.node_count()).collect();
    for chunk in sources.chunks(SOURCE_CHUNK) {
        let partials: Vec<Betweenness> = chunk
            .par_iter()
            .map(|&s| Betweenness::single_source(net, s))
            .collect();
        for p in &partials {
            total.accumulate(p);
        }
    }
    total.halve()
}

/// Tailored edge weights plus normalized node betweenness of the real nodes,
/// both computed on the augmented network.
pub fn tailored_centrality(net: &Network) -> Result<(CentralityMap, BTreeMap<String, f64>), NetworkError> {
    let augmented = net.augment_with_fictitious()?;
    let raw = betweenness(&augmented);
    let edges = CentralityMap::from_raw(&augmented, &raw.edge);
    let real: Vec<(&str, f64)> = augmented
        .nodes()
        .iter()
        .zip(&raw.node)
        .filter(|(n, _)| !n.is_fictitious())
        .map(|(n, &v)| (n.id.as_str(), v))
        .collect();
    let max = real.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    let nodes = real
        .into_iter()
        .map(|(id, v)| (id.to_string(), if max > 0.0 { v / max } else { 0.0 }))
        .collect();
    Ok((edges, nodes))
}
