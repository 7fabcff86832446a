//! Synthetic grid networks for demos and reproducible checks.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{EdgeSpec, Network, NetworkError, Node, NodeKind};

pub const DESK_SIZE: usize = 5;
pub const DESK_SEED: u64 = 42;
pub const PIPE_LENGTH: f64 = 100.0;
pub const INACCESSIBLE_FRACTION: f64 = 0.3;
/// Id of the extra source hung off the far corner.
pub const FAR_SOURCE_ID: &str = "tank2";

pub fn grid_node_id(row: usize, col: usize) -> alloc::string::String {
    format!("r{row}c{col}")
}

/// `k x k` junction grid with unit spacing of [`PIPE_LENGTH`] metres. The
/// corner `r0c0` is a source and a second source is attached beyond the far
/// corner. Junction demands are uniform in `[1, 100)`; a fixed share of all
/// nodes is flagged inaccessible. Everything random derives from `seed`.
pub fn grid_network(k: usize, seed: u64) -> Result<Network, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(k * k + 1);
    let mut edges = Vec::new();
    for row in 0..k {
        for col in 0..k {
            let id = grid_node_id(row, col);
            let node = if row == 0 && col == 0 {
                Node::new(id, NodeKind::Source, 0.0, true)
            } else {
                Node::junction(id, rng.gen_range(1.0..100.0))
            };
            nodes.push(node.with_coords(col as f64 * PIPE_LENGTH, row as f64 * PIPE_LENGTH));
            if col + 1 < k {
                edges.push(pipe(grid_node_id(row, col), grid_node_id(row, col + 1)));
            }
            if row + 1 < k {
                edges.push(pipe(grid_node_id(row, col), grid_node_id(row + 1, col)));
            }
        }
    }
    if k > 0 {
        let far = k as f64 * PIPE_LENGTH;
        nodes.push(Node::new(FAR_SOURCE_ID, NodeKind::Source, 0.0, true).with_coords(far, far));
        edges.push(pipe(grid_node_id(k - 1, k - 1), FAR_SOURCE_ID.into()));
    }

    let hidden = libm::round(INACCESSIBLE_FRACTION * nodes.len() as f64) as usize;
    for i in index::sample(&mut rng, nodes.len(), hidden) {
        nodes[i].accessible = false;
    }
    Network::new(nodes, edges)
}

fn pipe(from: alloc::string::String, to: alloc::string::String) -> EdgeSpec {
    EdgeSpec::new(format!("{from}-{to}"), from, to, PIPE_LENGTH)
}

/// The 5x5, seed-42 network used for end-to-end checks.
pub fn desk_network() -> Network {
    grid_network(DESK_SIZE, DESK_SEED).expect("grid generator produces a valid network")
}
