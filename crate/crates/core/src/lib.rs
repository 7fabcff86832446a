//! Pressure-sensor placement on water distribution networks.
//!
//! A network's pipes are weighted by tailored edge betweenness, the
//! placement problem is written as a weighted vertex-cover QUBO with node
//! costs and a sensor-count penalty, and the QUBO is minimized by multi-start
//! simulated annealing. Installation sessions pin nodes that already carry a
//! sensor and forbid nodes found unusable on site, then re-solve.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod anneal;
pub mod centrality;
pub mod grid;
pub mod network;
pub mod placement;
pub mod qubo;

pub use anneal::{AnnealConfig, AnnealError, AnnealResult, ExactSolver, RunRecord, Schedule, SimulatedAnnealing, Solver};
pub use centrality::{tailored_centrality, CentralityMap};
pub use network::{EdgeSpec, Network, NetworkError, Node, NodeKind};
pub use placement::{CardinalityMode, DemandModel, Hyperparams, MarkStatus, Pins, PlacementError, PlacementReport, Session};
pub use qubo::{FrozenQubo, IsingModel, QuboError, QuboModel, VarRole, VariableRegistry};
