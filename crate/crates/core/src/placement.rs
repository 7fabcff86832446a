//! Sensor placement: node costs, Hamiltonian assembly, decoding and
//! installation sessions.
//!
//! The placement energy is
//!
//! ```text
//! H = A sum_(ij) w_ij (1 - x_i)(1 - x_j)      weighted cover
//!   + sum_i c_i x_i                           node cost
//!   + B (sum_i x_i - s)^2                     exactly s sensors (or the
//!                                             one-hot at-most-s variant)
//!   + E sum_a (1 - x_a) + E sum_r x_r         session pins and forbids
//! ```
//!
//! with `c_i = C f(v_i / v_max) + D g_i`, `g_i = 1` for nodes that are hard
//! to access.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::anneal::{AnnealError, AnnealResult, Solver};
use crate::centrality::CentralityMap;
use crate::network::{Network, NetworkError};
use crate::qubo::{QuboError, QuboModel, VarRole, VariableRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CardinalityMode {
    /// Exactly `s` sensors.
    Equality,
    /// At most `s` sensors, encoded with one-hot slacks.
    AtMost,
}

/// Shape of the demand preference `f`, decreasing on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemandModel {
    /// `f(v) = 1 - v`
    Linear,
    /// `f(v) = exp(-v)`
    Exponential,
}

impl DemandModel {
    pub fn eval(self, v: f64) -> f64 {
        match self {
            DemandModel::Linear => 1.0 - v,
            DemandModel::Exponential => libm::exp(-v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Cover weight.
    pub a: f64,
    /// Cardinality penalty.
    pub b: f64,
    /// Demand cost weight.
    pub c: f64,
    /// Accessibility cost weight.
    pub d: f64,
    /// Pin/forbid weight for sessions.
    pub e: f64,
    pub sensors: usize,
    pub mode: CardinalityMode,
    pub demand_model: DemandModel,
}

impl Hyperparams {
    /// Equality mode, linear demand model, `E = 10 B`.
    pub fn new(a: f64, b: f64, c: f64, d: f64, sensors: usize) -> Self {
        Hyperparams {
            a,
            b,
            c,
            d,
            e: 10.0 * b,
            sensors,
            mode: CardinalityMode::Equality,
            demand_model: DemandModel::Linear,
        }
    }

    /// `(A, B, C, D) = (1, 30, 5, 1)`.
    pub fn reference(sensors: usize) -> Self {
        Hyperparams::new(1.0, 30.0, 5.0, 1.0, sensors)
    }

    pub fn validate(&self) -> Result<(), PlacementError> {
        for (name, value) in [("A", self.a), ("B", self.b), ("C", self.c), ("D", self.d), ("E", self.e)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(PlacementError::InvalidHyperparams {
                    field: name,
                    reason: "must be a positive number",
                });
            }
        }
        if self.c > self.b {
            return Err(PlacementError::InvalidHyperparams {
                field: "C",
                reason: "must not exceed B",
            });
        }
        if self.d > self.b {
            return Err(PlacementError::InvalidHyperparams {
                field: "D",
                reason: "must not exceed B",
            });
        }
        if self.sensors == 0 {
            return Err(PlacementError::InvalidHyperparams {
                field: "s",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkStatus {
    Installed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("hyperparameter {field} {reason}")]
    InvalidHyperparams {
        field: &'static str,
        reason: &'static str,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` is already marked {existing:?}; unmark it first")]
    MarkConflict { node: String, existing: MarkStatus },
    #[error("cannot install more than {limit} sensors")]
    TooManyInstalled { limit: usize },
    #[error("sensor count {sensors} exceeds the {nodes} network nodes")]
    SensorCount { sensors: usize, nodes: usize },
    #[error(
        "penalty weight E = {e} too weak: installed nodes dropped {dropped:?}, rejected nodes kept {kept:?}; try E >= {suggested}"
    )]
    PenaltyTooWeak {
        e: f64,
        suggested: f64,
        dropped: Vec<String>,
        kept: Vec<String>,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
}

/// `c_i = C f(v_i / v_max) + D g_i` for every node.
pub fn node_costs(net: &Network, hp: &Hyperparams) -> Result<BTreeMap<String, f64>, PlacementError> {
    let demands = net.normalized_demands()?;
    Ok(net
        .nodes()
        .iter()
        .zip(demands)
        .map(|(node, v)| {
            let g = if node.accessible { 0.0 } else { 1.0 };
            (node.id.clone(), hp.c * hp.demand_model.eval(v) + hp.d * g)
        })
        .collect())
}

/// Installed and rejected nodes of an installation session.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pins {
    pub installed: BTreeSet<String>,
    pub rejected: BTreeSet<String>,
}

impl Pins {
    pub fn is_empty(&self) -> bool {
        self.installed.is_empty() && self.rejected.is_empty()
    }
}

/// Builds the full placement QUBO. Node variables come first, in network
/// order, followed by any slack variables.
pub fn build_placement_qubo(
    net: &Network,
    weights: &CentralityMap,
    hp: &Hyperparams,
    pins: Option<&Pins>,
) -> Result<QuboModel, PlacementError> {
    hp.validate()?;
    let real: Vec<&str> = net
        .nodes()
        .iter()
        .filter(|n| !n.is_fictitious())
        .map(|n| n.id.as_str())
        .collect();
    if hp.sensors > real.len() {
        return Err(PlacementError::SensorCount {
            sensors: hp.sensors,
            nodes: real.len(),
        });
    }
    let mut model = QuboModel::with_nodes(real)?;
    model.add_weighted_cover_term(net, weights, hp.a)?;
    let costs = node_costs(net, hp)?;
    let costs = costs
        .into_iter()
        .filter(|(id, _)| model.registry().node_index(id).is_some())
        .collect();
    model.add_cost_term(&costs)?;
    match hp.mode {
        CardinalityMode::Equality => model.add_cardinality_equality(hp.sensors, hp.b)?,
        CardinalityMode::AtMost => {
            model.add_cardinality_at_most(hp.sensors, hp.b)?;
        }
    }
    if let Some(pins) = pins {
        model.add_pin_forbid_term(&pins.installed, &pins.rejected, hp.e)?;
    }
    Ok(model)
}

/// A crude upper bound on everything a pin or forbid can be traded against:
/// `B s^2 + A sum_e w_e + sum_i c_i`. With `E` at or above it, every exact
/// optimum respects the session.
pub fn domination_bound(net: &Network, weights: &CentralityMap, hp: &Hyperparams) -> Result<f64, PlacementError> {
    let costs: f64 = node_costs(net, hp)?.values().sum();
    let cover: f64 = weights.values.values().sum();
    let s = hp.sensors as f64;
    Ok(hp.b * s * s + hp.a * cover + costs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementReport {
    /// Sorted by node id.
    pub selected: BTreeSet<String>,
    pub sensor_count: usize,
    pub accessible_count: usize,
    /// Share of total demand located at selected nodes.
    pub demand_coverage: f64,
    /// `sum_(ij) w_ij (1 - x_i)(1 - x_j)` at the solution.
    pub uncovered_weight: f64,
    pub energy: f64,
    pub constraint_satisfied: bool,
}

/// Reads a placement off the node bits of `assignment`; slack and ancilla
/// bits are ignored. `energy` is reported as given.
pub fn decode(
    net: &Network,
    weights: &CentralityMap,
    hp: &Hyperparams,
    registry: &VariableRegistry,
    assignment: &[u8],
    energy: f64,
) -> PlacementReport {
    let mut chosen = alloc::vec![false; net.node_count()];
    for (index, role) in registry.roles().iter().enumerate() {
        if let VarRole::Node(id) = role {
            if assignment.get(index).copied().unwrap_or(0) != 0 {
                if let Some(i) = net.index_of(id) {
                    chosen[i] = true;
                }
            }
        }
    }
    let total_demand: f64 = net.nodes().iter().map(|n| n.demand).sum();
    let mut selected = BTreeSet::new();
    let mut accessible_count = 0;
    let mut covered_demand = 0.0;
    for (node, _) in net.nodes().iter().zip(&chosen).filter(|(_, &c)| c) {
        selected.insert(node.id.clone());
        covered_demand += node.demand;
        if node.accessible {
            accessible_count += 1;
        }
    }
    let uncovered_weight = net
        .edges()
        .iter()
        .filter(|e| !e.is_fictitious())
        .filter(|e| !chosen[e.endpoints.0] && !chosen[e.endpoints.1])
        .map(|e| weights.get(&e.id).unwrap_or(0.0))
        .sum();
    let sensor_count = selected.len();
    let constraint_satisfied = match hp.mode {
        CardinalityMode::Equality => sensor_count == hp.sensors,
        CardinalityMode::AtMost => sensor_count <= hp.sensors,
    };
    PlacementReport {
        selected,
        sensor_count,
        accessible_count,
        demand_coverage: if total_demand > 0.0 {
            covered_demand / total_demand
        } else {
            0.0
        },
        uncovered_weight,
        energy,
        constraint_satisfied,
    }
}

/// Builds the model, runs `solver` and decodes its best run.
pub fn solve_placement(
    net: &Network,
    weights: &CentralityMap,
    hp: &Hyperparams,
    solver: &dyn Solver,
    pins: Option<&Pins>,
) -> Result<(PlacementReport, AnnealResult), PlacementError> {
    let model = build_placement_qubo(net, weights, hp, pins)?.freeze();
    let result = solver.minimize(&model)?;
    let best = result.best_run();
    let report = decode(net, weights, hp, model.registry(), &best.assignment, best.energy);
    Ok((report, result))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineStats {
    pub mean: f64,
    /// Sample standard deviation, zero for a single trial.
    pub stddev: f64,
    pub trials: usize,
}

/// Demand coverage of uniformly random `s`-subsets.
pub fn random_baseline(net: &Network, s: usize, trials: usize, seed: u64) -> Result<BaselineStats, PlacementError> {
    let n = net.node_count();
    if s > n {
        return Err(PlacementError::SensorCount { sensors: s, nodes: n });
    }
    let total: f64 = net.nodes().iter().map(|node| node.demand).sum();
    if total <= 0.0 {
        return Err(NetworkError::ZeroDemand.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut picks = rand::seq::index::sample(&mut rng, n, s).into_vec();
        picks.sort_unstable();
        let covered: f64 = picks.iter().map(|&i| net.nodes()[i].demand).sum();
        samples.push(covered / total);
    }
    let count = samples.len() as f64;
    let mean = if trials == 0 {
        0.0
    } else {
        samples.iter().sum::<f64>() / count
    };
    let stddev = if trials > 1 {
        libm::sqrt(samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0))
    } else {
        0.0
    };
    Ok(BaselineStats { mean, stddev, trials })
}

/// Installation state driving re-optimization in the field.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub pins: Pins,
    pub hyperparams: Hyperparams,
    pub last_report: Option<PlacementReport>,
}

impl Session {
    pub fn new(id: impl Into<String>, hyperparams: Hyperparams) -> Result<Self, PlacementError> {
        hyperparams.validate()?;
        Ok(Session {
            id: id.into(),
            pins: Pins::default(),
            hyperparams,
            last_report: None,
        })
    }

    pub fn installed(&self) -> &BTreeSet<String> {
        &self.pins.installed
    }

    pub fn rejected(&self) -> &BTreeSet<String> {
        &self.pins.rejected
    }

    pub fn status(&self, node: &str) -> Option<MarkStatus> {
        if self.pins.installed.contains(node) {
            Some(MarkStatus::Installed)
        } else if self.pins.rejected.contains(node) {
            Some(MarkStatus::Rejected)
        } else {
            None
        }
    }

    /// Idempotent per `(node, status)`; switching status requires
    /// [`Session::unmark`] first.
    pub fn mark(&mut self, net: &Network, node: &str, status: MarkStatus) -> Result<(), PlacementError> {
        if net.node(node).is_none_or(|n| n.is_fictitious()) {
            return Err(PlacementError::UnknownNode(String::from(node)));
        }
        match self.status(node) {
            Some(existing) if existing == status => return Ok(()),
            Some(existing) => {
                return Err(PlacementError::MarkConflict {
                    node: String::from(node),
                    existing,
                })
            }
            None => {}
        }
        match status {
            MarkStatus::Installed => {
                if self.pins.installed.len() >= self.hyperparams.sensors {
                    return Err(PlacementError::TooManyInstalled {
                        limit: self.hyperparams.sensors,
                    });
                }
                self.pins.installed.insert(String::from(node));
            }
            MarkStatus::Rejected => {
                self.pins.rejected.insert(String::from(node));
            }
        }
        Ok(())
    }

    /// Clears any mark on `node`. Returns the previous status.
    pub fn unmark(&mut self, net: &Network, node: &str) -> Result<Option<MarkStatus>, PlacementError> {
        if net.node(node).is_none() {
            return Err(PlacementError::UnknownNode(String::from(node)));
        }
        let previous = self.status(node);
        self.pins.installed.remove(node);
        self.pins.rejected.remove(node);
        Ok(previous)
    }

    /// Re-solves with the session's pins and forbids and checks that the new
    /// placement honours them.
    pub fn replan(
        &mut self,
        net: &Network,
        weights: &CentralityMap,
        solver: &dyn Solver,
    ) -> Result<(PlacementReport, AnnealResult), PlacementError> {
        let (report, result) = solve_placement(net, weights, &self.hyperparams, solver, Some(&self.pins))?;
        let dropped: Vec<String> = self
            .pins
            .installed
            .iter()
            .filter(|id| !report.selected.contains(*id))
            .cloned()
            .collect();
        let kept: Vec<String> = self
            .pins
            .rejected
            .iter()
            .filter(|id| report.selected.contains(*id))
            .cloned()
            .collect();
        if !dropped.is_empty() || !kept.is_empty() {
            let bound = domination_bound(net, weights, &self.hyperparams)?;
            return Err(PlacementError::PenaltyTooWeak {
                e: self.hyperparams.e,
                suggested: bound.max(2.0 * self.hyperparams.e),
                dropped,
                kept,
            });
        }
        self.last_report = Some(report.clone());
        Ok((report, result))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::ExactSolver;
    use crate::network::{EdgeSpec, Node, NodeKind};
    use alloc::vec;

    fn path() -> Network {
        Network::new(
            vec![
                Node::new("a", NodeKind::Source, 1.0, true),
                Node::junction("b", 1.0),
                Node::junction("c", 1.0),
            ],
            vec![EdgeSpec::new("ab", "a", "b", 1.0), EdgeSpec::new("bc", "b", "c", 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn cost_examples() {
        let net = Network::new(
            vec![
                Node::new("hi", NodeKind::Source, 10.0, true),
                Node::new("lo", NodeKind::Junction, 0.0, false),
                Node::new("hi2", NodeKind::Junction, 10.0, false),
            ],
            vec![EdgeSpec::new("e1", "hi", "lo", 1.0), EdgeSpec::new("e2", "lo", "hi2", 1.0)],
        )
        .unwrap();
        let hp = Hyperparams::reference(1);
        let costs = node_costs(&net, &hp).unwrap();
        assert_eq!(costs["hi"], 0.0);
        assert_eq!(costs["lo"], 6.0);
        let hp = Hyperparams {
            demand_model: DemandModel::Exponential,
            ..hp
        };
        let costs = node_costs(&net, &hp).unwrap();
        assert!((costs["hi2"] - 2.839_397_205_857_212).abs() < 1e-12);
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams::reference(5).validate().is_ok());
        assert!(Hyperparams::new(1.0, 3.0, 5.0, 1.0, 1).validate().is_err());
        assert!(Hyperparams::new(0.0, 3.0, 1.0, 1.0, 1).validate().is_err());
        assert!(Hyperparams::new(1.0, 3.0, 1.0, 1.0, 0).validate().is_err());
    }

    #[test]
    fn path_picks_middle() {
        let net = path();
        // C and D close to zero so only the cover term matters
        let hp = Hyperparams::new(1.0, 30.0, 1e-9, 1e-9, 1);
        let model = build_placement_qubo(&net, &CentralityMap::uniform(&net), &hp, None).unwrap();
        let (x, _) = crate::anneal::brute_force(&model.freeze()).unwrap();
        assert_eq!(x, vec![0, 1, 0]);
    }

    #[test]
    fn path_rejecting_middle() {
        let net = path();
        let hp = Hyperparams {
            e: 1e4,
            ..Hyperparams::new(1.0, 30.0, 1e-9, 1e-9, 1)
        };
        let pins = Pins {
            installed: BTreeSet::new(),
            rejected: ["b".into()].into(),
        };
        let model = build_placement_qubo(&net, &CentralityMap::uniform(&net), &hp, Some(&pins)).unwrap();
        let (x, _) = crate::anneal::brute_force(&model.freeze()).unwrap();
        assert_eq!(x[1], 0);
        assert_eq!(x.iter().filter(|&&b| b == 1).count(), 1);
    }

    #[test]
    fn empty_pins_same_model() {
        let net = path();
        let w = CentralityMap::uniform(&net);
        let hp = Hyperparams::reference(1);
        assert_eq!(
            build_placement_qubo(&net, &w, &hp, None).unwrap(),
            build_placement_qubo(&net, &w, &hp, Some(&Pins::default())).unwrap()
        );
    }

    #[test]
    fn full_selection_report() {
        let net = path();
        let w = CentralityMap::uniform(&net);
        let hp = Hyperparams::reference(3);
        let (report, _) = solve_placement(&net, &w, &hp, &ExactSolver::default(), None).unwrap();
        assert_eq!(report.sensor_count, 3);
        assert_eq!(report.demand_coverage, 1.0);
        assert_eq!(report.uncovered_weight, 0.0);
        assert!(report.constraint_satisfied);
    }

    #[test]
    fn baseline_full_and_reproducible() {
        let net = path();
        let full = random_baseline(&net, 3, 50, 1).unwrap();
        assert_eq!((full.mean, full.stddev), (1.0, 0.0));
        assert_eq!(
            random_baseline(&net, 1, 1, 9).unwrap(),
            random_baseline(&net, 1, 1, 9).unwrap()
        );
        assert!(random_baseline(&net, 4, 1, 0).is_err());
    }

    #[test]
    fn session_marks() {
        let net = path();
        let mut session = Session::new("s1", Hyperparams::reference(1)).unwrap();
        session.mark(&net, "a", MarkStatus::Installed).unwrap();
        session.mark(&net, "a", MarkStatus::Installed).unwrap();
        assert_eq!(session.installed().len(), 1);
        assert_eq!(
            session.mark(&net, "a", MarkStatus::Rejected),
            Err(PlacementError::MarkConflict {
                node: "a".into(),
                existing: MarkStatus::Installed
            })
        );
        assert_eq!(
            session.mark(&net, "b", MarkStatus::Installed),
            Err(PlacementError::TooManyInstalled { limit: 1 })
        );
        assert_eq!(
            session.mark(&net, "zz", MarkStatus::Rejected),
            Err(PlacementError::UnknownNode("zz".into()))
        );
        assert_eq!(session.unmark(&net, "a").unwrap(), Some(MarkStatus::Installed));
        session.mark(&net, "a", MarkStatus::Rejected).unwrap();
        assert_eq!(session.status("a"), Some(MarkStatus::Rejected));
    }

    #[test]
    fn replan_detects_weak_penalty() {
        let net = path();
        let w = CentralityMap::uniform(&net);
        // E tiny compared to the cardinality penalty: installing a second
        // node would break "exactly one sensor", so the pin loses.
        let hp = Hyperparams {
            e: 1e-3,
            ..Hyperparams::new(1.0, 30.0, 1e-9, 1e-9, 2)
        };
        let mut session = Session::new("weak", hp).unwrap();
        session.mark(&net, "a", MarkStatus::Rejected).unwrap();
        session.mark(&net, "b", MarkStatus::Rejected).unwrap();
        session.mark(&net, "c", MarkStatus::Rejected).unwrap();
        let err = session.replan(&net, &w, &ExactSolver::default()).unwrap_err();
        assert!(matches!(err, PlacementError::PenaltyTooWeak { .. }));
        assert!(session.last_report.is_none());
    }
}
