//! Quadratic unconstrained binary models.
//!
//! Quadratic coefficients are stored once per unordered pair `(i, j)`, `i < j`,
//! as the coefficient of the monomial `x_i x_j`:
//!
//! ```text
//! E(x) = offset + sum_i linear[i] x_i + sum_{i<j} quadratic[(i, j)] x_i x_j
//! ```
//!
//! Diagonal terms are folded into `linear` since `x_i^2 = x_i`.

mod ising;
mod terms;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use ising::{spins_of, IsingModel};

use crate::network::NetworkError;

/// Accumulated coefficients smaller than this are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRole {
    /// Sensor decision for a network node.
    Node(String),
    /// One-hot slack `y_alpha` of the at-most cardinality encoding, `alpha >= 1`.
    Slack(usize),
    /// Product variable introduced by cubic reduction.
    Ancilla(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariableRegistry {
    roles: Vec<VarRole>,
    nodes: BTreeMap<String, usize>,
}

impl VariableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn roles(&self) -> &[VarRole] {
        &self.roles
    }

    pub fn role(&self, index: usize) -> Option<&VarRole> {
        self.roles.get(index)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.get(id).copied()
    }

    /// `(node id, variable index)` in registration order.
    pub fn node_vars(&self) -> impl Iterator<Item = (&str, usize)> {
        self.roles.iter().enumerate().filter_map(|(i, r)| match r {
            VarRole::Node(id) => Some((id.as_str(), i)),
            _ => None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn slack_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.roles.iter().enumerate().filter_map(|(i, r)| match r {
            VarRole::Slack(alpha) => Some((*alpha, i)),
            _ => None,
        })
    }

    pub fn has_slack(&self) -> bool {
        self.roles.iter().any(|r| matches!(r, VarRole::Slack(_)))
    }

    fn push(&mut self, role: VarRole) -> Result<usize, QuboError> {
        let index = self.roles.len();
        if let VarRole::Node(id) = &role {
            if self.nodes.insert(id.clone(), index).is_some() {
                return Err(QuboError::DuplicateNode(id.clone()));
            }
        }
        self.roles.push(role);
        Ok(index)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuboError {
    #[error("node `{0}` is already registered")]
    DuplicateNode(String),
    #[error("node `{0}` has no variable")]
    UnknownNode(String),
    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("assignment has length {got}, model has {expected} variables")]
    Arity { expected: usize, got: usize },
    #[error("assignment value {value} at index {index} is not in the model's alphabet")]
    Alphabet { index: usize, value: i64 },
    #[error("penalty weight `{name}` must be positive, got {value}")]
    NonPositiveWeight { name: &'static str, value: f64 },
    #[error("cost for node `{node}` must be non-negative, got {cost}")]
    NegativeCost { node: String, cost: f64 },
    #[error("no cost given for node `{0}`")]
    MissingCost(String),
    #[error("no centrality weight for edge `{0}`")]
    MissingWeight(String),
    #[error("sensor count {sensors} must be between 1 and the {nodes} node variables")]
    SensorCount { sensors: usize, nodes: usize },
    #[error("slack variables are already registered")]
    SlackAlreadyRegistered,
    #[error("node `{0}` is both installed and rejected")]
    PinConflict(String),
    #[error("cubic reduction needs three distinct variables, got ({0}, {1}, {2})")]
    NotDistinct(usize, usize, usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuboModel {
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    registry: VariableRegistry,
}

impl QuboModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// A model with one node variable per id, in the given order.
    pub fn with_nodes<I, S>(ids: I) -> Result<Self, QuboError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut model = QuboModel::new();
        for id in ids {
            model.add_variable(VarRole::Node(id.into()))?;
        }
        Ok(model)
    }

    /// Assembles a model from raw parts, folding diagonals and pruning zeros.
    pub fn from_parts(
        registry: VariableRegistry,
        linear: Vec<f64>,
        quadratic: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self, QuboError> {
        let n = registry.len();
        if linear.len() != n {
            return Err(QuboError::Arity {
                expected: n,
                got: linear.len(),
            });
        }
        let mut model = QuboModel {
            linear,
            quadratic: BTreeMap::new(),
            offset,
            registry,
        };
        for (i, j, v) in quadratic {
            model.check_index(i)?;
            model.check_index(j)?;
            model.add_quadratic(i, j, v);
        }
        Ok(model)
    }

    pub fn add_variable(&mut self, role: VarRole) -> Result<usize, QuboError> {
        let index = self.registry.push(role)?;
        self.linear.push(0.0);
        Ok(index)
    }

    pub fn n(&self) -> usize {
        self.linear.len()
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.registry
    }

    /// Stored pairs `((i, j), value)` with `i < j`, sorted.
    pub fn quadratic(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.quadratic.iter().map(|(&k, &v)| (k, v))
    }

    pub fn quadratic_len(&self) -> usize {
        self.quadratic.len()
    }

    /// Coefficient of `x_i x_j`; symmetric in its arguments.
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.quadratic.get(&ordered(i, j)).copied().unwrap_or(0.0)
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn add_linear(&mut self, i: usize, value: f64) {
        self.linear[i] += value;
    }

    /// Adds `value * x_i * x_j`. `i == j` folds into the linear term.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            self.add_linear(i, value);
            return;
        }
        let key = ordered(i, j);
        let entry = self.quadratic.entry(key).or_insert(0.0);
        *entry += value;
        if entry.abs() < PRUNE_THRESHOLD {
            self.quadratic.remove(&key);
        }
    }

    fn check_index(&self, index: usize) -> Result<(), QuboError> {
        if index < self.n() {
            Ok(())
        } else {
            Err(QuboError::IndexOutOfRange { index, n: self.n() })
        }
    }

    pub fn node_var(&self, id: &str) -> Result<usize, QuboError> {
        self.registry
            .node_index(id)
            .ok_or_else(|| QuboError::UnknownNode(String::from(id)))
    }

    /// Energy by the defining formula.
    pub fn energy(&self, x: &[u8]) -> Result<f64, QuboError> {
        check_binary(x, self.n())?;
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[u8]) -> f64 {
        let mut e = self.offset;
        for (c, &xi) in self.linear.iter().zip(x) {
            if xi != 0 {
                e += c;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if x[i] != 0 && x[j] != 0 {
                e += q;
            }
        }
        e
    }

    /// Builds row-major adjacency for O(degree) flip deltas.
    pub fn freeze(self) -> FrozenQubo {
        let n = self.n();
        let mut degree = vec![0usize; n + 1];
        for &(i, j) in self.quadratic.keys() {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for k in 0..n {
            degree[k + 1] += degree[k];
        }
        let row_start = degree;
        let mut fill = row_start.clone();
        let nnz = row_start[n];
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        for (&(i, j), &q) in &self.quadratic {
            cols[fill[i]] = j;
            vals[fill[i]] = q;
            fill[i] += 1;
            cols[fill[j]] = i;
            vals[fill[j]] = q;
            fill[j] += 1;
        }
        FrozenQubo {
            model: self,
            row_start,
            cols,
            vals,
        }
    }
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

pub(crate) fn check_binary(x: &[u8], n: usize) -> Result<(), QuboError> {
    if x.len() != n {
        return Err(QuboError::Arity {
            expected: n,
            got: x.len(),
        });
    }
    match x.iter().position(|&v| v > 1) {
        Some(index) => Err(QuboError::Alphabet {
            index,
            value: i64::from(x[index]),
        }),
        None => Ok(()),
    }
}

/// An immutable model with per-variable coupling rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenQubo {
    model: QuboModel,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl FrozenQubo {
    pub fn model(&self) -> &QuboModel {
        &self.model
    }

    pub fn into_model(self) -> QuboModel {
        self.model
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.model.registry
    }

    pub fn energy(&self, x: &[u8]) -> Result<f64, QuboError> {
        self.model.energy(x)
    }

    pub(crate) fn energy_unchecked(&self, x: &[u8]) -> f64 {
        self.model.energy_unchecked(x)
    }

    /// `(neighbor, coefficient)` pairs of variable `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// `energy(flip(x, i)) - energy(x)`.
    pub fn delta_energy(&self, x: &[u8], i: usize) -> Result<f64, QuboError> {
        check_binary(x, self.n())?;
        self.model.check_index(i)?;
        Ok(self.delta_unchecked(x, i))
    }

    #[inline]
    pub(crate) fn delta_unchecked(&self, x: &[u8], i: usize) -> f64 {
        let mut field = self.model.linear[i];
        let range = self.row_start[i]..self.row_start[i + 1];
        for (&j, &q) in self.cols[range.clone()].iter().zip(&self.vals[range]) {
            if x[j] != 0 {
                field += q;
            }
        }
        if x[i] == 0 {
            field
        } else {
            -field
        }
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n())
            .map(|i| self.row_start[i + 1] - self.row_start[i])
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_vector_gives_offset() {
        let mut m = QuboModel::with_nodes(["a", "b", "c"]).unwrap();
        m.add_linear(0, 2.0);
        m.add_quadratic(1, 2, -3.0);
        m.add_offset(4.5);
        assert_eq!(m.energy(&[0, 0, 0]).unwrap(), 4.5);
    }

    #[test]
    fn diagonal_folds_and_zeros_prune() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        m.add_quadratic(1, 1, 2.0);
        assert_eq!(m.linear(), &[0.0, 2.0]);
        m.add_quadratic(0, 1, 1.0);
        m.add_quadratic(1, 0, -1.0);
        assert_eq!(m.quadratic_len(), 0);
        m.add_quadratic(0, 1, 0.0);
        assert_eq!(m.quadratic_len(), 0);
    }

    #[test]
    fn coupling_symmetric() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        m.add_quadratic(1, 0, 3.0);
        assert_eq!(m.coupling(0, 1), 3.0);
        assert_eq!(m.coupling(1, 0), 3.0);
    }

    #[test]
    fn arity_and_alphabet_errors() {
        let m = QuboModel::with_nodes(["a", "b"]).unwrap();
        assert!(matches!(m.energy(&[0]), Err(QuboError::Arity { .. })));
        assert!(matches!(
            m.energy(&[0, 2]),
            Err(QuboError::Alphabet { index: 1, value: 2 })
        ));
    }

    #[test]
    fn duplicate_node_rejected() {
        assert_eq!(
            QuboModel::with_nodes(["a", "a"]),
            Err(QuboError::DuplicateNode("a".into()))
        );
    }

    #[test]
    fn isolated_delta() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        m.add_linear(0, 3.0);
        let f = m.freeze();
        assert_eq!(f.delta_energy(&[0, 1], 0).unwrap(), 3.0);
        assert_eq!(f.delta_energy(&[1, 1], 0).unwrap(), -3.0);
    }

    #[test]
    fn rows_cover_both_endpoints() {
        let mut m = QuboModel::with_nodes(["a", "b", "c"]).unwrap();
        m.add_quadratic(0, 2, 1.5);
        m.add_quadratic(1, 2, -2.0);
        let f = m.freeze();
        assert_eq!(f.row(0).collect::<Vec<_>>(), vec![(2, 1.5)]);
        assert_eq!(f.row(2).collect::<Vec<_>>(), vec![(0, 1.5), (1, -2.0)]);
        assert_eq!(f.max_degree(), 2);
    }
}
