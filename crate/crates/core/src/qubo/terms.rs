//! Penalty and objective terms for sensor placement models.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{QuboError, QuboModel, VarRole};
use crate::centrality::CentralityMap;
use crate::network::Network;

fn positive(name: &'static str, value: f64) -> Result<(), QuboError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(QuboError::NonPositiveWeight { name, value })
    }
}

impl QuboModel {
    /// Adds `scale * (constant + sum_k coeff_k x_k)^2`, expanded with `x^2 = x`.
    pub fn add_squared_linear(&mut self, terms: &[(usize, f64)], constant: f64, scale: f64) {
        self.add_offset(scale * constant * constant);
        for (a, &(k, ck)) in terms.iter().enumerate() {
            self.add_linear(k, scale * (2.0 * constant * ck + ck * ck));
            for &(l, cl) in &terms[a + 1..] {
                self.add_quadratic(k, l, 2.0 * scale * ck * cl);
            }
        }
    }

    /// Soft weighted vertex cover: `A * sum_(ij) w_ij (1 - x_i)(1 - x_j)` over
    /// the real pipes of `net`.
    pub fn add_weighted_cover_term(
        &mut self,
        net: &Network,
        weights: &CentralityMap,
        a: f64,
    ) -> Result<(), QuboError> {
        positive("A", a)?;
        let mut terms = Vec::with_capacity(net.edge_count());
        for edge in net.edges().iter().filter(|e| !e.is_fictitious()) {
            let w = weights
                .get(&edge.id)
                .ok_or_else(|| QuboError::MissingWeight(edge.id.clone()))?;
            let i = self.node_var(&net.nodes()[edge.endpoints.0].id)?;
            let j = self.node_var(&net.nodes()[edge.endpoints.1].id)?;
            terms.push((i, j, a * w));
        }
        for (i, j, aw) in terms {
            if aw == 0.0 {
                continue;
            }
            self.add_offset(aw);
            self.add_linear(i, -aw);
            self.add_linear(j, -aw);
            self.add_quadratic(i, j, aw);
        }
        Ok(())
    }

    /// Node costs `sum_i c_i x_i`; every node variable needs a cost `>= 0`.
    pub fn add_cost_term(&mut self, costs: &BTreeMap<String, f64>) -> Result<(), QuboError> {
        for id in costs.keys() {
            self.node_var(id)?;
        }
        let mut resolved = Vec::with_capacity(self.registry.node_count());
        for (id, index) in self.registry.node_vars() {
            let cost = *costs
                .get(id)
                .ok_or_else(|| QuboError::MissingCost(String::from(id)))?;
            if !cost.is_finite() || cost < 0.0 {
                return Err(QuboError::NegativeCost {
                    node: String::from(id),
                    cost,
                });
            }
            resolved.push((index, cost));
        }
        for (index, cost) in resolved {
            self.add_linear(index, cost);
        }
        Ok(())
    }

    fn check_sensor_count(&self, s: usize) -> Result<Vec<usize>, QuboError> {
        let nodes: Vec<usize> = self.registry.node_vars().map(|(_, i)| i).collect();
        if s == 0 || s > nodes.len() {
            return Err(QuboError::SensorCount {
                sensors: s,
                nodes: nodes.len(),
            });
        }
        Ok(nodes)
    }

    /// `B (sum_i x_i - s)^2` over node variables.
    pub fn add_cardinality_equality(&mut self, s: usize, b: f64) -> Result<(), QuboError> {
        positive("B", b)?;
        let nodes = self.check_sensor_count(s)?;
        let terms: Vec<(usize, f64)> = nodes.into_iter().map(|i| (i, 1.0)).collect();
        self.add_squared_linear(&terms, -(s as f64), b);
        Ok(())
    }

    /// At-most-`s` cardinality through one-hot slacks `y_1..y_s`:
    /// `B (1 - sum_a y_a)^2 + B (sum_a a y_a - sum_i x_i)^2`.
    ///
    /// There is no `y_0`, so selecting zero sensors is penalized by `B`.
    /// Returns the slack indices in order of `alpha`.
    pub fn add_cardinality_at_most(&mut self, s: usize, b: f64) -> Result<Vec<usize>, QuboError> {
        positive("B", b)?;
        let nodes = self.check_sensor_count(s)?;
        if self.registry.has_slack() {
            return Err(QuboError::SlackAlreadyRegistered);
        }
        let mut slacks = Vec::with_capacity(s);
        for alpha in 1..=s {
            slacks.push(self.add_variable(VarRole::Slack(alpha))?);
        }

        let one_hot: Vec<(usize, f64)> = slacks.iter().map(|&y| (y, -1.0)).collect();
        self.add_squared_linear(&one_hot, 1.0, b);

        let mut count: Vec<(usize, f64)> = slacks
            .iter()
            .enumerate()
            .map(|(a, &y)| (y, (a + 1) as f64))
            .collect();
        count.extend(nodes.into_iter().map(|i| (i, -1.0)));
        self.add_squared_linear(&count, 0.0, b);
        Ok(slacks)
    }

    /// Pins installed nodes and forbids rejected ones:
    /// `E sum_a (1 - x_a) + E sum_r x_r`.
    pub fn add_pin_forbid_term(
        &mut self,
        installed: &BTreeSet<String>,
        rejected: &BTreeSet<String>,
        e: f64,
    ) -> Result<(), QuboError> {
        positive("E", e)?;
        if let Some(id) = installed.intersection(rejected).next() {
            return Err(QuboError::PinConflict(id.clone()));
        }
        let pins = installed
            .iter()
            .map(|id| self.node_var(id))
            .collect::<Result<Vec<_>, _>>()?;
        let forbids = rejected
            .iter()
            .map(|id| self.node_var(id))
            .collect::<Result<Vec<_>, _>>()?;
        for a in pins {
            self.add_offset(e);
            self.add_linear(a, -e);
        }
        for r in forbids {
            self.add_linear(r, e);
        }
        Ok(())
    }

    /// Registers an ancilla standing for `x_j x_k` and adds the consistency
    /// penalty `scale (3 x_anc + x_j x_k - 2 x_j x_anc - 2 x_k x_anc)`, which
    /// is zero iff `x_anc = x_j x_k`. The caller rewrites `x_i x_j x_k` as
    /// `x_i x_anc`.
    pub fn reduce_cubic(&mut self, i: usize, j: usize, k: usize, scale: f64) -> Result<usize, QuboError> {
        positive("scale", scale)?;
        for index in [i, j, k] {
            self.check_index(index)?;
        }
        if i == j || j == k || i == k {
            return Err(QuboError::NotDistinct(i, j, k));
        }
        let anc = self.add_variable(VarRole::Ancilla(format!("{j}*{k}")))?;
        self.add_linear(anc, 3.0 * scale);
        self.add_quadratic(j, k, scale);
        self.add_quadratic(j, anc, -2.0 * scale);
        self.add_quadratic(k, anc, -2.0 * scale);
        Ok(anc)
    }

    /// Adds `coeff * x_i x_j x_k` through [`QuboModel::reduce_cubic`].
    pub fn add_cubic_term(
        &mut self,
        coeff: f64,
        i: usize,
        j: usize,
        k: usize,
        scale: f64,
    ) -> Result<usize, QuboError> {
        let anc = self.reduce_cubic(i, j, k, scale)?;
        self.add_quadratic(i, anc, coeff);
        Ok(anc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{EdgeSpec, Node};
    use alloc::vec;

    fn all_assignments(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..1 << n).map(move |k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
    }

    fn single_edge() -> (Network, QuboModel) {
        let net = Network::new(
            vec![Node::source("a"), Node::junction("b", 1.0)],
            vec![EdgeSpec::new("ab", "a", "b", 1.0)],
        )
        .unwrap();
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        m.add_weighted_cover_term(&net, &CentralityMap::uniform(&net), 1.0)
            .unwrap();
        (net, m)
    }

    #[test]
    fn single_edge_cover_coefficients() {
        let (_, m) = single_edge();
        assert_eq!(m.offset(), 1.0);
        assert_eq!(m.linear(), &[-1.0, -1.0]);
        assert_eq!(m.coupling(0, 1), 1.0);
        let e: Vec<f64> = [[0, 0], [1, 0], [0, 1], [1, 1]]
            .iter()
            .map(|x| m.energy(x).unwrap())
            .collect();
        assert_eq!(e, vec![1.0, 0.0, 0.0, 0.0]);
        let f = m.freeze();
        assert_eq!(f.delta_energy(&[0, 0], 0).unwrap(), -1.0);
    }

    #[test]
    fn zero_weight_cover_is_noop() {
        let (net, _) = single_edge();
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        let mut w = CentralityMap::uniform(&net);
        w.values.insert("ab".into(), 0.0);
        m.add_weighted_cover_term(&net, &w, 1.0).unwrap();
        assert_eq!(m, QuboModel::with_nodes(["a", "b"]).unwrap());
    }

    #[test]
    fn triangle_cover() {
        let net = Network::new(
            vec![Node::source("a"), Node::junction("b", 1.0), Node::junction("c", 1.0)],
            vec![
                EdgeSpec::new("ab", "a", "b", 1.0),
                EdgeSpec::new("bc", "b", "c", 1.0),
                EdgeSpec::new("ca", "c", "a", 1.0),
            ],
        )
        .unwrap();
        let mut m = QuboModel::with_nodes(["a", "b", "c"]).unwrap();
        m.add_weighted_cover_term(&net, &CentralityMap::uniform(&net), 2.0)
            .unwrap();
        assert_eq!(m.energy(&[0, 0, 0]).unwrap(), 6.0);
        for x in [[1, 1, 0], [1, 0, 1], [0, 1, 1]] {
            assert_eq!(m.energy(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn cover_errors() {
        let (net, _) = single_edge();
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        assert!(matches!(
            m.add_weighted_cover_term(&net, &CentralityMap::default(), 1.0),
            Err(QuboError::MissingWeight(_))
        ));
        assert!(matches!(
            m.add_weighted_cover_term(&net, &CentralityMap::uniform(&net), 0.0),
            Err(QuboError::NonPositiveWeight { name: "A", .. })
        ));
    }

    #[test]
    fn cost_term() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        let costs: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 2.0)].into();
        m.add_cost_term(&costs).unwrap();
        assert_eq!(m.energy(&[1, 1]).unwrap(), 2.5);

        let mut zero = QuboModel::with_nodes(["a", "b"]).unwrap();
        let costs: BTreeMap<String, f64> = [("a".into(), 0.0), ("b".into(), 0.0)].into();
        zero.add_cost_term(&costs).unwrap();
        assert_eq!(zero, QuboModel::with_nodes(["a", "b"]).unwrap());

        let bad: BTreeMap<String, f64> = [("a".into(), -1.0), ("b".into(), 0.0)].into();
        assert!(matches!(
            zero.add_cost_term(&bad),
            Err(QuboError::NegativeCost { .. })
        ));
        let missing: BTreeMap<String, f64> = [("a".into(), 1.0)].into();
        assert!(matches!(
            zero.add_cost_term(&missing),
            Err(QuboError::MissingCost(_))
        ));
    }

    #[test]
    fn equality_two_nodes() {
        for (b, expect) in [(1.0, [1.0, 0.0, 0.0, 1.0]), (30.0, [30.0, 0.0, 0.0, 30.0])] {
            let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
            m.add_cardinality_equality(1, b).unwrap();
            let e: Vec<f64> = all_assignments(2).map(|x| m.energy(&x).unwrap()).collect();
            // enumeration order: (0,0), (1,0), (0,1), (1,1)
            assert_eq!(e, expect.to_vec());
        }
    }

    #[test]
    fn equality_full_selection() {
        let mut m = QuboModel::with_nodes(["a", "b", "c"]).unwrap();
        m.add_cardinality_equality(3, 5.0).unwrap();
        for x in all_assignments(3) {
            let e = m.energy(&x).unwrap();
            if x == [1, 1, 1] {
                assert_eq!(e, 0.0);
            } else {
                assert!(e > 0.0);
            }
        }
        assert!(matches!(
            m.add_cardinality_equality(4, 1.0),
            Err(QuboError::SensorCount { .. })
        ));
    }

    #[test]
    fn at_most_examples() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        let slacks = m.add_cardinality_at_most(2, 1.0).unwrap();
        assert_eq!(slacks, vec![2, 3]);
        assert_eq!(m.energy(&[1, 0, 1, 0]).unwrap(), 0.0);
        assert_eq!(m.energy(&[1, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(m.energy(&[1, 1, 1, 0]).unwrap(), 1.0);
        assert_eq!(m.energy(&[0, 0, 0, 0]).unwrap(), 1.0);
        assert_eq!(
            m.add_cardinality_at_most(2, 1.0),
            Err(QuboError::SlackAlreadyRegistered)
        );

        let mut one = QuboModel::with_nodes(["a"]).unwrap();
        one.add_cardinality_at_most(1, 1.0).unwrap();
        assert_eq!(one.energy(&[1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn pin_forbid_examples() {
        let mut m = QuboModel::with_nodes(["a", "b"]).unwrap();
        let installed: BTreeSet<String> = ["a".into()].into();
        let rejected: BTreeSet<String> = ["b".into()].into();
        m.add_pin_forbid_term(&installed, &rejected, 10.0).unwrap();
        assert_eq!(m.energy(&[1, 0]).unwrap(), 0.0);
        assert_eq!(m.energy(&[0, 1]).unwrap(), 20.0);
        assert_eq!(m.energy(&[1, 1]).unwrap(), 10.0);

        let mut empty = QuboModel::with_nodes(["a", "b"]).unwrap();
        empty
            .add_pin_forbid_term(&BTreeSet::new(), &BTreeSet::new(), 10.0)
            .unwrap();
        assert_eq!(empty, QuboModel::with_nodes(["a", "b"]).unwrap());

        assert_eq!(
            empty.add_pin_forbid_term(&installed, &installed, 1.0),
            Err(QuboError::PinConflict("a".into()))
        );
        let unknown: BTreeSet<String> = ["z".into()].into();
        assert_eq!(
            empty.add_pin_forbid_term(&unknown, &BTreeSet::new(), 1.0),
            Err(QuboError::UnknownNode("z".into()))
        );
    }

    #[test]
    fn cubic_gadget_values() {
        let mut m = QuboModel::with_nodes(["i", "j", "k"]).unwrap();
        let anc = m.reduce_cubic(0, 1, 2, 1.0).unwrap();
        assert_eq!(anc, 3);
        let at = |j: u8, k: u8, a: u8| m.energy(&[0, j, k, a]).unwrap();
        assert_eq!(at(1, 1, 1), 0.0);
        assert_eq!(at(1, 1, 0), 1.0);
        assert_eq!(at(0, 0, 1), 3.0);
        assert_eq!(
            m.reduce_cubic(0, 0, 2, 1.0),
            Err(QuboError::NotDistinct(0, 0, 2))
        );
    }

    #[test]
    fn cubic_term_rewrites_product() {
        let mut m = QuboModel::with_nodes(["i", "j", "k"]).unwrap();
        let anc = m.add_cubic_term(-2.0, 0, 1, 2, 5.0).unwrap();
        for x in all_assignments(3) {
            let mut full = x.clone();
            full.push(x[1] * x[2]);
            let cubic = -2.0 * f64::from(x[0] * x[1] * x[2]);
            assert_eq!(m.energy(&full).unwrap(), cubic);
        }
        assert_eq!(anc, 3);
    }
}
