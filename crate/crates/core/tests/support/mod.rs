//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdnsense_core::network::{EdgeSpec, Network, Node};
use wdnsense_core::qubo::{QuboModel, VarRole};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected graph: a random spanning tree plus extra edges.
/// `integer_lengths` draws lengths from {1, 2, 3} so equal-length paths are
/// common; otherwise lengths are uniform in [0.5, 5).
pub fn random_connected(rng: &mut ChaCha8Rng, max_nodes: usize, integer_lengths: bool) -> Network {
    let n = rng.gen_range(2..=max_nodes);
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            if i == 0 {
                Node::source("v0")
            } else {
                Node::junction(format!("v{i}"), rng.gen_range(0.0..10.0))
            }
        })
        .collect();
    let length = |rng: &mut ChaCha8Rng| {
        if integer_lengths {
            f64::from(rng.gen_range(1..=3u8))
        } else {
            rng.gen_range(0.5..5.0)
        }
    };
    let mut pairs = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.insert((j, i));
        edges.push(EdgeSpec::new(format!("e{j}-{i}"), format!("v{j}"), format!("v{i}"), length(rng)));
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if a != b && pairs.insert((a, b)) {
            edges.push(EdgeSpec::new(format!("e{a}-{b}"), format!("v{a}"), format!("v{b}"), length(rng)));
        }
    }
    Network::new(nodes, edges).unwrap()
}

fn simple_paths(
    net: &Network,
    at: usize,
    target: usize,
    visited: &mut Vec<bool>,
    nodes: &mut Vec<usize>,
    edges: &mut Vec<usize>,
    out: &mut Vec<(f64, Vec<usize>, Vec<usize>)>,
) {
    if at == target {
        let len = edges.iter().map(|&e| net.edges()[e].length).sum();
        out.push((len, nodes.clone(), edges.clone()));
        return;
    }
    for &(w, e) in net.neighbors(at) {
        if !visited[w] {
            visited[w] = true;
            nodes.push(w);
            edges.push(e);
            simple_paths(net, w, target, visited, nodes, edges, out);
            nodes.pop();
            edges.pop();
            visited[w] = false;
        }
    }
}

/// Betweenness by enumerating every simple path between every unordered
/// pair. Returns (node values, edge values).
pub fn brute_betweenness(net: &Network) -> (Vec<f64>, Vec<f64>) {
    let n = net.node_count();
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; net.edge_count()];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths = Vec::new();
            let mut visited = vec![false; n];
            visited[s] = true;
            simple_paths(net, s, t, &mut visited, &mut vec![s], &mut Vec::new(), &mut paths);
            let best = paths.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let shortest: Vec<_> = paths
                .iter()
                .filter(|p| (p.0 - best).abs() <= 1e-12 * best.max(1.0))
                .collect();
            let sigma = shortest.len() as f64;
            for (_, ns, es) in shortest {
                for &v in &ns[1..ns.len() - 1] {
                    node[v] += 1.0 / sigma;
                }
                for &e in es {
                    edge[e] += 1.0 / sigma;
                }
            }
        }
    }
    (node, edge)
}

pub fn scaled(net: &Network, factor: f64) -> Network {
    let edges = net
        .edge_specs()
        .into_iter()
        .map(|mut e| {
            e.length *= factor;
            e
        })
        .collect();
    Network::new(net.nodes().to_vec(), edges).unwrap()
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// All `2^n` binary vectors, bit `i` of the counter in position `i`.
pub fn assignments(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u64..1 << n).map(move |k| (0..n).map(|i| ((k >> i) & 1) as u8).collect())
}

/// Random QUBO with `n` variables: dense-ish couplings, uniform coefficients.
pub fn random_qubo(rng: &mut ChaCha8Rng, n: usize) -> QuboModel {
    let mut model = QuboModel::new();
    for i in 0..n {
        model.add_variable(VarRole::Node(format!("x{i}"))).unwrap();
    }
    for i in 0..n {
        model.add_linear(i, rng.gen_range(-2.0..2.0));
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                model.add_quadratic(i, j, rng.gen_range(-2.0..2.0));
            }
        }
    }
    model.add_offset(rng.gen_range(-5.0..5.0));
    model
}

/// QUBO energy from a coefficient table, independent of the model's own
/// evaluation.
pub fn qubo_energy_by_table(model: &QuboModel, x: &[u8]) -> f64 {
    let mut e = model.offset();
    for (i, c) in model.linear().iter().enumerate() {
        e += c * f64::from(x[i]);
    }
    for ((i, j), q) in model.quadratic() {
        e += q * f64::from(x[i]) * f64::from(x[j]);
    }
    e
}

/// Minimum over all assignments by plain enumeration.
pub fn enumerate_minimum(model: &QuboModel) -> f64 {
    assignments(model.n())
        .map(|x| qubo_energy_by_table(model, &x))
        .fold(f64::INFINITY, f64::min)
}

/// `E [k_a . (k_a - x) + k_r . x]` with indicator vectors.
pub fn pin_forbid_dot_form(k_installed: &[u8], k_rejected: &[u8], x: &[u8], e: f64) -> f64 {
    let dot = |a: &[u8], b: &[f64]| a.iter().zip(b).map(|(&a, b)| f64::from(a) * b).sum::<f64>();
    let xf: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    let ka_minus_x: Vec<f64> = k_installed.iter().zip(&xf).map(|(&k, x)| f64::from(k) - x).collect();
    e * (dot(k_installed, &ka_minus_x) + dot(k_rejected, &xf))
}

/// `E sum_a (x_a - 1)^2 + E sum_r x_r^2` written out term by term.
pub fn pin_forbid_square_form(installed: &[usize], rejected: &[usize], x: &[u8], e: f64) -> f64 {
    let pins: f64 = installed.iter().map(|&a| (f64::from(x[a]) - 1.0).powi(2)).sum();
    let forbids: f64 = rejected.iter().map(|&r| f64::from(x[r]).powi(2)).sum();
    e * pins + e * forbids
}

pub fn id_map(ids: &[&str], values: &[f64]) -> BTreeMap<String, f64> {
    ids.iter().map(|s| s.to_string()).zip(values.iter().copied()).collect()
}
