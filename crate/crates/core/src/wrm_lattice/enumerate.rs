use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{compatible, transfer, MarginalTable, Spin, SpinWeights, SPINS};
use crate::cluster::{lattice_graph, AdjacencyGraph};
use crate::env::{LatticeEnv, Site};
use crate::error::{Result, WrmError};

/// Default vertex cap for brute-force enumeration.
pub const ENUM_CAP: usize = 16;

/// Partition function of the subgraph induced by `vertices`, by enumeration.
pub fn z_enum(vertices: &[usize], graph: &AdjacencyGraph, w: &SpinWeights) -> Result<f64> {
    z_enum_capped(vertices, graph, w, ENUM_CAP)
}

pub fn z_enum_capped(vertices: &[usize], graph: &AdjacencyGraph, w: &SpinWeights, cap: usize) -> Result<f64> {
    if vertices.len() > cap {
        return Err(WrmError::CapExceeded {
            what: "enumeration cluster",
            size: vertices.len(),
            cap,
        });
    }
    let mut z = 0.0;
    enumerate_feasible(&graph.induced(vertices), w, |_, weight| z += weight);
    Ok(z)
}

/// Calls `visit(spins, weight)` for every feasible assignment of the graph,
/// `spins` indexed by vertex.
pub fn enumerate_feasible(graph: &AdjacencyGraph, w: &SpinWeights, mut visit: impl FnMut(&[Spin], f64)) {
    let order = search_order(graph);
    let n = order.len();
    let mut pos_of = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        pos_of[v] = p;
    }
    // Neighbours assigned earlier in the search order.
    let back: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| graph.neighbors(v).iter().copied().filter(|&u| pos_of[u] < pos_of[v]).collect())
        .collect();
    let mut spins = vec![0 as Spin; n];
    let weights = [w.zero, w.plus, w.minus];
    dfs(&order, &back, &weights, &mut spins, 0, 1.0, &mut visit);
}

fn dfs(
    order: &[usize],
    back: &[Vec<usize>],
    weights: &[f64; 3],
    spins: &mut [Spin],
    pos: usize,
    acc: f64,
    visit: &mut impl FnMut(&[Spin], f64),
) {
    if pos == order.len() {
        visit(spins, acc);
        return;
    }
    let v = order[pos];
    for (k, &s) in SPINS.iter().enumerate() {
        if weights[k] == 0.0 || back[pos].iter().any(|&u| !compatible(spins[u], s)) {
            continue;
        }
        spins[v] = s;
        dfs(order, back, weights, spins, pos + 1, acc * weights[k], visit);
    }
    spins[v] = 0;
}

/// Breadth-first order per component, so each vertex meets its constraints
/// as early as possible.
fn search_order(graph: &AdjacencyGraph) -> Vec<usize> {
    let n = graph.num_vertices();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in graph.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order
}

/// Exact joint law of the spins at `sites` under the WRM on all of `env`.
/// Uses enumeration up to [`ENUM_CAP`] occupied sites and the transfer
/// engine beyond.
pub fn exact_marginal(env: &LatticeEnv, w: &SpinWeights, sites: &[Site]) -> Result<MarginalTable> {
    if let Some(s) = sites.iter().find(|s| !env.is_occupied(s)) {
        return Err(WrmError::param(format!("marked site {s:?} is not occupied")));
    }
    if env.len() > ENUM_CAP {
        return transfer::transfer_marginal_env(env, w, sites);
    }
    let all = env.sites();
    let index: HashMap<&Site, usize> = all.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let marked: Vec<usize> = sites.iter().map(|s| index[s]).collect();
    let g = lattice_graph(env);
    let mut table: BTreeMap<Vec<Spin>, f64> = BTreeMap::new();
    enumerate_feasible(&g, w, |spins, weight| {
        let key: Vec<Spin> = marked.iter().map(|&i| spins[i]).collect();
        *table.entry(key).or_insert(0.0) += weight;
    });
    MarginalTable::from_weights(sites.to_vec(), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Rule;

    fn path(n: usize) -> AdjacencyGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        AdjacencyGraph::from_edges(n, &edges, Rule::Lattice).unwrap()
    }

    #[test]
    fn closed_forms() {
        let w = SpinWeights::new(0.3, 0.2, 0.5).unwrap();
        assert_eq!(z_enum(&[0], &path(1), &w).unwrap(), 1.0);
        let edge = z_enum(&[0, 1], &path(2), &w).unwrap();
        assert!((edge - (1.0 - 2.0 * 0.3 * 0.2)).abs() < 1e-15);
    }

    #[test]
    fn path3_against_direct_sum() {
        // 27-term sum written out independently of the search.
        let w = SpinWeights::symmetric(0.3).unwrap();
        let mut z = 0.0;
        for a in [-1i8, 0, 1] {
            for b in [-1i8, 0, 1] {
                for c in [-1i8, 0, 1] {
                    if a * b != -1 && b * c != -1 {
                        z += w.weight(a) * w.weight(b) * w.weight(c);
                    }
                }
            }
        }
        assert!((z_enum(&[0, 1, 2], &path(3), &w).unwrap() - z).abs() < 1e-15);
    }

    #[test]
    fn cap_enforced() {
        let w = SpinWeights::symmetric(0.3).unwrap();
        let g = path(17);
        let v: Vec<usize> = (0..17).collect();
        assert!(matches!(z_enum(&v, &g, &w), Err(WrmError::CapExceeded { .. })));
        assert!(z_enum_capped(&v, &g, &w, 17).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let w = SpinWeights::new(0.3, 0.2, 0.5).unwrap();
        let single = LatticeEnv::from_sites(vec![vec![0, 0]]).unwrap();
        let m = exact_marginal(&single, &w, &[vec![0, 0]]).unwrap();
        let s = m.single(0);
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.3).abs() < 1e-15 && (s[2] - 0.2).abs() < 1e-15);
        let edge = LatticeEnv::from_sites(vec![vec![0, 0], vec![1, 0]]).unwrap();
        let m = exact_marginal(&edge, &w, &[vec![0, 0], vec![1, 0]]).unwrap();
        assert_eq!(m.prob(&[1, -1]), 0.0);
        assert!((m.total() - 1.0).abs() < 1e-12);
    }
}
