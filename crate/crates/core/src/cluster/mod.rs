//! Adjacency graphs of environments, connected components, merged clusters
//! and areas of disk unions.

pub mod area;
mod union_find;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use area::{lens_area, overlap_area, region_area, DiskRegion};
pub use union_find::UnionFind;

use crate::env::{dist2, LatticeEnv, MarkedPointCloud, Site};
use crate::error::{Result, WrmError};

/// Interaction rule defining the edges of an environment graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    /// Occupied sites at Euclidean distance 1.
    Lattice,
    /// Points at distance strictly below `r`.
    Gilbert(f64),
    /// Marked points with `|x - y| <= m_x + m_y + 2a`.
    Boolean(f64),
}

impl Rule {
    /// Adjacency of two points under a continuum rule.
    pub fn adjacent(&self, x: &[f64], mx: f64, y: &[f64], my: f64) -> bool {
        match *self {
            Rule::Gilbert(r) => dist2(x, y) < r * r,
            Rule::Boolean(a) => {
                let reach = mx + my + 2.0 * a;
                dist2(x, y) <= reach * reach
            }
            Rule::Lattice => {
                let d2 = dist2(x, y);
                d2 == 1.0
            }
        }
    }

    fn check_cloud(&self, cloud: &MarkedPointCloud) -> Result<()> {
        match self {
            Rule::Gilbert(r) if cloud.is_marked() => Err(WrmError::RuleMismatch(format!(
                "gilbert({r}) rule needs an unmarked cloud"
            ))),
            Rule::Boolean(_) if !cloud.is_marked() => Err(WrmError::RuleMismatch(
                "boolean rule needs radius marks".into(),
            )),
            Rule::Lattice => Err(WrmError::RuleMismatch(
                "lattice rule applies to lattice environments".into(),
            )),
            Rule::Gilbert(r) if !(*r > 0.0) => Err(WrmError::param(format!("gilbert radius {r}"))),
            Rule::Boolean(a) if !(*a >= 0.0) => Err(WrmError::param(format!("hard-core radius {a}"))),
            _ => Ok(()),
        }
    }

    /// Largest distance at which two points of `cloud` can be adjacent.
    fn reach(&self, cloud: &MarkedPointCloud) -> f64 {
        match *self {
            Rule::Gilbert(r) => r,
            Rule::Boolean(a) => {
                let mmax = cloud
                    .marks()
                    .map_or(0.0, |m| m.iter().copied().fold(0.0, f64::max));
                2.0 * mmax + 2.0 * a
            }
            Rule::Lattice => 1.0,
        }
    }
}

/// Undirected simple graph on vertices `0..n` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyGraph {
    adj: Vec<Vec<usize>>,
    rule: Rule,
}

impl AdjacencyGraph {
    /// Builds a graph from an edge list; self-loops are rejected, duplicate
    /// edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], rule: Rule) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(WrmError::param(format!("invalid edge ({a}, {b}) for {n} vertices")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adj, rule })
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Edges `(a, b)` with `a < b` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (a, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Subgraph induced by `vertices`; vertex `i` of the result is
    /// `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> AdjacencyGraph {
        let pos: HashMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let adj = vertices
            .iter()
            .map(|&v| {
                let mut l: Vec<usize> = self.adj[v].iter().filter_map(|u| pos.get(u).copied()).collect();
                l.sort_unstable();
                l
            })
            .collect();
        AdjacencyGraph {
            adj,
            rule: self.rule,
        }
    }

    /// Whether the subgraph induced by `vertices` is connected (the empty set
    /// counts as connected).
    pub fn is_connected_subset(&self, vertices: &[usize]) -> bool {
        clusters(&self.induced(vertices)).clusters.len() <= 1
    }
}

/// Connected components of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    /// Components ordered by smallest vertex, each sorted ascending.
    pub clusters: Vec<Vec<usize>>,
    #[serde(skip)]
    labels: Vec<usize>,
}

impl ClusterDecomposition {
    pub fn from_clusters(clusters: Vec<Vec<usize>>) -> Self {
        let n = clusters.iter().map(Vec::len).sum();
        let mut labels = vec![usize::MAX; n];
        for (k, c) in clusters.iter().enumerate() {
            for &v in c {
                if v < n {
                    labels[v] = k;
                }
            }
        }
        Self { clusters, labels }
    }

    /// Cluster id of vertex `v`.
    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn cluster_of(&self, v: usize) -> &[usize] {
        &self.clusters[self.labels[v]]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

pub fn clusters(g: &AdjacencyGraph) -> ClusterDecomposition {
    let mut uf = UnionFind::new(g.num_vertices());
    for (a, b) in g.edges() {
        uf.union(a, b);
    }
    ClusterDecomposition::from_clusters(uf.groups())
}

/// Graph on the occupied sites of `env` (vertex order = `env.sites()`).
pub fn lattice_graph(env: &LatticeEnv) -> AdjacencyGraph {
    let sites = env.sites();
    let index: HashMap<&Site, usize> = sites.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut edges = Vec::new();
    let mut probe = Vec::new();
    for (i, s) in sites.iter().enumerate() {
        for axis in 0..s.len() {
            probe.clone_from(s);
            probe[axis] += 1;
            if let Some(&j) = index.get(&probe) {
                edges.push((i, j));
            }
        }
    }
    AdjacencyGraph::from_edges(sites.len(), &edges, Rule::Lattice).expect("valid lattice edges")
}

/// Unit-scale Gilbert graph: edge iff `|X_i - X_j| < r`.
pub fn gilbert_graph(cloud: &MarkedPointCloud, r: f64) -> Result<AdjacencyGraph> {
    geometric_graph(cloud, Rule::Gilbert(r))
}

/// Boolean-model interaction graph BM^a: edge iff `|x - y| <= m_x + m_y + 2a`.
pub fn boolean_graph(cloud: &MarkedPointCloud, a: f64) -> Result<AdjacencyGraph> {
    geometric_graph(cloud, Rule::Boolean(a))
}

/// Graph of a continuum rule, using cell hashing with cell side equal to the
/// rule's reach.
pub fn geometric_graph(cloud: &MarkedPointCloud, rule: Rule) -> Result<AdjacencyGraph> {
    rule.check_cloud(cloud)?;
    let n = cloud.len();
    let reach = rule.reach(cloud);
    let mark = |i: usize| cloud.mark(i).unwrap_or(0.0);
    let mut edges = Vec::new();
    if n < 64 || reach <= 0.0 {
        for i in 0..n {
            for j in i + 1..n {
                if rule.adjacent(cloud.point(i), mark(i), cloud.point(j), mark(j)) {
                    edges.push((i, j));
                }
            }
        }
        return AdjacencyGraph::from_edges(n, &edges, rule);
    }
    let dim = cloud.dim();
    let cell_of = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / reach).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for i in 0..n {
        grid.entry(cell_of(cloud.point(i))).or_default().push(i);
    }
    let offsets = neighbour_offsets(dim);
    let mut key = vec![0i64; dim];
    for i in 0..n {
        let c = cell_of(cloud.point(i));
        for off in &offsets {
            for d in 0..dim {
                key[d] = c[d] + off[d];
            }
            if let Some(bucket) = grid.get(&key) {
                for &j in bucket {
                    if j > i && rule.adjacent(cloud.point(i), mark(i), cloud.point(j), mark(j)) {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    AdjacencyGraph::from_edges(n, &edges, rule)
}

fn neighbour_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-1..=1).map(move |o| {
                    let mut w = v.clone();
                    w.push(o);
                    w
                })
            })
            .collect();
    }
    out
}

/// Occupied lattice neighbours `n(x, η)` of site `x`.
pub fn lattice_neighbors(env: &LatticeEnv, x: &[i64]) -> Vec<Site> {
    let mut out = Vec::new();
    for axis in 0..x.len() {
        for delta in [-1, 1] {
            let mut s = x.to_vec();
            s[axis] += delta;
            if env.is_occupied(&s) {
                out.push(s);
            }
        }
    }
    out.sort();
    out
}

/// Merged cluster `η_⟨x⟩`: the union of the components of `env` adjacent to
/// `x`, excluding `x` itself. Empty when `x` is isolated.
pub fn lattice_cluster_at(env: &LatticeEnv, x: &[i64]) -> Vec<Site> {
    let env = env.without(x);
    let seeds = lattice_neighbors(&env, x);
    let mut seen: BTreeSet<Site> = BTreeSet::new();
    let mut stack = seeds;
    while let Some(s) = stack.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        stack.extend(lattice_neighbors(&env, &s).into_iter().filter(|t| !seen.contains(t)));
    }
    seen.into_iter().collect()
}

/// Indices of cloud points adjacent to the (marked) point `x` under `rule`.
pub fn cloud_neighbors(cloud: &MarkedPointCloud, rule: Rule, x: &[f64], mx: f64) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&i| rule.adjacent(x, mx, cloud.point(i), cloud.mark(i).unwrap_or(0.0)))
        .collect()
}

/// Merged cluster of `x` in a cloud (indices into `cloud`, ascending).
pub fn cloud_cluster_at(cloud: &MarkedPointCloud, rule: Rule, x: &[f64], mx: f64) -> Result<Vec<usize>> {
    let g = geometric_graph(cloud, rule)?;
    let dec = clusters(&g);
    Ok(merge_components(&dec, &cloud_neighbors(cloud, rule, x, mx)))
}

/// Union of the components containing `seeds`, sorted.
pub fn merge_components(dec: &ClusterDecomposition, seeds: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = seeds.iter().map(|&v| dec.label(v)).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut out: Vec<usize> = ids.iter().flat_map(|&k| dec.clusters[k].iter().copied()).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{build_half_lattice, sample_bernoulli_field, sample_ppp, LatticeBox, Window};

    fn sites(v: &[[i64; 2]]) -> Vec<Site> {
        v.iter().map(|s| s.to_vec()).collect()
    }

    #[test]
    fn lattice_edges() {
        let diag = LatticeEnv::from_sites(sites(&[[0, 0], [1, 1]])).unwrap();
        assert_eq!(lattice_graph(&diag).num_edges(), 0);
        let block = LatticeEnv::full(LatticeBox::rect(2, 2).unwrap());
        assert_eq!(lattice_graph(&block).num_edges(), 4);
    }

    #[test]
    fn lattice_graph_matches_pairwise_oracle() {
        let b = LatticeBox::rect(10, 10).unwrap();
        for seed in 0..20 {
            let env = sample_bernoulli_field(&b, 0.3, seed).unwrap();
            let s = env.sites();
            let mut oracle = Vec::new();
            for i in 0..s.len() {
                for j in i + 1..s.len() {
                    if crate::env::l1(&s[i], &s[j]) == 1 {
                        oracle.push((i, j));
                    }
                }
            }
            assert_eq!(lattice_graph(&env).edges(), oracle);
        }
    }

    #[test]
    fn gilbert_strict_threshold() {
        let c = MarkedPointCloud::from_points(2, &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(gilbert_graph(&c, 1.0).unwrap().num_edges(), 0);
        let c = MarkedPointCloud::from_points(2, &[vec![0.0, 0.0], vec![0.99, 0.0]]).unwrap();
        assert_eq!(gilbert_graph(&c, 1.0).unwrap().num_edges(), 1);
        let m = MarkedPointCloud::from_marked_points(2, &[(vec![0.0, 0.0], 0.1)]).unwrap();
        assert!(matches!(gilbert_graph(&m, 1.0), Err(WrmError::RuleMismatch(_))));
    }

    #[test]
    fn gilbert_matches_pairwise_oracle() {
        let w = Window::cube(2, 10.0).unwrap();
        let c = sample_ppp(&w, 5.0, 11).unwrap();
        assert!(c.len() > 400);
        let mut oracle = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                if dist2(c.point(i), c.point(j)) < 1.0 {
                    oracle.push((i, j));
                }
            }
        }
        assert_eq!(gilbert_graph(&c, 1.0).unwrap().edges(), oracle);
    }

    #[test]
    fn boolean_closed_threshold() {
        let a = 0.5;
        let c = MarkedPointCloud::from_marked_points(2, &[(vec![0.0, 0.0], 0.0), (vec![1.0, 0.0], 0.0)]).unwrap();
        assert_eq!(boolean_graph(&c, a).unwrap().num_edges(), 1);
        let c = MarkedPointCloud::from_marked_points(2, &[(vec![0.0, 0.0], 0.0), (vec![1.001, 0.0], 0.0)]).unwrap();
        assert_eq!(boolean_graph(&c, a).unwrap().num_edges(), 0);
        let u = MarkedPointCloud::from_points(2, &[vec![0.0, 0.0]]).unwrap();
        assert!(boolean_graph(&u, a).is_err());
    }

    #[test]
    fn boolean_matches_pairwise_oracle() {
        let w = Window::cube(2, 12.0).unwrap();
        let law = crate::env::RadiusLaw::Uniform { low: 0.0, high: 0.5 };
        let c = crate::env::sample_marked_ppp(&w, 2.0, &law, 4).unwrap();
        let mut oracle = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                let reach = c.mark(i).unwrap() + c.mark(j).unwrap() + 0.6;
                if dist2(c.point(i), c.point(j)) <= reach * reach {
                    oracle.push((i, j));
                }
            }
        }
        assert_eq!(boolean_graph(&c, 0.3).unwrap().edges(), oracle);
    }

    #[test]
    fn cluster_counts() {
        let empty = AdjacencyGraph::from_edges(0, &[], Rule::Lattice).unwrap();
        assert!(clusters(&empty).is_empty());
        let two_cliques =
            AdjacencyGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)], Rule::Lattice)
                .unwrap();
        assert_eq!(clusters(&two_cliques).len(), 2);
    }

    #[test]
    fn half_lattice_connectivity() {
        for n in 1..=3 {
            let g = build_half_lattice(n).unwrap();
            let zeta = LatticeEnv::from_sites(g.zeta.clone()).unwrap();
            assert_eq!(clusters(&lattice_graph(&zeta)).len(), 1);
            assert_eq!(clusters(&lattice_graph(&zeta.without(&g.o))).len(), 2);
            let zp = LatticeEnv::from_sites(g.zeta_prime.clone()).unwrap();
            assert_eq!(clusters(&lattice_graph(&zp.without(&g.o))).len(), 1);
            assert_eq!(lattice_cluster_at(&zeta, &g.o), g.halves());
        }
    }

    #[test]
    fn cluster_at_bridge_and_isolated() {
        let env = LatticeEnv::from_sites(sites(&[[0, 0], [1, 0], [2, 0], [4, 0], [5, 0], [6, 0]])).unwrap();
        assert_eq!(lattice_cluster_at(&env, &[3, 0]).len(), 6);
        assert!(lattice_cluster_at(&env, &[10, 10]).is_empty());
        assert_eq!(lattice_neighbors(&env, &[3, 0]), sites(&[[2, 0], [4, 0]]));
    }

    #[test]
    fn cloud_neighbours_per_rule() {
        let c = MarkedPointCloud::from_points(2, &[vec![0.5, 0.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(cloud_neighbors(&c, Rule::Gilbert(1.0), &[0.0, 0.0], 0.0), vec![0]);
        let m = MarkedPointCloud::from_marked_points(2, &[(vec![1.2, 0.0], 0.1), (vec![3.0, 0.0], 0.1)]).unwrap();
        assert_eq!(cloud_neighbors(&m, Rule::Boolean(0.5), &[0.0, 0.0], 0.1), vec![0]);
        let cl = cloud_cluster_at(&m, Rule::Boolean(0.5), &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(cl, vec![0]);
    }
}
