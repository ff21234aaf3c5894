use rand::Rng as _;

use super::{compatible, Spin, SpinWeights, SPINS};
use crate::cluster::AdjacencyGraph;
use crate::error::{Result, WrmError};
use crate::rng::{rng_from_seed, Rng};

/// Single-site heat-bath chain for the WRM on a graph. Starts from the
/// all-zero configuration, which is feasible and reachable from every state.
#[derive(Debug, Clone)]
pub struct GlauberChain {
    graph: AdjacencyGraph,
    weights: SpinWeights,
    spins: Vec<Spin>,
    rng: Rng,
}

impl GlauberChain {
    pub fn new(graph: AdjacencyGraph, weights: SpinWeights, seed: u64) -> Self {
        let n = graph.num_vertices();
        Self {
            graph,
            weights,
            spins: vec![0; n],
            rng: rng_from_seed(seed),
        }
    }

    /// One systematic sweep over all vertices.
    pub fn sweep(&mut self) {
        for v in 0..self.spins.len() {
            let mut probs = [0.0; 3];
            for (k, &s) in SPINS.iter().enumerate() {
                if self.graph.neighbors(v).iter().all(|&u| compatible(self.spins[u], s)) {
                    probs[k] = self.weights.weight(s);
                }
            }
            let total: f64 = probs.iter().sum();
            let mut u = self.rng.random::<f64>() * total;
            let mut pick = 0;
            for (k, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    pick = k;
                    if u < *p {
                        break;
                    }
                    u -= p;
                }
            }
            self.spins[v] = SPINS[pick];
        }
    }

    pub fn spins(&self) -> &[Spin] {
        &self.spins
    }
}

/// Configuration after `sweeps` heat-bath sweeps on the subgraph induced by
/// `vertices` (spins indexed like `vertices`).
pub fn glauber_sample(
    vertices: &[usize],
    graph: &AdjacencyGraph,
    w: &SpinWeights,
    sweeps: usize,
    seed: u64,
) -> Result<Vec<Spin>> {
    if sweeps == 0 {
        return Err(WrmError::param("glauber sampling needs at least one sweep"));
    }
    let mut chain = GlauberChain::new(graph.induced(vertices), *w, seed);
    for _ in 0..sweeps {
        chain.sweep();
    }
    Ok(chain.spins.clone())
}
