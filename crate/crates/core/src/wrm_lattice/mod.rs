//! Discrete Widom–Rowlinson model on finite clusters: feasibility, partition
//! functions by enumeration, transfer matrices and the random-cluster
//! expansion, marginals, the discrete Papangelou intensity and the
//! thickened-vertex reduction.

mod enumerate;
mod glauber;
mod papangelou;
mod random_cluster;
mod thickened;
pub mod transfer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::AdjacencyGraph;
use crate::env::{LatticeEnv, ModelParams, Site};
use crate::error::{Result, WrmError};

pub use enumerate::{enumerate_feasible, exact_marginal, z_enum, z_enum_capped, ENUM_CAP};
pub use glauber::{glauber_sample, GlauberChain};
pub use papangelou::{
    conditional_k, discrete_papangelou, h_ratio, h_value, ln_z_sites, z_ratio_sites, z_sites,
    PapConvention,
};
pub use random_cluster::{z_random_cluster, RC_CAP};
pub use thickened::reduce_thickened;
pub use transfer::{transfer_marginal, z_transfer, LogScaled, TransferGrid, WIDTH_CAP};

/// Spin value: `-1`, `0` or `+1`.
pub type Spin = i8;

pub const SPINS: [Spin; 3] = [0, 1, -1];

/// Whether two spins may sit on adjacent vertices.
#[inline]
pub fn compatible(a: Spin, b: Spin) -> bool {
    a * b != -1
}

/// Unnormalized single-site weights `(w+, w-, w0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinWeights {
    pub plus: f64,
    pub minus: f64,
    pub zero: f64,
}

impl SpinWeights {
    pub fn new(plus: f64, minus: f64, zero: f64) -> Result<Self> {
        for (name, v) in [("w+", plus), ("w-", minus), ("w0", zero)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(WrmError::param(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if plus + minus + zero == 0.0 {
            return Err(WrmError::param("spin weights must not all vanish"));
        }
        Ok(Self { plus, minus, zero })
    }

    /// `(p, p, 1 - 2p)` for `0 <= p <= 1/2`.
    pub fn symmetric(p: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(WrmError::param(format!("symmetric p = {p} must lie in [0, 1/2]")));
        }
        Self::new(p, p, 1.0 - 2.0 * p)
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        Self::new(params.p_plus, params.p_minus, params.p_zero)
    }

    #[inline]
    pub fn weight(&self, s: Spin) -> f64 {
        match s {
            1 => self.plus,
            -1 => self.minus,
            _ => self.zero,
        }
    }

    pub fn total(&self) -> f64 {
        self.plus + self.minus + self.zero
    }

    /// `(p+, p-, p0)`.
    pub fn normalized(&self) -> (f64, f64, f64) {
        let t = self.total();
        (self.plus / t, self.minus / t, self.zero / t)
    }

    pub fn is_symmetric(&self) -> bool {
        self.plus == self.minus
    }
}

/// Joint configuration: an environment plus spins on its occupied sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub env: LatticeEnv,
    spins: BTreeMap<Site, Spin>,
}

impl LatticeConfig {
    pub fn new(env: LatticeEnv, spins: BTreeMap<Site, Spin>) -> Result<Self> {
        if spins.len() != env.len() || spins.keys().any(|s| !env.is_occupied(s)) {
            return Err(WrmError::param("spins must be given exactly on occupied sites"));
        }
        if spins.values().any(|s| !(-1..=1).contains(s)) {
            return Err(WrmError::param("spins must lie in {-1, 0, 1}"));
        }
        Ok(Self { env, spins })
    }

    /// Spins listed in the order of `env.sites()`.
    pub fn from_vec(env: LatticeEnv, spins: &[Spin]) -> Result<Self> {
        if spins.len() != env.len() {
            return Err(WrmError::param("one spin per occupied site required"));
        }
        let map = env.sites().into_iter().zip(spins.iter().copied()).collect();
        Self::new(env, map)
    }

    /// `None` reads as the unoccupied state `u`.
    pub fn spin(&self, site: &[i64]) -> Option<Spin> {
        self.spins.get(site).copied()
    }

    /// Spins in the order of `env.sites()`.
    pub fn spin_vec(&self) -> Vec<Spin> {
        self.spins.values().copied().collect()
    }

    /// Copy with the unoccupied `site` occupied by spin `s`.
    pub fn with_spin(&self, site: &[i64], s: Spin) -> Result<Self> {
        if self.env.is_occupied(site) {
            return Err(WrmError::param(format!("site {site:?} is already occupied")));
        }
        let mut spins = self.spins.clone();
        spins.insert(site.to_vec(), s);
        Self::new(self.env.with(site), spins)
    }
}

/// Feasibility of a configuration against a graph built on `config.env`.
pub fn is_feasible(config: &LatticeConfig, graph: &AdjacencyGraph) -> bool {
    is_feasible_spins(&config.spin_vec(), graph)
}

/// `σ_i σ_j != -1` on every edge.
pub fn is_feasible_spins(spins: &[Spin], graph: &AdjacencyGraph) -> bool {
    graph.edges().iter().all(|&(a, b)| compatible(spins[a], spins[b]))
}

/// Exact joint law of the spins at a list of marked sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub sites: Vec<Site>,
    /// `(spin tuple, probability)` in lexicographic order of the tuple.
    pub entries: Vec<(Vec<Spin>, f64)>,
}

impl MarginalTable {
    pub(crate) fn from_weights(sites: Vec<Site>, weights: BTreeMap<Vec<Spin>, f64>) -> Result<Self> {
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return Err(WrmError::Degenerate("marginal table has zero total mass".into()));
        }
        let entries = weights.into_iter().map(|(k, v)| (k, v / total)).collect();
        Ok(Self { sites, entries })
    }

    pub fn prob(&self, spins: &[Spin]) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| k.as_slice() == spins)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    /// Marginal of the `i`-th marked site.
    pub fn single(&self, i: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, p) in &self.entries {
            out[spin_index(k[i])] += p;
        }
        out
    }

    /// Same table with every spin negated.
    pub fn flipped(&self) -> Self {
        let mut entries: Vec<(Vec<Spin>, f64)> = self
            .entries
            .iter()
            .map(|(k, p)| (k.iter().map(|s| -s).collect(), *p))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        Self {
            sites: self.sites.clone(),
            entries,
        }
    }
}

/// Index of a spin in `[0, +1, -1]` order.
#[inline]
pub fn spin_index(s: Spin) -> usize {
    match s {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// All tuples in `{-1, 0, 1}^len`, lexicographic.
pub(crate) fn spin_tuples(len: usize) -> Vec<Vec<Spin>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                [-1, 0, 1].into_iter().map(move |s| {
                    let mut u = t.clone();
                    u.push(s);
                    u
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::lattice_graph;

    #[test]
    fn feasibility_examples() {
        let env = LatticeEnv::from_sites(vec![vec![0, 0], vec![1, 0], vec![2, 0]]).unwrap();
        let g = lattice_graph(&env);
        let cfg = |s: &[Spin]| LatticeConfig::from_vec(env.clone(), s).unwrap();
        assert!(is_feasible(&cfg(&[0, 0, 0]), &g));
        assert!(!is_feasible(&cfg(&[1, -1, 0]), &g));
        assert!(is_feasible(&cfg(&[1, 0, -1]), &g));
        assert_eq!(cfg(&[1, 0, -1]).spin(&[5, 5]), None);
    }

    #[test]
    fn weights_validation() {
        assert!(SpinWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(SpinWeights::new(-0.1, 0.5, 0.6).is_err());
        let w = SpinWeights::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(w.normalized(), (0.5, 0.25, 0.25));
        assert!(SpinWeights::symmetric(0.6).is_err());
    }
}
