use serde::{Deserialize, Serialize};

use super::{compatible, enumerate, exact_marginal, transfer::TransferGrid, LatticeConfig, Spin, SpinWeights};
use crate::cluster::{clusters, lattice_cluster_at, lattice_graph, lattice_neighbors};
use crate::env::{LatticeEnv, Site};
use crate::error::{Result, WrmError};

/// Whether the single-site weight `w_s` multiplies the discrete Papangelou
/// intensity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PapConvention {
    /// `w_s` included: the intensity equals `K(η_o = (v, s) | ·) / K(u_o | ·)`
    /// with counting measure on spins.
    #[default]
    ExplicitWeight,
    /// `w_s` omitted: the weight is carried by the spin reference measure.
    PaperLiteral,
}

/// `ln Z` of the WRM on an arbitrary finite site set of `Z^2` (or any
/// dimension when every component is small enough to enumerate). Components
/// are evaluated independently.
pub fn ln_z_sites(sites: &[Site], w: &SpinWeights) -> Result<f64> {
    if sites.is_empty() {
        return Ok(0.0);
    }
    let env = LatticeEnv::from_sites(sites.to_vec())?;
    let g = lattice_graph(&env);
    let all = env.sites();
    let mut ln_z = 0.0;
    for comp in clusters(&g).clusters {
        if comp.len() <= enumerate::ENUM_CAP {
            ln_z += enumerate::z_enum(&comp, &g, w)?.ln();
        } else {
            let comp_sites: Vec<Site> = comp.iter().map(|&i| all[i].clone()).collect();
            ln_z += TransferGrid::from_sites(&comp_sites)?.z(w).ln();
        }
    }
    Ok(ln_z)
}

pub fn z_sites(sites: &[Site], w: &SpinWeights) -> Result<f64> {
    ln_z_sites(sites, w).map(f64::exp)
}

/// `Z_num / Z_den`.
pub fn z_ratio_sites(num: &[Site], den: &[Site], w: &SpinWeights) -> Result<f64> {
    Ok((ln_z_sites(num, w)? - ln_z_sites(den, w)?).exp())
}

fn with_site(sites: &[Site], x: &[i64]) -> Vec<Site> {
    let mut v = sites.to_vec();
    v.push(x.to_vec());
    v
}

/// `K(σ_o = +1 | η_{o^c})` under the all-plus boundary colouring, symmetric
/// weights `(p, p, 1 - 2p)`:
/// `q p / (q (1 - p) + (1 - q) Z_{η⟨o⟩ ∪ o} / Z_{η⟨o⟩})`.
///
/// Requires `o` to have an occupied neighbour, which makes `σ_o = -1`
/// infeasible.
pub fn conditional_k(env: &LatticeEnv, o: &[i64], q: f64, p: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(WrmError::param(format!("q = {q} must lie in (0, 1)")));
    }
    let w = SpinWeights::symmetric(p)?;
    let cluster = lattice_cluster_at(env, o);
    if cluster.is_empty() {
        return Err(WrmError::param(
            "o is isolated; the conditional formula needs an occupied neighbour",
        ));
    }
    let ratio = z_ratio_sites(&with_site(&cluster, o), &cluster, &w)?;
    Ok(q * p / (q * (1.0 - p) + (1.0 - q) * ratio))
}

/// Discrete Papangelou intensity for placing spin `s` at `o` given the
/// boundary configuration (which must leave `o` unoccupied):
/// `q/(1-q) · [w_s] · 1{feasible at o} · Z_{η⟨o⟩} / Z_{η⟨o⟩ ∪ o}`.
pub fn discrete_papangelou(
    s: Spin,
    o: &[i64],
    boundary: &LatticeConfig,
    q: f64,
    w: &SpinWeights,
    convention: PapConvention,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(WrmError::param(format!("q = {q} must lie in (0, 1)")));
    }
    if boundary.env.is_occupied(o) {
        return Err(WrmError::param("boundary configuration must leave o unoccupied"));
    }
    let feasible = lattice_neighbors(&boundary.env, o)
        .iter()
        .all(|n| compatible(boundary.spin(n).expect("occupied neighbour has a spin"), s));
    if !feasible {
        return Ok(0.0);
    }
    let cluster = lattice_cluster_at(&boundary.env, o);
    let ratio = z_ratio_sites(&cluster, &with_site(&cluster, o), w)?;
    let ws = match convention {
        PapConvention::ExplicitWeight => w.weight(s),
        PapConvention::PaperLiteral => 1.0,
    };
    Ok(q / (1.0 - q) * ws * ratio)
}

/// `h(σ_∂o) = Σ_s w_s Π_{i ∈ ∂o} 1{σ_i s != -1}`.
pub fn h_value(boundary_spins: &[Spin], w: &SpinWeights) -> f64 {
    [0, 1, -1]
        .into_iter()
        .filter(|&s| boundary_spins.iter().all(|&b| compatible(b, s)))
        .map(|s| w.weight(s))
        .sum()
}

/// `μ_{η⟨o⟩}(h(σ_∂o))`, which equals `Z_{η⟨o⟩ ∪ o} / Z_{η⟨o⟩}`.
pub fn h_ratio(cluster: &LatticeEnv, o: &[i64], w: &SpinWeights) -> Result<f64> {
    let boundary = lattice_neighbors(cluster, o);
    if boundary.is_empty() {
        return Ok(w.total());
    }
    let table = exact_marginal(cluster, w, &boundary)?;
    Ok(table.entries.iter().map(|(t, p)| p * h_value(t, w)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn env(sites: &[[i64; 2]]) -> LatticeEnv {
        LatticeEnv::from_sites(sites.iter().map(|s| s.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn conditional_k_single_neighbour() {
        let (q, p) = (0.4, 0.3);
        let e = env(&[[0, 0], [1, 0]]);
        let expect = q * p / (q * (1.0 - p) + (1.0 - q) * (1.0 - 2.0 * p * p));
        assert!((conditional_k(&e, &[0, 0], q, p).unwrap() - expect).abs() < 1e-15);
        assert!(conditional_k(&e, &[0, 0], q, 1e-9).unwrap() < 1e-8);
        let iso = env(&[[0, 0], [3, 3]]);
        assert!(conditional_k(&iso, &[0, 0], q, p).is_err());
    }

    #[test]
    fn papangelou_examples() {
        let w = SpinWeights::symmetric(0.3).unwrap();
        let q = 0.25;
        let e = env(&[[1, 0], [2, 0]]);
        let plus_nbr = LatticeConfig::new(e.clone(), BTreeMap::from([(vec![1, 0], 1), (vec![2, 0], 0)])).unwrap();
        let conv = PapConvention::ExplicitWeight;
        assert_eq!(discrete_papangelou(-1, &[0, 0], &plus_nbr, q, &w, conv).unwrap(), 0.0);
        let far = LatticeConfig::new(e, BTreeMap::from([(vec![1, 0], 1), (vec![2, 0], 0)])).unwrap();
        let iso = discrete_papangelou(1, &[-5, -5], &far, q, &w, conv).unwrap();
        assert!((iso - q / (1.0 - q) * 0.3).abs() < 1e-15);
        let lit = discrete_papangelou(1, &[-5, -5], &far, q, &w, PapConvention::PaperLiteral).unwrap();
        assert!((lit - q / (1.0 - q)).abs() < 1e-15);
    }

    #[test]
    fn h_ratio_equals_partition_ratio() {
        let w = SpinWeights::new(0.3, 0.15, 0.55).unwrap();
        let cl = env(&[[1, 0], [2, 0], [0, 1], [0, 2], [1, 2], [-1, 0]]);
        let h = h_ratio(&cl, &[0, 0], &w).unwrap();
        let r = z_ratio_sites(&with_site(&cl.sites(), &[0, 0]), &cl.sites(), &w).unwrap();
        assert!((h - r).abs() < 1e-12);
        // Single neighbour, symmetric: 1 - 2p P(σ_nbr = +1) ... for the
        // lone-site neighbour P(+) = p.
        let p = 0.3;
        let s = SpinWeights::symmetric(p).unwrap();
        let one = env(&[[1, 0]]);
        assert!((h_ratio(&one, &[0, 0], &s).unwrap() - (1.0 - 2.0 * p * p)).abs() < 1e-15);
        assert_eq!(h_ratio(&env(&[[5, 5]]), &[0, 0], &s).unwrap(), 1.0);
    }

    #[test]
    fn z_sites_factorizes() {
        let w = SpinWeights::new(0.3, 0.15, 0.55).unwrap();
        let a = vec![vec![0, 0], vec![1, 0]];
        let b = vec![vec![5, 5], vec![5, 6], vec![6, 6]];
        let both: Vec<Site> = a.iter().chain(&b).cloned().collect();
        let lhs = z_sites(&both, &w).unwrap();
        let rhs = z_sites(&a, &w).unwrap() * z_sites(&b, &w).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
    }
}
