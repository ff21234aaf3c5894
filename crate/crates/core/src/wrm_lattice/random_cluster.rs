use super::SpinWeights;
use crate::cluster::AdjacencyGraph;
use crate::error::{Result, WrmError};

/// Vertex cap of the random-cluster expansion (2^20 subsets).
pub const RC_CAP: usize = 20;

/// Partition function via the random-cluster expansion
/// `Z = Σ_{ω ⊆ C} w0^{|C∖ω|} Π_{K comp. of ω} (w+^{|K|} + w-^{|K|})`,
/// components taken in the subgraph induced by `ω`.
pub fn z_random_cluster(vertices: &[usize], graph: &AdjacencyGraph, w: &SpinWeights) -> Result<f64> {
    let n = vertices.len();
    if n > RC_CAP {
        return Err(WrmError::CapExceeded {
            what: "random-cluster expansion",
            size: n,
            cap: RC_CAP,
        });
    }
    let g = graph.induced(vertices);
    let nbr: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let pow = |b: f64| -> Vec<f64> {
        let mut v = vec![1.0; n + 1];
        for k in 1..=n {
            v[k] = v[k - 1] * b;
        }
        v
    };
    let (p0, pp, pm) = (pow(w.zero), pow(w.plus), pow(w.minus));
    let sign_sum: Vec<f64> = (0..=n).map(|k| pp[k] + pm[k]).collect();

    let mut z = 0.0;
    for omega in 0u32..(1u32 << n) {
        let mut weight = p0[n - omega.count_ones() as usize];
        let mut rest = omega;
        while rest != 0 && weight != 0.0 {
            // Flood-fill the component of the lowest remaining vertex.
            let mut comp = rest & rest.wrapping_neg();
            loop {
                let mut grown = comp;
                let mut bits = comp;
                while bits != 0 {
                    let v = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    grown |= nbr[v] & omega;
                }
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            rest &= !comp;
            weight *= sign_sum[comp.count_ones() as usize];
        }
        z += weight;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Rule;
    use crate::wrm_lattice::z_enum;

    #[test]
    fn single_site_and_edge() {
        let w = SpinWeights::new(0.2, 0.5, 0.3).unwrap();
        let g1 = AdjacencyGraph::from_edges(1, &[], Rule::Lattice).unwrap();
        assert!((z_random_cluster(&[0], &g1, &w).unwrap() - 1.0).abs() < 1e-15);
        let g2 = AdjacencyGraph::from_edges(2, &[(0, 1)], Rule::Lattice).unwrap();
        let s = SpinWeights::symmetric(0.3).unwrap();
        let rc = z_random_cluster(&[0, 1], &g2, &s).unwrap();
        let en = z_enum(&[0, 1], &g2, &s).unwrap();
        assert!((rc - en).abs() < 1e-15);
    }

    #[test]
    fn cap() {
        let g = AdjacencyGraph::from_edges(21, &[], Rule::Lattice).unwrap();
        let v: Vec<usize> = (0..21).collect();
        let w = SpinWeights::symmetric(0.1).unwrap();
        assert!(z_random_cluster(&v, &g, &w).is_err());
    }
}
