use super::SpinWeights;
use crate::error::{Result, WrmError};

/// Effective weights of a thickened vertex: `k` mutually adjacent copies,
/// each with weights `(p, p, 1 - 2p)`. All non-zero spins of a feasible
/// clique share one sign, so the clique reads as `0` with weight
/// `(1 - 2p)^k` and as `±` with weight `(1 - p)^k - (1 - 2p)^k`.
pub fn reduce_thickened(k: usize, p: f64) -> Result<SpinWeights> {
    if k == 0 {
        return Err(WrmError::param("thickening needs k >= 1"));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(WrmError::param(format!("p = {p} must lie in (0, 1/2)")));
    }
    let zero = (1.0 - 2.0 * p).powi(k as i32);
    let signed = (1.0 - p).powi(k as i32) - zero;
    SpinWeights::new(signed, signed, zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{AdjacencyGraph, Rule};
    use crate::wrm_lattice::enumerate_feasible;

    #[test]
    fn identity_for_k1() {
        let w = reduce_thickened(1, 0.3).unwrap();
        assert!((w.zero - 0.4).abs() < 1e-15 && (w.plus - 0.3).abs() < 1e-15);
    }

    #[test]
    fn k2_against_intra_vertex_enumeration() {
        let w = reduce_thickened(2, 0.3).unwrap();
        assert!((w.zero - 0.16).abs() < 1e-15);
        assert!((w.plus - 0.33).abs() < 1e-15);
        // Nine colourings of an edge, split by the effective spin.
        let base = SpinWeights::symmetric(0.3).unwrap();
        let g = AdjacencyGraph::from_edges(2, &[(0, 1)], Rule::Gilbert(1.0)).unwrap();
        let (mut zero, mut plus) = (0.0, 0.0);
        enumerate_feasible(&g, &base, |s, wt| {
            if s.iter().all(|&x| x == 0) {
                zero += wt;
            } else if s.iter().all(|&x| x >= 0) {
                plus += wt;
            }
        });
        assert!((zero - w.zero).abs() < 1e-15 && (plus - w.plus).abs() < 1e-15);
    }
}
