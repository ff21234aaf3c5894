//! Site-by-site transfer-matrix evaluation of WRM partition functions on
//! (masked) rectangles of `Z^2`.
//!
//! The profile state holds the base-3 spin codes of the last `width` sites,
//! digit `c` being the most recent site in column `c`. Adding site `(r, c)`
//! checks the site above (old digit `c`) and the site to the left (digit
//! `c - 1`, already overwritten for row `r`), then stores the new spin in
//! digit `c`. Code 0 is spin 0, code 1 is `+`, code 2 is `-`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Zero};
use serde::{Deserialize, Serialize};

use super::{spin_index, spin_tuples, MarginalTable, Spin, SpinWeights};
use crate::env::{LatticeBox, LatticeEnv, Site};
use crate::error::{Result, WrmError};

/// Largest short side handled by the transfer engine (3^10 profile states).
pub const WIDTH_CAP: usize = 10;

/// Cell mask bit: site absent (state `u`), contributes factor 1.
pub const UNOCCUPIED: u8 = 0b1000;
/// Cell mask: every spin allowed.
pub const ALLOW_ALL: u8 = 0b0111;

/// Mask allowing exactly spin `s`.
pub fn allow(s: Spin) -> u8 {
    1 << spin_index(s)
}

/// Mask of spins compatible with a neighbour of spin `s`.
pub fn compatible_with(s: Spin) -> u8 {
    match s {
        1 => allow(0) | allow(1),
        -1 => allow(0) | allow(-1),
        _ => ALLOW_ALL,
    }
}

/// Number `mantissa * 2^exp2`, used to keep partition functions of long
/// strips representable. Scaling by powers of two is exact, so dyadic
/// results survive the sweep bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScaled {
    pub mantissa: f64,
    pub exp2: i64,
}

fn pow2(e: i64) -> f64 {
    2f64.powi(e.clamp(-2000, 2000) as i32)
}

impl LogScaled {
    pub fn ln(&self) -> f64 {
        self.mantissa.ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }

    pub fn value(&self) -> f64 {
        self.mantissa * pow2(self.exp2)
    }

    /// `self / other` as a plain float.
    pub fn ratio(&self, other: &LogScaled) -> f64 {
        self.mantissa / other.mantissa * pow2(self.exp2 - other.exp2)
    }
}

/// Scalar ring used by the transfer sweep.
pub trait TransferScalar: Clone + Send + Sync {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_scaled(&mut self, x: &Self, w: &Self);
    fn add(&mut self, x: &Self);
    /// Rescales a profile vector in place, returning the removed binary
    /// exponent.
    fn renormalize(_v: &mut [Self]) -> i64 {
        0
    }
}

impl TransferScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    #[inline]
    fn add_scaled(&mut self, x: &Self, w: &Self) {
        *self += x * w;
    }
    #[inline]
    fn add(&mut self, x: &Self) {
        *self += x;
    }
    fn renormalize(v: &mut [Self]) -> i64 {
        let max = v.iter().copied().fold(0.0, f64::max);
        if !max.is_normal() {
            return 0;
        }
        let e = ((max.to_bits() >> 52) & 0x7ff) as i64 - 1023;
        let inv = pow2(-e);
        v.iter_mut().for_each(|x| *x *= inv);
        e
    }
}

impl TransferScalar for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    #[inline]
    fn add_scaled(&mut self, x: &Self, w: &Self) {
        *self += x * w;
    }
    #[inline]
    fn add(&mut self, x: &Self) {
        *self += x;
    }
}

/// Spin weights as integers over a common power of two:
/// `w_s = ints[s] / 2^shift` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactWeights {
    /// In `[0, +, -]` order.
    pub ints: [BigInt; 3],
    pub shift: u32,
}

impl ExactWeights {
    pub fn from_weights(w: &SpinWeights) -> Self {
        let vals = [w.zero, w.plus, w.minus];
        let decoded: Vec<(u64, i16)> = vals
            .iter()
            .map(|&v| {
                let (m, e, _) = Float::integer_decode(v);
                (m, e)
            })
            .collect();
        let shift = decoded
            .iter()
            .filter(|(m, _)| *m != 0)
            .map(|(_, e)| -i32::from(*e))
            .max()
            .unwrap_or(0)
            .max(0) as u32;
        let ints = decoded
            .iter()
            .map(|&(m, e)| {
                if m == 0 {
                    <BigInt as num_traits::Zero>::zero()
                } else {
                    BigInt::from(m) << (i32::from(e) + shift as i32) as usize
                }
            })
            .collect::<Vec<_>>();
        Self {
            ints: [ints[0].clone(), ints[1].clone(), ints[2].clone()],
            shift,
        }
    }

    /// `w_s` as an exact rational.
    pub fn rational(&self, s: Spin) -> BigRational {
        BigRational::new(self.ints[spin_index(s)].clone(), <BigInt as num_traits::One>::one() << self.shift as usize)
    }
}

/// A `width x height` grid of cells with per-cell spin masks.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferGrid {
    width: usize,
    height: usize,
    masks: Vec<u8>,
    /// Lattice coordinates of cell (row 0, col 0).
    origin: [i64; 2],
    /// Rows run along x1 (and columns along x2) when set.
    transposed: bool,
}

impl TransferGrid {
    /// Fully occupied `width x height` grid anchored at the origin, rows along
    /// x2 and columns along x1.
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(WrmError::param("transfer grid sides must be positive"));
        }
        if width > WIDTH_CAP {
            return Err(WrmError::CapExceeded {
                what: "transfer width",
                size: width,
                cap: WIDTH_CAP,
            });
        }
        Ok(Self {
            width,
            height,
            masks: vec![ALLOW_ALL; width * height],
            origin: [0, 0],
            transposed: false,
        })
    }

    /// Grid over the bounding box of `sites` (d = 2) with the short side as
    /// width; cells outside `sites` are unoccupied.
    pub fn from_sites(sites: &[Site]) -> Result<Self> {
        let bbox = LatticeBox::bounding(sites).ok_or_else(|| WrmError::param("empty site set"))?;
        if bbox.dim() != 2 {
            return Err(WrmError::UnsupportedDimension(bbox.dim()));
        }
        let sides = bbox.sides();
        let transposed = sides[0] > sides[1];
        let (width, height) = if transposed { (sides[1], sides[0]) } else { (sides[0], sides[1]) };
        let mut grid = Self::new(width, height)?;
        grid.origin = [bbox.lower()[0], bbox.lower()[1]];
        grid.transposed = transposed;
        grid.masks.iter_mut().for_each(|m| *m = UNOCCUPIED);
        for s in sites {
            let c = grid.cell(s).expect("site inside its bounding box");
            grid.masks[c] = ALLOW_ALL;
        }
        Ok(grid)
    }

    /// Fully occupied rectangle.
    pub fn from_box(rect: &LatticeBox) -> Result<Self> {
        if rect.dim() != 2 {
            return Err(WrmError::UnsupportedDimension(rect.dim()));
        }
        Self::from_sites(&[rect.lower().to_vec(), rect.upper().to_vec()]).map(|mut g| {
            g.masks.iter_mut().for_each(|m| *m = ALLOW_ALL);
            g
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cell index of a lattice site, if inside the grid.
    pub fn cell(&self, site: &[i64]) -> Option<usize> {
        if site.len() != 2 {
            return None;
        }
        let (dx, dy) = (site[0] - self.origin[0], site[1] - self.origin[1]);
        let (col, row) = if self.transposed { (dy, dx) } else { (dx, dy) };
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return None;
        }
        Some(row as usize * self.width + col as usize)
    }

    fn occupied_cell(&self, site: &[i64]) -> Result<usize> {
        match self.cell(site) {
            Some(c) if self.masks[c] & UNOCCUPIED == 0 => Ok(c),
            _ => Err(WrmError::param(format!("site {site:?} is not an occupied cell of the grid"))),
        }
    }

    /// Intersects the allowed spins at `site` with `mask`.
    pub fn restrict(&mut self, site: &[i64], mask: u8) -> Result<()> {
        let c = self.occupied_cell(site)?;
        self.masks[c] &= mask & ALLOW_ALL;
        Ok(())
    }

    pub fn pin(&mut self, site: &[i64], s: Spin) -> Result<()> {
        self.restrict(site, allow(s))
    }

    pub fn num_occupied(&self) -> usize {
        self.masks.iter().filter(|m| *m & UNOCCUPIED == 0).count()
    }

    /// Partition function in floating point.
    pub fn z(&self, w: &SpinWeights) -> LogScaled {
        let (mantissa, exp2) = self.sweep(&[w.zero, w.plus, w.minus]);
        LogScaled { mantissa, exp2 }
    }

    /// Partition function with weights `ints`, exactly.
    pub fn z_int(&self, w: &ExactWeights) -> BigInt {
        self.sweep(&w.ints).0
    }

    /// Exact partition function for dyadic weights.
    pub fn z_rational(&self, w: &ExactWeights) -> BigRational {
        let den = <BigInt as num_traits::One>::one() << (w.shift as usize * self.num_occupied());
        BigRational::new(self.z_int(w), den)
    }

    fn sweep<S: TransferScalar>(&self, weights: &[S; 3]) -> (S, i64) {
        let w = self.width;
        let states = 3usize.pow(w as u32);
        let pow3: Vec<usize> = (0..w).map(|c| 3usize.pow(c as u32)).collect();
        let mut cur = vec![S::zero(); states];
        let mut next = vec![S::zero(); states];
        cur[0] = S::one();
        let mut exp2 = 0;
        for r in 0..self.height {
            for c in 0..w {
                let mask = self.masks[r * w + c];
                next.iter_mut().for_each(|x| *x = S::zero());
                for (st, val) in cur.iter().enumerate() {
                    if val.is_zero() {
                        continue;
                    }
                    let up = (st / pow3[c]) % 3;
                    let base = st - up * pow3[c];
                    if mask & UNOCCUPIED != 0 {
                        next[base].add(val);
                        continue;
                    }
                    let left = if c > 0 { (st / pow3[c - 1]) % 3 } else { 0 };
                    for k in 0..3 {
                        if mask & (1 << k) == 0 || conflict(k, up) || conflict(k, left) {
                            continue;
                        }
                        next[base + k * pow3[c]].add_scaled(val, &weights[k]);
                    }
                }
                std::mem::swap(&mut cur, &mut next);
            }
            exp2 += S::renormalize(&mut cur);
        }
        let mut total = S::zero();
        for v in &cur {
            total.add(v);
        }
        (total, exp2)
    }
}

#[inline]
fn conflict(a: usize, b: usize) -> bool {
    a + b == 3
}

/// Partition function of a fully occupied rectangle.
pub fn z_transfer(rect: &LatticeBox, w: &SpinWeights) -> Result<f64> {
    Ok(TransferGrid::from_box(rect)?.z(w).value())
}

/// Exact joint marginal at `marked` sites of a fully occupied rectangle.
pub fn transfer_marginal(rect: &LatticeBox, w: &SpinWeights, marked: &[Site]) -> Result<MarginalTable> {
    grid_marginal(&TransferGrid::from_box(rect)?, w, marked)
}

/// Joint marginal for an arbitrary 2-d environment that fits the engine.
pub fn transfer_marginal_env(env: &LatticeEnv, w: &SpinWeights, marked: &[Site]) -> Result<MarginalTable> {
    grid_marginal(&TransferGrid::from_sites(&env.sites())?, w, marked)
}

fn grid_marginal(grid: &TransferGrid, w: &SpinWeights, marked: &[Site]) -> Result<MarginalTable> {
    if marked.len() > 4 {
        return Err(WrmError::CapExceeded {
            what: "marked sites",
            size: marked.len(),
            cap: 4,
        });
    }
    let mut runs = Vec::new();
    for tuple in spin_tuples(marked.len()) {
        let mut g = grid.clone();
        for (site, &s) in marked.iter().zip(&tuple) {
            g.pin(site, s)?;
        }
        runs.push((tuple, g.z(w)));
    }
    let top = runs
        .iter()
        .filter(|(_, z)| z.mantissa > 0.0)
        .map(|(_, z)| z.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let table: BTreeMap<Vec<Spin>, f64> = runs
        .into_iter()
        .map(|(t, z)| {
            let v = if z.mantissa > 0.0 { (z.ln() - top).exp() } else { 0.0 };
            (t, v)
        })
        .collect();
    MarginalTable::from_weights(marked.to_vec(), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::lattice_graph;
    use crate::wrm_lattice::{exact_marginal, z_enum};

    fn asym() -> SpinWeights {
        SpinWeights::new(0.35, 0.2, 0.45).unwrap()
    }

    #[test]
    fn one_by_one_and_three_by_four() {
        let w = asym();
        let r = LatticeBox::rect(1, 1).unwrap();
        assert!((z_transfer(&r, &w).unwrap() - w.total()).abs() < 1e-15);
        let r = LatticeBox::rect(3, 4).unwrap();
        let env = LatticeEnv::full(r.clone());
        let v: Vec<usize> = (0..12).collect();
        let ze = z_enum(&v, &lattice_graph(&env), &w).unwrap();
        let zt = z_transfer(&r, &w).unwrap();
        assert!((ze - zt).abs() <= 1e-12 * ze, "{ze} vs {zt}");
        // Transposed orientation gives the same value.
        let zt2 = z_transfer(&LatticeBox::rect(4, 3).unwrap(), &w).unwrap();
        assert!((zt2 - zt).abs() <= 1e-12 * zt);
    }

    #[test]
    fn exact_engine_matches_float() {
        let w = asym();
        let grid = TransferGrid::new(3, 5).unwrap();
        let exact = grid.z_rational(&ExactWeights::from_weights(&w));
        let float = grid.z(&w).value();
        let e: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        assert!((e - float).abs() <= 1e-13 * e);
        let ew = ExactWeights::from_weights(&w);
        assert_eq!(ew.rational(1), BigRational::from_float(0.35).unwrap());
    }

    #[test]
    fn half_lattice_marginal_matches_enumeration() {
        // Λ²₋ is 2 x 9 = 18 sites; enumerate with a raised cap.
        let g = crate::env::build_half_lattice(2).unwrap();
        let env = LatticeEnv::from_sites(g.lambda_minus.clone()).unwrap();
        let w = asym();
        let t = transfer_marginal_env(&env, &w, &[g.x_o.clone(), g.x_n.clone()]).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-12);
        let sites = env.sites();
        let ix = |s: &Site| sites.iter().position(|t| t == s).unwrap();
        let (a, b) = (ix(&g.x_o), ix(&g.x_n));
        let mut table = BTreeMap::new();
        crate::wrm_lattice::enumerate_feasible(&lattice_graph(&env), &w, |sp, wt| {
            *table.entry(vec![sp[a], sp[b]]).or_insert(0.0) += wt;
        });
        let total: f64 = table.values().sum();
        for (k, v) in table {
            assert!((t.prob(&k) - v / total).abs() < 1e-12);
        }
        // The enumeration dispatcher delegates to transfer for > 16 sites.
        let d = exact_marginal(&env, &w, std::slice::from_ref(&g.x_o)).unwrap();
        assert!((d.single(0)[1] - t.single(0)[1]).abs() < 1e-12);
    }

    #[test]
    fn masked_grid_equals_enumeration() {
        let sites = vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![3, 1], vec![3, 2], vec![2, 2]];
        let env = LatticeEnv::from_sites(sites.clone()).unwrap();
        let w = asym();
        let ze = z_enum(&(0..6).collect::<Vec<_>>(), &lattice_graph(&env), &w).unwrap();
        let zt = TransferGrid::from_sites(&sites).unwrap().z(&w).value();
        assert!((ze - zt).abs() <= 1e-13 * ze);
    }

    #[test]
    fn long_strip_does_not_underflow() {
        let w = SpinWeights::new(1e-3, 1e-3, 1e-3).unwrap();
        let z = TransferGrid::new(2, 400).unwrap().z(&w);
        assert!(z.mantissa > 0.0 && z.ln().is_finite());
        assert!(z.value() == 0.0);
    }

    #[test]
    fn width_cap() {
        assert!(matches!(TransferGrid::new(11, 11), Err(WrmError::CapExceeded { .. })));
        assert!(TransferGrid::new(10, 30).is_ok());
    }
}
