//! Half-lattice experiments: exact ratio gaps and h-covariances for the
//! lattice, thickened Gilbert and scaled Boolean models, a Monte Carlo
//! cross-check on the continuum geometry, and small-p decay fits.
//!
//! With `Λ = Λ₋ ∪ Λ₊` the two half-lattices, `h_o = h(σ_{x_o}, σ_{y_o})` and
//! `h_n = h(σ_{x_n}, σ_{y_n})`:
//! `Z_{Λ∪o}/Z_Λ = E[h_o]`, `Z_{Λ∪{o,z_n}}/Z_Λ = E[h_o h_n]`, hence
//! `D_n = |Cov(h_o, h_n)| / E[h_n]`.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::DiskRegion;
use crate::env::{
    build_half_lattice, build_thickened_lattice, default_kappa, max_pbm_eps_ratio, scaled_sites_pbm,
    ExperimentGeometry, Site,
};
use crate::error::{Result, WrmError};
use crate::rng::derive_seed;
use crate::wrm_continuum::z_ratio;
use crate::wrm_lattice::transfer::{compatible_with, ExactWeights, ALLOW_ALL};
use crate::wrm_lattice::{compatible, reduce_thickened, z_sites, Spin, SpinWeights, TransferGrid, SPINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Transfer,
    Enum,
    Mc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Transfer => "transfer",
            Method::Enum => "enum",
            Method::Mc => "mc",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = WrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transfer" => Ok(Method::Transfer),
            "enum" => Ok(Method::Enum),
            "mc" => Ok(Method::Mc),
            _ => Err(WrmError::param(format!("unknown method {s:?}"))),
        }
    }
}

/// One cell of an experiment grid. `cov_h` and `cov_ind` are NaN for Monte
/// Carlo rows, which estimate the ratio gap only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityRow {
    pub model: String,
    pub p: f64,
    pub n: usize,
    pub cov_h: f64,
    pub cov_ind: f64,
    pub ratio_gap: f64,
    pub method: Method,
    pub se: f64,
}

/// Exact quantities of one half-lattice cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLatticeExact {
    pub n: usize,
    /// `E[h_o] = E[h_n]`.
    pub mean_h: f64,
    pub cov_h: f64,
    pub cov_ind: f64,
    /// Ratio gap assembled from the pinned marginals.
    pub gap_cov: f64,
    /// Ratio gap from the partition functions of `ζ`, `ζ∖o`, `ζ'`, `ζ'∖o`.
    pub gap_direct: f64,
    /// `μ(σ_{x_o} = a, σ_{x_n} = c)` on `Λ₋`, rows and columns in `[0, +, -]`.
    pub joint: [[f64; 3]; 3],
}

fn q(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn mask_index(s: Spin) -> usize {
    match s {
        0 => 0,
        1 => 1,
        _ => 2,
    }
}

/// Exact evaluation of one cell with the transfer engine in rational
/// arithmetic. The covariance route and the direct route must agree exactly.
pub fn half_lattice_exact(w: &SpinWeights, n: usize) -> Result<HalfLatticeExact> {
    let g = build_half_lattice(n)?;
    let ew = ExactWeights::from_weights(w);
    let minus = TransferGrid::from_sites(&g.lambda_minus)?;
    let plus = TransferGrid::from_sites(&g.lambda_plus)?;
    let wr: Vec<BigRational> = SPINS.iter().map(|&s| ew.rational(s)).collect();

    // Pinned runs on Λ₋: (a, c) at (x_o, x_n).
    let pins: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let pinned: Vec<BigRational> = pins
        .par_iter()
        .map(|&(i, j)| -> Result<BigRational> {
            let mut grid = minus.clone();
            grid.pin(&g.x_o, SPINS[i])?;
            grid.pin(&g.x_n, SPINS[j])?;
            Ok(grid.z_rational(&ew))
        })
        .collect::<Result<_>>()?;
    // Restricted runs: x ∈ C(s) for s in [0, +, -], on both halves.
    let masks = [ALLOW_ALL, compatible_with(1), compatible_with(-1)];
    let restricted = |grid: &TransferGrid, a: &Site, b: &Site| -> Result<Vec<BigRational>> {
        pins.par_iter()
            .map(|&(i, j)| {
                let mut gr = grid.clone();
                gr.restrict(a, masks[i])?;
                gr.restrict(b, masks[j])?;
                Ok(gr.z_rational(&ew))
            })
            .collect()
    };
    let zm = restricted(&minus, &g.x_o, &g.x_n)?;
    let zp = restricted(&plus, &g.y_o, &g.y_n)?;

    // Covariance route.
    let total = pinned.iter().fold(BigRational::zero(), |acc, v| acc + v);
    if total.is_zero() {
        return Err(WrmError::Degenerate("half-lattice partition function vanishes".into()));
    }
    let p: Vec<BigRational> = pinned.iter().map(|v| v / &total).collect();
    let pr = |a: usize, c: usize| &p[a * 3 + c];
    let h = |a: usize, b: usize| -> BigRational {
        (0..3)
            .filter(|&k| compatible(SPINS[a], SPINS[k]) && compatible(SPINS[b], SPINS[k]))
            .fold(BigRational::zero(), |acc, k| acc + &wr[k])
    };
    let ind = |a: usize, b: usize| SPINS[a] * SPINS[b] == 1;
    let mut e_ho = BigRational::zero();
    let mut e_hn = BigRational::zero();
    let mut e_hh = BigRational::zero();
    let mut e_io = BigRational::zero();
    let mut e_in = BigRational::zero();
    let mut e_ii = BigRational::zero();
    for a in 0..3 {
        for c in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    // Λ₊ is the mirror image of Λ₋ with (y_o, y_n) <-> (x_o, x_n).
                    let weight = pr(a, c) * pr(b, d);
                    if weight.is_zero() {
                        continue;
                    }
                    let (ho, hn) = (h(a, b), h(c, d));
                    e_ho += &weight * &ho;
                    e_hn += &weight * &hn;
                    e_hh += &weight * &ho * &hn;
                    if ind(a, b) {
                        e_io += &weight;
                    }
                    if ind(c, d) {
                        e_in += &weight;
                    }
                    if ind(a, b) && ind(c, d) {
                        e_ii += &weight;
                    }
                }
            }
        }
    }
    let cov_h = &e_hh - &e_ho * &e_hn;
    let cov_ind = &e_ii - &e_io * &e_in;
    let gap_cov = cov_h.abs() / &e_hn;

    // Direct route: Z_{Λ∪A} = Σ over spins on A of weights times half
    // partition functions with neighbours restricted to compatible spins.
    let z_lambda = &zm[0] * &zp[0];
    let mut z_o = BigRational::zero();
    let mut z_z = BigRational::zero();
    let mut z_oz = BigRational::zero();
    for (si, &s) in SPINS.iter().enumerate() {
        let ms = mask_index(s);
        z_o += &wr[si] * &zm[ms * 3] * &zp[ms * 3];
        z_z += &wr[si] * &zm[ms] * &zp[ms];
        for (ti, &t) in SPINS.iter().enumerate() {
            let mt = mask_index(t);
            z_oz += &wr[si] * &wr[ti] * &zm[ms * 3 + mt] * &zp[ms * 3 + mt];
        }
    }
    let gap_direct = (&z_oz / &z_z - &z_o / &z_lambda).abs();
    let cov_direct = &z_oz / &z_lambda - (&z_o / &z_lambda) * (&z_z / &z_lambda);
    if cov_direct != cov_h || gap_direct != gap_cov || &z_o / &z_lambda != e_ho {
        return Err(WrmError::Inconsistency(format!(
            "exact routes disagree at n = {n}: cov {} vs {}, gap {} vs {}",
            q(&cov_h),
            q(&cov_direct),
            q(&gap_cov),
            q(&gap_direct)
        )));
    }
    let mut joint = [[0.0; 3]; 3];
    for (a, row) in joint.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = q(pr(a, c));
        }
    }
    Ok(HalfLatticeExact {
        n,
        mean_h: q(&e_hn),
        cov_h: q(&cov_h),
        cov_ind: q(&cov_ind),
        gap_cov: q(&gap_cov),
        gap_direct: q(&gap_direct),
        joint,
    })
}

/// Ratio gap by brute-force enumeration of `ζ`, `ζ∖o`, `ζ'`, `ζ'∖o`
/// (components handled separately).
pub fn ratio_gap_enum(w: &SpinWeights, geometry: &ExperimentGeometry) -> Result<f64> {
    let without = |sites: &[Site], x: &Site| -> Vec<Site> { sites.iter().filter(|s| *s != x).cloned().collect() };
    let r = z_sites(&geometry.zeta, w)? / z_sites(&without(&geometry.zeta, &geometry.o), w)?;
    let rp = z_sites(&geometry.zeta_prime, w)? / z_sites(&without(&geometry.zeta_prime, &geometry.o), w)?;
    Ok((rp - r).abs())
}

fn rows_for(model: &str, p: f64, w: &SpinWeights, ns: &[usize]) -> Result<Vec<DiscontinuityRow>> {
    ns.par_iter()
        .map(|&n| {
            let cell = half_lattice_exact(w, n)?;
            Ok(DiscontinuityRow {
                model: model.to_string(),
                p,
                n,
                cov_h: cell.cov_h,
                cov_ind: cell.cov_ind,
                ratio_gap: cell.gap_direct,
                method: Method::Transfer,
                se: 0.0,
            })
        })
        .collect()
}

fn check_ns(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(WrmError::param("empty n list"));
    }
    if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > crate::wrm_lattice::WIDTH_CAP) {
        return Err(WrmError::CapExceeded {
            what: "half-lattice size n",
            size: n,
            cap: crate::wrm_lattice::WIDTH_CAP,
        });
    }
    Ok(())
}

/// Symmetric weights `(p, p, 1 - 2p)` over a grid of `p` and `n`.
pub fn lattice_discontinuity(ps: &[f64], ns: &[usize]) -> Result<Vec<DiscontinuityRow>> {
    check_ns(ns)?;
    let weights = ps.iter().map(|&p| SpinWeights::symmetric(p)).collect::<Result<Vec<_>>>()?;
    let nested: Vec<Vec<DiscontinuityRow>> = ps
        .par_iter()
        .zip(&weights)
        .map(|(&p, w)| rows_for("lattice", p, w, ns))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Vertex-thickened Gilbert model: each site becomes `k` points of a clique,
/// reduced to unnormalized effective weights. The thickened geometry is
/// checked on a 3 x 3 block for every `k`.
pub fn pgg_discontinuity(p: f64, ks: &[usize], ns: &[usize], eps: f64) -> Result<Vec<DiscontinuityRow>> {
    check_ns(ns)?;
    let block: Vec<Site> = (-1..=1).flat_map(|x| (-1..=1).map(move |y| vec![x, y])).collect();
    let mut out = Vec::new();
    for &k in ks {
        build_thickened_lattice(&block, &default_kappa(k, eps), 1.0 - eps)?;
        let w = reduce_thickened(k, p)?;
        out.extend(rows_for(&format!("pgg:k={k}"), p, &w, ns)?);
    }
    Ok(out)
}

/// Effective `p` of the scaled Boolean construction as stated in closed
/// form by `(1 - exp(-λ|B_ε|)) / 2`.
pub fn paper_effective_p(lambda: f64, eps: f64) -> f64 {
    (1.0 - (-lambda * std::f64::consts::PI * eps * eps).exp()) / 2.0
}

/// Exact unnormalized spin weights of one ball of radius `ε` under
/// `λ+ = λ- = λ`: empty `t^2`, single-signed `t(1 - t)` with
/// `t = exp(-λ|B_ε|)`.
pub fn pbm_effective_weights(lambda: f64, eps: f64) -> Result<SpinWeights> {
    let t = (-lambda * std::f64::consts::PI * eps * eps).exp();
    SpinWeights::new(t * (1.0 - t), t * (1.0 - t), t * t)
}

fn check_pbm(eps: f64, a: f64) -> Result<()> {
    if !(eps > 0.0 && a > 0.0 && eps / a < max_pbm_eps_ratio()) {
        return Err(WrmError::param(format!(
            "need 0 < eps/a < {:.4} so that only lattice neighbours interact (eps = {eps}, a = {a})",
            max_pbm_eps_ratio()
        )));
    }
    Ok(())
}

/// Scaled Boolean model with `λ+ = λ- = λ`. Rows carry the exact normalized
/// effective `p`. With `mc_samples > 0` and `1 ∈ ns`, a Monte Carlo row on
/// the continuum geometry is appended per `λ`.
pub fn pbm_discontinuity(
    lambdas: &[f64],
    eps: f64,
    a: f64,
    ns: &[usize],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<DiscontinuityRow>> {
    check_ns(ns)?;
    check_pbm(eps, a)?;
    let mut out = Vec::new();
    for (i, &lambda) in lambdas.iter().enumerate() {
        if !(lambda >= 0.0) {
            return Err(WrmError::param(format!("lambda = {lambda} must be >= 0")));
        }
        let w = pbm_effective_weights(lambda, eps)?;
        let p = w.normalized().0;
        out.extend(rows_for("pbm", p, &w, ns)?);
        if mc_samples > 0 && ns.contains(&1) {
            let (gap, se) = pbm_gap_mc(lambda, eps, a, mc_samples, derive_seed(seed, &format!("pbm-mc-{i}")))?;
            out.push(DiscontinuityRow {
                model: "pbm".into(),
                p,
                n: 1,
                cov_h: f64::NAN,
                cov_ind: f64::NAN,
                ratio_gap: gap,
                method: Method::Mc,
                se,
            });
        }
    }
    Ok(out)
}

/// Monte Carlo ratio gap at `n = 1` on the continuum geometry itself:
/// `|Z_{ζ'}/Z_{ζ'∖o} - Z_ζ/Z_{ζ∖o}|` from two independent `z_ratio` runs.
pub fn pbm_gap_mc(lambda: f64, eps: f64, a: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_pbm(eps, a)?;
    let g = build_half_lattice(1)?;
    let region = |sites: &[Site]| DiskRegion::from_cloud(&scaled_sites_pbm(sites, a, eps), 0.0);
    let without_o = |sites: &[Site]| -> Vec<Site> { sites.iter().filter(|s| **s != g.o).cloned().collect() };
    let r = z_ratio(
        &region(&without_o(&g.zeta))?,
        &region(&g.zeta)?,
        lambda,
        lambda,
        a,
        samples,
        derive_seed(seed, "zeta"),
    )?;
    let rp = z_ratio(
        &region(&without_o(&g.zeta_prime))?,
        &region(&g.zeta_prime)?,
        lambda,
        lambda,
        a,
        samples,
        derive_seed(seed, "zeta-prime"),
    )?;
    Ok(((rp.value - r.value).abs(), rp.se.hypot(r.se)))
}

/// Least-squares fit of `ln D_n` against `n` at one `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub p: f64,
    /// Slope of `ln D_n`; NaN when fewer than two gaps are positive.
    pub exponent: f64,
    pub r2: f64,
    pub strictly_decreasing: bool,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Small-`p` regime: exact rows and geometric-decay fits per `p`.
pub fn quasilocality_decay(ps: &[f64], ns: &[usize]) -> Result<(Vec<DiscontinuityRow>, Vec<DecayFit>)> {
    if let Some(p) = ps.iter().find(|&&p| !(0.0..=0.1).contains(&p)) {
        return Err(WrmError::param(format!("decay fits are for p <= 0.1 (got {p})")));
    }
    let rows = lattice_discontinuity(ps, ns)?;
    let fits = ps
        .iter()
        .map(|&p| {
            let mut cells: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.p == p)
                .map(|r| (r.n as f64, r.ratio_gap))
                .collect();
            cells.sort_by(|a, b| a.0.total_cmp(&b.0));
            let strictly_decreasing = cells.windows(2).all(|w| w[1].1 < w[0].1);
            let pos: Vec<(f64, f64)> = cells.iter().filter(|c| c.1 > 0.0).map(|&(n, d)| (n, d.ln())).collect();
            let (exponent, r2) = if pos.len() >= 2 {
                let (xs, ys): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
                fit_line(&xs, &ys)
            } else {
                (f64::NAN, f64::NAN)
            };
            DecayFit {
                p,
                exponent,
                r2,
                strictly_decreasing,
            }
        })
        .collect();
    Ok((rows, fits))
}
