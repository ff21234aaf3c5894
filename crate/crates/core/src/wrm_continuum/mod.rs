//! Continuum Widom–Rowlinson model on unions of disks (d = 2): feasibility,
//! exact and MCMC sampling, partition-function ratios, the Boolean-model
//! Papangelou intensity with its overlap factor, local robustness probes and
//! the choice-variable construction of overlap ownership.

mod overlap;
mod papangelou;
mod zratio;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::cluster::{region_area, DiskRegion};
use crate::env::MarkedPointCloud;
use crate::error::{Result, WrmError};
use crate::rng::{rng_from_seed, Rng};

pub use overlap::{
    assign_overlap, chi_density, chi_joint, pap3, sample_overlap_removed, AppendixConfig,
    ChoiceVariables,
};
pub(crate) use papangelou::PapSetup;
pub use papangelou::{
    local_robustness_probe, pbm_papangelou, pbm_papangelou_with, ContinuumParams, MarkedPoint,
    RobustnessRow,
};
pub use zratio::{z_ratio, z_ratio_inverse, Estimate};

/// Rejection-sampler budget (proposals per sample).
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Area tolerance used for overlap and region areas.
pub const AREA_TOL: f64 = 1e-9;

pub type Point = [f64; 2];

/// Two-species point configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WRPointConfig {
    pub plus: Vec<Point>,
    pub minus: Vec<Point>,
}

impl WRPointConfig {
    pub fn new(plus: Vec<Point>, minus: Vec<Point>) -> Result<Self> {
        if plus.iter().chain(&minus).any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(WrmError::param("coloring points must be finite"));
        }
        Ok(Self { plus, minus })
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// Union of two configurations.
    pub fn joined(&self, other: &WRPointConfig) -> WRPointConfig {
        let mut out = self.clone();
        out.plus.extend_from_slice(&other.plus);
        out.minus.extend_from_slice(&other.minus);
        out
    }

    /// Points inside `region`.
    pub fn restricted(&self, region: &DiskRegion) -> WRPointConfig {
        let keep = |v: &[Point]| v.iter().copied().filter(|p| region.contains(p)).collect();
        WRPointConfig {
            plus: keep(&self.plus),
            minus: keep(&self.minus),
        }
    }

    /// Points outside `region`.
    pub fn excluding(&self, region: &DiskRegion) -> WRPointConfig {
        let keep = |v: &[Point]| v.iter().copied().filter(|p| !region.contains(p)).collect();
        WRPointConfig {
            plus: keep(&self.plus),
            minus: keep(&self.minus),
        }
    }

    pub fn hits(&self, region: &DiskRegion) -> bool {
        self.plus.iter().chain(&self.minus).any(|p| region.contains(p))
    }
}

/// Environment together with a coloring of `BM(env)`. The optional owner
/// lists attribute every coloring point to one environment point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointContinuumConfig {
    pub env: MarkedPointCloud,
    pub coloring: WRPointConfig,
    pub owner_plus: Option<Vec<usize>>,
    pub owner_minus: Option<Vec<usize>>,
    pub w: Option<ChoiceVariables>,
}

/// Coverage slack for coloring points on disk boundaries.
const COVER_SLACK: f64 = 1e-9;

impl JointContinuumConfig {
    pub fn new(env: MarkedPointCloud, coloring: WRPointConfig) -> Result<Self> {
        if env.dim() != 2 {
            return Err(WrmError::UnsupportedDimension(env.dim()));
        }
        if !env.is_marked() {
            return Err(WrmError::RuleMismatch("joint configurations need radius marks".into()));
        }
        let grown = DiskRegion::from_cloud(&env, COVER_SLACK)?;
        if let Some(p) = coloring.plus.iter().chain(&coloring.minus).find(|p| !grown.contains(*p)) {
            return Err(WrmError::Geometry(format!("coloring point {p:?} lies outside BM(env)")));
        }
        Ok(Self {
            env,
            coloring,
            owner_plus: None,
            owner_minus: None,
            w: None,
        })
    }
}

/// Every `(+, -)` pair at distance at least `2a` (open balls `B_a` disjoint).
pub fn feasible_continuum(cfg: &WRPointConfig, a: f64) -> bool {
    cross_feasible(&cfg.plus, &cfg.minus, a)
}

pub(crate) fn cross_feasible(plus: &[Point], minus: &[Point], a: f64) -> bool {
    let r2 = 4.0 * a * a;
    plus.iter()
        .all(|p| minus.iter().all(|m| (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2) >= r2))
}

/// Whether `extra` can be added to `base` without creating a conflict
/// (both configurations assumed feasible on their own).
pub(crate) fn compatible_with(base: &WRPointConfig, extra: &WRPointConfig, a: f64) -> bool {
    cross_feasible(&extra.plus, &base.minus, a) && cross_feasible(&base.plus, &extra.minus, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SamplerMethod {
    /// Exact: independent Poisson proposals accepted when feasible.
    #[default]
    Rejection,
    /// Birth-death Metropolis-Hastings after a fixed burn-in.
    BirthDeath,
}

impl std::str::FromStr for SamplerMethod {
    type Err = WrmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(Self::Rejection),
            "birthdeath" | "birth-death" => Ok(Self::BirthDeath),
            _ => Err(WrmError::param(format!("unknown sampler method {s:?}"))),
        }
    }
}

pub(crate) fn check_region(region: &DiskRegion) -> Result<()> {
    if region.dim() != 2 {
        return Err(WrmError::UnsupportedDimension(region.dim()));
    }
    Ok(())
}

pub(crate) fn check_rates(lambda_plus: f64, lambda_minus: f64, a: f64) -> Result<()> {
    for (name, v) in [("lambda_plus", lambda_plus), ("lambda_minus", lambda_minus), ("a", a)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(WrmError::param(format!("{name} = {v} must be finite and >= 0")));
        }
    }
    Ok(())
}

/// Poisson variate. Small means use inversion with a single uniform, which
/// keeps common-random-number comparisons aligned.
pub(crate) fn poisson_count(rng: &mut Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 200.0 {
        return Poisson::new(mean).map_or(0.0, |d| d.sample(rng)) as usize;
    }
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 {
            break;
        }
    }
    k
}

/// Uniform point in the disk `B_r(c)`.
fn uniform_in_disk(rng: &mut Rng, c: &[f64], r: f64) -> Point {
    let rho = r * rng.random::<f64>().sqrt();
    let t = std::f64::consts::TAU * rng.random::<f64>();
    [c[0] + rho * t.cos(), c[1] + rho * t.sin()]
}

/// Poisson process of intensity `lambda` on the union of the region's disks:
/// each disk contributes the points not covered by an earlier disk.
pub(crate) fn poisson_on_region(rng: &mut Rng, region: &DiskRegion, lambda: f64) -> Vec<Point> {
    let mut out = Vec::new();
    if lambda <= 0.0 {
        return out;
    }
    for i in 0..region.len() {
        let (c, r) = (region.center(i), region.radius(i));
        let mean = lambda * std::f64::consts::PI * r * r;
        if mean <= 0.0 {
            continue;
        }
        for _ in 0..poisson_count(rng, mean) {
            let p = uniform_in_disk(rng, c, r);
            let earlier = (0..i).any(|j| {
                let cj = region.center(j);
                let rj = region.radius(j);
                (p[0] - cj[0]).powi(2) + (p[1] - cj[1]).powi(2) <= rj * rj
            });
            if !earlier {
                out.push(p);
            }
        }
    }
    out
}

/// Poisson process of intensity `lambda` on `region ∖ hole`.
pub(crate) fn poisson_on_difference(rng: &mut Rng, region: &DiskRegion, hole: &DiskRegion, lambda: f64) -> Vec<Point> {
    let mut pts = poisson_on_region(rng, region, lambda);
    pts.retain(|p| !hole.contains(p));
    pts
}

/// Two independent Poisson layers on `region`.
pub(crate) fn poisson_pair(rng: &mut Rng, region: &DiskRegion, lp: f64, lm: f64) -> WRPointConfig {
    let plus = poisson_on_region(rng, region, lp);
    let minus = poisson_on_region(rng, region, lm);
    WRPointConfig { plus, minus }
}

/// Exact sample of the WRM on `region` by rejection from the Poisson pair.
pub(crate) fn sample_rejection(rng: &mut Rng, region: &DiskRegion, lp: f64, lm: f64, a: f64) -> Result<WRPointConfig> {
    for _ in 0..REJECTION_BUDGET {
        let cfg = poisson_pair(rng, region, lp, lm);
        if feasible_continuum(&cfg, a) {
            return Ok(cfg);
        }
    }
    Err(WrmError::Budget(format!(
        "rejection sampler exhausted {REJECTION_BUDGET} proposals; use the birthdeath method"
    )))
}

/// Birth-death Metropolis-Hastings with `10^3 (1 + (λ+ + λ-)|region|)`
/// proposals of burn-in, starting from the empty configuration.
pub(crate) fn sample_birth_death(rng: &mut Rng, region: &DiskRegion, lp: f64, lm: f64, a: f64) -> Result<WRPointConfig> {
    let lt = lp + lm;
    let mut cfg = WRPointConfig::default();
    if lt == 0.0 || region.is_empty() {
        return Ok(cfg);
    }
    let area = region_area(region, AREA_TOL)?;
    let steps = (1e3 * (1.0 + lt * area)).ceil() as u64;
    // Births are proposed uniformly on the disk union (area `area`).
    let total_disk: f64 = (0..region.len()).map(|i| region.radius(i).powi(2)).sum();
    let r2 = 4.0 * a * a;
    let d2 = |p: &Point, q: &Point| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    for _ in 0..steps {
        let n = cfg.len();
        if rng.random::<bool>() {
            let p = loop {
                // Uniform on the union: pick a disk by area, reject repeats.
                let mut u = rng.random::<f64>() * total_disk;
                let mut i = 0;
                while i + 1 < region.len() && u >= region.radius(i).powi(2) {
                    u -= region.radius(i).powi(2);
                    i += 1;
                }
                let p = uniform_in_disk(rng, region.center(i), region.radius(i));
                let cover = (0..region.len())
                    .filter(|&j| d2(&p, &[region.center(j)[0], region.center(j)[1]]) <= region.radius(j).powi(2))
                    .count();
                if rng.random::<f64>() * cover as f64 <= 1.0 {
                    break p;
                }
            };
            let plus = rng.random::<f64>() * lt < lp;
            let ok = if plus {
                cfg.minus.iter().all(|m| d2(&p, m) >= r2)
            } else {
                cfg.plus.iter().all(|q| d2(&p, q) >= r2)
            };
            if ok && rng.random::<f64>() * (n + 1) as f64 <= lt * area {
                if plus {
                    cfg.plus.push(p);
                } else {
                    cfg.minus.push(p);
                }
            }
        } else if n > 0 && rng.random::<f64>() * lt * area <= n as f64 {
            let k = rng.random_range(0..n);
            if k < cfg.plus.len() {
                cfg.plus.swap_remove(k);
            } else {
                cfg.minus.swap_remove(k - cfg.plus.len());
            }
        }
    }
    Ok(cfg)
}

pub(crate) fn sample_with(
    rng: &mut Rng,
    region: &DiskRegion,
    lp: f64,
    lm: f64,
    a: f64,
    method: SamplerMethod,
) -> Result<WRPointConfig> {
    match method {
        SamplerMethod::Rejection => sample_rejection(rng, region, lp, lm, a),
        SamplerMethod::BirthDeath => sample_birth_death(rng, region, lp, lm, a),
    }
}

/// One sample of the WRM `μ_region`.
pub fn sample_wrm(
    region: &DiskRegion,
    lambda_plus: f64,
    lambda_minus: f64,
    a: f64,
    seed: u64,
    method: SamplerMethod,
) -> Result<WRPointConfig> {
    check_region(region)?;
    check_rates(lambda_plus, lambda_minus, a)?;
    sample_with(&mut rng_from_seed(seed), region, lambda_plus, lambda_minus, a, method)
}

/// `Z` of a single ball of radius at most `a`: not both species present.
pub fn z_single_ball(radius: f64, lambda_plus: f64, lambda_minus: f64) -> f64 {
    let v = std::f64::consts::PI * radius * radius;
    (-lambda_plus * v).exp() + (-lambda_minus * v).exp() - (-(lambda_plus + lambda_minus) * v).exp()
}

pub(crate) fn region_of(cloud: &MarkedPointCloud, indices: &[usize]) -> Result<DiskRegion> {
    let mut r = DiskRegion::new(cloud.dim());
    for &i in indices {
        let m = cloud
            .mark(i)
            .ok_or_else(|| WrmError::RuleMismatch("continuum WRM needs radius marks".into()))?;
        r.push(cloud.point(i), m)?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanSe;

    fn ball(r: f64) -> DiskRegion {
        let mut d = DiskRegion::new(2);
        d.push(&[0.0, 0.0], r).unwrap();
        d
    }

    #[test]
    fn feasibility_examples() {
        let a = 0.5;
        assert!(feasible_continuum(&WRPointConfig::default(), a));
        let tangent = WRPointConfig::new(vec![[0.0, 0.0]], vec![[1.0, 0.0]]).unwrap();
        assert!(feasible_continuum(&tangent, a));
        let close = WRPointConfig::new(vec![[0.0, 0.0]], vec![[1.0 - 1e-6, 0.0]]).unwrap();
        assert!(!feasible_continuum(&close, a));
    }

    #[test]
    fn zero_rates_give_empty() {
        for m in [SamplerMethod::Rejection, SamplerMethod::BirthDeath] {
            assert!(sample_wrm(&ball(1.0), 0.0, 0.0, 0.5, 1, m).unwrap().is_empty());
        }
    }

    #[test]
    fn single_species_is_poisson() {
        let region = {
            let mut d = ball(1.0);
            d.push(&[1.5, 0.0], 0.7).unwrap();
            d
        };
        let area = region_area(&region, 1e-10).unwrap();
        let lambda = 2.0;
        for method in [SamplerMethod::Rejection, SamplerMethod::BirthDeath] {
            let stats: MeanSe = (0..2000)
                .map(|i| sample_wrm(&region, lambda, 0.0, 0.5, i, method).unwrap().plus.len() as f64)
                .collect();
            assert!(
                (stats.mean() - lambda * area).abs() <= 3.0 * stats.se(),
                "{method:?}: {} vs {}",
                stats.mean(),
                lambda * area
            );
        }
    }

    #[test]
    fn hard_core_preserved() {
        let region = ball(0.4);
        for i in 0..500 {
            for m in [SamplerMethod::Rejection, SamplerMethod::BirthDeath] {
                let c = sample_wrm(&region, 0.5, 0.5, 0.5, i, m).unwrap();
                assert!(c.plus.is_empty() || c.minus.is_empty());
            }
        }
    }

    #[test]
    fn rejection_rate_matches_single_ball_z() {
        // Fraction of feasible Poisson proposals estimates Z directly.
        let (r, lp, lm) = (0.4, 1.5, 2.5);
        let region = ball(r);
        let mut rng = rng_from_seed(5);
        let hits: MeanSe = (0..40_000)
            .map(|_| f64::from(u8::from(feasible_continuum(&poisson_pair(&mut rng, &region, lp, lm), 0.5))))
            .collect();
        let z = z_single_ball(r, lp, lm);
        assert!((hits.mean() - z).abs() <= 3.0 * hits.se());
    }

    #[test]
    fn birth_death_matches_rejection_on_two_disks() {
        let mut region = ball(0.5);
        region.push(&[0.8, 0.0], 0.5).unwrap();
        let (lp, lm, a) = (1.0, 1.0, 0.3);
        let count = |m: SamplerMethod| -> MeanSe {
            (0..3000)
                .map(|i| sample_wrm(&region, lp, lm, a, 1000 + i, m).unwrap().len() as f64)
                .collect()
        };
        let (r, b) = (count(SamplerMethod::Rejection), count(SamplerMethod::BirthDeath));
        let z = crate::stats::z_score(r.mean(), r.se(), b.mean(), b.se());
        assert!(z < 3.5, "rejection {} vs birth-death {}", r.mean(), b.mean());
    }

    #[test]
    fn poisson_on_union_has_union_intensity() {
        let mut region = ball(1.0);
        region.push(&[0.5, 0.0], 1.0).unwrap();
        let area = region_area(&region, 1e-10).unwrap();
        let mut rng = rng_from_seed(2);
        let s: MeanSe = (0..5000)
            .map(|_| poisson_on_region(&mut rng, &region, 3.0).len() as f64)
            .collect();
        assert!((s.mean() - 3.0 * area).abs() <= 3.0 * s.se());
    }
}
