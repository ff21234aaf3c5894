use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::papangelou::{ContinuumParams, MarkedPoint};
use super::{
    feasible_continuum, poisson_pair, region_of, z_ratio_inverse, Estimate, JointContinuumConfig,
    Point, WRPointConfig, AREA_TOL,
};
use crate::cluster::area::clipped_area;
use crate::cluster::{cloud_cluster_at, DiskRegion, Rule};
use crate::env::MarkedPointCloud;
use crate::error::{Result, WrmError};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::stats::MeanSe;

/// Choice variables `w ∈ [0, 1]`, one per environment point. Ties are
/// broken by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceVariables {
    values: Vec<f64>,
}

impl ChoiceVariables {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(WrmError::param(format!("choice variable {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn sample(n: usize, rng: &mut Rng) -> Self {
        Self {
            values: (0..n).map(|_| rng.random()).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Whether point `i` has priority over point `j`.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        (self.values[i], i) < (self.values[j], j)
    }
}

/// Environment in which every point carries its own coloring of its ball
/// (absolute coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixConfig {
    pub env: MarkedPointCloud,
    pub marks: Vec<WRPointConfig>,
}

impl AppendixConfig {
    pub fn new(env: MarkedPointCloud, marks: Vec<WRPointConfig>) -> Result<Self> {
        if marks.len() != env.len() || !env.is_marked() || env.dim() != 2 {
            return Err(WrmError::param("one coloring per marked planar environment point required"));
        }
        for (i, c) in marks.iter().enumerate() {
            let (x, m) = (env.point(i), env.mark(i).unwrap_or(0.0) + 1e-9);
            if c.plus.iter().chain(&c.minus).any(|p| (p[0] - x[0]).hypot(p[1] - x[1]) > m) {
                return Err(WrmError::Geometry(format!("coloring of point {i} leaves its ball")));
            }
        }
        Ok(Self { env, marks })
    }

    /// Union of all own colorings.
    pub fn union(&self) -> WRPointConfig {
        self.marks.iter().fold(WRPointConfig::default(), |acc, c| acc.joined(c))
    }
}

/// Attributes every coloring point to the covering environment point of
/// smallest choice variable.
pub fn assign_overlap(env: &MarkedPointCloud, raw: &WRPointConfig, w: &ChoiceVariables) -> Result<JointContinuumConfig> {
    if w.len() != env.len() {
        return Err(WrmError::param("one choice variable per environment point required"));
    }
    let owner = |p: &Point| -> Result<usize> {
        (0..env.len())
            .filter(|&i| {
                let x = env.point(i);
                (p[0] - x[0]).hypot(p[1] - x[1]) <= env.mark(i).unwrap_or(0.0) + 1e-9
            })
            .reduce(|best, i| if w.precedes(i, best) { i } else { best })
            .ok_or_else(|| WrmError::Geometry(format!("coloring point {p:?} lies outside BM(env)")))
    };
    let owner_plus = raw.plus.iter().map(owner).collect::<Result<Vec<_>>>()?;
    let owner_minus = raw.minus.iter().map(owner).collect::<Result<Vec<_>>>()?;
    let mut joint = JointContinuumConfig::new(env.clone(), raw.clone())?;
    joint.owner_plus = Some(owner_plus);
    joint.owner_minus = Some(owner_minus);
    joint.w = Some(w.clone());
    Ok(joint)
}

/// Forward sampler of the overlap-removed marked process on a fixed
/// environment: iid Poisson colorings of every ball, each point kept only
/// by the covering ball of smallest choice variable.
pub fn sample_overlap_removed(
    env: &MarkedPointCloud,
    lambda_plus: f64,
    lambda_minus: f64,
    seed: u64,
) -> Result<(AppendixConfig, ChoiceVariables)> {
    let mut rng = rng_from_seed(seed);
    let w = ChoiceVariables::sample(env.len(), &mut rng);
    let mut marks = Vec::with_capacity(env.len());
    for i in 0..env.len() {
        let ball = region_of(env, &[i])?;
        let raw = poisson_pair(&mut rng, &ball, lambda_plus, lambda_minus);
        let earlier: Vec<usize> = (0..env.len()).filter(|&j| j != i && w.precedes(j, i)).collect();
        let hole = region_of(env, &earlier)?;
        marks.push(raw.excluding(&hole));
    }
    Ok((AppendixConfig::new(env.clone(), marks)?, w))
}

/// Disks taking part in a choice-variable product, with their own colorings.
struct Members<'a> {
    centers: Vec<Point>,
    radii: Vec<f64>,
    marks: Vec<&'a WRPointConfig>,
    /// `nbrs[i]`: members whose ball meets ball `i`.
    nbrs: Vec<Vec<usize>>,
    cache: HashMap<(usize, u64), f64>,
}

impl<'a> Members<'a> {
    fn new(centers: Vec<Point>, radii: Vec<f64>, marks: Vec<&'a WRPointConfig>) -> Self {
        let n = centers.len();
        let nbrs = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| {
                        j != i
                            && (centers[i][0] - centers[j][0]).hypot(centers[i][1] - centers[j][1]) < radii[i] + radii[j]
                    })
                    .collect()
            })
            .collect();
        Self {
            centers,
            radii,
            marks,
            nbrs,
            cache: HashMap::new(),
        }
    }

    /// `|R_i|` for the neighbours of `i` selected by `mask` (bit `k` for
    /// `nbrs[i][k]`).
    fn r_area(&mut self, i: usize, mask: u64) -> Result<f64> {
        if mask == 0 {
            return Ok(0.0);
        }
        if let Some(&a) = self.cache.get(&(i, mask)) {
            return Ok(a);
        }
        let region = self.region(i, mask)?;
        let a = clipped_area(&self.centers[i], self.radii[i], &region, AREA_TOL)?;
        self.cache.insert((i, mask), a);
        Ok(a)
    }

    fn region(&self, i: usize, mask: u64) -> Result<DiskRegion> {
        let mut region = DiskRegion::new(2);
        for (k, &j) in self.nbrs[i].iter().enumerate() {
            if mask >> k & 1 == 1 {
                region.push(&self.centers[j], self.radii[j])?;
            }
        }
        Ok(region)
    }

    /// `Π_i 1{σ_i ∩ R_i = ∅} exp(λ|R_i|)` for the given choice variables.
    fn product(&mut self, w: &[f64], lt: f64) -> Result<f64> {
        let mut out = 1.0;
        for i in 0..self.centers.len() {
            if self.nbrs[i].len() > 63 {
                return Err(WrmError::CapExceeded {
                    what: "overlapping neighbours of one ball",
                    size: self.nbrs[i].len(),
                    cap: 63,
                });
            }
            let mut mask = 0u64;
            for (k, &j) in self.nbrs[i].iter().enumerate() {
                if (w[j], j) < (w[i], i) {
                    mask |= 1 << k;
                }
            }
            if mask == 0 {
                continue;
            }
            let region = self.region(i, mask)?;
            if self.marks[i].hits(&region) {
                return Ok(0.0);
            }
            out *= (lt * self.r_area(i, mask)?).exp();
        }
        Ok(out)
    }
}

/// Overlap factor of a single point: Monte Carlo over iid uniform choice
/// variables of `1{σ_x ∩ R = ∅} / T`, `R` the part of `B_m(x)` covered by
/// balls of smaller choice variable and `T = exp(-(λ+ + λ-)|R|)`.
pub fn chi_density(
    xbar: &MarkedPoint,
    env: &MarkedPointCloud,
    lambda_plus: f64,
    lambda_minus: f64,
    w_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if w_samples == 0 {
        return Err(WrmError::param("need at least one choice-variable sample"));
    }
    let lt = lambda_plus + lambda_minus;
    let empty = WRPointConfig::default();
    let mut centers = vec![xbar.x];
    let mut radii = vec![xbar.m];
    let mut marks = vec![&xbar.coloring];
    for i in 0..env.len() {
        let (p, m) = (env.point(i), env.mark(i).unwrap_or(0.0));
        if (p[0] - xbar.x[0]).hypot(p[1] - xbar.x[1]) < m + xbar.m {
            centers.push([p[0], p[1]]);
            radii.push(m);
            marks.push(&empty);
        }
    }
    if centers.len() == 1 {
        return Ok(Estimate::exact(1.0));
    }
    let n = centers.len();
    let mut members = Members::new(centers, radii, marks);
    let mut rng = rng_from_seed(seed);
    let mut stats = MeanSe::new();
    let mut w = vec![0.0; n];
    for _ in 0..w_samples {
        for v in w.iter_mut() {
            *v = rng.random();
        }
        let wx = w[0];
        let mut mask = 0u64;
        for (k, &j) in members.nbrs[0].clone().iter().enumerate() {
            if (w[j], j) < (wx, 0) {
                mask |= 1 << k;
            }
        }
        let region = members.region(0, mask)?;
        let value = if mask != 0 && xbar.coloring.hits(&region) {
            0.0
        } else {
            (lt * members.r_area(0, mask)?).exp()
        };
        stats.push(value);
    }
    Ok(Estimate::from_stats(&stats))
}

/// `χ(𝛈)`: the joint overlap factor of all points, one shared draw of the
/// choice variables per sample.
pub fn chi_joint(config: &AppendixConfig, lambda_plus: f64, lambda_minus: f64, w_samples: usize, seed: u64) -> Result<Estimate> {
    if w_samples == 0 {
        return Err(WrmError::param("need at least one choice-variable sample"));
    }
    let env = &config.env;
    let centers = (0..env.len()).map(|i| [env.point(i)[0], env.point(i)[1]]).collect();
    let radii = (0..env.len()).map(|i| env.mark(i).unwrap_or(0.0)).collect();
    let mut members = Members::new(centers, radii, config.marks.iter().collect());
    let mut rng = rng_from_seed(seed);
    let mut stats = MeanSe::new();
    let mut w = vec![0.0; env.len()];
    for _ in 0..w_samples {
        for v in w.iter_mut() {
            *v = rng.random();
        }
        stats.push(members.product(&w, lambda_plus + lambda_minus)?);
    }
    Ok(Estimate::from_stats(&stats))
}

/// Alternative Papangelou intensity of the overlap-removed representation:
/// `β · χ(𝛈 ∪ x) μ̄(𝛈 ∪ x) / (χ(𝛈) μ̄(𝛈))`, evaluated on the merged cluster
/// of `x` only. Both `χ` factors use the same choice-variable draws; the
/// partition-function ratio uses an independent stream.
pub fn pap3(
    xbar: &MarkedPoint,
    config: &AppendixConfig,
    params: &ContinuumParams,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    params.validate()?;
    if mc_samples == 0 {
        return Err(WrmError::param("need at least one Monte Carlo sample"));
    }
    let env = &config.env;
    let cluster = cloud_cluster_at(env, Rule::Boolean(params.a), &xbar.x, xbar.m)?;
    let sigma_c = cluster
        .iter()
        .fold(WRPointConfig::default(), |acc, &i| acc.joined(&config.marks[i]));
    if !feasible_continuum(&sigma_c, params.a) {
        return Err(WrmError::param("boundary coloring of the cluster is not feasible"));
    }
    if !feasible_continuum(&sigma_c.joined(&xbar.coloring), params.a) {
        return Ok(Estimate::exact(0.0));
    }
    let lt = params.lambda_total();
    // Member 0 is x; the cluster follows in order.
    let mut centers = vec![xbar.x];
    let mut radii = vec![xbar.m];
    let mut marks = vec![&xbar.coloring];
    for &i in &cluster {
        centers.push([env.point(i)[0], env.point(i)[1]]);
        radii.push(env.mark(i).unwrap_or(0.0));
        marks.push(&config.marks[i]);
    }
    let mut with_x = Members::new(centers.clone(), radii.clone(), marks.clone());
    let mut without_x = Members::new(centers[1..].to_vec(), radii[1..].to_vec(), marks[1..].to_vec());
    let mut rng = rng_from_seed(derive_seed(seed, "choice"));
    let k = centers.len();
    let (mut num, mut den) = (MeanSe::new(), MeanSe::new());
    let mut nums = Vec::with_capacity(mc_samples);
    let mut dens = Vec::with_capacity(mc_samples);
    let mut w = vec![0.0; k];
    for _ in 0..mc_samples {
        for v in w.iter_mut() {
            *v = rng.random();
        }
        let a = with_x.product(&w, lt)?;
        let b = without_x.product(&w[1..], lt)?;
        num.push(a);
        den.push(b);
        nums.push(a);
        dens.push(b);
    }
    if den.mean() == 0.0 {
        return Err(WrmError::Degenerate("overlap factor of the boundary vanished on all draws".into()));
    }
    let r = num.mean() / den.mean();
    let resid: MeanSe = nums.iter().zip(&dens).map(|(a, b)| a - r * b).collect();
    let chi_ratio = Estimate {
        value: r,
        se: resid.se() / den.mean(),
        samples: mc_samples as u64,
    };
    let small = region_of(env, &cluster)?;
    let mut big = small.clone();
    big.push(&xbar.x, xbar.m)?;
    let z = z_ratio_inverse(
        &small,
        &big,
        params.lambda_plus,
        params.lambda_minus,
        params.a,
        mc_samples,
        derive_seed(seed, "z"),
    )?;
    Ok(chi_ratio.times(&z).scaled(params.beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::lens_area;

    fn cloud(points: &[(f64, f64, f64)]) -> MarkedPointCloud {
        let pts: Vec<(Vec<f64>, f64)> = points.iter().map(|&(x, y, m)| (vec![x, y], m)).collect();
        MarkedPointCloud::from_marked_points(2, &pts).unwrap()
    }

    #[test]
    fn attribution_examples() {
        let env = cloud(&[(0.0, 0.0, 1.0), (5.0, 0.0, 1.0)]);
        let raw = WRPointConfig::new(vec![[0.5, 0.0], [5.2, 0.1]], vec![]).unwrap();
        let w = ChoiceVariables::new(vec![0.9, 0.1]).unwrap();
        let j = assign_overlap(&env, &raw, &w).unwrap();
        assert_eq!(j.owner_plus, Some(vec![0, 1]));

        let env = cloud(&[(0.0, 0.0, 1.0), (1.0, 0.0, 1.0)]);
        let raw = WRPointConfig::new(vec![], vec![[0.5, 0.0]]).unwrap();
        let w = ChoiceVariables::new(vec![0.2, 0.7]).unwrap();
        assert_eq!(assign_overlap(&env, &raw, &w).unwrap().owner_minus, Some(vec![0]));
        let w = ChoiceVariables::new(vec![0.7, 0.2]).unwrap();
        assert_eq!(assign_overlap(&env, &raw, &w).unwrap().owner_minus, Some(vec![1]));

        let outside = WRPointConfig::new(vec![[3.0, 3.0]], vec![]).unwrap();
        assert!(assign_overlap(&env, &outside, &w).is_err());
    }

    #[test]
    fn chi_without_overlap_is_one() {
        let env = cloud(&[(3.0, 0.0, 0.5)]);
        let x = MarkedPoint::bare([0.0, 0.0], 0.5).unwrap();
        let est = chi_density(&x, &env, 1.0, 1.0, 100, 1).unwrap();
        assert_eq!((est.value, est.se), (1.0, 0.0));
    }

    #[test]
    fn chi_two_point_closed_form() {
        let (lp, lm) = (1.5, 2.0);
        let env = cloud(&[(0.6, 0.0, 0.5)]);
        let x = MarkedPoint::bare([0.0, 0.0], 0.5).unwrap();
        let a = lens_area(0.5, 0.5, 0.6);
        let exact = 0.5 * (((lp + lm) * a).exp() + 1.0);
        let est = chi_density(&x, &env, lp, lm, 20_000, 3).unwrap();
        assert!((est.value - exact).abs() <= 3.0 * est.se, "{est:?} vs {exact}");
    }

    #[test]
    fn chi_bounded_by_inverse_void_probability() {
        // A point of x's own coloring inside the lens is deleted whenever the
        // neighbour has priority.
        let (lp, lm) = (1.0, 1.0);
        let env = cloud(&[(0.6, 0.0, 0.5)]);
        let x = MarkedPoint::new([0.0, 0.0], 0.5, WRPointConfig::new(vec![[0.3, 0.0]], vec![]).unwrap()).unwrap();
        let est = chi_density(&x, &env, lp, lm, 5000, 4).unwrap();
        let a = lens_area(0.5, 0.5, 0.6);
        assert!(est.value <= 0.5 * (((lp + lm) * a).exp() + 1.0));
        assert!((est.value - 0.5).abs() <= 3.0 * est.se + 1e-12);
    }

    #[test]
    fn chi_joint_is_normalized_over_colorings() {
        // E over Poisson own-colorings of χ equals 1 for every environment.
        let env = cloud(&[(0.0, 0.0, 0.5), (0.6, 0.0, 0.5), (0.3, 0.5, 0.4)]);
        let (lp, lm) = (1.0, 1.5);
        let mut rng = rng_from_seed(8);
        let mut stats = MeanSe::new();
        for s in 0..3000 {
            let marks = (0..env.len())
                .map(|i| poisson_pair(&mut rng, &region_of(&env, &[i]).unwrap(), lp, lm))
                .collect();
            let cfg = AppendixConfig::new(env.clone(), marks).unwrap();
            stats.push(chi_joint(&cfg, lp, lm, 1, s).unwrap().value);
        }
        assert!((stats.mean() - 1.0).abs() <= 3.0 * stats.se(), "{} ± {}", stats.mean(), stats.se());
    }

    #[test]
    fn forward_sampler_keeps_one_layer() {
        let env = cloud(&[(0.0, 0.0, 1.0), (1.0, 0.0, 1.0)]);
        let (cfg, w) = sample_overlap_removed(&env, 3.0, 3.0, 2).unwrap();
        let union = cfg.union();
        let j = assign_overlap(&env, &union, &w).unwrap();
        // Every kept point belongs to the ball that owns it.
        for (k, owner) in j.owner_plus.unwrap().iter().enumerate() {
            assert!(cfg.marks[*owner].plus.contains(&union.plus[k]));
        }
    }
}
