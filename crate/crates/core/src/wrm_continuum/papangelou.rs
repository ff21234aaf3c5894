use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    check_rates, compatible_with, feasible_continuum, region_of, sample_rejection, Estimate,
    JointContinuumConfig, Point, WRPointConfig, AREA_TOL,
};
use crate::cluster::area::clipped_area;
use crate::cluster::{cloud_cluster_at, region_area, DiskRegion, Rule};
use crate::env::{MarkedPointCloud, ModelParams};
use crate::error::{Result, WrmError};
use crate::rng::{par_replicas, rng_from_seed, Rng};
use crate::stats::MeanSe;

/// Parameters of the Boolean-model WRM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumParams {
    pub beta: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub a: f64,
}

impl ContinuumParams {
    pub fn from_model(p: &ModelParams) -> Self {
        Self {
            beta: p.beta,
            lambda_plus: p.lambda_plus,
            lambda_minus: p.lambda_minus,
            a: p.a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(WrmError::param(format!("beta = {} must be > 0", self.beta)));
        }
        check_rates(self.lambda_plus, self.lambda_minus, self.a)
    }

    pub fn lambda_total(&self) -> f64 {
        self.lambda_plus + self.lambda_minus
    }
}

/// Environment point `x` with radius `m` and a coloring of `B_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub x: Point,
    pub m: f64,
    pub coloring: WRPointConfig,
}

impl MarkedPoint {
    pub fn new(x: Point, m: f64, coloring: WRPointConfig) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(WrmError::param(format!("radius mark {m} must be > 0")));
        }
        let slack = m + 1e-9;
        if let Some(p) = coloring
            .plus
            .iter()
            .chain(&coloring.minus)
            .find(|p| (p[0] - x[0]).hypot(p[1] - x[1]) > slack)
        {
            return Err(WrmError::Geometry(format!("coloring point {p:?} lies outside B_m(x)")));
        }
        Ok(Self { x, m, coloring })
    }

    pub fn bare(x: Point, m: f64) -> Result<Self> {
        Self::new(x, m, WRPointConfig::default())
    }

    pub(crate) fn ball(&self) -> DiskRegion {
        let mut d = DiskRegion::new(2);
        d.push(&self.x, self.m).expect("validated radius");
        d
    }
}

/// Deterministic part of the intensity; `draw` adds one unbiased sample of
/// the partition-function ratio.
pub(crate) struct PapSetup {
    /// `β · χ · 1{feasible}`; zero short-circuits the estimate.
    pub prefactor: f64,
    /// `exp((λ+ + λ-)|B_m(x) ∖ BM(C)|)`.
    weight: f64,
    small: DiskRegion,
    big: DiskRegion,
    params: ContinuumParams,
}

impl PapSetup {
    pub fn new(xbar: &MarkedPoint, env: &MarkedPointCloud, coloring: &WRPointConfig, params: &ContinuumParams, include_chi: bool) -> Result<Self> {
        params.validate()?;
        let cluster = cloud_cluster_at(env, Rule::Boolean(params.a), &xbar.x, xbar.m)?;
        let small = region_of(env, &cluster)?;
        let mut big = small.clone();
        big.push(&xbar.x, xbar.m)?;
        let ball = xbar.ball();
        let overlap = clipped_area(&xbar.x, xbar.m, &small, AREA_TOL)?;
        let lt = params.lambda_total();
        let local = coloring.restricted(&small);
        let outside_ball = local.excluding(&ball);
        let feasible = feasible_continuum(&xbar.coloring, params.a)
            && compatible_with(&outside_ball, &xbar.coloring, params.a);
        let chi = if include_chi {
            if local.hits(&ball) {
                0.0
            } else {
                (lt * overlap).exp()
            }
        } else {
            1.0
        };
        let prefactor = if feasible { params.beta * chi } else { 0.0 };
        let disk_area = std::f64::consts::PI * xbar.m * xbar.m;
        let weight = (lt * (disk_area - overlap).max(0.0)).exp();
        Ok(Self {
            prefactor,
            weight,
            small,
            big,
            params: *params,
        })
    }

    /// One unbiased sample of `Z_C / Z_{C ∪ x}`.
    pub fn draw(&self, rng: &mut Rng) -> Result<f64> {
        let p = &self.params;
        let sigma = sample_rejection(rng, &self.big, p.lambda_plus, p.lambda_minus, p.a)?;
        let inside = sigma.plus.iter().chain(&sigma.minus).all(|q| self.small.contains(q));
        Ok(if inside { self.weight } else { 0.0 })
    }
}

/// Papangelou intensity of the Boolean-model WRM for adding `xbar` to
/// `joint`:
/// `β · Z_{BM(C)} / Z_{BM(C ∪ x)} · 1{feasible} · χ` with `C` the merged
/// `BM^a` cluster of `x` and `χ = exp((λ+ + λ-)|O|) 1{σ(O) = 0}`,
/// `O = B_m(x) ∩ BM(C)`. The ratio is estimated from `mc_samples` draws.
pub fn pbm_papangelou(
    xbar: &MarkedPoint,
    joint: &JointContinuumConfig,
    params: &ContinuumParams,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    pbm_papangelou_with(xbar, joint, params, mc_samples, seed, true)
}

/// As [`pbm_papangelou`]; `include_chi = false` drops the overlap factor.
pub fn pbm_papangelou_with(
    xbar: &MarkedPoint,
    joint: &JointContinuumConfig,
    params: &ContinuumParams,
    mc_samples: usize,
    seed: u64,
    include_chi: bool,
) -> Result<Estimate> {
    if !feasible_continuum(&joint.coloring, params.a) {
        return Err(WrmError::param("boundary coloring is not feasible"));
    }
    if mc_samples == 0 {
        return Err(WrmError::param("need at least one Monte Carlo sample"));
    }
    let setup = PapSetup::new(xbar, &joint.env, &joint.coloring, params, include_chi)?;
    if setup.prefactor == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let draws = par_replicas(mc_samples, seed, |rng, _| setup.draw(rng))?;
    let stats: MeanSe = draws.into_iter().collect();
    if stats.mean() == 0.0 {
        return Err(WrmError::Degenerate("no sample avoided the added ball".into()));
    }
    Ok(Estimate::from_stats(&stats).scaled(setup.prefactor))
}

/// Deviation statistics of the intensity under `ε`-perturbations of the
/// cluster of `x` (empty colorings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub eps: f64,
    /// Intensity at the unperturbed configuration.
    pub rho: f64,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub se_mean_deviation: f64,
    pub accepted: usize,
    /// Perturbations that changed the cluster membership.
    pub rejected: usize,
    /// Area of the `2ε` shell `BM_{+2ε} ∖ BM_{-2ε}` of the cluster and `x`.
    pub inflation: f64,
    /// `rho · (exp(3 (λ+ + λ-) · inflation) - 1)`, a bound on the deviation
    /// of the exact intensity.
    pub bound: f64,
}

/// Probes local robustness: jitters positions and marks of the cluster of
/// `x` by at most `ε` and reports the deviation of the intensity. Intensities
/// share their random numbers, so deviations reflect the geometry only.
pub fn local_robustness_probe(
    xbar: &MarkedPoint,
    env: &MarkedPointCloud,
    params: &ContinuumParams,
    eps_list: &[f64],
    perturbations: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<RobustnessRow>> {
    if !xbar.coloring.is_empty() {
        return Err(WrmError::param("robustness probes use the empty coloring"));
    }
    let empty = WRPointConfig::default();
    let rho_at = |cloud: &MarkedPointCloud| -> Result<f64> {
        let setup = PapSetup::new(xbar, cloud, &empty, params, true)?;
        let draws = par_replicas(mc_samples, seed, |rng, _| setup.draw(rng))?;
        Ok(setup.prefactor * draws.iter().sum::<f64>() / mc_samples as f64)
    };
    let cluster = cloud_cluster_at(env, Rule::Boolean(params.a), &xbar.x, xbar.m)?;
    let rho0 = rho_at(env)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for (e_idx, &eps) in eps_list.iter().enumerate() {
        if !(eps >= 0.0) {
            return Err(WrmError::param(format!("perturbation size {eps} must be >= 0")));
        }
        let mut rng = rng_from_seed(crate::rng::derive_index(seed, e_idx as u64 + 1));
        let mut devs = MeanSe::new();
        let mut max_dev: f64 = 0.0;
        let mut rejected = 0;
        for _ in 0..perturbations {
            let moved = perturb(env, &cluster, eps, &mut rng)?;
            if cloud_cluster_at(&moved, Rule::Boolean(params.a), &xbar.x, xbar.m)? != cluster {
                rejected += 1;
                continue;
            }
            let dev = (rho_at(&moved)? - rho0).abs();
            max_dev = max_dev.max(dev);
            devs.push(dev);
        }
        let inflation = shell_area(xbar, env, &cluster, 2.0 * eps)?;
        rows.push(RobustnessRow {
            eps,
            rho: rho0,
            max_deviation: max_dev,
            mean_deviation: devs.mean(),
            se_mean_deviation: devs.se(),
            accepted: devs.count() as usize,
            rejected,
            inflation,
            bound: rho0 * ((3.0 * params.lambda_total() * inflation).exp() - 1.0),
        });
    }
    Ok(rows)
}

/// Moves each cluster point uniformly within `B_eps` and each mark uniformly
/// within `eps` (kept positive).
fn perturb(env: &MarkedPointCloud, cluster: &[usize], eps: f64, rng: &mut Rng) -> Result<MarkedPointCloud> {
    let mut out = MarkedPointCloud::empty(env.dim(), true);
    for i in 0..env.len() {
        let (p, m) = (env.point(i), env.mark(i).unwrap_or(0.0));
        if eps > 0.0 && cluster.binary_search(&i).is_ok() {
            let r = eps * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let m2 = (m + eps * (2.0 * rng.random::<f64>() - 1.0)).max(1e-12);
            out.push(&[p[0] + r * t.cos(), p[1] + r * t.sin()], Some(m2))?;
        } else {
            out.push(p, Some(m))?;
        }
    }
    Ok(out)
}

fn shell_area(xbar: &MarkedPoint, env: &MarkedPointCloud, cluster: &[usize], grow: f64) -> Result<f64> {
    if grow == 0.0 || cluster.is_empty() {
        return Ok(0.0);
    }
    let mut outer = DiskRegion::new(2);
    let mut inner = DiskRegion::new(2);
    for &i in cluster {
        let m = env.mark(i).unwrap_or(0.0);
        outer.push(env.point(i), m + grow)?;
        inner.push(env.point(i), (m - grow).max(0.0))?;
    }
    outer.push(&xbar.x, xbar.m)?;
    inner.push(&xbar.x, xbar.m)?;
    Ok((region_area(&outer, AREA_TOL)? - region_area(&inner, AREA_TOL)?).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wrm_continuum::z_single_ball;

    fn params() -> ContinuumParams {
        ContinuumParams {
            beta: 0.7,
            lambda_plus: 1.0,
            lambda_minus: 1.5,
            a: 0.5,
        }
    }

    fn joint(points: &[(f64, f64, f64)], coloring: WRPointConfig) -> JointContinuumConfig {
        let pts: Vec<(Vec<f64>, f64)> = points.iter().map(|&(x, y, m)| (vec![x, y], m)).collect();
        JointContinuumConfig::new(MarkedPointCloud::from_marked_points(2, &pts).unwrap(), coloring).unwrap()
    }

    #[test]
    fn isolated_point_closed_form() {
        let p = params();
        let j = joint(&[(10.0, 10.0, 0.4)], WRPointConfig::default());
        let x = MarkedPoint::bare([0.0, 0.0], 0.45).unwrap();
        let est = pbm_papangelou(&x, &j, &p, 20_000, 9).unwrap();
        let exact = p.beta / z_single_ball(0.45, p.lambda_plus, p.lambda_minus);
        assert!((est.value - exact).abs() <= 3.0 * est.se, "{est:?} vs {exact}");
    }

    #[test]
    fn coloring_in_overlap_kills_intensity() {
        let p = params();
        let j = joint(&[(0.5, 0.0, 0.4)], WRPointConfig::new(vec![[0.3, 0.0]], vec![]).unwrap());
        let x = MarkedPoint::bare([0.0, 0.0], 0.4).unwrap();
        assert_eq!(pbm_papangelou(&x, &j, &p, 100, 1).unwrap().value, 0.0);
        // Without the overlap factor the same configuration has mass.
        assert!(pbm_papangelou_with(&x, &j, &p, 100, 1, false).unwrap().value > 0.0);
    }

    #[test]
    fn conflicting_coloring_is_infeasible() {
        let p = params();
        let j = joint(&[(1.0, 0.0, 0.2)], WRPointConfig::new(vec![], vec![[1.0, 0.0]]).unwrap());
        let x = MarkedPoint::new([0.0, 0.0], 0.3, WRPointConfig::new(vec![[0.1, 0.0]], vec![]).unwrap()).unwrap();
        assert_eq!(pbm_papangelou(&x, &j, &p, 100, 1).unwrap().value, 0.0);
    }

    #[test]
    fn zero_eps_has_zero_deviation() {
        let p = params();
        let env = MarkedPointCloud::from_marked_points(2, &[(vec![0.9, 0.0], 0.3)]).unwrap();
        let x = MarkedPoint::bare([0.0, 0.0], 0.3).unwrap();
        let rows = local_robustness_probe(&x, &env, &p, &[0.0], 3, 200, 5).unwrap();
        assert_eq!(rows[0].max_deviation, 0.0);
        assert_eq!(rows[0].inflation, 0.0);
    }

    #[test]
    fn shrinking_eps_shrinks_deviation() {
        let p = params();
        let env = MarkedPointCloud::from_marked_points(2, &[(vec![0.6, 0.0], 0.35)]).unwrap();
        let x = MarkedPoint::bare([0.0, 0.0], 0.35).unwrap();
        let eps = [0.08, 0.04, 0.02, 0.01, 0.005];
        let rows = local_robustness_probe(&x, &env, &p, &eps, 20, 4000, 17).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].mean_deviation <= w[0].mean_deviation + 3.0 * w[0].se_mean_deviation.hypot(w[1].se_mean_deviation),
                "{rows:?}"
            );
        }
        let last = rows.last().unwrap();
        assert!(last.max_deviation < 0.01 * last.rho, "{last:?}");
    }
}
