//! GNZ and DLR consistency checks, and finite-volume specification densities
//! built from Papangelou intensities.
//!
//! Lattice: every single-site conditional of the fully enumerated joint
//! measure on a box (outside read as unoccupied) is compared with
//! `ρ / (1 + Σ ρ)`. Continuum: both sides of
//! `E Σ_{x ∈ η ∩ W} f(x, η) = ∫_W E[f(x, η ∪ x) ρ(x, η)] dx` are estimated by
//! independent simulations on an enlarged window `W⁺`.

use std::collections::HashMap;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{clusters, cloud_cluster_at, cloud_neighbors, geometric_graph, AdjacencyGraph, Rule};
use crate::env::{dist, sample_marked_ppp, sample_ppp, LatticeBox, LatticeEnv, MarkedPointCloud, RadiusLaw, Site, Window};
use crate::error::{Result, WrmError};
use crate::rng::{derive_index, derive_seed, par_replicas, Rng};
use crate::stats::{bonferroni_z, z_score, MeanSe};
use crate::wrm_continuum::{
    poisson_pair, region_of, PapSetup, sample_rejection, ContinuumParams, MarkedPoint, Point, WRPointConfig, REJECTION_BUDGET,
};
use crate::wrm_lattice::{
    compatible, discrete_papangelou, z_enum, z_sites, LatticeConfig, PapConvention, Spin, SpinWeights, SPINS,
};

/// Family-wise level of the continuum checks (three sigma for one test).
pub const GNZ_ALPHA: f64 = 0.0027;
/// Largest box enumerated exhaustively (`4^9` joint states).
pub const LATTICE_EXACT_CAP: usize = 9;
/// Largest box accepted for spot checks.
pub const LATTICE_SPOT_CAP: usize = 64;
/// Number of random conditionals compared in spot-check mode.
pub const SPOT_CHECKS: usize = 2000;
/// Largest tolerated fraction of replicates whose relevant cluster comes
/// within interaction range of the boundary of `W⁺`.
pub const MAX_TRUNCATED: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnzTest {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    /// `|lhs - rhs| / sqrt(se_lhs^2 + se_rhs^2)`.
    pub z: f64,
    pub samples: usize,
}

impl GnzTest {
    fn from_stats(name: &str, lhs: &MeanSe, rhs: &MeanSe) -> Self {
        Self {
            name: name.to_string(),
            lhs: lhs.mean(),
            rhs: rhs.mean(),
            se_lhs: lhs.se(),
            se_rhs: rhs.se(),
            z: z_score(lhs.mean(), lhs.se(), rhs.mean(), rhs.se()),
            samples: lhs.count() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnzReport {
    pub tests: Vec<GnzTest>,
    pub rejected_fraction: f64,
    /// Bonferroni-corrected z threshold of the continuum tests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Largest conditional deviation of the lattice check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    /// Number of conditionals compared by the lattice check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<usize>,
}

impl GnzReport {
    pub fn max_z(&self) -> f64 {
        self.tests.iter().map(|t| t.z).fold(0.0, f64::max)
    }

    /// Every z-score below the threshold (lattice reports: deviation ≤ 1e-12).
    pub fn passes(&self) -> bool {
        match (self.threshold, self.max_deviation) {
            (_, Some(d)) => d <= 1e-12,
            (Some(t), None) => self.tests.iter().all(|x| x.z < t),
            (None, None) => self.tests.iter().all(|x| x.z < 3.0),
        }
    }

    pub fn test(&self, name: &str) -> Option<&GnzTest> {
        self.tests.iter().find(|t| t.name == name)
    }
}

// ---------------------------------------------------------------- lattice

/// Intensity `ρ(s, o, boundary)` of a lattice model. It may depend on the
/// boundary only through the occupied sites and the spins next to `o`.
pub type LatticeIntensity<'a> = dyn Fn(Spin, &[i64], &LatticeConfig) -> Result<f64> + Sync + 'a;

/// Single-site DLR check of `discrete_papangelou` (explicit-weight
/// convention) on `bbox` with site density `q`.
pub fn gnz_check_lattice(bbox: &LatticeBox, q: f64, w: &SpinWeights, exact: bool, seed: u64) -> Result<GnzReport> {
    gnz_check_lattice_with(bbox, q, w, exact, seed, &|s, o, b| {
        discrete_papangelou(s, o, b, q, w, PapConvention::ExplicitWeight)
    })
}

/// As [`gnz_check_lattice`] with an arbitrary intensity.
pub fn gnz_check_lattice_with(
    bbox: &LatticeBox,
    q: f64,
    w: &SpinWeights,
    exact: bool,
    seed: u64,
    rho: &LatticeIntensity<'_>,
) -> Result<GnzReport> {
    if !(q > 0.0 && q < 1.0) {
        return Err(WrmError::param(format!("q = {q} must lie in (0, 1)")));
    }
    let box_model = BoxModel::new(bbox, q, w)?;
    let (max_deviation, checks) = if exact {
        if bbox.num_sites() > LATTICE_EXACT_CAP {
            return Err(WrmError::CapExceeded {
                what: "exact lattice check box",
                size: bbox.num_sites(),
                cap: LATTICE_EXACT_CAP,
            });
        }
        box_model.exhaustive(rho)?
    } else {
        if bbox.num_sites() > LATTICE_SPOT_CAP {
            return Err(WrmError::CapExceeded {
                what: "lattice spot-check box",
                size: bbox.num_sites(),
                cap: LATTICE_SPOT_CAP,
            });
        }
        box_model.spot_checks(rho, SPOT_CHECKS, seed)?
    };
    Ok(GnzReport {
        tests: Vec::new(),
        rejected_fraction: 0.0,
        threshold: None,
        max_deviation: Some(max_deviation),
        checks: Some(checks),
    })
}

/// Joint measure on a box: state digit 0 is `u`, digits 1..=3 are spins
/// `[0, +, -]`.
struct BoxModel<'a> {
    bbox: &'a LatticeBox,
    sites: Vec<Site>,
    neighbors: Vec<Vec<usize>>,
    q: f64,
    w: &'a SpinWeights,
}

fn digit_spin(d: u8) -> Option<Spin> {
    (d > 0).then(|| SPINS[usize::from(d) - 1])
}

impl<'a> BoxModel<'a> {
    fn new(bbox: &'a LatticeBox, q: f64, w: &'a SpinWeights) -> Result<Self> {
        let sites = bbox.sites();
        let neighbors = sites
            .iter()
            .map(|a| {
                (0..sites.len())
                    .filter(|&j| crate::env::l1(a, &sites[j]) == 1)
                    .collect()
            })
            .collect();
        Ok(Self {
            bbox,
            sites,
            neighbors,
            q,
            w,
        })
    }

    fn feasible(&self, state: &[u8]) -> bool {
        (0..state.len()).all(|i| {
            let Some(a) = digit_spin(state[i]) else { return true };
            self.neighbors[i]
                .iter()
                .all(|&j| digit_spin(state[j]).is_none_or(|b| compatible(a, b)))
        })
    }

    fn occupied(&self, state: &[u8]) -> Vec<Site> {
        (0..state.len())
            .filter(|&i| state[i] > 0)
            .map(|i| self.sites[i].clone())
            .collect()
    }

    /// Unnormalized `K(state)` given `Z` of its occupied set.
    fn weight_with(&self, state: &[u8], z: f64) -> f64 {
        if !self.feasible(state) {
            return 0.0;
        }
        state
            .iter()
            .map(|&d| match digit_spin(d) {
                None => 1.0 - self.q,
                Some(s) => self.q * self.w.weight(s),
            })
            .product::<f64>()
            / z
    }

    fn weight(&self, state: &[u8]) -> Result<f64> {
        if !self.feasible(state) {
            return Ok(0.0);
        }
        Ok(self.weight_with(state, z_sites(&self.occupied(state), self.w)?))
    }

    fn boundary(&self, state: &[u8], o: usize) -> Result<LatticeConfig> {
        let mut occupied = Vec::new();
        let mut spins = Vec::new();
        for (i, &d) in state.iter().enumerate() {
            if let (true, Some(s)) = (i != o, digit_spin(d)) {
                occupied.push(self.sites[i].clone());
                spins.push((self.sites[i].clone(), s));
            }
        }
        let env = LatticeEnv::new(self.bbox.clone(), occupied)?;
        LatticeConfig::new(env, spins.into_iter().collect())
    }

    /// Deviation between the conditional law at `o` read off `k` (indexed by
    /// digit) and the prediction of `rho`.
    fn deviation(&self, k: &[f64; 4], rho: &[f64; 3]) -> f64 {
        let total: f64 = k.iter().sum();
        let norm = 1.0 + rho.iter().sum::<f64>();
        let mut dev = (k[0] / total - 1.0 / norm).abs();
        for t in 0..3 {
            dev = dev.max((k[t + 1] / total - rho[t] / norm).abs());
        }
        dev
    }

    fn intensities(&self, state: &[u8], o: usize, rho: &LatticeIntensity<'_>) -> Result<[f64; 3]> {
        let boundary = self.boundary(state, o)?;
        let mut out = [0.0; 3];
        for (t, &s) in SPINS.iter().enumerate() {
            out[t] = rho(s, &self.sites[o], &boundary)?;
        }
        Ok(out)
    }

    fn exhaustive(&self, rho: &LatticeIntensity<'_>) -> Result<(f64, usize)> {
        let n = self.sites.len();
        let z_by_mask: Vec<f64> = (0..1usize << n)
            .into_par_iter()
            .map(|mask| {
                let occ: Vec<Site> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| self.sites[i].clone()).collect();
                z_sites(&occ, self.w)
            })
            .collect::<Result<_>>()?;
        let decode = |code: usize| -> Vec<u8> { (0..n).map(|i| (code >> (2 * i) & 3) as u8).collect() };
        let mask_of = |state: &[u8]| state.iter().enumerate().fold(0usize, |m, (i, &d)| m | usize::from(d > 0) << i);
        let k: Vec<f64> = (0..1usize << (2 * n))
            .into_par_iter()
            .map(|code| {
                let state = decode(code);
                self.weight_with(&state, z_by_mask[mask_of(&state)])
            })
            .collect();
        let per_site: Vec<(f64, usize)> = (0..n)
            .into_par_iter()
            .map(|o| -> Result<(f64, usize)> {
                let mut memo: HashMap<(usize, Vec<u8>), [f64; 3]> = HashMap::new();
                let (mut max_dev, mut checks) = (0.0f64, 0usize);
                for code in (0..1usize << (2 * n)).filter(|c| c >> (2 * o) & 3 == 0) {
                    let probs = [0, 1, 2, 3].map(|d| k[code | d << (2 * o)]);
                    if probs.iter().sum::<f64>() == 0.0 {
                        continue;
                    }
                    let state = decode(code);
                    let key = (mask_of(&state), self.neighbors[o].iter().map(|&j| state[j]).collect());
                    let r = match memo.get(&key) {
                        Some(r) => *r,
                        None => {
                            let r = self.intensities(&state, o, rho)?;
                            memo.insert(key, r);
                            r
                        }
                    };
                    max_dev = max_dev.max(self.deviation(&probs, &r));
                    checks += 1;
                }
                Ok((max_dev, checks))
            })
            .collect::<Result<_>>()?;
        Ok(per_site
            .into_iter()
            .fold((0.0, 0), |(m, c), (d, k)| (m.max(d), c + k)))
    }

    /// Random feasible boundaries built site by site from digits compatible
    /// with the neighbours assigned so far.
    fn spot_checks(&self, rho: &LatticeIntensity<'_>, count: usize, seed: u64) -> Result<(f64, usize)> {
        let n = self.sites.len();
        let devs = par_replicas(count, seed, |rng, _| -> Result<f64> {
            let o = rng.random_range(0..n);
            let mut state = vec![0u8; n];
            for i in (0..n).filter(|&i| i != o) {
                let allowed: Vec<u8> = (0..4u8)
                    .filter(|&d| {
                        state[i] = d;
                        self.feasible(&state)
                    })
                    .collect();
                state[i] = allowed[rng.random_range(0..allowed.len())];
            }
            let mut probs = [0.0; 4];
            for (d, p) in probs.iter_mut().enumerate() {
                state[o] = d as u8;
                *p = self.weight(&state)?;
            }
            state[o] = 0;
            Ok(self.deviation(&probs, &self.intensities(&state, o, rho)?))
        })?;
        Ok((devs.into_iter().fold(0.0, f64::max), count))
    }
}

// ---------------------------------------------------------- specification

/// `Π_i ρ(x_i, boundary ∪ {x_1, ..., x_{i-1}})`: the density of the
/// finite-volume specification relative to the free reference law. `add`
/// inserts one point into a configuration.
pub fn specification_from_pap<P, B: Clone>(
    rho: impl Fn(&P, &B) -> Result<f64>,
    add: impl Fn(&mut B, &P) -> Result<()>,
    boundary: &B,
    points: &[P],
) -> Result<f64> {
    let mut config = boundary.clone();
    let mut density = 1.0;
    for x in points {
        density *= rho(x, &config)?;
        add(&mut config, x)?;
    }
    Ok(density)
}

/// Specification density of the lattice joint measure for adding the
/// spin-marked sites `points` (inside `window`, unoccupied in `boundary`).
pub fn lattice_specification(
    window: &LatticeBox,
    boundary: &LatticeConfig,
    points: &[(Site, Spin)],
    q: f64,
    w: &SpinWeights,
    convention: PapConvention,
) -> Result<f64> {
    for (i, (x, _)) in points.iter().enumerate() {
        if !window.contains(x) {
            return Err(WrmError::Geometry(format!("site {x:?} lies outside the window")));
        }
        if boundary.env.is_occupied(x) || points[..i].iter().any(|(y, _)| y == x) {
            return Err(WrmError::param(format!("site {x:?} is occupied twice")));
        }
    }
    specification_from_pap(
        |(x, s): &(Site, Spin), b: &LatticeConfig| discrete_papangelou(*s, x, b, q, w, convention),
        |b: &mut LatticeConfig, (x, s): &(Site, Spin)| {
            *b = b.with_spin(x, *s)?;
            Ok(())
        },
        boundary,
        points,
    )
}

// -------------------------------------------------------------- continuum

/// Continuum models of the GNZ harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContinuumModel {
    /// Poisson process of intensity `beta`; `ρ ≡ beta`.
    FreePoisson { beta: f64 },
    /// WRM with spin weights `w` on a Poisson-Gilbert graph of radius `r`.
    Pgg { beta: f64, r: f64, w: SpinWeights },
    /// Boolean-model WRM with radius law `law`; `include_chi = false` drops
    /// the overlap factor of the intensity.
    Pbm {
        params: ContinuumParams,
        law: RadiusLaw,
        include_chi: bool,
    },
}

impl ContinuumModel {
    fn validate(&self) -> Result<()> {
        match self {
            ContinuumModel::FreePoisson { beta } | ContinuumModel::Pgg { beta, .. } if !(*beta > 0.0 && beta.is_finite()) => {
                Err(WrmError::param(format!("beta = {beta} must be > 0")))
            }
            ContinuumModel::Pgg { r, .. } if !(*r > 0.0 && r.is_finite()) => {
                Err(WrmError::param(format!("gilbert radius {r} must be > 0")))
            }
            ContinuumModel::Pbm { params, law, .. } => {
                params.validate()?;
                law.validate()?;
                if let RadiusLaw::PointMass(m) = law {
                    if *m <= 0.0 {
                        return Err(WrmError::param("radius marks must be > 0"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest distance over which points interact.
    fn reach(&self) -> f64 {
        match self {
            ContinuumModel::FreePoisson { .. } => 0.0,
            ContinuumModel::Pgg { r, .. } => *r,
            ContinuumModel::Pbm { params, law, .. } => 2.0 * law.max_radius() + 2.0 * params.a,
        }
    }
}

/// Test functions `f(x, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFn {
    /// `1`.
    Count,
    /// `1{s = +}` (Gilbert).
    Plus,
    /// `1{s = 0} · deg(x)` (Gilbert).
    ZeroDegree,
    /// `1{s = +} · 1{deg(x) ≥ 1}` (Gilbert).
    PlusTouching,
    /// Radius mark `m` (Boolean).
    Mark,
    /// `+` points of the coloring inside `B_m(x)` (Boolean).
    PlusInBall,
    /// Coloring points inside `B_m(x) ∩ BM(η ∖ x)` (Boolean).
    Overlap,
}

impl TestFn {
    pub fn name(&self) -> &'static str {
        match self {
            TestFn::Count => "count",
            TestFn::Plus => "plus",
            TestFn::ZeroDegree => "zero_degree",
            TestFn::PlusTouching => "plus_touching",
            TestFn::Mark => "mark",
            TestFn::PlusInBall => "plus_in_ball",
            TestFn::Overlap => "overlap",
        }
    }

    fn applies_to(&self, model: &ContinuumModel) -> bool {
        match model {
            ContinuumModel::FreePoisson { .. } => *self == TestFn::Count,
            ContinuumModel::Pgg { .. } => {
                matches!(self, TestFn::Count | TestFn::Plus | TestFn::ZeroDegree | TestFn::PlusTouching)
            }
            ContinuumModel::Pbm { .. } => {
                matches!(self, TestFn::Count | TestFn::Mark | TestFn::PlusInBall | TestFn::Overlap)
            }
        }
    }
}

impl FromStr for TestFn {
    type Err = WrmError;

    fn from_str(s: &str) -> Result<Self> {
        [
            TestFn::Count,
            TestFn::Plus,
            TestFn::ZeroDegree,
            TestFn::PlusTouching,
            TestFn::Mark,
            TestFn::PlusInBall,
            TestFn::Overlap,
        ]
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| WrmError::param(format!("unknown test function {s:?}")))
    }
}

pub fn default_test_fns(model: &ContinuumModel) -> Vec<TestFn> {
    match model {
        ContinuumModel::FreePoisson { .. } => vec![TestFn::Count],
        ContinuumModel::Pgg { .. } => vec![TestFn::Count, TestFn::Plus, TestFn::ZeroDegree, TestFn::PlusTouching],
        ContinuumModel::Pbm { .. } => vec![TestFn::Count, TestFn::Mark, TestFn::PlusInBall, TestFn::Overlap],
    }
}

/// One replicate: a value per test function and a truncation flag.
type Replicate = (Vec<f64>, bool);

/// Monte Carlo GNZ check on `window` with `n_samples` replicates per side.
/// The environment lives on `W⁺`, the window grown by three interaction
/// ranges, and is empty outside it.
pub fn gnz_check_continuum(
    model: &ContinuumModel,
    window: &Window,
    test_fns: &[TestFn],
    n_samples: usize,
    seed: u64,
) -> Result<GnzReport> {
    model.validate()?;
    if window.dim() != 2 {
        return Err(WrmError::UnsupportedDimension(window.dim()));
    }
    if n_samples < 2 {
        return Err(WrmError::param("need at least two replicates"));
    }
    if test_fns.is_empty() {
        return Err(WrmError::param("no test functions"));
    }
    if let Some(f) = test_fns.iter().find(|f| !f.applies_to(model)) {
        return Err(WrmError::param(format!("test function {} does not apply to this model", f.name())));
    }
    let plus = window.grown(3.0 * model.reach());
    let ctx = Ctx {
        model,
        window,
        plus: &plus,
        fns: test_fns,
    };
    let lhs_seed = derive_seed(seed, "gnz-lhs");
    let rhs_seed = derive_seed(seed, "gnz-rhs");
    let lhs = par_replicas(n_samples, lhs_seed, |rng, i| ctx.lhs(rng, derive_index(lhs_seed, i as u64)))?;
    let rhs = par_replicas(n_samples, rhs_seed, |rng, i| ctx.rhs(rng, derive_index(rhs_seed, i as u64)))?;
    let truncated = lhs.iter().chain(&rhs).filter(|r| r.1).count();
    let rejected_fraction = truncated as f64 / (2 * n_samples) as f64;
    if rejected_fraction > MAX_TRUNCATED {
        return Err(WrmError::InfiniteCluster(format!(
            "window too small: {:.1}% of replicates reach the boundary of the enlarged window",
            100.0 * rejected_fraction
        )));
    }
    let tests = test_fns
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let l: MeanSe = lhs.iter().map(|r| r.0[k]).collect();
            let r: MeanSe = rhs.iter().map(|r| r.0[k]).collect();
            GnzTest::from_stats(f.name(), &l, &r)
        })
        .collect();
    Ok(GnzReport {
        tests,
        rejected_fraction,
        threshold: Some(bonferroni_z(GNZ_ALPHA, test_fns.len())),
        max_deviation: None,
        checks: None,
    })
}

struct Ctx<'a> {
    model: &'a ContinuumModel,
    window: &'a Window,
    plus: &'a Window,
    fns: &'a [TestFn],
}

impl Ctx<'_> {
    fn near_boundary<'p>(&self, mut pts: impl Iterator<Item = &'p [f64]>) -> bool {
        let reach = self.model.reach();
        pts.any(|p| self.plus.depth(p) < reach)
    }

    fn uniform_point(&self, rng: &mut Rng) -> Point {
        let mut v = Vec::with_capacity(2);
        self.window.sample_point(rng, &mut v);
        [v[0], v[1]]
    }

    fn lhs(&self, rng: &mut Rng, env_seed: u64) -> Result<Replicate> {
        match self.model {
            ContinuumModel::FreePoisson { beta } => {
                let env = sample_ppp(self.window, *beta, env_seed)?;
                Ok((vec![env.len() as f64; self.fns.len()], false))
            }
            ContinuumModel::Pgg { beta, r, w } => {
                let env = sample_ppp(self.plus, *beta, env_seed)?;
                let g = geometric_graph(&env, Rule::Gilbert(*r))?;
                let mut spins = vec![0; env.len()];
                let mut truncated = false;
                for comp in clusters(&g).clusters {
                    if !comp.iter().any(|&i| self.window.contains(env.point(i))) {
                        continue;
                    }
                    truncated |= self.near_boundary(comp.iter().map(|&i| env.point(i)));
                    for (&v, s) in comp.iter().zip(sample_spins(rng, &g, &comp, w)?) {
                        spins[v] = s;
                    }
                }
                let mut vals = vec![0.0; self.fns.len()];
                for i in (0..env.len()).filter(|&i| self.window.contains(env.point(i))) {
                    for (v, f) in vals.iter_mut().zip(self.fns) {
                        *v += pgg_value(*f, spins[i], g.degree(i));
                    }
                }
                Ok((vals, truncated))
            }
            ContinuumModel::Pbm { params, law, .. } => {
                let env = sample_marked_ppp(self.plus, params.beta, law, env_seed)?;
                let g = geometric_graph(&env, Rule::Boolean(params.a))?;
                let mut vals = vec![0.0; self.fns.len()];
                let mut truncated = false;
                for comp in clusters(&g).clusters {
                    let inside: Vec<usize> = comp.iter().copied().filter(|&i| self.window.contains(env.point(i))).collect();
                    if inside.is_empty() {
                        continue;
                    }
                    truncated |= self.near_boundary(comp.iter().map(|&i| env.point(i)));
                    let region = region_of(&env, &comp)?;
                    let sigma = sample_rejection(rng, &region, params.lambda_plus, params.lambda_minus, params.a)?;
                    for &i in &inside {
                        let others: Vec<usize> = comp.iter().copied().filter(|&j| j != i).collect();
                        let x = [env.point(i)[0], env.point(i)[1]];
                        let m = env.mark(i).expect("marked");
                        for (v, f) in vals.iter_mut().zip(self.fns) {
                            *v += pbm_value(*f, &x, m, &sigma, &env, &others);
                        }
                    }
                }
                Ok((vals, truncated))
            }
        }
    }

    fn rhs(&self, rng: &mut Rng, env_seed: u64) -> Result<Replicate> {
        let area = self.window.volume();
        match self.model {
            ContinuumModel::FreePoisson { beta } => Ok((vec![area * beta; self.fns.len()], false)),
            ContinuumModel::Pgg { beta, r, w } => {
                let env = sample_ppp(self.plus, *beta, env_seed)?;
                let x = self.uniform_point(rng);
                let rule = Rule::Gilbert(*r);
                let cluster = cloud_cluster_at(&env, rule, &x, 0.0)?;
                let truncated = self.near_boundary(cluster.iter().map(|&i| env.point(i)));
                let mut local = env.select(&cluster);
                let k = local.len();
                local.push(&x, None)?;
                let g = geometric_graph(&local, rule)?;
                let inner: Vec<usize> = (0..k).collect();
                let spins = sample_spins(rng, &g, &inner, w)?;
                let ratio = z_enum(&inner, &g, w)? / z_enum(&(0..=k).collect::<Vec<_>>(), &g, w)?;
                let deg = cloud_neighbors(&env, rule, &x, 0.0).len();
                let mut vals = vec![0.0; self.fns.len()];
                for &s in &SPINS {
                    if !g.neighbors(k).iter().all(|&j| compatible(spins[j], s)) {
                        continue;
                    }
                    let rho = beta * w.weight(s) * ratio;
                    for (v, f) in vals.iter_mut().zip(self.fns) {
                        *v += area * rho * pgg_value(*f, s, deg);
                    }
                }
                Ok((vals, truncated))
            }
            ContinuumModel::Pbm {
                params,
                law,
                include_chi,
            } => {
                let env = sample_marked_ppp(self.plus, params.beta, law, env_seed)?;
                let x = self.uniform_point(rng);
                let m = law.sample(rng);
                let mut ball = crate::cluster::DiskRegion::new(2);
                ball.push(&x, m)?;
                let sigma_x = poisson_pair(rng, &ball, params.lambda_plus, params.lambda_minus);
                let cluster = cloud_cluster_at(&env, Rule::Boolean(params.a), &x, m)?;
                let truncated = self.near_boundary(cluster.iter().map(|&i| env.point(i)));
                let sigma_c = if cluster.is_empty() {
                    WRPointConfig::default()
                } else {
                    let region = region_of(&env, &cluster)?;
                    sample_rejection(rng, &region, params.lambda_plus, params.lambda_minus, params.a)?
                };
                let xbar = MarkedPoint::new(x, m, sigma_x)?;
                let setup = PapSetup::new(&xbar, &env, &sigma_c, params, *include_chi)?;
                let mut vals = vec![0.0; self.fns.len()];
                if setup.prefactor > 0.0 {
                    let rho = setup.prefactor * setup.draw(rng)?;
                    if rho > 0.0 {
                        let combined = sigma_c.joined(&xbar.coloring);
                        for (v, f) in vals.iter_mut().zip(self.fns) {
                            *v = area * rho * pbm_value(*f, &x, m, &combined, &env, &cluster);
                        }
                    }
                }
                Ok((vals, truncated))
            }
        }
    }
}

fn pgg_value(f: TestFn, s: Spin, deg: usize) -> f64 {
    match f {
        TestFn::Count => 1.0,
        TestFn::Plus => f64::from(u8::from(s == 1)),
        TestFn::ZeroDegree => f64::from(u8::from(s == 0)) * deg as f64,
        TestFn::PlusTouching => f64::from(u8::from(s == 1 && deg >= 1)),
        _ => 0.0,
    }
}

/// `others` indexes the environment balls other than `B_m(x)` that may meet it.
fn pbm_value(f: TestFn, x: &Point, m: f64, sigma: &WRPointConfig, env: &MarkedPointCloud, others: &[usize]) -> f64 {
    let in_ball = |p: &Point| dist(p, x) <= m;
    match f {
        TestFn::Count => 1.0,
        TestFn::Mark => m,
        TestFn::PlusInBall => sigma.plus.iter().filter(|p| in_ball(p)).count() as f64,
        TestFn::Overlap => sigma
            .plus
            .iter()
            .chain(&sigma.minus)
            .filter(|p| {
                in_ball(p)
                    && others
                        .iter()
                        .any(|&j| dist(*p, env.point(j)) <= env.mark(j).expect("marked"))
            })
            .count() as f64,
        _ => 0.0,
    }
}

/// Exact WRM spins on `vertices` of `g` by rejection from iid spins with
/// probabilities proportional to `w`.
fn sample_spins(rng: &mut Rng, g: &AdjacencyGraph, vertices: &[usize], w: &SpinWeights) -> Result<Vec<Spin>> {
    let (pp, _, p0) = w.normalized();
    let pos: HashMap<usize, usize> = vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut spins = vec![0; vertices.len()];
    for _ in 0..REJECTION_BUDGET {
        for s in spins.iter_mut() {
            let u: f64 = rng.random();
            *s = if u < pp {
                1
            } else if u < pp + p0 {
                0
            } else {
                -1
            };
        }
        let ok = vertices.iter().enumerate().all(|(k, &v)| {
            g.neighbors(v)
                .iter()
                .filter_map(|j| pos.get(j))
                .all(|&l| compatible(spins[k], spins[l]))
        });
        if ok {
            return Ok(spins);
        }
    }
    Err(WrmError::Budget(format!(
        "spin rejection sampler on {} vertices exceeded {REJECTION_BUDGET} proposals",
        vertices.len()
    )))
}

/// Default GNZ window `[0, 10]^2`.
pub fn default_window() -> Window {
    Window::cube(2, 10.0).expect("valid window")
}
