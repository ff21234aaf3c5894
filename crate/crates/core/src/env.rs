//! Random environments (Bernoulli site fields, Poisson clouds, marked Poisson
//! clouds) and the deterministic half-lattice geometries used by the
//! discontinuity experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WrmError};
use crate::rng::rng_from_seed;

/// Integer lattice site. Length equals the lattice dimension.
pub type Site = Vec<i64>;

/// Axis-aligned integer box `lower..=upper`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    lower: Vec<i64>,
    upper: Vec<i64>,
}

impl LatticeBox {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(WrmError::param("lattice box needs dimension >= 1"));
        }
        if lower.len() != upper.len() {
            return Err(WrmError::param("lattice box corners differ in dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(WrmError::param("lattice box lower corner exceeds upper corner"));
        }
        Ok(Self { lower, upper })
    }

    /// `width x height` box with lower corner at the origin.
    pub fn rect(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(WrmError::param("rectangle sides must be positive"));
        }
        Self::new(vec![0, 0], vec![width as i64 - 1, height as i64 - 1])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    /// Side lengths (number of sites along each axis).
    pub fn sides(&self) -> Vec<usize> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l + 1) as usize)
            .collect()
    }

    pub fn num_sites(&self) -> usize {
        self.sides().iter().product()
    }

    pub fn contains(&self, site: &[i64]) -> bool {
        site.len() == self.dim()
            && site
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| l <= x && x <= u)
    }

    /// All sites in lexicographic order (first coordinate slowest).
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.num_sites());
        let mut cur = self.lower.clone();
        loop {
            out.push(cur.clone());
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < self.upper[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = self.lower[axis];
            }
        }
    }

    /// Smallest box containing every site; `None` for an empty iterator.
    pub fn bounding<'a>(sites: impl IntoIterator<Item = &'a Site>) -> Option<Self> {
        let mut it = sites.into_iter();
        let first = it.next()?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for s in it {
            for (i, &x) in s.iter().enumerate() {
                lower[i] = lower[i].min(x);
                upper[i] = upper[i].max(x);
            }
        }
        Some(Self { lower, upper })
    }
}

/// Occupied sites of a lattice box. Sites not in `occupied` are in state `u`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeEnv {
    bbox: LatticeBox,
    occupied: BTreeSet<Site>,
}

impl LatticeEnv {
    pub fn new(bbox: LatticeBox, occupied: impl IntoIterator<Item = Site>) -> Result<Self> {
        let occupied: BTreeSet<Site> = occupied.into_iter().collect();
        if let Some(bad) = occupied.iter().find(|s| !bbox.contains(s)) {
            return Err(WrmError::Geometry(format!("site {bad:?} outside the box")));
        }
        Ok(Self { bbox, occupied })
    }

    /// Environment on the bounding box of `sites`.
    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let occupied: BTreeSet<Site> = sites.into_iter().collect();
        let bbox = LatticeBox::bounding(&occupied)
            .ok_or_else(|| WrmError::param("cannot infer a box from an empty site set"))?;
        Ok(Self { bbox, occupied })
    }

    /// Every site of the box occupied.
    pub fn full(bbox: LatticeBox) -> Self {
        let occupied = bbox.sites().into_iter().collect();
        Self { bbox, occupied }
    }

    pub fn bbox(&self) -> &LatticeBox {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn occupied(&self) -> &BTreeSet<Site> {
        &self.occupied
    }

    /// Occupied sites in their canonical (sorted) order; this order defines
    /// vertex indices of graphs built from the environment.
    pub fn sites(&self) -> Vec<Site> {
        self.occupied.iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn is_occupied(&self, site: &[i64]) -> bool {
        self.occupied.contains(site)
    }

    /// Copy with `site` removed (no-op if absent).
    pub fn without(&self, site: &[i64]) -> Self {
        let mut occupied = self.occupied.clone();
        occupied.remove(site);
        Self {
            bbox: self.bbox.clone(),
            occupied,
        }
    }

    /// Copy with `site` added; the box grows if needed.
    pub fn with(&self, site: &[i64]) -> Self {
        let mut occupied = self.occupied.clone();
        occupied.insert(site.to_vec());
        let bbox = if self.bbox.contains(site) {
            self.bbox.clone()
        } else {
            LatticeBox::bounding(occupied.iter().chain(std::iter::once(&self.bbox.lower)).chain(
                std::iter::once(&self.bbox.upper),
            ))
            .expect("non-empty")
        };
        Self { bbox, occupied }
    }
}

/// Axis-aligned real window `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(WrmError::param("window corners must share a positive dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite()) {
            return Err(WrmError::param("window must have positive finite volume"));
        }
        Ok(Self { lower, upper })
    }

    /// Square `[0, side]^d`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![side; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Window enlarged by `margin` on every side.
    pub fn grown(&self, margin: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|l| l - margin).collect(),
            upper: self.upper.iter().map(|u| u + margin).collect(),
        }
    }

    /// Euclidean distance from `x` (inside the window) to the window boundary.
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| (v - l).min(u - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn sample_point(&self, rng: &mut impl rand::Rng, out: &mut Vec<f64>) {
        for (l, u) in self.lower.iter().zip(&self.upper) {
            out.push(l + (u - l) * rng.random::<f64>());
        }
    }
}

/// Finite point cloud in R^d with optional radius marks, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPointCloud {
    dim: usize,
    coords: Vec<f64>,
    marks: Option<Vec<f64>>,
}

impl MarkedPointCloud {
    pub fn empty(dim: usize, marked: bool) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            marks: marked.then(Vec::new),
        }
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut cloud = Self::empty(dim, false);
        for p in points {
            cloud.push(p, None)?;
        }
        Ok(cloud)
    }

    pub fn from_marked_points(dim: usize, points: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut cloud = Self::empty(dim, true);
        for (p, m) in points {
            cloud.push(p, Some(*m))?;
        }
        Ok(cloud)
    }

    pub fn push(&mut self, x: &[f64], mark: Option<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(WrmError::param(format!(
                "point of dimension {} pushed into a {}-dimensional cloud",
                x.len(),
                self.dim
            )));
        }
        match (&mut self.marks, mark) {
            (Some(marks), Some(m)) if m >= 0.0 && m.is_finite() => marks.push(m),
            (Some(_), Some(m)) => return Err(WrmError::param(format!("invalid radius mark {m}"))),
            (None, None) => {}
            (Some(_), None) => return Err(WrmError::param("marked cloud needs a radius mark")),
            (None, Some(_)) => return Err(WrmError::param("unmarked cloud cannot take a mark")),
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_marked(&self) -> bool {
        self.marks.is_some()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mark(&self, i: usize) -> Option<f64> {
        self.marks.as_ref().map(|m| m[i])
    }

    pub fn marks(&self) -> Option<&[f64]> {
        self.marks.as_deref()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Sub-cloud of the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::empty(self.dim, self.is_marked());
        for &i in indices {
            out.coords.extend_from_slice(self.point(i));
            if let (Some(dst), Some(src)) = (&mut out.marks, &self.marks) {
                dst.push(src[i]);
            }
        }
        out
    }
}

/// Radius mark law of a Boolean-model environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RadiusLaw {
    /// Every radius equals the given value.
    PointMass(f64),
    /// Uniform on `(low, high]`.
    Uniform { low: f64, high: f64 },
}

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RadiusLaw::PointMass(r) if r >= 0.0 && r.is_finite() => Ok(()),
            RadiusLaw::Uniform { low, high } if low >= 0.0 && high > low && high.is_finite() => {
                Ok(())
            }
            other => Err(WrmError::param(format!("invalid radius law {other}"))),
        }
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        match *self {
            RadiusLaw::PointMass(r) => r,
            // 1 - U lies in (0, 1], giving the half-open interval (low, high].
            RadiusLaw::Uniform { low, high } => low + (high - low) * (1.0 - rng.random::<f64>()),
        }
    }

    pub fn max_radius(&self) -> f64 {
        match *self {
            RadiusLaw::PointMass(r) => r,
            RadiusLaw::Uniform { high, .. } => high,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RadiusLaw::PointMass(r) => r,
            RadiusLaw::Uniform { low, high } => 0.5 * (low + high),
        }
    }
}

impl fmt::Display for RadiusLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusLaw::PointMass(r) => write!(f, "point({r})"),
            RadiusLaw::Uniform { low, high } => write!(f, "uniform({low},{high})"),
        }
    }
}

impl FromStr for RadiusLaw {
    type Err = WrmError;

    /// Accepts `point(r)` (alias `fixed(r)`) and `uniform(low,high)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| WrmError::param(format!("unsupported radius law `{s}`")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| WrmError::param(format!("unsupported radius law `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| WrmError::param(format!("bad radius law arguments in `{s}`")))?;
        let law = match (name.trim(), nums.as_slice()) {
            ("point" | "fixed", [r]) => RadiusLaw::PointMass(*r),
            ("uniform", [low, high]) => RadiusLaw::Uniform {
                low: *low,
                high: *high,
            },
            _ => return Err(WrmError::param(format!("unsupported radius law `{s}`"))),
        };
        law.validate()?;
        Ok(law)
    }
}

/// Scalar parameters shared by all three environment models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub beta: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_zero: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub a: f64,
    pub eps: f64,
    pub radius_law: RadiusLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            q: 0.3,
            beta: 0.1,
            p_plus: 0.3,
            p_minus: 0.3,
            p_zero: 0.4,
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            a: 0.5,
            eps: 0.1,
            radius_law: RadiusLaw::Uniform {
                low: 0.0,
                high: 0.5,
            },
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(WrmError::param(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(WrmError::param(format!("{name} = {v} must be positive")))
            }
        };
        open_unit("q", self.q)?;
        open_unit("p_plus", self.p_plus)?;
        open_unit("p_minus", self.p_minus)?;
        open_unit("p_zero", self.p_zero)?;
        let sum = self.p_plus + self.p_minus + self.p_zero;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WrmError::param(format!(
                "p_plus + p_minus + p_zero must equal 1 (got {sum})"
            )));
        }
        positive("beta", self.beta)?;
        positive("lambda_plus", self.lambda_plus)?;
        positive("lambda_minus", self.lambda_minus)?;
        positive("a", self.a)?;
        positive("eps", self.eps)?;
        self.radius_law.validate()
    }
}

/// Each site of `bbox` occupied independently with probability `q`.
pub fn sample_bernoulli_field(bbox: &LatticeBox, q: f64, seed: u64) -> Result<LatticeEnv> {
    if !(0.0..=1.0).contains(&q) {
        return Err(WrmError::param(format!("q = {q} must lie in [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let occupied = bbox
        .sites()
        .into_iter()
        .filter(|_| rng.random::<f64>() < q)
        .collect();
    Ok(LatticeEnv {
        bbox: bbox.clone(),
        occupied,
    })
}

fn poisson_count(mean: f64, rng: &mut impl rand::Rng) -> Result<usize> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| WrmError::param(format!("poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as usize)
}

/// Homogeneous Poisson process of intensity `beta` on `window`.
pub fn sample_ppp(window: &Window, beta: f64, seed: u64) -> Result<MarkedPointCloud> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(WrmError::param(format!("intensity {beta} must be >= 0")));
    }
    let mut rng = rng_from_seed(seed);
    let n = poisson_count(beta * window.volume(), &mut rng)?;
    let mut coords = Vec::with_capacity(n * window.dim());
    for _ in 0..n {
        window.sample_point(&mut rng, &mut coords);
    }
    Ok(MarkedPointCloud {
        dim: window.dim(),
        coords,
        marks: None,
    })
}

/// Poisson process with iid radius marks drawn from `law`.
pub fn sample_marked_ppp(
    window: &Window,
    beta: f64,
    law: &RadiusLaw,
    seed: u64,
) -> Result<MarkedPointCloud> {
    law.validate()?;
    let mut cloud = sample_ppp(window, beta, seed)?;
    // Marks come from a separate stream so positions match `sample_ppp`.
    let mut rng = crate::rng::stream(seed, 1);
    cloud.marks = Some((0..cloud.len()).map(|_| law.sample(&mut rng)).collect());
    Ok(cloud)
}

/// Truncated half-lattices around the origin and `2n e_2` (d = 2).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentGeometry {
    pub n: usize,
    /// Sites with `x1 in [-n, -1]`, `x2 in [-n, 3n]`.
    pub lambda_minus: Vec<Site>,
    /// Mirror image of `lambda_minus` under `x1 -> -x1`.
    pub lambda_plus: Vec<Site>,
    /// `lambda_minus ∪ lambda_plus ∪ {o}`.
    pub zeta: Vec<Site>,
    /// `zeta ∪ {z_n}`.
    pub zeta_prime: Vec<Site>,
    pub o: Site,
    pub z_n: Site,
    pub x_o: Site,
    pub y_o: Site,
    pub x_n: Site,
    pub y_n: Site,
}

impl ExperimentGeometry {
    /// `lambda_minus ∪ lambda_plus`.
    pub fn halves(&self) -> Vec<Site> {
        let mut s: Vec<Site> = self.lambda_minus.iter().chain(&self.lambda_plus).cloned().collect();
        s.sort();
        s
    }

    /// Column count and row count of the `lambda_minus` rectangle.
    pub fn half_shape(&self) -> (usize, usize) {
        (self.n, 4 * self.n + 1)
    }
}

pub fn build_half_lattice(n: usize) -> Result<ExperimentGeometry> {
    if n < 1 {
        return Err(WrmError::param("half-lattice size n must be >= 1"));
    }
    let n_i = n as i64;
    let mut lambda_minus = Vec::with_capacity(n * (4 * n + 1));
    for x1 in -n_i..=-1 {
        for x2 in -n_i..=3 * n_i {
            lambda_minus.push(vec![x1, x2]);
        }
    }
    let mut lambda_plus: Vec<Site> = lambda_minus.iter().map(|s| vec![-s[0], s[1]]).collect();
    lambda_plus.sort();
    let o = vec![0, 0];
    let z_n = vec![0, 2 * n_i];
    let mut zeta: Vec<Site> = lambda_minus.iter().chain(&lambda_plus).cloned().collect();
    zeta.push(o.clone());
    zeta.sort();
    let mut zeta_prime = zeta.clone();
    zeta_prime.push(z_n.clone());
    zeta_prime.sort();
    Ok(ExperimentGeometry {
        n,
        lambda_minus,
        lambda_plus,
        zeta,
        zeta_prime,
        o,
        z_n,
        x_o: vec![-1, 0],
        y_o: vec![1, 0],
        x_n: vec![-1, 2 * n_i],
        y_n: vec![1, 2 * n_i],
    })
}

/// `k` points equally spaced on the circle of radius `eps / 4`; the origin
/// alone when `k == 1`.
pub fn default_kappa(k: usize, eps: f64) -> Vec<[f64; 2]> {
    if k == 1 {
        return vec![[0.0, 0.0]];
    }
    let r = eps / 4.0;
    (0..k)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// Vertex-thickened, rescaled lattice `⋃_x (scale·x + kappa)` with
/// `scale = 1 - eps`. Points of site `i` occupy indices `i*k .. (i+1)*k`.
///
/// Under the unit Gilbert rule the copies of one site form a clique and two
/// copies are adjacent across sites iff the sites are lattice neighbours;
/// the construction is checked and rejected when that fails.
pub fn build_thickened_lattice(
    sites: &[Site],
    kappa: &[[f64; 2]],
    scale: f64,
) -> Result<MarkedPointCloud> {
    let eps = 1.0 - scale;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(WrmError::param(format!(
            "scale {scale} must equal 1 - eps with 0 < eps < 1/2"
        )));
    }
    if kappa.is_empty() {
        return Err(WrmError::param("kappa must contain at least one point"));
    }
    if let Some(p) = kappa.iter().find(|p| p[0].hypot(p[1]) >= eps / 2.0) {
        return Err(WrmError::Geometry(format!(
            "kappa point {p:?} not inside the open ball of radius eps/2 = {}",
            eps / 2.0
        )));
    }
    if sites.iter().any(|s| s.len() != 2) {
        return Err(WrmError::UnsupportedDimension(sites[0].len()));
    }
    let k = kappa.len();
    let mut cloud = MarkedPointCloud::empty(2, false);
    for s in sites {
        for p in kappa {
            cloud.push(&[scale * s[0] as f64 + p[0], scale * s[1] as f64 + p[1]], None)?;
        }
    }
    // Check the adjacency guarantee pairwise.
    for i in 0..sites.len() {
        for j in i..sites.len() {
            let lattice_adjacent = i == j || l1(&sites[i], &sites[j]) == 1;
            for a in 0..k {
                for b in 0..k {
                    if i == j && a == b {
                        continue;
                    }
                    let d = dist(cloud.point(i * k + a), cloud.point(j * k + b));
                    if (d < 1.0) != lattice_adjacent {
                        return Err(WrmError::Geometry(format!(
                            "thickened copies of {:?} and {:?} at distance {d} break the lattice adjacency; use a smaller eps",
                            sites[i], sites[j]
                        )));
                    }
                }
            }
        }
    }
    Ok(cloud)
}

/// Boolean-model realisation of the half-lattice geometry: sites scaled by
/// `2(a - eps)`, every radius mark equal to `eps`. `primed` adds `z_n`.
pub fn build_scaled_lattice_pbm(
    geometry: &ExperimentGeometry,
    a: f64,
    eps: f64,
    primed: bool,
) -> Result<MarkedPointCloud> {
    if !(eps > 0.0 && eps < a) {
        return Err(WrmError::param(format!("need 0 < eps < a (eps = {eps}, a = {a})")));
    }
    let sites = if primed {
        &geometry.zeta_prime
    } else {
        &geometry.zeta
    };
    Ok(scaled_sites_pbm(sites, a, eps))
}

/// Sites scaled by `2(a - eps)` with radius marks `eps`.
pub fn scaled_sites_pbm(sites: &[Site], a: f64, eps: f64) -> MarkedPointCloud {
    let scale = 2.0 * (a - eps);
    let mut cloud = MarkedPointCloud::empty(sites.first().map_or(2, |s| s.len()), true);
    for s in sites {
        let x: Vec<f64> = s.iter().map(|&c| scale * c as f64).collect();
        cloud.push(&x, Some(eps)).expect("consistent dimension");
    }
    cloud
}

/// Largest `eps / a` for which diagonal lattice neighbours of the scaled
/// construction never interact: `2√2(a-eps) - 2eps >= 2a`.
pub fn max_pbm_eps_ratio() -> f64 {
    (std::f64::consts::SQRT_2 - 1.0) / (std::f64::consts::SQRT_2 + 1.0)
}

pub(crate) fn l1(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box2(w: i64, h: i64) -> LatticeBox {
        LatticeBox::new(vec![0, 0], vec![w - 1, h - 1]).unwrap()
    }

    #[test]
    fn bernoulli_degenerate_probabilities() {
        let b = box2(4, 3);
        assert!(sample_bernoulli_field(&b, 0.0, 1).unwrap().is_empty());
        assert_eq!(sample_bernoulli_field(&b, 1.0, 1).unwrap().len(), 12);
        assert!(sample_bernoulli_field(&b, 1.5, 1).is_err());
        assert!(sample_bernoulli_field(&b, -0.1, 1).is_err());
    }

    #[test]
    fn bernoulli_counts_within_binomial_band() {
        // 400 sites, q = 0.3: mean 120, sd sqrt(400 * 0.3 * 0.7).
        let b = box2(20, 20);
        let sd = (400.0_f64 * 0.3 * 0.7).sqrt();
        for seed in 0..100 {
            let n = sample_bernoulli_field(&b, 0.3, seed).unwrap().len() as f64;
            assert!((n - 120.0).abs() <= 4.0 * sd, "seed {seed}: {n}");
        }
    }

    #[test]
    fn ppp_mean_count_and_determinism() {
        let w = Window::cube(2, 1.0).unwrap();
        assert!(sample_ppp(&w, 0.0, 3).unwrap().is_empty());
        assert!(sample_ppp(&w, -1.0, 3).is_err());
        let total: usize = (0..10_000).map(|s| sample_ppp(&w, 2.0, s).unwrap().len()).sum();
        let mean = total as f64 / 1e4;
        assert!((mean - 2.0).abs() <= 3.0 * (2.0_f64 / 1e4).sqrt(), "mean {mean}");
        assert_eq!(sample_ppp(&w, 2.0, 9).unwrap(), sample_ppp(&w, 2.0, 9).unwrap());
    }

    #[test]
    fn marked_ppp_laws() {
        let w = Window::cube(2, 10.0).unwrap();
        assert!(sample_marked_ppp(&w, 0.0, &RadiusLaw::PointMass(0.3), 1).unwrap().is_empty());
        let c = sample_marked_ppp(&w, 1.0, &RadiusLaw::PointMass(0.3), 1).unwrap();
        assert!(c.marks().unwrap().iter().all(|&m| m == 0.3));
        // Positions agree with the unmarked sampler.
        let plain = sample_ppp(&w, 1.0, 1).unwrap();
        assert_eq!(plain.len(), c.len());
        assert_eq!(plain.point(0), c.point(0));

        let uni = RadiusLaw::Uniform { low: 0.0, high: 1.0 };
        let big = Window::cube(2, 100.0).unwrap();
        let c = sample_marked_ppp(&big, 1.0, &uni, 5).unwrap();
        let marks = c.marks().unwrap();
        let mean = marks.iter().sum::<f64>() / marks.len() as f64;
        assert!(marks.len() > 9_000);
        assert!((mean - 0.5).abs() < 0.02, "mean radius {mean}");
        assert!(marks.iter().all(|&m| m > 0.0 && m <= 1.0));
    }

    #[test]
    fn radius_law_parsing() {
        assert_eq!("uniform(0, 0.5)".parse::<RadiusLaw>().unwrap(), RadiusLaw::Uniform { low: 0.0, high: 0.5 });
        assert_eq!("point(0.2)".parse::<RadiusLaw>().unwrap(), RadiusLaw::PointMass(0.2));
        assert!("gamma(1,2)".parse::<RadiusLaw>().is_err());
        assert!("uniform(1,0)".parse::<RadiusLaw>().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams {
            p_plus: 0.4,
            ..ModelParams::default()
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("p_plus + p_minus + p_zero"), "{err}");
    }

    #[test]
    fn half_lattice_sizes() {
        let g = build_half_lattice(1).unwrap();
        assert_eq!(g.lambda_minus.len(), 5);
        assert_eq!(g.zeta.len(), 11);
        for n in 1..=8 {
            let g = build_half_lattice(n).unwrap();
            assert_eq!(g.lambda_minus.len(), n * (4 * n + 1));
            let extra: Vec<_> = g.zeta_prime.iter().filter(|s| !g.zeta.contains(s)).collect();
            assert_eq!(extra, vec![&vec![0, 2 * n as i64]]);
            let mut mirrored: Vec<Site> = g.lambda_minus.iter().map(|s| vec![-s[0], s[1]]).collect();
            mirrored.sort();
            assert_eq!(mirrored, g.lambda_plus);
            for pivot in [&g.o, &g.z_n] {
                let nbrs: Vec<_> = g.zeta_prime.iter().filter(|s| l1(s, pivot) == 1).collect();
                assert_eq!(nbrs.len(), 2, "n = {n}");
                assert!(nbrs.iter().any(|s| g.lambda_minus.contains(s)));
                assert!(nbrs.iter().any(|s| g.lambda_plus.contains(s)));
            }
            assert!(g.lambda_minus.contains(&g.x_o) && g.lambda_minus.contains(&g.x_n));
            assert!(g.lambda_plus.contains(&g.y_o) && g.lambda_plus.contains(&g.y_n));
        }
        assert!(build_half_lattice(0).is_err());
    }

    #[test]
    fn thickened_lattice_checks_kappa() {
        let sites = vec![vec![0, 0], vec![1, 0]];
        let k1 = build_thickened_lattice(&sites, &[[0.0, 0.0]], 0.9).unwrap();
        assert_eq!(k1.len(), 2);
        assert_eq!(k1.point(1), &[0.9, 0.0]);
        assert!(matches!(
            build_thickened_lattice(&sites, &[[0.06, 0.0]], 0.9),
            Err(WrmError::Geometry(_))
        ));
        // eps too large for the diagonal guarantee.
        let diag = vec![vec![0, 0], vec![1, 1]];
        assert!(build_thickened_lattice(&diag, &[[0.0, 0.0]], 0.6).is_err());
        assert!(build_thickened_lattice(&diag, &default_kappa(3, 0.1), 0.9).is_ok());
    }

    #[test]
    fn scaled_pbm_arithmetic() {
        let g = build_half_lattice(1).unwrap();
        assert!(build_scaled_lattice_pbm(&g, 1.0, 1.0, false).is_err());
        let c = build_scaled_lattice_pbm(&g, 1.0, 0.1, true).unwrap();
        assert_eq!(c.len(), 12);
        assert!(c.marks().unwrap().iter().all(|&m| m == 0.1));
        // Diagonal neighbours never interact on the eps grid used in tests.
        for &eps in &[0.01, 0.05, 0.1, 0.15] {
            let a = 1.0;
            assert!(2.0 * std::f64::consts::SQRT_2 * (a - eps) > 2.0 * a + 2.0 * eps);
            assert!(eps / a < max_pbm_eps_ratio());
        }
    }
}
