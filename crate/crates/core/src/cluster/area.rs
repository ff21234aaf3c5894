//! Lebesgue measure of unions of balls in d = 1 (exact) and d = 2 (adaptive
//! quadrature of the chord-length function).

use serde::{Deserialize, Serialize};

use super::UnionFind;
use crate::env::MarkedPointCloud;
use crate::error::{Result, WrmError};

/// Finite union of closed balls `B_r(c)` in R^d, `d ∈ {1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskRegion {
    dim: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
}

impl DiskRegion {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            centers: Vec::new(),
            radii: Vec::new(),
        }
    }

    pub fn push(&mut self, center: &[f64], radius: f64) -> Result<()> {
        if center.len() != self.dim {
            return Err(WrmError::param("disk center dimension mismatch"));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(WrmError::param(format!("disk radius {radius} must be >= 0")));
        }
        self.centers.extend_from_slice(center);
        self.radii.push(radius);
        Ok(())
    }

    /// Balls `B_{m_i + grow}(x_i)` of a marked cloud.
    pub fn from_cloud(cloud: &MarkedPointCloud, grow: f64) -> Result<Self> {
        let marks = cloud
            .marks()
            .ok_or_else(|| WrmError::RuleMismatch("disk region needs a marked cloud".into()))?;
        let mut r = Self::new(cloud.dim());
        for (i, m) in marks.iter().enumerate() {
            r.push(cloud.point(i), m + grow)?;
        }
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    /// Whether `x` lies in some ball (closed).
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.len()).any(|i| crate::env::dist2(self.center(i), x) <= self.radii[i] * self.radii[i])
    }

    /// Axis-aligned bounding box `(lower, upper)`; `None` when empty.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (d, c) in self.center(i).iter().enumerate() {
                lo[d] = lo[d].min(c - self.radii[i]);
                hi[d] = hi[d].max(c + self.radii[i]);
            }
        }
        Some((lo, hi))
    }

    fn disks2(&self) -> Vec<Disk> {
        (0..self.len())
            .filter(|&i| self.radii[i] > 0.0)
            .map(|i| Disk {
                x: self.centers[2 * i],
                y: self.centers[2 * i + 1],
                r: self.radii[i],
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Disk {
    x: f64,
    y: f64,
    r: f64,
}

impl Disk {
    fn overlaps(&self, o: &Disk) -> bool {
        (self.x - o.x).hypot(self.y - o.y) < self.r + o.r
    }

    /// Half chord at abscissa `x`, if the vertical line meets the interior.
    fn half_chord(&self, x: f64) -> Option<f64> {
        let dx = x - self.x;
        let h2 = self.r * self.r - dx * dx;
        (h2 > 0.0).then(|| h2.sqrt())
    }
}

/// Area of the intersection of two disks of radii `r1`, `r2` at distance `d`.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return std::f64::consts::PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

/// Measure of the union of the region's balls, to relative accuracy `tol`.
pub fn region_area(region: &DiskRegion, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    match region.dim() {
        1 => Ok(union_length(region, None)),
        2 => {
            let disks = region.disks2();
            let mut total = 0.0;
            for comp in overlap_components(&disks) {
                if let [i] = comp[..] {
                    total += std::f64::consts::PI * disks[i].r * disks[i].r;
                    continue;
                }
                let ds: Vec<Disk> = comp.iter().map(|&i| disks[i]).collect();
                total += chord_integral(&ds, None, tol)?;
            }
            Ok(total)
        }
        d => Err(WrmError::UnsupportedDimension(d)),
    }
}

/// `|B_m(x) ∩ BM(cloud)|` for a marked cloud.
pub fn overlap_area(x: &[f64], m: f64, cloud: &MarkedPointCloud, tol: f64) -> Result<f64> {
    let region = DiskRegion::from_cloud(cloud, 0.0)?;
    clipped_area(x, m, &region, tol)
}

/// `|B_m(x) ∩ ⋃ region|`.
pub fn clipped_area(x: &[f64], m: f64, region: &DiskRegion, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if x.len() != region.dim() {
        return Err(WrmError::param("clip center dimension mismatch"));
    }
    if m <= 0.0 || region.is_empty() {
        return Ok(0.0);
    }
    match region.dim() {
        1 => Ok(union_length(region, Some((x[0] - m, x[0] + m)))),
        2 => {
            let clip = Disk { x: x[0], y: x[1], r: m };
            let disks: Vec<Disk> = region.disks2().into_iter().filter(|d| d.overlaps(&clip)).collect();
            if disks.is_empty() {
                return Ok(0.0);
            }
            if disks.len() == 1 {
                let d = disks[0];
                return Ok(lens_area(m, d.r, (d.x - clip.x).hypot(d.y - clip.y)));
            }
            chord_integral(&disks, Some(clip), tol)
        }
        d => Err(WrmError::UnsupportedDimension(d)),
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(WrmError::param(format!("area tolerance {tol} must lie in (0, 1)")))
    }
}

fn union_length(region: &DiskRegion, clip: Option<(f64, f64)>) -> f64 {
    let mut iv: Vec<(f64, f64)> = (0..region.len())
        .filter_map(|i| {
            let (mut lo, mut hi) = (region.center(i)[0] - region.radius(i), region.center(i)[0] + region.radius(i));
            if let Some((cl, ch)) = clip {
                lo = lo.max(cl);
                hi = hi.min(ch);
            }
            (hi > lo).then_some((lo, hi))
        })
        .collect();
    merged_length(&mut iv)
}

fn merged_length(iv: &mut [(f64, f64)]) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &(lo, hi) in iv.iter() {
        match cur {
            Some((cl, ch)) if lo <= ch => cur = Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                total += ch - cl;
                cur = Some((lo, hi));
            }
            None => cur = Some((lo, hi)),
        }
    }
    if let Some((cl, ch)) = cur {
        total += ch - cl;
    }
    total
}

fn overlap_components(disks: &[Disk]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(disks.len());
    for i in 0..disks.len() {
        for j in i + 1..disks.len() {
            if disks[i].overlaps(&disks[j]) {
                uf.union(i, j);
            }
        }
    }
    uf.groups()
}

/// x-coordinates where the boundaries of two disks cross.
fn crossing_abscissae(a: &Disk, b: &Disk, out: &mut Vec<f64>) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let d = dx.hypot(dy);
    if d == 0.0 || d >= a.r + b.r || d <= (a.r - b.r).abs() {
        return;
    }
    let l = (a.r * a.r - b.r * b.r + d * d) / (2.0 * d);
    let h = (a.r * a.r - l * l).max(0.0).sqrt();
    let mx = a.x + l * dx / d;
    out.push(mx + h * dy / d);
    out.push(mx - h * dy / d);
}

/// Length of `⋃ chords(x) ∩ clip_chord(x)`.
fn chord_length(disks: &[Disk], clip: Option<&Disk>, x: f64, buf: &mut Vec<(f64, f64)>) -> f64 {
    let window = match clip {
        Some(c) => match c.half_chord(x) {
            Some(h) => Some((c.y - h, c.y + h)),
            None => return 0.0,
        },
        None => None,
    };
    buf.clear();
    for d in disks {
        if let Some(h) = d.half_chord(x) {
            let (mut lo, mut hi) = (d.y - h, d.y + h);
            if let Some((wl, wh)) = window {
                lo = lo.max(wl);
                hi = hi.min(wh);
            }
            if hi > lo {
                buf.push((lo, hi));
            }
        }
    }
    merged_length(buf)
}

/// Integrates the chord-length function between consecutive breakpoints.
/// Each panel uses `x = a + (b - a)(1 - cos θ)/2`, which removes the
/// square-root endpoint singularities, then adaptive Simpson in θ.
fn chord_integral(disks: &[Disk], clip: Option<Disk>, tol: f64) -> Result<f64> {
    let mut xs = Vec::new();
    for (i, d) in disks.iter().enumerate() {
        xs.push(d.x - d.r);
        xs.push(d.x + d.r);
        for e in &disks[i + 1..] {
            crossing_abscissae(d, e, &mut xs);
        }
        if let Some(c) = &clip {
            crossing_abscissae(d, c, &mut xs);
        }
    }
    let (lo, hi) = match &clip {
        Some(c) => (c.x - c.r, c.x + c.r),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    if let Some(c) = &clip {
        xs.push(c.x - c.r);
        xs.push(c.x + c.r);
    }
    let mut xs: Vec<f64> = xs.into_iter().map(|x| x.clamp(lo, hi)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));

    let clip_ref = clip.as_ref();
    let mut buf = Vec::new();
    let mut panels = Vec::with_capacity(xs.len());
    let mut crude = 0.0;
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mut f = |t: f64| {
            let x = a + 0.5 * (b - a) * (1.0 - t.cos());
            chord_length(disks, clip_ref, x, &mut buf) * 0.5 * (b - a) * t.sin()
        };
        let pi = std::f64::consts::PI;
        let (f0, fm, f1) = (f(0.0), f(0.5 * pi), f(pi));
        let s = pi / 6.0 * (f0 + 4.0 * fm + f1);
        crude += s.abs();
        panels.push((a, b, f0, fm, f1, s));
    }
    if crude == 0.0 {
        return Ok(0.0);
    }
    let eps = tol * crude * 0.1;
    let total_width: f64 = panels.iter().map(|p| p.1 - p.0).sum();
    let mut total = 0.0;
    for (a, b, f0, fm, f1, s) in panels {
        let mut f = |t: f64| {
            let x = a + 0.5 * (b - a) * (1.0 - t.cos());
            chord_length(disks, clip_ref, x, &mut buf) * 0.5 * (b - a) * t.sin()
        };
        let local_eps = (eps * (b - a) / total_width).max(f64::MIN_POSITIVE);
        total += adaptive_simpson(&mut f, 0.0, std::f64::consts::PI, f0, fm, f1, s, local_eps, 48)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Richardson: the Simpson error drops by 15/16 per halving. At least
    // three levels are forced so a lucky coarse match is not accepted.
    if delta.abs() <= 15.0 * eps && depth <= 45 {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(WrmError::Geometry(format!(
            "area quadrature failed to reach tolerance (residual {delta:e})"
        )));
    }
    Ok(adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn region(disks: &[([f64; 2], f64)]) -> DiskRegion {
        let mut r = DiskRegion::new(2);
        for (c, rad) in disks {
            r.push(c, *rad).unwrap();
        }
        r
    }

    #[test]
    fn single_and_disjoint_disks() {
        let a = region_area(&region(&[([0.0, 0.0], 1.0)]), 1e-9).unwrap();
        assert!((a - PI).abs() < 1e-9 * PI);
        let a = region_area(&region(&[([0.0, 0.0], 1.0), ([5.0, 0.0], 1.0)]), 1e-9).unwrap();
        assert!((a - 2.0 * PI).abs() < 1e-9 * 2.0 * PI);
    }

    #[test]
    fn two_disks_against_lens() {
        // Independent oracle: the two unit disks at distance 1 overlap in a
        // lens of area 2π/3 - √3/2.
        let lens = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((lens_area(1.0, 1.0, 1.0) - lens).abs() < 1e-14);
        let a = region_area(&region(&[([0.0, 0.0], 1.0), ([1.0, 0.0], 1.0)]), 1e-10).unwrap();
        assert!((a - (2.0 * PI - lens)).abs() < 1e-9);
        let c = clipped_area(&[0.0, 0.0], 1.0, &region(&[([1.0, 0.0], 1.0)]), 1e-10).unwrap();
        assert!((c - lens).abs() < 1e-12);
    }

    #[test]
    fn three_disk_inclusion_exclusion() {
        // Centres on a line, only neighbours overlap: inclusion-exclusion is
        // exact with two lenses.
        let r = region(&[([0.0, 0.0], 1.0), ([1.5, 0.0], 1.0), ([3.0, 0.0], 1.0)]);
        let expected = 3.0 * PI - 2.0 * lens_area(1.0, 1.0, 1.5);
        let a = region_area(&r, 1e-10).unwrap();
        assert!((a - expected).abs() < 1e-8, "{a} vs {expected}");
        // Clip against a union through the quadrature path.
        let c = clipped_area(&[1.5, 0.0], 1.0, &region(&[([0.0, 0.0], 1.0), ([3.0, 0.0], 1.0)]), 1e-10).unwrap();
        assert!((c - 2.0 * lens_area(1.0, 1.0, 1.5)).abs() < 1e-8);
    }

    #[test]
    fn nested_and_unequal() {
        let r = region(&[([0.0, 0.0], 2.0), ([0.5, 0.3], 0.7)]);
        assert!((region_area(&r, 1e-9).unwrap() - 4.0 * PI).abs() < 1e-8);
        let big = region(&[([0.0, 0.0], 3.0)]);
        let c = clipped_area(&[0.5, 0.5], 0.4, &big, 1e-9).unwrap();
        assert!((c - PI * 0.16).abs() < 1e-12);
        let u = region(&[([0.0, 0.0], 1.0), ([1.2, 0.4], 0.6)]);
        let exp = PI + PI * 0.36 - lens_area(1.0, 0.6, 1.2f64.hypot(0.4));
        assert!((region_area(&u, 1e-10).unwrap() - exp).abs() < 1e-8);
    }

    #[test]
    fn one_dimensional_intervals() {
        let mut r = DiskRegion::new(1);
        r.push(&[0.0], 1.0).unwrap();
        r.push(&[1.5], 1.0).unwrap();
        r.push(&[10.0], 0.5).unwrap();
        assert_eq!(region_area(&r, 1e-6).unwrap(), 3.5 + 1.0);
        assert_eq!(clipped_area(&[0.0], 1.0, &r, 1e-6).unwrap(), 2.0);
        let r3 = DiskRegion::new(3);
        assert!(matches!(region_area(&r3, 1e-6), Err(WrmError::UnsupportedDimension(3))));
    }

    #[test]
    fn empty_overlap() {
        let cloud = MarkedPointCloud::empty(2, true);
        assert_eq!(overlap_area(&[0.0, 0.0], 1.0, &cloud, 1e-6).unwrap(), 0.0);
    }
}
