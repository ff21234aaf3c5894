use serde::{Deserialize, Serialize};

use super::{
    check_rates, check_region, compatible_with, feasible_continuum, poisson_on_difference,
    sample_rejection, AREA_TOL,
};
use crate::cluster::{region_area, DiskRegion};
use crate::error::{Result, WrmError};
use crate::rng::par_replicas;
use crate::stats::MeanSe;

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0, samples: 0 }
    }

    pub(crate) fn from_stats(s: &MeanSe) -> Self {
        Self {
            value: s.mean(),
            se: s.se(),
            samples: s.count(),
        }
    }

    /// Product of independent estimates, first-order error propagation.
    pub fn times(&self, other: &Estimate) -> Estimate {
        let value = self.value * other.value;
        let se = (self.se * other.value).hypot(self.value * other.se);
        Estimate {
            value,
            se,
            samples: self.samples.max(other.samples),
        }
    }

    pub fn scaled(&self, c: f64) -> Estimate {
        Estimate {
            value: self.value * c,
            se: self.se * c.abs(),
            samples: self.samples,
        }
    }
}

fn check_nested(small: &DiskRegion, big: &DiskRegion) -> Result<()> {
    for i in 0..small.len() {
        let (c, r) = (small.center(i), small.radius(i));
        let inside = (0..big.len()).any(|j| {
            let cj = big.center(j);
            (c[0] - cj[0]).hypot(c[1] - cj[1]) + r <= big.radius(j) + 1e-12
        });
        if !inside {
            return Err(WrmError::param(format!("small-region disk {i} is not contained in the big region")));
        }
    }
    Ok(())
}

/// Unbiased estimate of `Z_big / Z_small`: the probability that `σ ~ μ_small`
/// joined with independent Poisson layers `τ` on `big ∖ small` is feasible.
pub fn z_ratio(
    small: &DiskRegion,
    big: &DiskRegion,
    lambda_plus: f64,
    lambda_minus: f64,
    a: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_region(small)?;
    check_region(big)?;
    check_rates(lambda_plus, lambda_minus, a)?;
    check_nested(small, big)?;
    if samples == 0 {
        return Err(WrmError::param("z_ratio needs at least one sample"));
    }
    if small == big {
        return Ok(Estimate::exact(1.0));
    }
    let hits = par_replicas(samples, seed, |rng, _| {
        let sigma = sample_rejection(rng, small, lambda_plus, lambda_minus, a)?;
        let tau = super::WRPointConfig {
            plus: poisson_on_difference(rng, big, small, lambda_plus),
            minus: poisson_on_difference(rng, big, small, lambda_minus),
        };
        let ok = feasible_continuum(&tau, a) && compatible_with(&sigma, &tau, a);
        Ok(f64::from(u8::from(ok)))
    })?;
    let stats: MeanSe = hits.into_iter().collect();
    if stats.mean() == 0.0 {
        return Err(WrmError::Degenerate(format!(
            "no feasible joined sample among {samples}; the added region is too large"
        )));
    }
    Ok(Estimate::from_stats(&stats))
}

/// Unbiased estimate of `Z_small / Z_big` as
/// `exp((λ+ + λ-)|big ∖ small|) · μ_big(no point in big ∖ small)`.
pub fn z_ratio_inverse(
    small: &DiskRegion,
    big: &DiskRegion,
    lambda_plus: f64,
    lambda_minus: f64,
    a: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_region(small)?;
    check_region(big)?;
    check_rates(lambda_plus, lambda_minus, a)?;
    check_nested(small, big)?;
    if samples == 0 {
        return Err(WrmError::param("z_ratio_inverse needs at least one sample"));
    }
    if small == big {
        return Ok(Estimate::exact(1.0));
    }
    let extra = (region_area(big, AREA_TOL)? - region_area(small, AREA_TOL)?).max(0.0);
    let weight = ((lambda_plus + lambda_minus) * extra).exp();
    let hits = par_replicas(samples, seed, |rng, _| {
        let sigma = sample_rejection(rng, big, lambda_plus, lambda_minus, a)?;
        let inside = sigma.plus.iter().chain(&sigma.minus).all(|p| small.contains(p));
        Ok(if inside { weight } else { 0.0 })
    })?;
    let stats: MeanSe = hits.into_iter().collect();
    if stats.mean() == 0.0 {
        return Err(WrmError::Degenerate(format!(
            "no sample of {samples} avoided the added region"
        )));
    }
    Ok(Estimate::from_stats(&stats))
}
