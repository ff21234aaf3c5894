//! Running mean / standard error accumulation.

use serde::{Deserialize, Serialize};

/// Mean and standard error of a stream of iid observations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanSe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two accumulators (Chan et al. parallel update).
    pub fn merge(&mut self, other: &MeanSe) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn se(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanSe {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanSe::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// `|a - b| / sqrt(se_a^2 + se_b^2)`; infinite when both errors vanish and the
/// values differ, zero when they coincide.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let diff = (a - b).abs();
    let se = se_a.hypot(se_b);
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Two-sided z threshold at family-wise level `alpha` over `m` comparisons.
pub fn bonferroni_z(alpha: f64, m: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - alpha / (2.0 * m.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let acc: MeanSe = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((acc.mean() - mean).abs() < 1e-14);
        assert!((acc.variance() - var).abs() < 1e-12);

        let mut left: MeanSe = xs[..2].iter().copied().collect();
        let right: MeanSe = xs[2..].iter().copied().collect();
        left.merge(&right);
        assert!((left.mean() - mean).abs() < 1e-14);
        assert!((left.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn bonferroni_single_test_is_three_sigma() {
        assert!((bonferroni_z(0.0027, 1) - 3.0).abs() < 1e-3);
        assert!(bonferroni_z(0.0027, 4) > 3.0);
    }
}
