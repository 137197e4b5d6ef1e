//! Diagonal Gaussians: the codec posterior, its standard-normal prior and the
//! pre-squash policy distribution.

use alloc::vec::Vec;

use crate::math;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: Vec<f64>,
    /// Always within `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Vec<f64>,
}

impl GaussianDist {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_std.len(), "mean and log_std lengths differ");
        let log_std = log_std.into_iter().map(clamp_log_std).collect();
        GaussianDist { mean, log_std }
    }

    /// Split a network head `[mean | raw_log_std]` into a distribution.
    pub fn from_head(head: &[f64]) -> Self {
        let d = head.len() / 2;
        Self::new(head[..d].to_vec(), head[d..2 * d].to_vec())
    }

    pub fn standard(dim: usize) -> Self {
        GaussianDist {
            mean: alloc::vec![0.0; dim],
            log_std: alloc::vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|&l| math::exp(l)).collect()
    }

    /// Reparameterized draw `mean + std * noise`.
    pub fn sample(&self, noise: &[f64]) -> Vec<f64> {
        assert_eq!(noise.len(), self.dim(), "noise length differs from distribution");
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(noise)
            .map(|((&m, &l), &e)| m + math::exp(l) * e)
            .collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(x)
            .map(|((&m, &l), &v)| {
                let z = (v - m) / math::exp(l);
                -0.5 * z * z - l - 0.5 * math::LN_2PI
            })
            .sum()
    }

    /// `KL(self || N(0, I))` in closed form.
    pub fn kl_to_standard(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &l)| kl_term(m, l))
            .sum()
    }
}

#[inline]
pub fn clamp_log_std(l: f64) -> f64 {
    l.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Gradient factor of the clamp: 1 inside the bounds, 0 where it saturates.
#[inline]
pub fn clamp_log_std_grad(raw: f64) -> f64 {
    if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
        1.0
    } else {
        0.0
    }
}

/// One coordinate of `KL(N(m, e^{2l}) || N(0, 1))`.
#[inline]
pub fn kl_term(mean: f64, log_std: f64) -> f64 {
    let var = math::exp(2.0 * log_std);
    0.5 * (mean * mean + var - 1.0 - 2.0 * log_std)
}

/// `(d kl / d mean, d kl / d log_std)` of [`kl_term`].
#[inline]
pub fn kl_term_grad(mean: f64, log_std: f64) -> (f64, f64) {
    (mean, math::exp(2.0 * log_std) - 1.0)
}
