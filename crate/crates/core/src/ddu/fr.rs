//! Moment-based ambiguity for the utility's expected load and the box it
//! induces around the factory's net purchase.

use serde::{Deserialize, Serialize};

use super::special::normal_quantile;
use super::DduError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrMomentModel {
    /// Historical mean of the expected load per hour.
    pub mu: Vec<f64>,
    /// Historical (population) standard deviation per hour.
    pub sigma: Vec<f64>,
    pub drift_k: f64,
    pub drift_b: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon: f64,
    pub samples_per_hour: usize,
}

/// Population mean and standard deviation (divides by the sample count).
pub fn estimate_moments(samples: &[f64]) -> Result<(f64, f64), DduError> {
    if samples.is_empty() {
        return Err(DduError::EmptySample);
    }
    // Constant data: skip the arithmetic so sigma is exactly 0, not a few ulps.
    if samples.iter().all(|&x| x == samples[0]) {
        return Ok((samples[0], 0.0));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}

/// Cantelli lower bound on `P(X <= mu0 + offset)` for any law with mean
/// `mu0` and standard deviation `sigma0`: `offset^2 / (sigma0^2 + offset^2)`.
///
/// A degenerate law (`sigma0 = 0`) gives 1.
pub fn cantelli_bound(offset: f64, sigma0: f64) -> Result<f64, DduError> {
    if offset < 0.0 || offset.is_nan() {
        return Err(DduError::Domain(format!("cantelli offset {offset} is negative")));
    }
    if sigma0 < 0.0 || sigma0.is_nan() {
        return Err(DduError::Domain(format!("cantelli sigma {sigma0} is negative")));
    }
    if sigma0 == 0.0 {
        return Ok(1.0);
    }
    Ok(offset * offset / (sigma0 * sigma0 + offset * offset))
}

/// Largest `mu1 + z * sigma1` over `{|mu1| <= a, mu1^2 + sigma1^2 <= r^2, sigma1 >= 0}`.
pub fn worst_moment_shift(a: f64, r: f64, z: f64) -> f64 {
    let a = a.max(0.0);
    let r = r.max(0.0);
    if z <= 0.0 {
        return a.min(r);
    }
    let norm = (1.0 + z * z).sqrt();
    if a >= r / norm {
        r * norm
    } else {
        a + z * (r * r - a * a).sqrt()
    }
}

impl FrMomentModel {
    pub fn horizon(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<(), DduError> {
        if self.mu.len() != self.sigma.len() {
            return Err(DduError::Invalid("mu and sigma lengths differ".into()));
        }
        if let Some(s) = self.sigma.iter().find(|s| **s < 0.0 || s.is_nan()) {
            return Err(DduError::Invalid(format!("negative sigma {s}")));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(DduError::Invalid("gamma1 and gamma2 must be nonnegative".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DduError::Invalid(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        Ok(())
    }

    /// Mean shift caused by the factory's own purchase `K * net + B`.
    pub fn drift(&self, net_load_proxy: f64) -> f64 {
        self.drift_k * net_load_proxy + self.drift_b
    }

    /// Quantile level used for the box. Each tail gets `epsilon / 2`; the
    /// Cantelli offset `sigma0 * sqrt((1 - e) / e)` for `e = epsilon / 2`
    /// then yields exactly `1 - epsilon / 2`.
    pub fn quantile_level(&self, hour: usize) -> Result<f64, DduError> {
        let e = 0.5 * self.epsilon;
        let sigma0 = self.sigma[hour];
        let offset = sigma0 * ((1.0 - e) / e).sqrt();
        if sigma0 == 0.0 {
            return Ok(1.0 - e);
        }
        cantelli_bound(offset, sigma0)
    }

    /// Half width of the box at a given quantile level.
    pub fn delta_at_level(&self, hour: usize, net_load_proxy: f64, q: f64) -> Result<f64, DduError> {
        let z = normal_quantile(q)?;
        let s = self.sigma[hour];
        let a = (self.gamma1 * s).sqrt();
        let r = (self.gamma2 * s).sqrt();
        let width = self.drift(net_load_proxy).abs() + worst_moment_shift(a, r, z);
        Ok(width.max(0.0))
    }
}

/// Half width `dE^h` of the box `mu_h - dE <= E_ex <= mu_h + dE`.
pub fn fr_delta(model: &FrMomentModel, hour: usize, net_load_proxy: f64) -> Result<f64, DduError> {
    let q = model.quantile_level(hour)?;
    model.delta_at_level(hour, net_load_proxy, q)
}
