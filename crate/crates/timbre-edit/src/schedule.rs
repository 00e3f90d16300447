//! Discrete EDM noise grid, fraction lookup and the DDIM view of the same grid.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parameters of a Karras rho-warped grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleParams {
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self { steps: 30, sigma_min: 0.002, sigma_max: 80.0, rho: 7.0 }
    }
}

impl ScheduleParams {
    pub fn build(&self) -> Result<Schedule> {
        Schedule::new(self.steps, self.sigma_min, self.sigma_max, self.rho)
    }
}

/// Noise levels `sigma_0 < ... < sigma_T`.
///
/// Index 0 is the least noisy grid point. The clean state (sigma = 0) lies
/// outside the array; samplers land on it with their final step.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    sigmas: Vec<f64>,
    params: ScheduleParams,
}

impl Schedule {
    /// Karras grid `sigma_i = (smax^(1/rho) + (1 - i/T)(smin^(1/rho) - smax^(1/rho)))^rho`.
    pub fn new(steps: usize, sigma_min: f64, sigma_max: f64, rho: f64) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
            return Err(invalid(format!("need 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("rho must be positive, got {rho}")));
        }
        let lo = sigma_min.powf(1.0 / rho);
        let hi = sigma_max.powf(1.0 / rho);
        let n = steps as f64;
        let mut sigmas: Vec<f64> = (0..=steps).map(|i| (hi + (1.0 - i as f64 / n) * (lo - hi)).powf(rho)).collect();
        sigmas[0] = sigma_min;
        sigmas[steps] = sigma_max;
        if sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid is not strictly increasing at this resolution"));
        }
        Ok(Self { sigmas, params: ScheduleParams { steps, sigma_min, sigma_max, rho } })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    /// Number of intervals `T`; the grid has `T + 1` points.
    pub fn steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas[self.steps()]
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    /// `argmin_t |sigma_t - f * sigma_max|`, ties going to the larger `t`.
    pub fn step_for_fraction(&self, f: f64) -> Result<usize> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(invalid(format!("fraction must lie in (0, 1], got {f}")));
        }
        let target = f * self.sigma_max();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (t, s) in self.sigmas.iter().enumerate() {
            let d = (s - target).abs();
            if d <= best_d {
                best = t;
                best_d = d;
            }
        }
        Ok(best)
    }

    pub fn to_ddim(&self) -> DdimCoefficients {
        DdimCoefficients::from_sigmas(&self.sigmas)
    }
}

/// `alpha_t = 1 / (1 + sigma_t^2)` for every grid point, with `1 - alpha_t`
/// kept separately so small noise levels survive the round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct DdimCoefficients {
    alphas: Vec<f64>,
    one_minus: Vec<f64>,
}

impl DdimCoefficients {
    pub fn from_sigmas(sigmas: &[f64]) -> Self {
        Self {
            alphas: sigmas.iter().map(|s| alpha_of(*s)).collect(),
            one_minus: sigmas.iter().map(|s| s * s / (1.0 + s * s)).collect(),
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t]
    }

    pub fn one_minus_alpha(&self, t: usize) -> f64 {
        self.one_minus[t]
    }

    /// Inverse map `sqrt((1 - alpha) / alpha)`.
    pub fn sigma(&self, t: usize) -> f64 {
        (self.one_minus[t] / self.alphas[t]).sqrt()
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

pub fn alpha_of(sigma: f64) -> f64 {
    1.0 / (1.0 + sigma * sigma)
}

/// `sqrt(1/alpha - 1)`; loses relative precision as alpha approaches 1.
pub fn sigma_of(alpha: f64) -> f64 {
    (1.0 / alpha - 1.0).sqrt()
}
