//! Additive-noise baselines for feature perturbation.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// δ used for every analytic-Gaussian run.
pub const GAUSSIAN_DELTA: f64 = 1e-10;

const BISECTION_CAP: usize = 400;
const SIGMA_RTOL: f64 = 1e-9;

/// Laplace mechanism over the whole vector. The budget is split evenly across
/// the `d` coordinates, each with sensitivity `β − α`, so every coordinate
/// gets noise of scale `d(β − α)/ε`.
pub fn laplace_perturb<R: Rng + ?Sized>(
    x: &[f64],
    epsilon: f64,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Vec<f64> {
    let scale = x.len() as f64 * (beta - alpha) / epsilon;
    if scale == 0.0 {
        return x.to_vec();
    }
    x.iter()
        .map(|&v| {
            let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
            v - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
        })
        .collect()
}

/// Standard normal CDF.
#[inline]
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Privacy loss δ achieved by Gaussian noise of scale `sigma` at `epsilon`
/// for L2 sensitivity `sensitivity` (the exact analytic-Gaussian curve).
pub fn gaussian_delta(sigma: f64, epsilon: f64, sensitivity: f64) -> f64 {
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    phi(a - b) - epsilon.exp() * phi(-a - b)
}

/// Smallest σ for which Gaussian noise gives (ε, δ)-DP at the given L2
/// sensitivity, located by bisection on the exact privacy curve.
pub fn gaussian_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Argument(format!(
            "epsilon must be finite and > 0, got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::Argument(format!(
            "sensitivity must be > 0, got {sensitivity}"
        )));
    }
    let holds = |s: f64| gaussian_delta(s, epsilon, sensitivity) <= delta;

    let mut hi = sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon;
    let mut lo = hi;
    let mut steps = 0;
    while !holds(hi) {
        hi *= 2.0;
        steps += 1;
        if steps > BISECTION_CAP {
            return Err(Error::Numeric(
                "could not bracket the Gaussian scale from above".into(),
            ));
        }
    }
    while holds(lo) {
        lo *= 0.5;
        steps += 1;
        if steps > BISECTION_CAP || lo == 0.0 {
            return Err(Error::Numeric(
                "could not bracket the Gaussian scale from below".into(),
            ));
        }
    }
    for _ in 0..BISECTION_CAP {
        if hi - lo <= SIGMA_RTOL * hi {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric(format!(
        "Gaussian scale bisection did not converge for epsilon={epsilon}, delta={delta}"
    )))
}

/// Analytic Gaussian mechanism over `[α, β]^d`, using the worst-case L2
/// sensitivity `sqrt(d)·(β − α)` of the box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticGaussian {
    pub sigma: f64,
}

impl AnalyticGaussian {
    pub fn new(epsilon: f64, delta: f64, alpha: f64, beta: f64, d: usize) -> Result<Self> {
        let sensitivity = (d as f64).sqrt() * (beta - alpha);
        Ok(Self {
            sigma: gaussian_sigma(epsilon, delta, sensitivity)?,
        })
    }

    pub fn perturb<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        x.iter()
            .map(|&v| v + self.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}
