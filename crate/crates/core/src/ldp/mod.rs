//! Local randomizers and their server-side estimators.
//!
//! * [`multibit`]: the sampled multi-bit encoder, its unbiased rectifier and
//!   the 2-bit packed wire form.
//! * [`baselines`]: Laplace and analytic-Gaussian feature perturbation.
//! * [`rr`]: generalized randomized response for labels.
//! * [`store`]: node-side encode-once cache and the per-node budget ledger.
//! * [`collect`]: whole-graph feature and label collection.

pub mod baselines;
pub mod collect;
pub mod multibit;
pub mod rng;
pub mod rr;
pub mod store;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use baselines::{gaussian_sigma, laplace_perturb, AnalyticGaussian, GAUSSIAN_DELTA};
pub use collect::{collect_features, collect_labels, FeatureMechanism};
pub use multibit::{
    multibit_encode, multibit_rectify, optimal_m, outcome_probability, pack_row,
    rectifier_variance, unpack_row, EncodedMatrix,
};
pub use rr::{
    pack_labels, randomized_response, rr_transition, unpack_labels, TransitionMatrix,
    UNLABELED_BYTE,
};
pub use store::{BudgetLedger, EncodingStore, NodeBudget};

/// A privacy budget: a positive real, or infinity for "no randomization".
///
/// Parses and prints infinity as `inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub const INFINITY: Epsilon = Epsilon(f64::INFINITY);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::Argument(format!(
                "privacy budget must be positive, got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "∞" => Ok(Self::INFINITY),
            t => t
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("bad privacy budget {s:?}: {e}")))
                .and_then(Self::new),
        }
    }
}

/// Parameters shared by the multi-bit encoder and rectifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanismParams {
    pub epsilon: f64,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
}

impl MechanismParams {
    pub fn new(epsilon: f64, m: usize, alpha: f64, beta: f64, d: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Argument(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        if m < 1 || m > d {
            return Err(Error::Argument(format!("m = {m} must lie in [1, {d}]")));
        }
        if !(alpha < beta) {
            return Err(Error::Argument(format!("empty range [{alpha}, {beta}]")));
        }
        Ok(Self {
            epsilon,
            m,
            alpha,
            beta,
            d,
        })
    }

    /// Parameters with the variance-optimal sampling size.
    pub fn optimal(epsilon: f64, alpha: f64, beta: f64, d: usize) -> Result<Self> {
        Self::new(epsilon, optimal_m(epsilon, d), alpha, beta, d)
    }

    /// `tanh(ε / 2m)`, equal to `(e^{ε/m} - 1) / (e^{ε/m} + 1)` but finite for
    /// every ε.
    #[inline]
    pub(crate) fn contrast(&self) -> f64 {
        (self.epsilon / (2.0 * self.m as f64)).tanh()
    }
}
