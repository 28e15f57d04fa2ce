//! Non-private feature substitutes and the bootstrap interval.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::ldp::rng::stream_rng;
use crate::linalg::Matrix;

/// Where node features come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// The nodes' own features, collected under LDP.
    Private,
    /// All-one vectors.
    Ones,
    /// One-hot encoding of the (clipped) degree.
    Ohd,
    /// Uniform random features in `[0, 1]`.
    Rnd,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [Self::Private, Self::Ones, Self::Ohd, Self::Rnd];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Private => "private",
            Self::Ones => "ones",
            Self::Ohd => "ohd",
            Self::Rnd => "rnd",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown feature kind {s:?}; expected private, ones, ohd or rnd"
            ))
        })
    }
}

/// Builds `d`-dimensional substitute features that use no private data.
pub fn baseline_features(
    kind: FeatureKind,
    graph: &Graph,
    d: usize,
    seed: u64,
) -> Result<FeatureMatrix> {
    if d == 0 {
        return Err(Error::Argument(
            "feature dimension must be at least 1".into(),
        ));
    }
    let n = graph.num_nodes();
    let values = match kind {
        FeatureKind::Private => {
            return Err(Error::Argument(
                "private features are collected, not generated".into(),
            ))
        }
        FeatureKind::Ones => Matrix::filled(n, d, 1.0),
        FeatureKind::Ohd => {
            let mut m = Matrix::zeros(n, d);
            for v in 0..n {
                m[(v, graph.degree(v).min(d - 1))] = 1.0;
            }
            m
        }
        FeatureKind::Rnd => {
            let mut rng = stream_rng(seed, "baseline-features");
            let data = (0..n * d).map(|_| rng.random::<f64>()).collect();
            Matrix::from_vec(n, d, data)?
        }
    };
    FeatureMatrix::new(values, 0.0, 1.0)
}

/// Mean of `samples` and the half-width of the 95% percentile bootstrap
/// interval of the mean over `resamples` resamples.
pub fn bootstrap_ci(samples: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Argument(
            "bootstrap needs at least one sample".into(),
        ));
    }
    if resamples == 0 {
        return Err(Error::Argument(
            "bootstrap needs at least one resample".into(),
        ));
    }
    let n = samples.len();
    if samples.iter().all(|&x| x == samples[0]) {
        if n == 1 {
            log::warn!("single sample; confidence interval reported as zero width");
        }
        return Ok((samples[0], 0.0));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let lo = percentile(&means, 2.5);
    let hi = percentile(&means, 97.5);
    Ok((mean, (hi - lo) / 2.0))
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}
