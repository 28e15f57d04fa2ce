//! Whole-graph collection: every node randomizes its own data once, the
//! server receives the reports and applies the matching estimator.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::rng::node_rng;
use super::{
    laplace_perturb, randomized_response, AnalyticGaussian, BudgetLedger, EncodedMatrix,
    EncodingStore, Epsilon, MechanismParams, GAUSSIAN_DELTA,
};
use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::linalg::Matrix;

pub const FEATURE_TAG: &str = "features";
pub const LABEL_TAG: &str = "labels";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMechanism {
    /// Multi-bit encoder with the variance-optimal sampling size.
    MultiBit,
    /// Multi-bit encoder with every coordinate sampled.
    OneBit,
    Laplace,
    AnalyticGaussian,
}

impl FeatureMechanism {
    pub const ALL: [FeatureMechanism; 4] = [
        Self::MultiBit,
        Self::OneBit,
        Self::Laplace,
        Self::AnalyticGaussian,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Self::MultiBit => "mb",
            Self::OneBit => "1b",
            Self::Laplace => "lp",
            Self::AnalyticGaussian => "ag",
        }
    }
}

impl fmt::Display for FeatureMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FeatureMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown mechanism {s:?}; expected mb, 1b, lp or ag"
            ))
        })
    }
}

/// What the server holds after feature collection.
#[derive(Clone, Debug)]
pub struct CollectedFeatures {
    /// Server-side estimate of every node's features.
    pub estimate: Matrix,
    /// Raw encoded reports, for the multi-bit family at finite budget.
    pub encoded: Option<EncodedMatrix>,
}

/// Collects every node's feature vector under `mechanism` at budget
/// `epsilon`. An infinite budget skips randomization and returns the clean
/// matrix.
pub fn collect_features(
    features: &FeatureMatrix,
    mechanism: FeatureMechanism,
    epsilon: Epsilon,
    seed: u64,
    ledger: &mut BudgetLedger,
) -> Result<CollectedFeatures> {
    let n = features.num_nodes();
    let d = features.dim();
    let (alpha, beta) = (features.alpha, features.beta);
    let randomized = !epsilon.is_infinite();
    for v in 0..n {
        ledger.record_feature(v, epsilon, randomized)?;
    }
    if !randomized {
        return Ok(CollectedFeatures {
            estimate: features.values.clone(),
            encoded: None,
        });
    }
    let eps = epsilon.value();
    let x = &features.values;
    match mechanism {
        FeatureMechanism::MultiBit | FeatureMechanism::OneBit => {
            let params = if mechanism == FeatureMechanism::OneBit {
                MechanismParams::new(eps, d, alpha, beta, d)?
            } else {
                MechanismParams::optimal(eps, alpha, beta, d)?
            };
            let store = EncodingStore::new(n);
            let rows = (0..n)
                .into_par_iter()
                .map(|v| {
                    store
                        .encode_once(v, x.row(v), &params, || node_rng(seed, FEATURE_TAG, v))
                        .map(<[i8]>::to_vec)
                })
                .collect::<Result<Vec<_>>>()?;
            let encoded = EncodedMatrix::from_rows(params, &rows)?;
            Ok(CollectedFeatures {
                estimate: encoded.rectify(),
                encoded: Some(encoded),
            })
        }
        FeatureMechanism::Laplace => {
            check_domain(features)?;
            let rows = (0..n)
                .into_par_iter()
                .map(|v| {
                    laplace_perturb(
                        x.row(v),
                        eps,
                        alpha,
                        beta,
                        &mut node_rng(seed, FEATURE_TAG, v),
                    )
                })
                .collect::<Vec<_>>();
            Ok(CollectedFeatures {
                estimate: Matrix::from_rows(&rows)?,
                encoded: None,
            })
        }
        FeatureMechanism::AnalyticGaussian => {
            check_domain(features)?;
            let mech = AnalyticGaussian::new(eps, GAUSSIAN_DELTA, alpha, beta, d)?;
            let rows = (0..n)
                .into_par_iter()
                .map(|v| mech.perturb(x.row(v), &mut node_rng(seed, FEATURE_TAG, v)))
                .collect::<Vec<_>>();
            Ok(CollectedFeatures {
                estimate: Matrix::from_rows(&rows)?,
                encoded: None,
            })
        }
    }
}

fn check_domain(features: &FeatureMatrix) -> Result<()> {
    let d = features.dim().max(1);
    match features
        .values
        .as_slice()
        .iter()
        .position(|&v| !(v >= features.alpha && v <= features.beta))
    {
        None => Ok(()),
        Some(i) => Err(Error::Domain {
            index: i % d,
            value: features.values.as_slice()[i],
            alpha: features.alpha,
            beta: features.beta,
        }),
    }
}

/// Collects perturbed labels from `nodes`. Every other entry of the result is
/// `None`, as are nodes in `nodes` that hold no label.
pub fn collect_labels(
    clean: &[Option<usize>],
    num_classes: usize,
    nodes: &[usize],
    epsilon: Epsilon,
    seed: u64,
    ledger: &mut BudgetLedger,
) -> Result<Vec<Option<usize>>> {
    let randomized = !epsilon.is_infinite();
    let mut out = vec![None; clean.len()];
    for &v in nodes {
        let y = *clean
            .get(v)
            .ok_or_else(|| Error::Argument(format!("node {v} outside 0..{}", clean.len())))?;
        let Some(y) = y else { continue };
        ledger.record_label(v, epsilon, randomized)?;
        out[v] = Some(if randomized {
            randomized_response(
                y,
                epsilon.value(),
                num_classes,
                &mut node_rng(seed, LABEL_TAG, v),
            )?
        } else {
            y
        });
    }
    Ok(out)
}
