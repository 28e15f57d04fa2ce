use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense node × dimension feature matrix with its declared value range.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub alpha: f64,
    pub beta: f64,
}

impl FeatureMatrix {
    pub fn new(values: Matrix, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha < beta) {
            return Err(Error::Argument(format!(
                "feature range [{alpha}, {beta}] is empty"
            )));
        }
        Ok(Self {
            values,
            alpha,
            beta,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// True when every entry lies in `[alpha, beta]`.
    pub fn within_range(&self) -> bool {
        self.values
            .as_slice()
            .iter()
            .all(|&x| x >= self.alpha && x <= self.beta)
    }
}

/// Per-column min-max scaling onto `[0, 1]`. Constant columns become zero.
pub fn normalize_features(features: &FeatureMatrix) -> FeatureMatrix {
    let x = &features.values;
    let (n, d) = (x.rows(), x.cols());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in 0..n {
        for (j, &v) in x.row(r).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        let src = x.row(r);
        for (j, dst) in out.row_mut(r).iter_mut().enumerate() {
            let span = hi[j] - lo[j];
            *dst = if span > 0.0 {
                ((src[j] - lo[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    FeatureMatrix {
        values: out,
        alpha: 0.0,
        beta: 1.0,
    }
}
