//! Generalized randomized response over `c` classes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Byte marking an unlabeled node in the label wire form.
pub const UNLABELED_BYTE: u8 = 0xFF;

/// Probability of reporting the true class: `e^ε / (e^ε + c − 1)`.
pub fn keep_probability(epsilon: f64, num_classes: usize) -> f64 {
    1.0 / (1.0 + (num_classes as f64 - 1.0) * (-epsilon).exp())
}

/// Probability of reporting one specific wrong class: `1 / (e^ε + c − 1)`.
pub fn flip_probability(epsilon: f64, num_classes: usize) -> f64 {
    1.0 / (epsilon.exp() + num_classes as f64 - 1.0)
}

/// Reports `y` with the keep probability, otherwise a uniformly chosen other
/// class.
pub fn randomized_response<R: Rng + ?Sized>(
    y: usize,
    epsilon: f64,
    num_classes: usize,
    rng: &mut R,
) -> Result<usize> {
    if y >= num_classes {
        return Err(Error::Argument(format!(
            "label {y} outside 0..{num_classes}"
        )));
    }
    if num_classes == 1 || rng.random::<f64>() < keep_probability(epsilon, num_classes) {
        return Ok(y);
    }
    let r = rng.random_range(0..num_classes - 1);
    Ok(if r >= y { r + 1 } else { r })
}

/// Channel matrix of randomized response: entry `(i, j)` is the probability
/// of reporting `j` when the truth is `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    probs: Matrix,
    keep: f64,
    flip: f64,
}

pub fn rr_transition(epsilon: f64, num_classes: usize) -> TransitionMatrix {
    let keep = keep_probability(epsilon, num_classes);
    let flip = if num_classes == 1 {
        0.0
    } else {
        flip_probability(epsilon, num_classes)
    };
    let mut probs = Matrix::filled(num_classes, num_classes, flip);
    for i in 0..num_classes {
        probs.row_mut(i)[i] = keep;
    }
    TransitionMatrix { probs, keep, flip }
}

impl TransitionMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.rows()
    }

    pub fn keep(&self) -> f64 {
        self.keep
    }

    pub fn flip(&self) -> f64 {
        self.flip
    }

    /// Unbiased estimate of true class frequencies from observed ones.
    /// Estimates may fall outside `[0, 1]`.
    pub fn unbias_frequencies(&self, observed: &[f64]) -> Result<Vec<f64>> {
        if observed.len() != self.num_classes() {
            return Err(Error::Shape(format!(
                "{} frequencies for {} classes",
                observed.len(),
                self.num_classes()
            )));
        }
        let gap = self.keep - self.flip;
        if !(gap > 0.0) {
            return Err(Error::Numeric("channel carries no signal".into()));
        }
        Ok(observed.iter().map(|&f| (f - self.flip) / gap).collect())
    }
}

/// One byte per node: the class index, or [`UNLABELED_BYTE`].
pub fn pack_labels(labels: &[Option<usize>]) -> Result<Vec<u8>> {
    labels
        .iter()
        .map(|y| match *y {
            None => Ok(UNLABELED_BYTE),
            Some(y) if y < UNLABELED_BYTE as usize => Ok(y as u8),
            Some(y) => Err(Error::Schema(format!("label {y} does not fit in a byte"))),
        })
        .collect()
}

pub fn unpack_labels(bytes: &[u8], num_classes: usize) -> Result<Vec<Option<usize>>> {
    bytes
        .iter()
        .map(|&b| match b {
            UNLABELED_BYTE => Ok(None),
            b if (b as usize) < num_classes => Ok(Some(b as usize)),
            b => Err(Error::Schema(format!(
                "label byte {b} outside 0..{num_classes}"
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transition_examples() {
        let t = rr_transition(1.0, 2);
        let e = std::f64::consts::E;
        assert!((t.keep() - e / (e + 1.0)).abs() < 1e-15);
        assert!((t.keep() - 0.7311).abs() < 1e-4);
        assert!((t.flip() - 0.2689).abs() < 1e-4);

        let t = rr_transition(f64::INFINITY, 5);
        assert_eq!(t.matrix(), &Matrix::identity(5));

        let t = rr_transition(2.0, 10);
        for i in 0..10 {
            let s: f64 = t.matrix().row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn keep_rate_examples() {
        let t = rr_transition(2f64.ln(), 3);
        assert!((t.keep() - 0.5).abs() < 1e-15);
        assert!((t.flip() - 0.25).abs() < 1e-15);

        let t = rr_transition(1e-6, 2);
        assert!((t.keep() - 0.5).abs() < 1e-6);

        let e = std::f64::consts::E;
        let expected = e / (e + 6.0);
        assert!((expected - 0.3118).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let kept = (0..n)
            .filter(|_| randomized_response(4, 1.0, 7, &mut rng).unwrap() == 4)
            .count();
        assert!((kept as f64 / n as f64 - expected).abs() < 0.005);
        assert_eq!(
            randomized_response(4, f64::INFINITY, 7, &mut rng).unwrap(),
            4
        );
    }

    #[test]
    fn rows_sum_to_one_and_diagonal_dominates() {
        for eps in [1e-3, 0.5, 1.0, 3.0, 30.0] {
            for c in [2usize, 3, 7, 40] {
                let t = rr_transition(eps, c);
                for i in 0..c {
                    let row = t.matrix().row(i);
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for j in 0..c {
                        if j != i {
                            assert!(row[i] > row[j]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn likelihood_ratio_is_bounded() {
        for eps in [0.1, 1.0, 4.0] {
            let t = rr_transition(eps, 6);
            assert!((t.keep() / t.flip()).ln() <= eps + 1e-12);
        }
    }

    #[test]
    fn empirical_channel_matches_matrix() {
        let (eps, c, n) = (1.0, 4, 100_000);
        let t = rr_transition(eps, c);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = vec![0usize; c];
        for _ in 0..n {
            counts[randomized_response(2, eps, c, &mut rng).unwrap()] += 1;
        }
        for (j, &k) in counts.iter().enumerate() {
            let p = t.matrix().row(2)[j];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((k as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn frequency_estimate_is_unbiased() {
        let t = rr_transition(0.8, 3);
        let truth = [0.5, 0.3, 0.2];
        let observed: Vec<f64> = (0..3)
            .map(|j| (0..3).map(|i| truth[i] * t.matrix().row(i)[j]).sum())
            .collect();
        let est = t.unbias_frequencies(&observed).unwrap();
        for j in 0..3 {
            assert!((est[j] - truth[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn label_wire_round_trip() {
        let labels = vec![Some(0), None, Some(6), Some(3)];
        let bytes = pack_labels(&labels).unwrap();
        assert_eq!(bytes, vec![0, 0xFF, 6, 3]);
        assert_eq!(unpack_labels(&bytes, 7).unwrap(), labels);
        assert!(unpack_labels(&[7], 7).is_err());
        assert!(pack_labels(&[Some(300)]).is_err());
    }

    #[test]
    fn out_of_range_label_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(randomized_response(3, 1.0, 3, &mut rng).is_err());
    }
}
