//! Planted-partition stochastic block model with class-conditional binary
//! features, used as a homophilous stand-in when no dataset is at hand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, FeatureMatrix, Graph, LabelStore};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Base firing rate of a feature that carries no class signal.
const FEATURE_BASE_RATE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub dim: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// 0 gives class-independent features, 1 the strongest separation.
    pub feature_signal: f64,
    pub seed: u64,
}

/// Nodes are split into `num_classes` contiguous, near-equal blocks. Two nodes
/// are linked with probability `p_in` inside a block and `p_out` across.
///
/// Feature `j` belongs to class `j % c`. It fires with probability
/// `ρ(1 + s(c-1))` for nodes of its own class and `ρ(1-s)` otherwise, so the
/// marginal rate stays at ρ = 0.1 whatever the signal `s`.
pub fn generate_sbm(params: &SbmParams) -> Result<Dataset> {
    let SbmParams {
        num_nodes: n,
        num_classes: c,
        dim,
        p_in,
        p_out,
        feature_signal,
        seed,
    } = *params;
    if c < 2 {
        return Err(Error::Argument("an SBM needs at least two classes".into()));
    }
    if !(p_in > p_out) {
        return Err(Error::Argument(format!(
            "p_in = {p_in} must exceed p_out = {p_out} for a homophilous graph"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(Error::Argument(
            "edge probabilities must lie in [0, 1]".into(),
        ));
    }
    if !(0.0..=1.0).contains(&feature_signal) {
        return Err(Error::Argument("feature_signal must lie in [0, 1]".into()));
    }

    let mut starts = Vec::with_capacity(c + 1);
    for k in 0..=c {
        starts.push(k * n / c);
    }
    let labels: Vec<Option<usize>> = (0..c)
        .flat_map(|k| std::iter::repeat_n(Some(k), starts[k + 1] - starts[k]))
        .collect();

    let mut edge_rng = ChaCha8Rng::seed_from_u64(seed);
    edge_rng.set_stream(1);
    let mut edges = Vec::new();
    for a in 0..c {
        for b in a..c {
            let (lo_a, size_a) = (starts[a], starts[a + 1] - starts[a]);
            let (lo_b, size_b) = (starts[b], starts[b + 1] - starts[b]);
            if a == b {
                let pairs = size_a * size_a.saturating_sub(1) / 2;
                for k in bernoulli_indices(pairs, p_in, &mut edge_rng) {
                    let (i, j) = triangle_pair(k);
                    edges.push((lo_a + i, lo_a + j));
                }
            } else {
                for k in bernoulli_indices(size_a * size_b, p_out, &mut edge_rng) {
                    edges.push((lo_a + k / size_b, lo_b + k % size_b));
                }
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;

    let mut feat_rng = ChaCha8Rng::seed_from_u64(seed);
    feat_rng.set_stream(2);
    let own = (FEATURE_BASE_RATE * (1.0 + feature_signal * (c as f64 - 1.0))).min(1.0);
    let other = FEATURE_BASE_RATE * (1.0 - feature_signal);
    let mut values = Matrix::zeros(n, dim);
    for (v, label) in labels.iter().enumerate() {
        let y = label.expect("generated nodes are labeled");
        for (j, x) in values.row_mut(v).iter_mut().enumerate() {
            let p = if j % c == y { own } else { other };
            *x = if feat_rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            };
        }
    }

    Ok(Dataset {
        graph,
        features: FeatureMatrix::new(values, 0.0, 1.0)?,
        labels: LabelStore::new(c, labels)?,
    })
}

/// Indices in `0..total` kept by independent Bernoulli(p) trials, drawn with
/// geometric skips so sparse blocks cost O(kept) rather than O(total).
fn bernoulli_indices(total: usize, p: f64, rng: &mut impl Rng) -> Vec<usize> {
    let mut out = Vec::new();
    if p <= 0.0 || total == 0 {
        return out;
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let log_q = (1.0 - p).ln();
    let mut k: usize = 0;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - k) as f64 {
            break;
        }
        k += skip as usize;
        out.push(k);
        k += 1;
        if k >= total {
            break;
        }
    }
    out
}

/// Maps a linear index onto the strict lower triangle: 0 → (1,0), 1 → (2,0),
/// 2 → (2,1), ...
fn triangle_pair(k: usize) -> (usize, usize) {
    let mut i = ((((8 * k + 1) as f64).sqrt() + 1.0) / 2.0).floor() as usize;
    while i * (i - 1) / 2 > k {
        i -= 1;
    }
    while (i + 1) * i / 2 <= k {
        i += 1;
    }
    (i, k - i * (i - 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, c: usize, p_in: f64, p_out: f64, seed: u64) -> SbmParams {
        SbmParams {
            num_nodes: n,
            num_classes: c,
            dim: 16,
            p_in,
            p_out,
            feature_signal: 0.5,
            seed,
        }
    }

    #[test]
    fn triangle_indexing_enumerates_each_pair_once() {
        let mut seen = Vec::new();
        for k in 0..45 {
            let (i, j) = triangle_pair(k);
            assert!(j < i && i < 10);
            seen.push((i, j));
        }
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 45);
    }

    #[test]
    fn no_cross_edges_without_p_out() {
        let ds = generate_sbm(&params(300, 3, 0.1, 0.0, 5)).unwrap();
        let y = ds.labels.clean();
        assert!(ds.graph.num_edges() > 0);
        for (u, v) in ds.graph.edges() {
            assert_eq!(y[u], y[v]);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let a = generate_sbm(&params(1000, 4, 0.02, 0.002, 7)).unwrap();
        let b = generate_sbm(&params(1000, 4, 0.02, 0.002, 7)).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.features.values, b.features.values);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn rejects_heterophily_and_single_class() {
        assert!(generate_sbm(&params(10, 2, 0.1, 0.1, 0)).is_err());
        assert!(generate_sbm(&params(10, 1, 0.2, 0.1, 0)).is_err());
    }

    #[test]
    fn intra_class_fraction_matches_expectation() {
        // Expected fraction from block sizes: p_in·E_in / (p_in·E_in + p_out·E_out).
        let (n, c, p_in, p_out) = (10_000usize, 4usize, 0.02, 0.002);
        let s = (n / c) as f64;
        let e_in = c as f64 * s * (s - 1.0) / 2.0;
        let e_out = (c * (c - 1) / 2) as f64 * s * s;
        let expected = p_in * e_in / (p_in * e_in + p_out * e_out);
        assert!((expected - 0.769).abs() < 1e-3);

        let ds = generate_sbm(&params(n, c, p_in, p_out, 11)).unwrap();
        let y = ds.labels.clean();
        let intra = ds.graph.edges().filter(|&(u, v)| y[u] == y[v]).count();
        let frac = intra as f64 / ds.graph.num_edges() as f64;
        assert!(
            (frac - expected).abs() < 0.01,
            "fraction {frac} vs {expected}"
        );
    }

    #[test]
    fn features_are_binary_with_stable_marginal() {
        let ds = generate_sbm(&SbmParams {
            dim: 40,
            ..params(2000, 4, 0.01, 0.001, 3)
        })
        .unwrap();
        let x = ds.features.values.as_slice();
        assert!(x.iter().all(|&v| v == 0.0 || v == 1.0));
        let rate = x.iter().sum::<f64>() / x.len() as f64;
        assert!((rate - FEATURE_BASE_RATE).abs() < 0.01);
    }
}
