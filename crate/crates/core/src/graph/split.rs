use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.25,
            test: 0.25,
        }
    }
}

/// Disjoint train/validation/test node sets covering every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl DataSplit {
    /// Train and validation nodes, the ones whose labels the server collects.
    pub fn labeled(&self) -> impl Iterator<Item = usize> + '_ {
        self.train.iter().chain(&self.val).copied()
    }
}

/// Random node split. Validation and test sizes are floored; the remainder
/// goes to train. Each id list is sorted ascending.
pub fn split_nodes(num_nodes: usize, ratios: SplitRatios, seed: u64) -> Result<DataSplit> {
    let SplitRatios { train, val, test } = ratios;
    if [train, val, test].iter().any(|r| !(0.0..=1.0).contains(r))
        || (train + val + test - 1.0).abs() > 1e-9
    {
        return Err(Error::Argument(format!(
            "split ratios ({train}, {val}, {test}) must be in [0, 1] and sum to 1"
        )));
    }
    let n_val = (num_nodes as f64 * val).floor() as usize;
    let n_test = (num_nodes as f64 * test).floor() as usize;

    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut test_ids = order.split_off(num_nodes - n_test);
    let mut val_ids = order.split_off(order.len() - n_val);
    let mut train_ids = order;
    train_ids.sort_unstable();
    val_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(DataSplit {
        train: train_ids,
        val: val_ids,
        test: test_ids,
        seed,
    })
}
