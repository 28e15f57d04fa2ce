//! Graph datasets: the immutable CSR adjacency, node features, labels and
//! node splits, plus the text loader and the planted-partition generator.
//!
//! Everything here is immutable once built and may be shared freely across
//! threads.

mod features;
mod io;
mod labels;
mod sbm;
mod split;

pub use features::{normalize_features, FeatureMatrix};
pub use io::{load_graph, write_edges, write_nodes};
pub use labels::{one_hot, LabelStore};
pub use sbm::{generate_sbm, SbmParams};
pub use split::{split_nodes, DataSplit, SplitRatios};

use crate::error::{Error, Result};

/// Undirected, unweighted graph in compressed sparse row form.
///
/// Rows are sorted ascending, contain no self-loops and no duplicates, and
/// every edge is stored in both directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Edges are symmetrized and
    /// deduplicated; self-loops are dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Structure(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u != v {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; num_nodes + 1];
        for &(u, _) in &pairs {
            offsets[u + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let neighbors: Vec<usize> = pairs.iter().map(|&(_, v)| v).collect();
        Ok(Self {
            offsets,
            num_edges: neighbors.len() / 2,
            neighbors,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn average_degree(&self) -> f64 {
        if self.num_nodes() == 0 {
            return 0.0;
        }
        2.0 * self.num_edges as f64 / self.num_nodes() as f64
    }

    /// Checks sortedness, self-loop freedom and symmetry in O(E log d).
    pub fn validate(&self) -> Result<()> {
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Structure("CSR offsets decrease".into()));
        }
        for v in 0..self.num_nodes() {
            let row = self.neighbors(v);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structure(format!(
                    "row {v} is unsorted or has duplicates"
                )));
            }
            for &u in row {
                if u == v {
                    return Err(Error::Structure(format!("self-loop at {v}")));
                }
                if self.neighbors(u).binary_search(&v).is_err() {
                    return Err(Error::Structure(format!("edge {v}->{u} has no reverse")));
                }
            }
        }
        Ok(())
    }
}

/// A loaded or generated dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelStore,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reverse_duplicate_collapses_to_one_edge() {
        let g = Graph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn self_loop_is_dropped() {
        let g = Graph::from_edges(6, [(0, 1), (5, 5)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.degree(5), 0);
        assert!(g.neighbors(5).is_empty());
    }

    #[test]
    fn out_of_range_endpoint_is_structural() {
        assert!(matches!(
            Graph::from_edges(3, [(0, 3)]),
            Err(Error::Structure(_))
        ));
    }

    proptest! {
        #[test]
        fn arbitrary_edge_lists_yield_valid_csr(
            n in 1usize..30,
            raw in proptest::collection::vec((0usize..30, 0usize..30), 0..120),
        ) {
            let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n, v % n)).collect();
            let g = Graph::from_edges(n, edges.iter().copied()).unwrap();
            g.validate().unwrap();
            for &(u, v) in &edges {
                if u != v {
                    prop_assert!(g.neighbors(u).contains(&v));
                }
            }
            prop_assert_eq!(g.edges().count(), g.num_edges());
        }
    }
}
