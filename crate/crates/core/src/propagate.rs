//! Neighborhood aggregation over the CSR adjacency.
//!
//! Both aggregators exclude the node itself and map an empty neighborhood to
//! a zero row. Each output row is reduced in CSR neighbor order, so results
//! are identical for any thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{one_hot, Graph};
use crate::linalg::{argmax, Matrix};

/// Rows per rayon task; keeps scheduling overhead small on narrow matrices.
const ROWS_PER_TASK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggregatorKind {
    /// `Σ_u x_u / sqrt(deg(u)·deg(v))`.
    Gcn,
    /// `Σ_u x_u / deg(v)`.
    Mean,
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gcn => "gcn",
            Self::Mean => "mean",
        })
    }
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Self::Gcn),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::Config(format!("unknown aggregator {s:?}"))),
        }
    }
}

fn check_rows(graph: &Graph, x: &Matrix) -> Result<()> {
    if x.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "matrix has {} rows, graph has {} nodes",
            x.rows(),
            graph.num_nodes()
        )));
    }
    Ok(())
}

fn inv_sqrt_degrees(graph: &Graph) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|v| match graph.degree(v) {
            0 => 0.0,
            k => 1.0 / (k as f64).sqrt(),
        })
        .collect()
}

fn inv_degrees(graph: &Graph) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|v| match graph.degree(v) {
            0 => 0.0,
            k => 1.0 / k as f64,
        })
        .collect()
}

/// `out_v = row_scale[v] · Σ_{u∈N(v)} col_scale[u] · x_u`.
fn gather(graph: &Graph, x: &Matrix, row_scale: &[f64], col_scale: Option<&[f64]>) -> Matrix {
    let cols = x.cols();
    let mut out = Matrix::zeros(x.rows(), cols);
    if cols == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(cols * ROWS_PER_TASK)
        .enumerate()
        .for_each(|(chunk, block)| {
            for (i, dst) in block.chunks_mut(cols).enumerate() {
                let v = chunk * ROWS_PER_TASK + i;
                for &u in graph.neighbors(v) {
                    let w = col_scale.map_or(1.0, |s| s[u]);
                    for (o, &s) in dst.iter_mut().zip(x.row(u)) {
                        *o += w * s;
                    }
                }
                let r = row_scale[v];
                for o in dst.iter_mut() {
                    *o *= r;
                }
            }
        });
    out
}

/// One aggregation step. Row `v` of the result combines the rows of `v`'s
/// neighbors.
pub fn aggregate(graph: &Graph, x: &Matrix, kind: AggregatorKind) -> Result<Matrix> {
    check_rows(graph, x)?;
    Ok(match kind {
        AggregatorKind::Gcn => {
            let s = inv_sqrt_degrees(graph);
            gather(graph, x, &s, Some(&s))
        }
        AggregatorKind::Mean => gather(graph, x, &inv_degrees(graph), None),
    })
}

/// Applies the transpose of the aggregation operator; used to backpropagate
/// through [`aggregate`].
pub fn aggregate_transpose(graph: &Graph, x: &Matrix, kind: AggregatorKind) -> Result<Matrix> {
    check_rows(graph, x)?;
    Ok(match kind {
        AggregatorKind::Gcn => {
            let s = inv_sqrt_degrees(graph);
            gather(graph, x, &s, Some(&s))
        }
        AggregatorKind::Mean => {
            let ones = vec![1.0; graph.num_nodes()];
            gather(graph, x, &ones, Some(&inv_degrees(graph)))
        }
    })
}

/// `steps` consecutive aggregations with no transformation in between.
pub fn kprop(graph: &Graph, x: &Matrix, steps: usize, kind: AggregatorKind) -> Result<Matrix> {
    check_rows(graph, x)?;
    let mut h = x.clone();
    for _ in 0..steps {
        h = aggregate(graph, &h, kind)?;
    }
    Ok(h)
}

/// Transpose of [`kprop`].
pub fn kprop_transpose(
    graph: &Graph,
    x: &Matrix,
    steps: usize,
    kind: AggregatorKind,
) -> Result<Matrix> {
    check_rows(graph, x)?;
    let mut h = x.clone();
    for _ in 0..steps {
        h = aggregate_transpose(graph, &h, kind)?;
    }
    Ok(h)
}

/// Denoises perturbed labels by propagating their one-hot encodings `steps`
/// times with the GCN aggregator and taking the per-node argmax. Nodes
/// without a perturbed label get `None`; a labeled node whose propagated row
/// is all zero keeps its own label.
pub fn estimate_labels(
    graph: &Graph,
    perturbed: &[Option<usize>],
    num_classes: usize,
    steps: usize,
) -> Result<Vec<Option<usize>>> {
    if perturbed.len() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            perturbed.len(),
            graph.num_nodes()
        )));
    }
    let propagated = kprop(
        graph,
        &one_hot(perturbed, num_classes),
        steps,
        AggregatorKind::Gcn,
    )?;
    Ok(perturbed
        .iter()
        .enumerate()
        .map(|(v, y)| {
            let y = (*y)?;
            let row = propagated.row(v);
            Some(if row.iter().all(|&s| s == 0.0) {
                y
            } else {
                argmax(row)
            })
        })
        .collect())
}
