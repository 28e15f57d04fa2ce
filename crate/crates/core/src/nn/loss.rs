//! Losses over a node subset and their gradients with respect to the logits.
//!
//! All losses are means over the labeled members of the node set.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ldp::TransitionMatrix;
use crate::linalg::{log_sum_exp, softmax_in_place, Matrix};
use crate::propagate::{kprop, kprop_transpose, AggregatorKind};

use super::ForwardPass;

/// Smallest probability fed to a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Terms whose probability was raised to [`PROB_FLOOR`].
    pub clamped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Cross-entropy of the model's class probabilities.
    CrossEntropy,
    /// Cross-entropy after pushing the probabilities through the label
    /// noise channel.
    ForwardCorrection,
    /// Cross-entropy against propagated labels of the softmax of the
    /// propagated, noise-corrected probabilities.
    Drop { steps: usize },
}

fn labeled<'a>(labels: &'a [Option<usize>], nodes: &'a [usize]) -> Result<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = nodes
        .iter()
        .filter_map(|&v| labels.get(v).copied().flatten().map(|y| (v, y)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Argument(
            "loss over an empty labeled node set".into(),
        ));
    }
    Ok(pairs)
}

/// Mean of `-ln probs[v, y_v]` over the labeled nodes in `nodes`.
pub fn cross_entropy(
    probs: &Matrix,
    labels: &[Option<usize>],
    nodes: &[usize],
) -> Result<LossValue> {
    let pairs = labeled(labels, nodes)?;
    let mut total = 0.0;
    let mut clamped = 0;
    for &(v, y) in &pairs {
        let p = probs[(v, y)];
        if p < PROB_FLOOR {
            clamped += 1;
        }
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(LossValue {
        value: total / pairs.len() as f64,
        clamped,
    })
}

/// Probabilities of the noisy label: `probs · T`.
pub fn forward_correct(probs: &Matrix, transition: &TransitionMatrix) -> Result<Matrix> {
    probs.matmul(transition.matrix())
}

/// Soft labels used by the drop loss: `softmax(kprop_gcn(probs · T, steps))`.
pub fn drop_soft_labels(
    probs: &Matrix,
    transition: &TransitionMatrix,
    graph: &Graph,
    steps: usize,
) -> Result<Matrix> {
    let mut r = kprop(
        graph,
        &forward_correct(probs, transition)?,
        steps,
        AggregatorKind::Gcn,
    )?;
    for v in 0..r.rows() {
        softmax_in_place(r.row_mut(v));
    }
    Ok(r)
}

/// Backpropagates `dprobs` through the row softmax.
fn softmax_backward(probs: &Matrix, dprobs: &Matrix) -> Matrix {
    let mut out = dprobs.clone();
    for v in 0..out.rows() {
        let p = probs.row(v);
        let row = out.row_mut(v);
        let dot: f64 = row.iter().zip(p).map(|(a, b)| a * b).sum();
        for (g, &pi) in row.iter_mut().zip(p) {
            *g = pi * (*g - dot);
        }
    }
    out
}

/// Loss of kind `kind` for `pass` and its gradient with respect to
/// `pass.logits`. `targets` are the labels the loss compares against: the
/// noisy labels for the two cross-entropy variants, the propagated labels for
/// drop.
pub fn loss_and_grad(
    kind: LossKind,
    pass: &ForwardPass,
    targets: &[Option<usize>],
    nodes: &[usize],
    transition: &TransitionMatrix,
    graph: &Graph,
) -> Result<(LossValue, Matrix)> {
    let pairs = labeled(targets, nodes)?;
    let scale = 1.0 / pairs.len() as f64;
    let probs = &pass.probs;
    let (n, c) = (probs.rows(), probs.cols());
    match kind {
        LossKind::CrossEntropy => {
            let mut grad = Matrix::zeros(n, c);
            let mut total = 0.0;
            let mut clamped = 0;
            for &(v, y) in &pairs {
                let logits = pass.logits.row(v);
                let log_p = logits[y] - log_sum_exp(logits);
                if log_p < PROB_FLOOR.ln() {
                    clamped += 1;
                }
                total -= log_p.max(PROB_FLOOR.ln());
                let g = grad.row_mut(v);
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = scale * (probs[(v, k)] - if k == y { 1.0 } else { 0.0 });
                }
            }
            Ok((
                LossValue {
                    value: total * scale,
                    clamped,
                },
                grad,
            ))
        }
        LossKind::ForwardCorrection => {
            let q = forward_correct(probs, transition)?;
            let mut dq = Matrix::zeros(n, c);
            let mut total = 0.0;
            let mut clamped = 0;
            for &(v, y) in &pairs {
                let qy = q[(v, y)];
                if qy < PROB_FLOOR {
                    clamped += 1;
                }
                let qy = qy.max(PROB_FLOOR);
                total -= qy.ln();
                dq[(v, y)] = -scale / qy;
            }
            let dp = dq.matmul_t(transition.matrix())?;
            Ok((
                LossValue {
                    value: total * scale,
                    clamped,
                },
                softmax_backward(probs, &dp),
            ))
        }
        LossKind::Drop { steps } => {
            let q = forward_correct(probs, transition)?;
            let r = kprop(graph, &q, steps, AggregatorKind::Gcn)?;
            let mut dr = Matrix::zeros(n, c);
            let mut total = 0.0;
            let mut clamped = 0;
            for &(v, y) in &pairs {
                let row = r.row(v);
                let lse = log_sum_exp(row);
                let log_s = row[y] - lse;
                if log_s < PROB_FLOOR.ln() {
                    clamped += 1;
                }
                total -= log_s.max(PROB_FLOOR.ln());
                let g = dr.row_mut(v);
                for (k, gk) in g.iter_mut().enumerate() {
                    let s = (row[k] - lse).exp();
                    *gk = scale * (s - if k == y { 1.0 } else { 0.0 });
                }
            }
            let dq = kprop_transpose(graph, &dr, steps, AggregatorKind::Gcn)?;
            let dp = dq.matmul_t(transition.matrix())?;
            Ok((
                LossValue {
                    value: total * scale,
                    clamped,
                },
                softmax_backward(probs, &dp),
            ))
        }
    }
}
