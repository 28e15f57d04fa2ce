//! Two-layer graph neural networks with hand-written gradients.
//!
//! Each layer first transforms its input with the graph and then applies a
//! dense map: `Z = transform(H)·W + b`. The GCN backbone transforms with the
//! symmetric-normalized aggregator, the SAGE backbone with
//! `[mean-aggregate(H) ‖ H]`. The hidden layer uses SELU followed by
//! (inverted) dropout in training mode; the output layer yields logits.

pub mod adam;
pub mod checkpoint;
pub mod loss;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{softmax_rows, FrozenMatrix, Matrix};
use crate::propagate::{aggregate, aggregate_transpose, AggregatorKind};

pub use adam::{AdamState, WeightDecayMode};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{
    cross_entropy, drop_soft_labels, forward_correct, loss_and_grad, LossKind, LossValue,
};

const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[inline]
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE * x
    } else {
        SELU_SCALE * SELU_ALPHA * x.exp_m1()
    }
}

#[inline]
fn selu_grad(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE
    } else {
        SELU_SCALE * SELU_ALPHA * x.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backbone {
    Gcn,
    Sage,
}

impl Backbone {
    pub fn tag(self) -> u8 {
        match self {
            Self::Gcn => 0,
            Self::Sage => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Gcn),
            1 => Some(Self::Sage),
            _ => None,
        }
    }

    /// Width of `transform(H)` for an input of width `d`.
    fn transformed_width(self, d: usize) -> usize {
        match self {
            Self::Gcn => d,
            Self::Sage => 2 * d,
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gcn => "gcn",
            Self::Sage => "sage",
        })
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Self::Gcn),
            "sage" => Ok(Self::Sage),
            _ => Err(Error::Config(format!(
                "unknown backbone {s:?}; expected gcn or sage"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnnConfig {
    pub backbone: Backbone,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub dropout: f64,
}

impl GnnConfig {
    pub const DEFAULT_HIDDEN: usize = 16;

    pub fn new(backbone: Backbone, num_classes: usize, dropout: f64) -> Result<Self> {
        let cfg = Self {
            backbone,
            hidden_dim: Self::DEFAULT_HIDDEN,
            num_classes,
            dropout,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden dimension must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Dense parameters of both layers. The same shape doubles as a gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl ModelWeights {
    pub fn zeros(config: &GnnConfig, input_dim: usize) -> Self {
        let h = config.hidden_dim;
        let c = config.num_classes;
        Self {
            w1: Matrix::zeros(config.backbone.transformed_width(input_dim), h),
            b1: vec![0.0; h],
            w2: Matrix::zeros(config.backbone.transformed_width(h), c),
            b2: vec![0.0; c],
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng + ?Sized>(config: &GnnConfig, input_dim: usize, rng: &mut R) -> Self {
        let mut w = Self::zeros(config, input_dim);
        for m in [&mut w.w1, &mut w.w2] {
            let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            for x in m.as_mut_slice() {
                *x = rng.random_range(-limit..limit);
            }
        }
        w
    }

    pub fn input_dim(&self, backbone: Backbone) -> usize {
        match backbone {
            Backbone::Gcn => self.w1.rows(),
            Backbone::Sage => self.w1.rows() / 2,
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut rest = flat;
        for s in self.slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub z1: Matrix,
    /// Per-entry dropout multiplier (0 or `1/(1-rate)`); `None` in eval mode.
    mask: Option<Vec<f64>>,
    pub h1: Matrix,
    s2: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// A backbone bound to a graph and its input features. The first layer's
/// graph transform of the inputs is computed once at construction.
#[derive(Clone, Debug)]
pub struct Network<'g> {
    graph: &'g Graph,
    config: GnnConfig,
    input_dim: usize,
    s1: FrozenMatrix,
}

fn transform(graph: &Graph, h: &Matrix, backbone: Backbone) -> Result<Matrix> {
    match backbone {
        Backbone::Gcn => aggregate(graph, h, AggregatorKind::Gcn),
        Backbone::Sage => aggregate(graph, h, AggregatorKind::Mean)?.hstack(h),
    }
}

fn transform_transpose(graph: &Graph, ds: &Matrix, backbone: Backbone) -> Result<Matrix> {
    match backbone {
        Backbone::Gcn => aggregate_transpose(graph, ds, AggregatorKind::Gcn),
        Backbone::Sage => {
            let (d_agg, d_self) = ds.hsplit(ds.cols() / 2);
            let mut out = aggregate_transpose(graph, &d_agg, AggregatorKind::Mean)?;
            out.add_scaled(&d_self, 1.0)?;
            Ok(out)
        }
    }
}

fn check_finite(m: &Matrix, layer: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "non-finite activations in layer {layer}"
        )))
    }
}

impl<'g> Network<'g> {
    pub fn new(graph: &'g Graph, inputs: &Matrix, config: GnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            graph,
            config,
            input_dim: inputs.cols(),
            s1: FrozenMatrix::new(&transform(graph, inputs, config.backbone)?),
        })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn init_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelWeights {
        ModelWeights::glorot(&self.config, self.input_dim, rng)
    }

    fn check_weights(&self, w: &ModelWeights) -> Result<()> {
        let want = ModelWeights::zeros(&self.config, self.input_dim);
        let ok = w.w1.rows() == want.w1.rows()
            && w.w1.cols() == want.w1.cols()
            && w.w2.rows() == want.w2.rows()
            && w.w2.cols() == want.w2.cols()
            && w.b1.len() == want.b1.len()
            && w.b2.len() == want.b2.len();
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(
                "weights do not match the network configuration".into(),
            ))
        }
    }

    /// Pre-activation of the hidden layer. It does not depend on the mode, so
    /// a value computed for one pass may be reused by another with the same
    /// weights.
    pub fn hidden_preactivation(&self, w: &ModelWeights) -> Result<Matrix> {
        self.check_weights(w)?;
        let mut z1 = self.s1.matmul(&w.w1)?;
        z1.add_row_vector(&w.b1);
        check_finite(&z1, 1)?;
        Ok(z1)
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        w: &ModelWeights,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        let z1 = self.hidden_preactivation(w)?;
        self.forward_from(z1, w, mode, rng)
    }

    /// Completes a forward pass from a precomputed hidden pre-activation.
    pub fn forward_from<R: Rng + ?Sized>(
        &self,
        z1: Matrix,
        w: &ModelWeights,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        self.check_weights(w)?;
        let mut h1 = z1.map(selu);
        let rate = self.config.dropout;
        let mask = if mode == Mode::Train && rate > 0.0 {
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..h1.as_slice().len())
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect();
            for (x, m) in h1.as_mut_slice().iter_mut().zip(&mask) {
                *x *= m;
            }
            Some(mask)
        } else {
            None
        };
        let s2 = transform(self.graph, &h1, self.config.backbone)?;
        let mut logits = s2.matmul(&w.w2)?;
        logits.add_row_vector(&w.b2);
        check_finite(&logits, 2)?;
        let probs = softmax_rows(&logits);
        Ok(ForwardPass {
            z1,
            mask,
            h1,
            s2,
            logits,
            probs,
        })
    }

    /// Gradient of a scalar loss with respect to all weights, given the
    /// loss gradient with respect to the logits of `pass`.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        w: &ModelWeights,
        dlogits: &Matrix,
    ) -> Result<ModelWeights> {
        self.check_weights(w)?;
        let dw2 = pass.s2.t_matmul(dlogits)?;
        let db2 = dlogits.column_sums();
        let ds2 = dlogits.matmul_t(&w.w2)?;
        let mut dz1 = transform_transpose(self.graph, &ds2, self.config.backbone)?;
        if let Some(mask) = &pass.mask {
            for (g, m) in dz1.as_mut_slice().iter_mut().zip(mask) {
                *g *= m;
            }
        }
        for (g, &z) in dz1.as_mut_slice().iter_mut().zip(pass.z1.as_slice()) {
            *g *= selu_grad(z);
        }
        let dw1 = self.s1.t_matmul(&dz1)?;
        let db1 = dz1.column_sums();
        Ok(ModelWeights {
            w1: dw1,
            b1: db1,
            w2: dw2,
            b2: db2,
        })
    }
}

/// Class probabilities for every node.
pub fn forward<R: Rng + ?Sized>(
    graph: &Graph,
    inputs: &Matrix,
    weights: &ModelWeights,
    config: &GnnConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<Matrix> {
    let net = Network::new(graph, inputs, *config)?;
    Ok(net.forward(weights, mode, rng)?.probs)
}
