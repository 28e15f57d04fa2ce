//! Adam with optional weight decay.

use std::fmt;
use std::str::FromStr;

use super::ModelWeights;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightDecayMode {
    /// `wd·w` is added to the gradient before the moment updates (L2 penalty).
    Coupled,
    /// Weights shrink by `lr·wd·w` outside the adaptive step.
    Decoupled,
}

impl fmt::Display for WeightDecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Coupled => "coupled",
            Self::Decoupled => "decoupled",
        })
    }
}

impl FromStr for WeightDecayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(Self::Coupled),
            "decoupled" => Ok(Self::Decoupled),
            _ => Err(Error::Config(format!("unknown weight decay mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(
        num_params: usize,
        learning_rate: f64,
        weight_decay: f64,
        decay_mode: WeightDecayMode,
    ) -> Self {
        Self {
            learning_rate,
            weight_decay,
            decay_mode,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update of `params` in place from `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (lr, wd) = (self.learning_rate, self.weight_decay);
        for i in 0..params.len() {
            let mut g = grads[i];
            match self.decay_mode {
                WeightDecayMode::Coupled => g += wd * params[i],
                WeightDecayMode::Decoupled => params[i] -= lr * wd * params[i],
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// Updates every weight of the model.
    pub fn step(&mut self, weights: &mut ModelWeights, grads: &ModelWeights) -> Result<()> {
        let mut flat = weights.to_flat();
        self.update(&mut flat, &grads.to_flat())?;
        weights.set_flat(&flat)
    }
}
