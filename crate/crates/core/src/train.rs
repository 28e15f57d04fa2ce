//! Training on collected features and noisy labels, with validation against
//! noisy labels only and accuracy-capped model selection.
//!
//! Per epoch: one training-mode step on the chosen objective, then an
//! evaluation-mode pass with the updated weights that records the validation
//! loss and the accuracies of the model against the noisy labels. A
//! perfect classifier of the clean label matches a noisy label with
//! probability at most `Acc*`, the keep rate of randomized response, so
//! epochs whose noisy accuracy exceeds it on either set are treated as
//! overfitting to the noise and skipped during selection.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{DataSplit, Graph};
use crate::ldp::rng::stream_rng;
use crate::ldp::rr::keep_probability;
use crate::ldp::{rr_transition, Epsilon, TransitionMatrix};
use crate::linalg::{argmax, Matrix};
use crate::nn::loss::loss_and_grad;
use crate::nn::{
    cross_entropy, forward_correct, AdamState, GnnConfig, LossKind, Mode, ModelWeights, Network,
    WeightDecayMode,
};
use crate::propagate::{estimate_labels, kprop, AggregatorKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainPlan {
    pub eps_x: Epsilon,
    pub eps_y: Epsilon,
    /// Propagation steps applied to the features before the network.
    pub kx: usize,
    /// Propagation steps applied to labels and soft labels.
    pub ky: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            eps_x: Epsilon::INFINITY,
            eps_y: Epsilon::INFINITY,
            kx: 0,
            ky: 0,
            epochs: 500,
            learning_rate: 1e-2,
            weight_decay: 1e-3,
            decay_mode: WeightDecayMode::Decoupled,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl TrainPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("at least one epoch is required".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }

    /// `key=value` lines describing the plan, for run manifests.
    pub fn manifest_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("eps_x", self.eps_x.to_string()),
            ("eps_y", self.eps_y.to_string()),
            ("kx", self.kx.to_string()),
            ("ky", self.ky.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.learning_rate.to_string()),
            ("wd", self.weight_decay.to_string()),
            ("wd_mode", self.decay_mode.to_string()),
            ("dropout", self.dropout.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

/// Training objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Plain cross-entropy against the noisy labels.
    CrossEntropy,
    /// Cross-entropy of the noise-channel-corrected output against the noisy
    /// labels.
    ForwardCorrection,
    /// Cross-entropy of propagated, corrected soft labels against labels
    /// estimated by propagation.
    Drop,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Self::CrossEntropy, Self::ForwardCorrection, Self::Drop];

    pub fn tag(self) -> &'static str {
        match self {
            Self::CrossEntropy => "ce",
            Self::ForwardCorrection => "fc",
            Self::Drop => "drop",
        }
    }

    /// Whether model selection applies the accuracy cap.
    pub fn guarded(self) -> bool {
        !matches!(self, Self::CrossEntropy)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|o| o.tag() == s).ok_or_else(|| {
            Error::Config(format!("unknown objective {s:?}; expected ce, fc or drop"))
        })
    }
}

/// Highest expected accuracy of any classifier against labels perturbed at
/// `eps_y`.
pub fn acc_star(eps_y: Epsilon, num_classes: usize) -> f64 {
    keep_probability(eps_y.value(), num_classes)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub acc_star: f64,
    pub guarded: bool,
    /// Index of the selected epoch.
    pub selected: usize,
    /// No epoch met the accuracy cap; the selection ignored it.
    pub guard_infeasible: bool,
}

impl TrainHistory {
    pub fn within_cap(&self, t: usize) -> bool {
        let r = &self.epochs[t];
        !self.guarded || (r.train_acc <= self.acc_star && r.val_acc <= self.acc_star)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: ModelWeights,
    pub history: TrainHistory,
    /// Accuracy of the selected model on the clean test labels.
    pub test_accuracy: f64,
    /// Labels the drop objective trained against (`None` for other
    /// objectives).
    pub estimated_labels: Option<Vec<Option<usize>>>,
    /// Loss terms that hit the probability floor, summed over epochs.
    pub clamped_terms: usize,
}

/// Inputs shared by every objective.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub graph: &'a Graph,
    /// Server-side feature estimate (or substitute features).
    pub features: &'a Matrix,
    /// Noisy labels; only train and validation nodes carry one.
    pub noisy_labels: &'a [Option<usize>],
    /// Clean labels, read only for test accuracy.
    pub clean_labels: &'a [Option<usize>],
    pub num_classes: usize,
    pub split: &'a DataSplit,
}

pub fn accuracy(probs: &Matrix, labels: &[Option<usize>], nodes: &[usize]) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for &v in nodes {
        if let Some(y) = labels[v] {
            total += 1;
            hits += usize::from(argmax(probs.row(v)) == y);
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn train_drop(
    data: TrainData<'_>,
    plan: &TrainPlan,
    config: GnnConfig,
) -> Result<TrainOutcome> {
    train(data, plan, config, Objective::Drop)
}

/// Trains with one of the cross-entropy baselines.
pub fn train_baseline(
    data: TrainData<'_>,
    plan: &TrainPlan,
    config: GnnConfig,
    objective: Objective,
) -> Result<TrainOutcome> {
    if objective == Objective::Drop {
        return Err(Error::Argument(
            "use train_drop for the drop objective".into(),
        ));
    }
    train(data, plan, config, objective)
}

fn validation_loss(
    objective: Objective,
    probs: &Matrix,
    transition: &TransitionMatrix,
    noisy: &[Option<usize>],
    val: &[usize],
) -> Result<f64> {
    Ok(match objective {
        Objective::CrossEntropy => cross_entropy(probs, noisy, val)?.value,
        _ => cross_entropy(&forward_correct(probs, transition)?, noisy, val)?.value,
    })
}

pub fn train(
    data: TrainData<'_>,
    plan: &TrainPlan,
    config: GnnConfig,
    objective: Objective,
) -> Result<TrainOutcome> {
    plan.validate()?;
    let TrainData {
        graph,
        features,
        noisy_labels,
        clean_labels,
        num_classes,
        split,
    } = data;
    if config.num_classes != num_classes || config.dropout != plan.dropout {
        return Err(Error::Config(
            "network config disagrees with the plan".into(),
        ));
    }
    if noisy_labels.len() != graph.num_nodes() || clean_labels.len() != graph.num_nodes() {
        return Err(Error::Shape("label vectors must cover every node".into()));
    }

    let inputs = kprop(graph, features, plan.kx, AggregatorKind::Gcn)?;
    let transition = rr_transition(plan.eps_y.value(), num_classes);
    let acc_cap = acc_star(plan.eps_y, num_classes);

    let (targets, kind, estimated) = match objective {
        Objective::CrossEntropy => (noisy_labels.to_vec(), LossKind::CrossEntropy, None),
        Objective::ForwardCorrection => (noisy_labels.to_vec(), LossKind::ForwardCorrection, None),
        Objective::Drop => {
            let est = estimate_labels(graph, noisy_labels, num_classes, plan.ky)?;
            (est.clone(), LossKind::Drop { steps: plan.ky }, Some(est))
        }
    };

    let net = Network::new(graph, &inputs, config)?;
    let mut weights = net.init_weights(&mut stream_rng(plan.seed, "init"));
    let mut dropout_rng = stream_rng(plan.seed, "dropout");
    let mut adam = AdamState::new(
        weights.num_params(),
        plan.learning_rate,
        plan.weight_decay,
        plan.decay_mode,
    );

    let mut records = Vec::with_capacity(plan.epochs);
    let mut clamped_terms = 0;
    // (val loss, epoch, weights, test accuracy) of the best epoch so far.
    type Best = Option<(f64, usize, ModelWeights, f64)>;
    let mut best_capped: Best = None;
    let mut best_any: Best = None;
    let mut z1 = net.hidden_preactivation(&weights)?;

    for t in 0..plan.epochs {
        let pass = net.forward_from(z1, &weights, Mode::Train, &mut dropout_rng)?;
        let (loss, dlogits) =
            loss_and_grad(kind, &pass, &targets, &split.train, &transition, graph)?;
        clamped_terms += loss.clamped;
        let grads = net.backward(&pass, &weights, &dlogits)?;
        drop(pass);
        adam.step(&mut weights, &grads)?;

        z1 = net.hidden_preactivation(&weights)?;
        let eval = net.forward_from(z1.clone(), &weights, Mode::Eval, &mut dropout_rng)?;
        let record = EpochRecord {
            val_loss: validation_loss(
                objective,
                &eval.probs,
                &transition,
                noisy_labels,
                &split.val,
            )?,
            train_acc: accuracy(&eval.probs, noisy_labels, &split.train),
            val_acc: accuracy(&eval.probs, noisy_labels, &split.val),
        };
        records.push(record);

        let capped =
            !objective.guarded() || (record.train_acc <= acc_cap && record.val_acc <= acc_cap);
        let improves = |best: &Best| best.as_ref().is_none_or(|b| record.val_loss < b.0);
        let need_any = improves(&best_any);
        let need_capped = capped && improves(&best_capped);
        if need_any || need_capped {
            let test_acc = accuracy(&eval.probs, clean_labels, &split.test);
            let entry = (record.val_loss, t, weights.clone(), test_acc);
            if need_capped {
                best_capped = Some(entry.clone());
            }
            if need_any {
                best_any = Some(entry);
            }
        }
    }

    let guard_infeasible = best_capped.is_none();
    let (_, selected, weights, test_accuracy) = best_capped
        .or(best_any)
        .ok_or_else(|| Error::Numeric("no finite validation loss in any epoch".into()))?;
    if guard_infeasible {
        log::warn!("no epoch met the accuracy cap {acc_cap:.4}; selected by validation loss alone");
    }
    Ok(TrainOutcome {
        weights,
        history: TrainHistory {
            epochs: records,
            acc_star: acc_cap,
            guarded: objective.guarded(),
            selected,
            guard_infeasible,
        },
        test_accuracy,
        estimated_labels: estimated,
        clamped_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, split_nodes, SbmParams, SplitRatios};
    use crate::nn::Backbone;

    #[test]
    fn acc_star_examples() {
        assert_eq!(acc_star(Epsilon::INFINITY, 7), 1.0);
        let e = std::f64::consts::E;
        assert!((acc_star(Epsilon::new(1.0).unwrap(), 7) - e / (e + 6.0)).abs() < 1e-15);
        assert!((acc_star(Epsilon::new(1.0).unwrap(), 7) - 0.3118).abs() < 1e-4);
        let e2 = e * e;
        assert!((acc_star(Epsilon::new(2.0).unwrap(), 4) - e2 / (e2 + 3.0)).abs() < 1e-15);
        assert!((acc_star(Epsilon::new(2.0).unwrap(), 4) - 0.7112).abs() < 1e-4);
    }

    fn small_problem() -> (crate::graph::Dataset, DataSplit) {
        let ds = generate_sbm(&SbmParams {
            num_nodes: 120,
            num_classes: 3,
            dim: 12,
            p_in: 0.12,
            p_out: 0.01,
            feature_signal: 0.6,
            seed: 3,
        })
        .unwrap();
        let split = split_nodes(120, SplitRatios::default(), 1).unwrap();
        (ds, split)
    }

    fn noisy_from_clean(ds: &crate::graph::Dataset, split: &DataSplit) -> Vec<Option<usize>> {
        let mut y = vec![None; ds.graph.num_nodes()];
        for v in split.labeled() {
            y[v] = ds.labels.clean()[v];
        }
        y
    }

    #[test]
    fn selection_respects_the_cap_and_minimizes_loss() {
        let (ds, split) = small_problem();
        let noisy = noisy_from_clean(&ds, &split);
        let plan = TrainPlan {
            eps_y: Epsilon::new(1.0).unwrap(),
            epochs: 60,
            ky: 2,
            ..TrainPlan::default()
        };
        let cfg = GnnConfig::new(Backbone::Sage, 3, plan.dropout).unwrap();
        let data = TrainData {
            graph: &ds.graph,
            features: &ds.features.values,
            noisy_labels: &noisy,
            clean_labels: ds.labels.clean(),
            num_classes: 3,
            split: &split,
        };
        let out = train_drop(data, &plan, cfg).unwrap();
        let h = &out.history;
        assert_eq!(h.epochs.len(), 60);
        let feasible: Vec<usize> = (0..60).filter(|&t| h.within_cap(t)).collect();
        if feasible.is_empty() {
            assert!(h.guard_infeasible);
        } else {
            assert!(!h.guard_infeasible);
            assert!(h.within_cap(h.selected));
            for t in feasible {
                assert!(h.epochs[h.selected].val_loss <= h.epochs[t].val_loss);
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_learns_clean_problem() {
        let (ds, split) = small_problem();
        let noisy = noisy_from_clean(&ds, &split);
        let plan = TrainPlan {
            epochs: 80,
            ..TrainPlan::default()
        };
        let cfg = GnnConfig::new(Backbone::Gcn, 3, plan.dropout).unwrap();
        let data = TrainData {
            graph: &ds.graph,
            features: &ds.features.values,
            noisy_labels: &noisy,
            clean_labels: ds.labels.clean(),
            num_classes: 3,
            split: &split,
        };
        let a = train(data, &plan, cfg, Objective::CrossEntropy).unwrap();
        let b = train(data, &plan, cfg, Objective::CrossEntropy).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.history, b.history);
        assert!(a.test_accuracy > 0.8, "accuracy {}", a.test_accuracy);
    }

    /// Without label noise the channel is the identity, so forward
    /// correction reduces to plain cross-entropy step for step. Drop still
    /// differs: its soft labels pass through a second softmax.
    #[test]
    fn forward_correction_reduces_to_cross_entropy_without_noise() {
        let (ds, split) = small_problem();
        let noisy = noisy_from_clean(&ds, &split);
        let plan = TrainPlan {
            epochs: 15,
            ..TrainPlan::default()
        };
        let cfg = GnnConfig::new(Backbone::Sage, 3, plan.dropout).unwrap();
        let data = TrainData {
            graph: &ds.graph,
            features: &ds.features.values,
            noisy_labels: &noisy,
            clean_labels: ds.labels.clean(),
            num_classes: 3,
            split: &split,
        };
        let ce = train(data, &plan, cfg, Objective::CrossEntropy).unwrap();
        let fc = train(data, &plan, cfg, Objective::ForwardCorrection).unwrap();
        for (x, y) in ce.history.epochs.iter().zip(&fc.history.epochs) {
            assert!((x.val_loss - y.val_loss).abs() < 1e-9);
            assert_eq!(x.train_acc, y.train_acc);
        }
    }

    #[test]
    fn objective_tags_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.tag().parse::<Objective>().unwrap(), o);
        }
        assert!("xx".parse::<Objective>().is_err());
    }
}
