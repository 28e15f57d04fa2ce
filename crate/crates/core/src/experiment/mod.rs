//! End-to-end runs: private collection, training, budget audit, and grid
//! sweeps that write one results row per cell.

mod baselines;
mod report;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use baselines::{baseline_features, bootstrap_ci, FeatureKind};
pub use report::{
    emit_plotdata, manifest_dir, read_results, write_plotdata, ResultRow, CSV_COLUMNS,
    CSV_SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::graph::{normalize_features, split_nodes, DataSplit, Dataset, SplitRatios};
use crate::ldp::rng::derive_seed;
use crate::ldp::{collect_features, collect_labels, BudgetLedger, Epsilon, FeatureMechanism};
use crate::nn::{Backbone, GnnConfig, WeightDecayMode};
use crate::train::{train, Objective, TrainData, TrainOutcome, TrainPlan};

/// Resamples used for every reported confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Everything that defines one training run on a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub backbone: Backbone,
    pub mechanism: FeatureMechanism,
    pub features: FeatureKind,
    pub objective: Objective,
    pub hidden_dim: usize,
    pub plan: TrainPlan,
    /// Seed of the train/validation/test partition.
    pub split_seed: u64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub outcome: TrainOutcome,
    pub ledger: BudgetLedger,
    pub split: DataSplit,
    pub runtime_s: f64,
}

/// Collects features and labels under the plan's budgets, trains, and audits
/// the privacy ledger.
///
/// Features are min-max normalized onto `[0, 1]` first. Labels are collected
/// from training and validation nodes only; test labels stay clean.
pub fn run_once(dataset: &Dataset, spec: &RunSpec) -> Result<RunReport> {
    let start = Instant::now();
    let plan = &spec.plan;
    plan.validate()?;
    let graph = &dataset.graph;
    let n = graph.num_nodes();
    let num_classes = dataset.labels.num_classes();
    let split = split_nodes(n, SplitRatios::default(), spec.split_seed)?;
    let mut ledger = BudgetLedger::new(n);

    let features = match spec.features {
        FeatureKind::Private => {
            let normalized = normalize_features(&dataset.features);
            collect_features(
                &normalized,
                spec.mechanism,
                plan.eps_x,
                derive_seed(plan.seed, "collect-features"),
                &mut ledger,
            )?
            .estimate
        }
        kind => {
            baseline_features(
                kind,
                graph,
                dataset.features.dim(),
                derive_seed(plan.seed, "baseline"),
            )?
            .values
        }
    };

    let labeled: Vec<usize> = split.labeled().collect();
    let clean = dataset.labels.clean();
    let noisy = collect_labels(
        clean,
        num_classes,
        &labeled,
        plan.eps_y,
        derive_seed(plan.seed, "collect-labels"),
        &mut ledger,
    )?;
    let eps_x = (spec.features == FeatureKind::Private).then_some(plan.eps_x);
    verify_ledger(&ledger, &split, clean, eps_x, plan.eps_y)?;

    let mut config = GnnConfig::new(spec.backbone, num_classes, plan.dropout)?;
    config.hidden_dim = spec.hidden_dim;
    let outcome = train(
        TrainData {
            graph,
            features: &features,
            noisy_labels: &noisy,
            clean_labels: clean,
            num_classes,
            split: &split,
        },
        plan,
        config,
        spec.objective,
    )?;
    Ok(RunReport {
        outcome,
        ledger,
        split,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Checks that every node released exactly what the run intended: its
/// features once at `eps_x` (when private features are used) and, for
/// labeled training and validation nodes, its label once at `eps_y`.
pub fn verify_ledger(
    ledger: &BudgetLedger,
    split: &DataSplit,
    clean: &[Option<usize>],
    eps_x: Option<Epsilon>,
    eps_y: Epsilon,
) -> Result<()> {
    let mut sends_label = vec![false; ledger.nodes().len()];
    for v in split.labeled() {
        sends_label[v] = clean.get(v).copied().flatten().is_some();
    }
    for (v, b) in ledger.nodes().iter().enumerate() {
        let label = sends_label[v].then_some(eps_y);
        let expected_total = eps_x.map_or(0.0, Epsilon::value) + label.map_or(0.0, Epsilon::value);
        let invocations_ok = b.feature_invocations
            == u32::from(eps_x.is_some_and(|e| !e.is_infinite()))
            && b.label_invocations == u32::from(label.is_some_and(|e| !e.is_infinite()));
        if b.feature != eps_x || b.label != label || b.total() != expected_total || !invocations_ok
        {
            return Err(Error::Budget(format!(
                "node {v} spent {b:?}; expected features {eps_x:?} and label {label:?}"
            )));
        }
    }
    Ok(())
}

/// Hex SHA-256 of the graph, features and labels.
pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.graph.num_nodes() as u64).to_le_bytes());
    for (u, v) in dataset.graph.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    let f = &dataset.features;
    h.update((f.dim() as u64).to_le_bytes());
    h.update(f.alpha.to_le_bytes());
    h.update(f.beta.to_le_bytes());
    for x in f.values.as_slice() {
        h.update(x.to_le_bytes());
    }
    h.update((dataset.labels.num_classes() as u64).to_le_bytes());
    for y in dataset.labels.clean() {
        h.update(y.map_or(u64::MAX, |y| y as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Tuned defaults for a named dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preset {
    pub kx: usize,
    pub ky: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

/// Shipped presets. Only Cora has tuned optimizer settings; the other
/// datasets carry their propagation steps with the library defaults.
pub fn preset(dataset: &str) -> Option<Preset> {
    let plan = TrainPlan::default();
    let base = |kx, ky| Preset {
        kx,
        ky,
        learning_rate: plan.learning_rate,
        weight_decay: plan.weight_decay,
        dropout: plan.dropout,
    };
    match dataset {
        "cora" => Some(Preset {
            learning_rate: 1e-2,
            weight_decay: 1e-2,
            dropout: 0.5,
            ..base(16, 8)
        }),
        "pubmed" => Some(base(16, 2)),
        "facebook" => Some(base(4, 2)),
        "lastfm" => Some(base(8, 2)),
        _ => None,
    }
}

/// One point of a sweep grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub backbone: Backbone,
    /// `None` for substitute features, which consume no feature budget.
    pub mechanism: Option<FeatureMechanism>,
    pub features: FeatureKind,
    pub objective: Objective,
    /// `None` for substitute features.
    pub eps_x: Option<Epsilon>,
    pub eps_y: Epsilon,
    pub kx: usize,
    pub ky: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout: f64,
}

/// Axes of a sweep. Every combination is one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub backbones: Vec<Backbone>,
    pub mechanisms: Vec<FeatureMechanism>,
    pub features: Vec<FeatureKind>,
    pub objectives: Vec<Objective>,
    pub eps_x: Vec<Epsilon>,
    pub eps_y: Vec<Epsilon>,
    pub kx: Vec<usize>,
    pub ky: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub dropouts: Vec<f64>,
}

impl Grid {
    /// A single-cell grid.
    pub fn single(cell: &Cell) -> Self {
        Self {
            backbones: vec![cell.backbone],
            mechanisms: vec![cell.mechanism.unwrap_or(FeatureMechanism::MultiBit)],
            features: vec![cell.features],
            objectives: vec![cell.objective],
            eps_x: vec![cell.eps_x.unwrap_or(Epsilon::INFINITY)],
            eps_y: vec![cell.eps_y],
            kx: vec![cell.kx],
            ky: vec![cell.ky],
            learning_rates: vec![cell.learning_rate],
            weight_decays: vec![cell.weight_decay],
            dropouts: vec![cell.dropout],
        }
    }

    /// Cells in a fixed nested order. Substitute-feature cells ignore the
    /// mechanism and feature budget, so their duplicates are dropped.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for &backbone in &self.backbones {
            for &features in &self.features {
                for &mechanism in &self.mechanisms {
                    for &objective in &self.objectives {
                        for &eps_x in &self.eps_x {
                            for &eps_y in &self.eps_y {
                                for &kx in &self.kx {
                                    for &ky in &self.ky {
                                        for &learning_rate in &self.learning_rates {
                                            for &weight_decay in &self.weight_decays {
                                                for &dropout in &self.dropouts {
                                                    let private = features == FeatureKind::Private;
                                                    let cell = Cell {
                                                        backbone,
                                                        mechanism: private.then_some(mechanism),
                                                        features,
                                                        objective,
                                                        eps_x: private.then_some(eps_x),
                                                        eps_y,
                                                        kx,
                                                        ky,
                                                        learning_rate,
                                                        weight_decay,
                                                        dropout,
                                                    };
                                                    if !out.contains(&cell) {
                                                        out.push(cell);
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Name written to the `dataset` column and used for preset lookup.
    pub dataset_name: String,
    pub grid: Grid,
    pub repeats: usize,
    pub seed: u64,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub decay_mode: WeightDecayMode,
    /// Worker threads; `None` uses every logical core.
    pub jobs: Option<usize>,
    /// Write measured wall time to `runtime_s`; when false the column is 0 so
    /// that reruns produce identical bytes.
    pub record_runtime: bool,
}

impl ExperimentConfig {
    pub fn new(dataset_name: impl Into<String>, grid: Grid) -> Self {
        Self {
            dataset_name: dataset_name.into(),
            grid,
            repeats: 10,
            seed: 0,
            epochs: TrainPlan::default().epochs,
            hidden_dim: GnnConfig::DEFAULT_HIDDEN,
            decay_mode: WeightDecayMode::Decoupled,
            jobs: None,
            record_runtime: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden dimension must be at least 1".into()));
        }
        if self.dataset_name.is_empty() || self.dataset_name.contains([',', '\n', '"']) {
            return Err(Error::Config(format!(
                "dataset name {:?} is empty or not CSV-safe",
                self.dataset_name
            )));
        }
        let g = &self.grid;
        let lens = [
            g.backbones.len(),
            g.mechanisms.len(),
            g.features.len(),
            g.objectives.len(),
            g.eps_x.len(),
            g.eps_y.len(),
            g.kx.len(),
            g.ky.len(),
            g.learning_rates.len(),
            g.weight_decays.len(),
            g.dropouts.len(),
        ];
        if lens.contains(&0) {
            return Err(Error::Config(
                "every grid axis needs at least one value".into(),
            ));
        }
        for cell in g.cells() {
            self.plan(&cell, 0).validate()?;
        }
        Ok(())
    }

    /// Seed shared by repeat `r` of every cell, so cells are compared on the
    /// same splits and initializations.
    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        derive_seed(self.seed, &format!("repeat/{repeat}"))
    }

    pub fn plan(&self, cell: &Cell, repeat: usize) -> TrainPlan {
        TrainPlan {
            eps_x: cell.eps_x.unwrap_or(Epsilon::INFINITY),
            eps_y: cell.eps_y,
            kx: cell.kx,
            ky: cell.ky,
            epochs: self.epochs,
            learning_rate: cell.learning_rate,
            weight_decay: cell.weight_decay,
            decay_mode: self.decay_mode,
            dropout: cell.dropout,
            seed: self.repeat_seed(repeat),
        }
    }

    pub fn spec(&self, cell: &Cell, repeat: usize) -> RunSpec {
        RunSpec {
            backbone: cell.backbone,
            mechanism: cell.mechanism.unwrap_or(FeatureMechanism::MultiBit),
            features: cell.features,
            objective: cell.objective,
            hidden_dim: self.hidden_dim,
            plan: self.plan(cell, repeat),
            split_seed: derive_seed(self.repeat_seed(repeat), "split"),
        }
    }
}

/// Runs every repeat of `cell` and summarizes them.
pub fn run_cell(
    dataset: &Dataset,
    config: &ExperimentConfig,
    cell: &Cell,
) -> Result<(ResultRow, Vec<RunReport>)> {
    let reports = (0..config.repeats)
        .into_par_iter()
        .map(|r| run_once(dataset, &config.spec(cell, r)))
        .collect::<Result<Vec<_>>>()?;
    let row = ResultRow::new(config, cell, &reports)?;
    Ok((row, reports))
}

/// Runs every cell not already present in the CSV at `out`, appending rows in
/// grid order and writing one manifest per new cell. Returns the new rows.
pub fn sweep(dataset: &Dataset, config: &ExperimentConfig, out: &Path) -> Result<Vec<ResultRow>> {
    config.validate()?;
    report::sweep_to(dataset, config, out)
}
