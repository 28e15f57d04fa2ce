//! C ABI over `ldp-gnn`.
//!
//! Every fallible function returns an [`LdpStatus`]; on failure the message
//! is kept per thread and can be read with [`ldp_last_error_message`].
//! Datasets and run results are opaque handles released with their `_free`
//! function. Budgets may be `INFINITY` to skip randomization.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ldp_gnn::experiment::{run_once, FeatureKind, RunReport, RunSpec};
use ldp_gnn::graph::{generate_sbm, load_graph, Dataset, SbmParams};
use ldp_gnn::ldp::rng::node_rng;
use ldp_gnn::ldp::{
    multibit_encode, multibit_rectify, optimal_m, randomized_response, Epsilon, FeatureMechanism,
    MechanismParams,
};
use ldp_gnn::nn::{Backbone, WeightDecayMode};
use ldp_gnn::train::{Objective, TrainPlan};
use ldp_gnn::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Structure = 4,
    Domain = 5,
    Shape = 6,
    Numeric = 7,
    Budget = 8,
    Config = 9,
    Schema = 10,
    Checkpoint = 11,
    Io = 12,
    Panic = 13,
}

impl From<&Error> for LdpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => Self::Parse,
            Error::Structure(_) => Self::Structure,
            Error::Argument(_) => Self::InvalidArgument,
            Error::Domain { .. } => Self::Domain,
            Error::Shape(_) => Self::Shape,
            Error::Numeric(_) => Self::Numeric,
            Error::Budget(_) => Self::Budget,
            Error::Config(_) => Self::Config,
            Error::Schema(_) => Self::Schema,
            Error::Checkpoint(_) => Self::Checkpoint,
            Error::Io(_) => Self::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: LdpStatus, msg: impl Into<String>) -> LdpStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), LdpStatusError>) -> LdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LdpStatus::Ok
        }
        Ok(Err(LdpStatusError(status, msg))) => fail(status, msg),
        Err(_) => fail(LdpStatus::Panic, "internal panic"),
    }
}

struct LdpStatusError(LdpStatus, String);

impl From<Error> for LdpStatusError {
    fn from(e: Error) -> Self {
        Self(LdpStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> LdpStatusError {
    LdpStatusError(LdpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> LdpStatusError {
    LdpStatusError(LdpStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, LdpStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: guaranteed by the caller.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], LdpStatusError> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: guaranteed by the caller.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn slice_out<'a, T>(
    p: *mut T,
    len: usize,
    what: &str,
) -> Result<&'a mut [T], LdpStatusError> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: guaranteed by the caller.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn epsilon(value: f64, what: &str) -> Result<Epsilon, LdpStatusError> {
    if value == f64::INFINITY {
        Ok(Epsilon::INFINITY)
    } else {
        Epsilon::new(value).map_err(|e| invalid(format!("{what}: {e}")))
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns the full message length in bytes,
/// excluding the terminator. Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ldp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` holds at least `len > n` bytes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Opaque loaded or generated dataset.
pub struct LdpDataset {
    inner: Dataset,
}

/// Loads a dataset from an edge file and a node file.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_load(
    edges_path: *const c_char,
    nodes_path: *const c_char,
    out: *mut *mut LdpDataset,
) -> LdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: guaranteed by the caller.
        let (edges, nodes) = unsafe {
            (
                path_arg(edges_path, "edges_path")?,
                path_arg(nodes_path, "nodes_path")?,
            )
        };
        let inner = load_graph(edges, nodes)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(LdpDataset { inner })) };
        Ok(())
    })
}

/// Parameters of the planted-partition generator.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LdpSbmParams {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub dim: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_signal: f64,
    pub seed: u64,
}

/// Generates a planted-partition dataset.
///
/// # Safety
/// `params` must be readable and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_generate_sbm(
    params: *const LdpSbmParams,
    out: *mut *mut LdpDataset,
) -> LdpStatus {
    guard(|| {
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: non-null and readable per the contract.
        let p = unsafe { *params };
        let inner = generate_sbm(&SbmParams {
            num_nodes: p.num_nodes,
            num_classes: p.num_classes,
            dim: p.dim,
            p_in: p.p_in,
            p_out: p.p_out,
            feature_signal: p.feature_signal,
            seed: p.seed,
        })?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(LdpDataset { inner })) };
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_num_nodes(dataset: *const LdpDataset) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { dataset.as_ref() }.map_or(0, |d| d.inner.graph.num_nodes())
}

/// Undirected edges after deduplication.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_num_edges(dataset: *const LdpDataset) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { dataset.as_ref() }.map_or(0, |d| d.inner.graph.num_edges())
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_num_features(dataset: *const LdpDataset) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { dataset.as_ref() }.map_or(0, |d| d.inner.features.dim())
}

/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_num_classes(dataset: *const LdpDataset) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { dataset.as_ref() }.map_or(0, |d| d.inner.labels.num_classes())
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ldp_dataset_free(dataset: *mut LdpDataset) {
    if !dataset.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Per-coordinate sample count minimizing the worst-case variance.
#[no_mangle]
pub extern "C" fn ldp_optimal_m(epsilon: f64, d: usize) -> usize {
    optimal_m(epsilon, d)
}

/// Encodes one feature vector with the multi-bit mechanism. Writes `d`
/// entries in {-1, 0, +1} to `out`. The draw is determined by `seed` and
/// `node`.
///
/// # Safety
/// `x` must be readable and `out` writable for `d` elements.
#[no_mangle]
pub unsafe extern "C" fn ldp_multibit_encode(
    x: *const f64,
    d: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    m: usize,
    seed: u64,
    node: u64,
    out: *mut i8,
) -> LdpStatus {
    guard(|| {
        // SAFETY: guaranteed by the caller.
        let (x, out) = unsafe { (slice_arg(x, d, "x")?, slice_out(out, d, "out")?) };
        let params = MechanismParams::new(epsilon, m, alpha, beta, d)?;
        let enc = multibit_encode(x, &params, &mut node_rng(seed, "features", node as usize))?;
        out.copy_from_slice(&enc);
        Ok(())
    })
}

/// Server-side unbiased estimate from one encoded vector.
///
/// # Safety
/// `encoded` must be readable and `out` writable for `d` elements.
#[no_mangle]
pub unsafe extern "C" fn ldp_multibit_rectify(
    encoded: *const i8,
    d: usize,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    m: usize,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        // SAFETY: guaranteed by the caller.
        let (enc, out) = unsafe { (slice_arg(encoded, d, "encoded")?, slice_out(out, d, "out")?) };
        if let Some(bad) = enc.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(invalid(format!("encoded entry {bad} outside -1..=1")));
        }
        let params = MechanismParams::new(epsilon, m, alpha, beta, d)?;
        out.copy_from_slice(&multibit_rectify(enc, &params));
        Ok(())
    })
}

/// Randomized response over `num_classes` classes.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ldp_randomized_response(
    label: usize,
    epsilon: f64,
    num_classes: usize,
    seed: u64,
    node: u64,
    out: *mut usize,
) -> LdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let y = randomized_response(
            label,
            epsilon,
            num_classes,
            &mut node_rng(seed, "labels", node as usize),
        )?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = y };
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdpBackbone {
    Gcn = 0,
    Sage = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdpMechanism {
    MultiBit = 0,
    OneBit = 1,
    Laplace = 2,
    AnalyticGaussian = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdpFeatureKind {
    Private = 0,
    Ones = 1,
    DegreeOneHot = 2,
    Random = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdpObjective {
    CrossEntropy = 0,
    ForwardCorrection = 1,
    Drop = 2,
}

/// One training run. Fill with [`ldp_run_config_default`] and override.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LdpRunConfig {
    pub backbone: LdpBackbone,
    pub mechanism: LdpMechanism,
    pub features: LdpFeatureKind,
    pub objective: LdpObjective,
    pub eps_x: f64,
    pub eps_y: f64,
    pub kx: usize,
    pub ky: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Non-zero selects weight decay added to the gradient instead of
    /// decoupled shrinkage.
    pub coupled_weight_decay: u8,
    pub dropout: f64,
    pub seed: u64,
    pub split_seed: u64,
}

/// Library defaults: sage backbone, multi-bit private features, drop
/// objective, infinite budgets, no propagation.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_config_default(out: *mut LdpRunConfig) -> LdpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let plan = TrainPlan::default();
        let cfg = LdpRunConfig {
            backbone: LdpBackbone::Sage,
            mechanism: LdpMechanism::MultiBit,
            features: LdpFeatureKind::Private,
            objective: LdpObjective::Drop,
            eps_x: f64::INFINITY,
            eps_y: f64::INFINITY,
            kx: plan.kx,
            ky: plan.ky,
            epochs: plan.epochs,
            hidden_dim: 16,
            learning_rate: plan.learning_rate,
            weight_decay: plan.weight_decay,
            coupled_weight_decay: 0,
            dropout: plan.dropout,
            seed: 0,
            split_seed: 0,
        };
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = cfg };
        Ok(())
    })
}

fn run_spec(c: &LdpRunConfig) -> Result<RunSpec, LdpStatusError> {
    Ok(RunSpec {
        backbone: match c.backbone {
            LdpBackbone::Gcn => Backbone::Gcn,
            LdpBackbone::Sage => Backbone::Sage,
        },
        mechanism: match c.mechanism {
            LdpMechanism::MultiBit => FeatureMechanism::MultiBit,
            LdpMechanism::OneBit => FeatureMechanism::OneBit,
            LdpMechanism::Laplace => FeatureMechanism::Laplace,
            LdpMechanism::AnalyticGaussian => FeatureMechanism::AnalyticGaussian,
        },
        features: match c.features {
            LdpFeatureKind::Private => FeatureKind::Private,
            LdpFeatureKind::Ones => FeatureKind::Ones,
            LdpFeatureKind::DegreeOneHot => FeatureKind::Ohd,
            LdpFeatureKind::Random => FeatureKind::Rnd,
        },
        objective: match c.objective {
            LdpObjective::CrossEntropy => Objective::CrossEntropy,
            LdpObjective::ForwardCorrection => Objective::ForwardCorrection,
            LdpObjective::Drop => Objective::Drop,
        },
        hidden_dim: c.hidden_dim,
        plan: TrainPlan {
            eps_x: epsilon(c.eps_x, "eps_x")?,
            eps_y: epsilon(c.eps_y, "eps_y")?,
            kx: c.kx,
            ky: c.ky,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            weight_decay: c.weight_decay,
            decay_mode: if c.coupled_weight_decay != 0 {
                WeightDecayMode::Coupled
            } else {
                WeightDecayMode::Decoupled
            },
            dropout: c.dropout,
            seed: c.seed,
        },
        split_seed: c.split_seed,
    })
}

/// Opaque outcome of one run.
pub struct LdpRunResult {
    inner: RunReport,
}

/// Collects features and labels under the configured budgets and trains.
///
/// Enum fields of `config` must hold declared values.
///
/// # Safety
/// `dataset` must be a live handle, `config` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_run(
    dataset: *const LdpDataset,
    config: *const LdpRunConfig,
    out: *mut *mut LdpRunResult,
) -> LdpStatus {
    guard(|| {
        // SAFETY: guaranteed by the caller.
        let dataset = unsafe { dataset.as_ref() }.ok_or_else(|| null("dataset"))?;
        // SAFETY: guaranteed by the caller.
        let config = unsafe { config.as_ref() }.ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if config.hidden_dim == 0 {
            return Err(invalid("hidden_dim must be at least 1"));
        }
        let inner = run_once(&dataset.inner, &run_spec(config)?)?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(Box::new(LdpRunResult { inner })) };
        Ok(())
    })
}

/// Clean-label test accuracy at the selected epoch; NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_test_accuracy(result: *const LdpRunResult) -> f64 {
    // SAFETY: guaranteed by the caller.
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.inner.outcome.test_accuracy)
}

/// Index of the selected epoch.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_selected_epoch(result: *const LdpRunResult) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { result.as_ref() }.map_or(0, |r| r.inner.outcome.history.selected)
}

/// 1 when no epoch met the accuracy cap and selection fell back to
/// validation loss alone.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_guard_infeasible(result: *const LdpRunResult) -> u8 {
    // SAFETY: guaranteed by the caller.
    unsafe { result.as_ref() }.map_or(0, |r| u8::from(r.inner.outcome.history.guard_infeasible))
}

/// Number of recorded epochs.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_num_epochs(result: *const LdpRunResult) -> usize {
    // SAFETY: guaranteed by the caller.
    unsafe { result.as_ref() }.map_or(0, |r| r.inner.outcome.history.epochs.len())
}

/// Per-epoch record.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LdpEpochRecord {
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_epoch(
    result: *const LdpRunResult,
    epoch: usize,
    out: *mut LdpEpochRecord,
) -> LdpStatus {
    guard(|| {
        // SAFETY: guaranteed by the caller.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = r
            .inner
            .outcome
            .history
            .epochs
            .get(epoch)
            .ok_or_else(|| invalid(format!("epoch {epoch} not recorded")))?;
        // SAFETY: `out` is non-null and writable.
        unsafe {
            *out = LdpEpochRecord {
                val_loss: e.val_loss,
                train_acc: e.train_acc,
                val_acc: e.val_acc,
            }
        };
        Ok(())
    })
}

/// Total privacy budget spent by `node` (features plus label); infinite when
/// anything was released unrandomized.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_node_budget(
    result: *const LdpRunResult,
    node: usize,
    out: *mut f64,
) -> LdpStatus {
    guard(|| {
        // SAFETY: guaranteed by the caller.
        let r = unsafe { result.as_ref() }.ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let b = r
            .inner
            .ledger
            .nodes()
            .get(node)
            .ok_or_else(|| invalid(format!("node {node} out of range")))?;
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = b.total() };
        Ok(())
    })
}

/// Releases a run result. Null is ignored.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ldp_run_free(result: *mut LdpRunResult) {
    if !result.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(result) });
    }
}
