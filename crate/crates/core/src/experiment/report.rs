//! Results CSV, per-cell run manifests and long-form plot data.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::BOOTSTRAP_RESAMPLES;
use super::{bootstrap_ci, dataset_fingerprint, run_cell, Cell, ExperimentConfig, RunReport};
use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::ldp::rng::derive_seed;

/// Bumped whenever [`CSV_COLUMNS`] changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Columns of the results CSV, in order.
pub const CSV_COLUMNS: [&str; 17] = [
    "dataset",
    "backbone",
    "mechanism",
    "feature_kind",
    "eps_x",
    "eps_y",
    "kx",
    "ky",
    "lr",
    "wd",
    "dropout",
    "repeats",
    "acc_mean",
    "acc_ci95",
    "guard_infeasible",
    "runtime_s",
    "objective",
];

/// Columns that identify a cell; a CSV never holds two rows agreeing on all.
const KEY_COLUMNS: [&str; 13] = [
    "dataset",
    "backbone",
    "mechanism",
    "feature_kind",
    "eps_x",
    "eps_y",
    "kx",
    "ky",
    "lr",
    "wd",
    "dropout",
    "repeats",
    "objective",
];

/// Summary of one cell over its repeats. Coordinates are kept in their CSV
/// spelling.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub backbone: String,
    pub mechanism: String,
    pub feature_kind: String,
    pub eps_x: String,
    pub eps_y: String,
    pub kx: usize,
    pub ky: usize,
    pub lr: f64,
    pub wd: f64,
    pub dropout: f64,
    pub repeats: usize,
    pub acc_mean: f64,
    pub acc_ci95: f64,
    /// Repeats whose model selection fell back past the accuracy cap.
    pub guard_infeasible: usize,
    pub runtime_s: f64,
    pub objective: String,
    /// Per-repeat test accuracies, in repeat order. Not part of the CSV.
    pub accuracies: Vec<f64>,
}

impl ResultRow {
    /// Coordinates of `cell` with empty statistics.
    pub(super) fn coordinates(config: &ExperimentConfig, cell: &Cell) -> Self {
        Self {
            dataset: config.dataset_name.clone(),
            backbone: cell.backbone.to_string(),
            mechanism: cell.mechanism.map_or("none".into(), |m| m.to_string()),
            feature_kind: cell.features.to_string(),
            eps_x: cell.eps_x.map_or("none".into(), |e| e.to_string()),
            eps_y: cell.eps_y.to_string(),
            kx: cell.kx,
            ky: cell.ky,
            lr: cell.learning_rate,
            wd: cell.weight_decay,
            dropout: cell.dropout,
            repeats: config.repeats,
            acc_mean: 0.0,
            acc_ci95: 0.0,
            guard_infeasible: 0,
            runtime_s: 0.0,
            objective: cell.objective.to_string(),
            accuracies: Vec::new(),
        }
    }

    pub(super) fn new(
        config: &ExperimentConfig,
        cell: &Cell,
        reports: &[RunReport],
    ) -> Result<Self> {
        let mut row = Self::coordinates(config, cell);
        row.accuracies = reports.iter().map(|r| r.outcome.test_accuracy).collect();
        row.repeats = reports.len();
        row.guard_infeasible = reports
            .iter()
            .filter(|r| r.outcome.history.guard_infeasible)
            .count();
        if config.record_runtime {
            row.runtime_s = reports.iter().map(|r| r.runtime_s).sum();
        }
        let seed = derive_seed(config.seed, &format!("bootstrap/{}", row.key()));
        (row.acc_mean, row.acc_ci95) = bootstrap_ci(&row.accuracies, BOOTSTRAP_RESAMPLES, seed)?;
        Ok(row)
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.dataset.clone(),
            self.backbone.clone(),
            self.mechanism.clone(),
            self.feature_kind.clone(),
            self.eps_x.clone(),
            self.eps_y.clone(),
            self.kx.to_string(),
            self.ky.to_string(),
            self.lr.to_string(),
            self.wd.to_string(),
            self.dropout.to_string(),
            self.repeats.to_string(),
            format!("{:.6}", self.acc_mean),
            format!("{:.6}", self.acc_ci95),
            self.guard_infeasible.to_string(),
            format!("{:.3}", self.runtime_s),
            self.objective.clone(),
        ]
    }

    /// Identity of the cell this row summarizes.
    pub fn key(&self) -> String {
        let fields = self.fields();
        key_of(|name| {
            let i = CSV_COLUMNS
                .iter()
                .position(|c| *c == name)
                .expect("key column");
            fields[i].clone()
        })
    }

    fn from_record(header: &csv::StringRecord, rec: &csv::StringRecord) -> Result<Self> {
        let get = |name: &str| -> Result<&str> {
            header
                .iter()
                .position(|h| h == name)
                .and_then(|i| rec.get(i))
                .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
        };
        fn num<T: std::str::FromStr>(name: &str, s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| Error::Schema(format!("column {name:?}: cannot parse {s:?}")))
        }
        Ok(Self {
            dataset: get("dataset")?.into(),
            backbone: get("backbone")?.into(),
            mechanism: get("mechanism")?.into(),
            feature_kind: get("feature_kind")?.into(),
            eps_x: get("eps_x")?.into(),
            eps_y: get("eps_y")?.into(),
            kx: num("kx", get("kx")?)?,
            ky: num("ky", get("ky")?)?,
            lr: num("lr", get("lr")?)?,
            wd: num("wd", get("wd")?)?,
            dropout: num("dropout", get("dropout")?)?,
            repeats: num("repeats", get("repeats")?)?,
            acc_mean: num("acc_mean", get("acc_mean")?)?,
            acc_ci95: num("acc_ci95", get("acc_ci95")?)?,
            guard_infeasible: num("guard_infeasible", get("guard_infeasible")?)?,
            runtime_s: num("runtime_s", get("runtime_s")?)?,
            objective: get("objective")?.into(),
            accuracies: Vec::new(),
        })
    }
}

fn key_of(mut field: impl FnMut(&str) -> String) -> String {
    KEY_COLUMNS
        .iter()
        .map(|c| field(c))
        .collect::<Vec<_>>()
        .join(",")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(e.to_string())
}

fn check_header(header: &csv::StringRecord) -> Result<()> {
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Schema(format!(
            "results header {:?} does not match schema version {CSV_SCHEMA_VERSION}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// Reads a results CSV written by a sweep.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    check_header(&header)?;
    reader
        .records()
        .map(|r| ResultRow::from_record(&header, &r.map_err(csv_err)?))
        .collect()
}

/// Directory holding the manifests of the cells in the CSV at `csv_path`.
pub fn manifest_dir(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifests")
}

fn manifest_path(dir: &Path, config: &ExperimentConfig, row: &ResultRow) -> PathBuf {
    let mut h = Sha256::new();
    h.update(row.key().as_bytes());
    h.update(config.seed.to_le_bytes());
    let digest: String = h.finalize()[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    dir.join(format!("{digest}.txt"))
}

fn manifest_text(
    config: &ExperimentConfig,
    cell: &Cell,
    row: &ResultRow,
    reports: &[RunReport],
    fingerprint: &str,
) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("csv_schema", &CSV_SCHEMA_VERSION);
    kv("cell_key", &row.key());
    kv("dataset", &row.dataset);
    kv("dataset_sha256", &fingerprint);
    kv("backbone", &row.backbone);
    kv("mechanism", &row.mechanism);
    kv("feature_kind", &row.feature_kind);
    kv("objective", &row.objective);
    kv("hidden_dim", &config.hidden_dim);
    kv("master_seed", &config.seed);
    kv("repeats", &row.repeats);
    kv(
        "bootstrap",
        &format!("mean, percentile 2.5/97.5, {BOOTSTRAP_RESAMPLES} resamples"),
    );
    kv("acc_mean", &format!("{:.6}", row.acc_mean));
    kv("acc_ci95", &format!("{:.6}", row.acc_ci95));
    kv("guard_infeasible", &row.guard_infeasible);
    for (r, report) in reports.iter().enumerate() {
        let spec = config.spec(cell, r);
        for (k, v) in spec.plan.manifest_entries() {
            kv(&format!("repeat.{r}.plan.{k}"), &v);
        }
        kv(&format!("repeat.{r}.split_seed"), &spec.split_seed);
        kv(
            &format!("repeat.{r}.test_acc"),
            &report.outcome.test_accuracy,
        );
        let h = &report.outcome.history;
        kv(&format!("repeat.{r}.selected_epoch"), &h.selected);
        kv(
            &format!("repeat.{r}.val_loss"),
            &h.epochs[h.selected].val_loss,
        );
        kv(&format!("repeat.{r}.acc_star"), &h.acc_star);
        kv(&format!("repeat.{r}.guard_infeasible"), &h.guard_infeasible);
        kv(
            &format!("repeat.{r}.clamped_terms"),
            &report.outcome.clamped_terms,
        );
        let mut groups: BTreeMap<(String, String, u32, u32), usize> = BTreeMap::new();
        for b in report.ledger.nodes() {
            let fmt =
                |e: Option<crate::ldp::Epsilon>| e.map_or("none".to_string(), |e| e.to_string());
            *groups
                .entry((
                    fmt(b.feature),
                    fmt(b.label),
                    b.feature_invocations,
                    b.label_invocations,
                ))
                .or_default() += 1;
        }
        for (i, ((fx, fy, ix, iy), count)) in groups.into_iter().enumerate() {
            kv(
                &format!("repeat.{r}.ledger.{i}"),
                &format!("eps_x={fx} eps_y={fy} feature_calls={ix} label_calls={iy} nodes={count}"),
            );
        }
        kv(
            &format!("repeat.{r}.ledger.max_total"),
            &report.ledger.max_total(),
        );
    }
    s
}

fn existing_keys(path: &Path) -> Result<HashSet<String>> {
    if !path.exists() || fs::metadata(path)?.len() == 0 {
        return Ok(HashSet::new());
    }
    Ok(read_results(path)?.iter().map(ResultRow::key).collect())
}

pub(super) fn sweep_to(
    dataset: &Dataset,
    config: &ExperimentConfig,
    out: &Path,
) -> Result<Vec<ResultRow>> {
    let done = existing_keys(out)?;
    let cells: Vec<Cell> = config
        .grid
        .cells()
        .into_iter()
        .filter(|c| !done.contains(&ResultRow::coordinates(config, c).key()))
        .collect();
    if cells.is_empty() && !done.is_empty() {
        log::info!("every cell is already in {}", out.display());
        return Ok(Vec::new());
    }

    let fresh = done.is_empty();
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut writer = csv::WriterBuilder::new().from_writer(BufWriter::new(file));
    if fresh {
        writer.write_record(CSV_COLUMNS).map_err(csv_err)?;
        writer.flush()?;
    }
    let mdir = manifest_dir(out);
    fs::create_dir_all(&mdir)?;
    let fingerprint = dataset_fingerprint(dataset);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = config.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let (tx, rx) = mpsc::channel::<(usize, Result<(ResultRow, Vec<RunReport>)>)>();
    let total = cells.len();
    let cells = &cells;
    thread::scope(|scope| {
        // Single consumer: rows are written strictly in grid order, each
        // flushed as soon as it and every earlier cell have finished.
        let consumer = scope.spawn(move || -> Result<Vec<ResultRow>> {
            let mut pending = BTreeMap::new();
            let mut next = 0;

            let mut rows = Vec::with_capacity(total);
            let mut first_err = None;
            for (i, result) in rx {
                pending.insert(i, result);
                while let Some(result) = pending.remove(&next) {
                    next += 1;
                    match result {
                        Ok((row, reports)) => {
                            let text = manifest_text(
                                config,
                                &cells[next - 1],
                                &row,
                                &reports,
                                &fingerprint,
                            );
                            fs::write(manifest_path(&mdir, config, &row), text)?;
                            writer.write_record(row.fields()).map_err(csv_err)?;
                            writer.flush()?;
                            log::info!(
                                "cell {next}/{total}: {} acc={:.4}±{:.4}",
                                row.key(),
                                row.acc_mean,
                                row.acc_ci95
                            );
                            rows.push(row);
                        }
                        Err(e) => {
                            log::error!("cell {next}/{total} failed: {e}");
                            first_err.get_or_insert(e);
                        }
                    }
                }
            }
            match first_err {
                Some(e) => Err(e),
                None => Ok(rows),
            }
        });
        pool.install(|| {
            cells
                .par_iter()
                .enumerate()
                .for_each_with(tx, |tx, (i, cell)| {
                    let _ = tx.send((i, run_cell(dataset, config, cell)));
                });
        });
        consumer.join().expect("results writer panicked")
    })
}

/// Parses a coordinate for ordering: numbers (with `inf`) first, then text.
fn sort_key(s: &str) -> (u8, f64, String) {
    match s {
        "inf" => (0, f64::INFINITY, String::new()),
        _ => match s.parse::<f64>() {
            Ok(x) => (0, x, String::new()),
            Err(_) => (1, 0.0, s.to_string()),
        },
    }
}

/// Converts a results CSV into long-form TSV with columns `group`, `series`,
/// `x`, `acc_mean`, `acc_ci95`, `repeats`. `x` is taken from column `x_col`
/// and `series` from `series_col`; `group` lists the other coordinates that
/// vary across rows. Returns the number of data rows written.
pub fn emit_plotdata<R: Read, W: Write>(
    results: R,
    x_col: &str,
    series_col: &str,
    out: W,
) -> Result<usize> {
    let mut reader = csv::Reader::from_reader(results);
    let header = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("results have no column {name:?}")))
    };
    let required = ["acc_mean", "acc_ci95", "repeats"];
    let (xi, si) = (col(x_col)?, col(series_col)?);
    let req: Vec<usize> = required.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let records: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;

    let others: Vec<usize> = KEY_COLUMNS
        .iter()
        .filter_map(|c| header.iter().position(|h| h == *c))
        .filter(|&i| i != xi && i != si && header.get(i) != Some("repeats"))
        .filter(|&i| {
            records
                .iter()
                .map(|r| r.get(i).unwrap_or(""))
                .collect::<HashSet<_>>()
                .len()
                > 1
        })
        .collect();
    let mut lines: Vec<(String, String, String, Vec<String>)> = records
        .iter()
        .map(|r| {
            let field = |i: usize| r.get(i).unwrap_or("").to_string();
            let group = others
                .iter()
                .map(|&i| format!("{}={}", &header[i], field(i)))
                .collect::<Vec<_>>()
                .join(";");
            (
                group,
                field(si),
                field(xi),
                req.iter().map(|&i| field(i)).collect(),
            )
        })
        .collect();
    lines.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| {
                sort_key(&a.1)
                    .partial_cmp(&sort_key(&b.1))
                    .expect("finite order")
            })
            .then_with(|| {
                sort_key(&a.2)
                    .partial_cmp(&sort_key(&b.2))
                    .expect("finite order")
            })
    });

    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    w.write_record(["group", "series", "x", "acc_mean", "acc_ci95", "repeats"])
        .map_err(csv_err)?;
    for (group, series, x, vals) in &lines {
        let mut rec = vec![group.as_str(), series.as_str(), x.as_str()];
        rec.extend(vals.iter().map(String::as_str));
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(lines.len())
}

/// File-to-file wrapper around [`emit_plotdata`].
pub fn write_plotdata(results: &Path, x_col: &str, series_col: &str, out: &Path) -> Result<usize> {
    emit_plotdata(
        File::open(results)?,
        x_col,
        series_col,
        BufWriter::new(File::create(out)?),
    )
}
