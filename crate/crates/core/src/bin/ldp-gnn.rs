use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ldp_gnn::experiment::{
    preset, read_results, run_once, sweep, write_plotdata, Cell, ExperimentConfig, FeatureKind,
    Grid,
};
use ldp_gnn::graph::{generate_sbm, load_graph, write_edges, write_nodes, Dataset, SbmParams};
use ldp_gnn::ldp::{Epsilon, FeatureMechanism};
use ldp_gnn::nn::{write_checkpoint, Backbone, GnnConfig, WeightDecayMode};
use ldp_gnn::train::{Objective, TrainPlan};
use ldp_gnn::{Error, Result};

const EDGES_FILE: &str = "edges.tsv";
const NODES_FILE: &str = "nodes.tsv";

#[derive(Parser)]
#[command(
    name = "ldp-gnn",
    version,
    about = "Locally private GNN training experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and print its statistics.
    Ingest {
        /// Directory holding edges.tsv and nodes.tsv.
        #[arg(long)]
        dataset: PathBuf,
        /// Write a normalized copy of the dataset here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a planted-partition graph.
    Synth {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0.02)]
        p_in: f64,
        #[arg(long, default_value_t = 0.001)]
        p_out: f64,
        /// Class signal of the features, in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        signal: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration over several repeats.
    Train {
        #[command(flatten)]
        grid: GridArgs,
        /// Save the selected weights of the first repeat.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train every combination of the comma-separated flag values.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Turn a results CSV into long-form plot data.
    Report {
        /// Results CSV written by `train` or `sweep`.
        #[arg(long)]
        results: PathBuf,
        /// Column used as the x axis.
        #[arg(long, default_value = "eps_x")]
        x: String,
        /// Column that distinguishes series.
        #[arg(long, default_value = "eps_y")]
        series: String,
        /// Output TSV; the table is printed when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Directory holding edges.tsv and nodes.tsv.
    #[arg(long)]
    dataset: PathBuf,
    /// Name for the results; defaults to the directory name. Selects presets.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "sage")]
    backbone: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "mb")]
    mechanism: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "private")]
    features: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "drop")]
    objective: Vec<String>,
    /// Feature budgets; `inf` disables feature randomization.
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    eps_x: Vec<String>,
    /// Label budgets; `inf` disables label randomization.
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    eps_y: Vec<String>,
    /// Feature propagation steps (dataset preset, else 0).
    #[arg(long, value_delimiter = ',')]
    kx: Vec<usize>,
    /// Label propagation steps (dataset preset, else 0).
    #[arg(long, value_delimiter = ',')]
    ky: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    lr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    wd: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    dropout: Vec<f64>,
    #[arg(long, default_value = "decoupled")]
    wd_mode: String,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write 0 to runtime_s so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Results CSV; existing rows are kept and their cells skipped.
    #[arg(long)]
    out: PathBuf,
}

fn parse_all<T: std::str::FromStr<Err = Error>>(values: &[String]) -> Result<Vec<T>> {
    values.iter().map(|v| v.parse()).collect()
}

fn load_dir(dir: &Path) -> Result<Dataset> {
    load_graph(&dir.join(EDGES_FILE), &dir.join(NODES_FILE))
}

impl GridArgs {
    fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_name()
                .map_or("dataset".into(), |n| n.to_string_lossy().to_lowercase())
        })
    }

    fn config(&self) -> Result<ExperimentConfig> {
        let name = self.dataset_name();
        let defaults = TrainPlan::default();
        let p = preset(&name);
        let or = |given: &[f64], fallback: f64| {
            if given.is_empty() {
                vec![fallback]
            } else {
                given.to_vec()
            }
        };
        let grid = Grid {
            backbones: parse_all::<Backbone>(&self.backbone)?,
            mechanisms: parse_all::<FeatureMechanism>(&self.mechanism)?,
            features: parse_all::<FeatureKind>(&self.features)?,
            objectives: parse_all::<Objective>(&self.objective)?,
            eps_x: parse_all::<Epsilon>(&self.eps_x)?,
            eps_y: parse_all::<Epsilon>(&self.eps_y)?,
            kx: if self.kx.is_empty() {
                vec![p.map_or(0, |p| p.kx)]
            } else {
                self.kx.clone()
            },
            ky: if self.ky.is_empty() {
                vec![p.map_or(0, |p| p.ky)]
            } else {
                self.ky.clone()
            },
            learning_rates: or(
                &self.lr,
                p.map_or(defaults.learning_rate, |p| p.learning_rate),
            ),
            weight_decays: or(
                &self.wd,
                p.map_or(defaults.weight_decay, |p| p.weight_decay),
            ),
            dropouts: or(&self.dropout, p.map_or(defaults.dropout, |p| p.dropout)),
        };
        let mut config = ExperimentConfig::new(name, grid);
        config.repeats = self.repeats;
        config.seed = self.seed;
        config.epochs = self.epochs;
        config.hidden_dim = self.hidden;
        config.decay_mode = self.wd_mode.parse::<WeightDecayMode>()?;
        config.jobs = self.jobs;
        config.record_runtime = !self.no_timing;
        config.validate()?;
        Ok(config)
    }
}

fn print_dataset(d: &Dataset) {
    let labeled = d.labels.clean().iter().filter(|y| y.is_some()).count();
    println!("nodes\t{}", d.graph.num_nodes());
    println!("edges\t{}", d.graph.num_edges());
    println!("average_degree\t{:.3}", d.graph.average_degree());
    println!("features\t{}", d.features.dim());
    println!("classes\t{}", d.labels.num_classes());
    println!("labeled\t{labeled}");
}

fn write_dir(d: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_edges(&d.graph, &dir.join(EDGES_FILE))?;
    write_nodes(&d.features, &d.labels, &dir.join(NODES_FILE))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { dataset, out } => {
            let d = load_dir(&dataset)?;
            d.graph.validate()?;
            print_dataset(&d);
            if let Some(out) = out {
                let normalized = Dataset {
                    features: ldp_gnn::graph::normalize_features(&d.features),
                    ..d
                };
                write_dir(&normalized, &out)?;
            }
        }
        Command::Synth {
            nodes,
            classes,
            dim,
            p_in,
            p_out,
            signal,
            seed,
            out,
        } => {
            let d = generate_sbm(&SbmParams {
                num_nodes: nodes,
                num_classes: classes,
                dim,
                p_in,
                p_out,
                feature_signal: signal,
                seed,
            })?;
            write_dir(&d, &out)?;
            print_dataset(&d);
        }
        Command::Train { grid, checkpoint } => {
            let config = grid.config()?;
            let cells = config.grid.cells();
            let [cell] = cells.as_slice() else {
                return Err(Error::Config(format!(
                    "train takes one value per flag but the flags describe {} cells; use sweep",
                    cells.len()
                )));
            };
            let dataset = load_dir(&grid.dataset)?;
            let rows = sweep(&dataset, &config, &grid.out)?;
            for row in &rows {
                println!(
                    "acc_mean\t{:.4}\nacc_ci95\t{:.4}",
                    row.acc_mean, row.acc_ci95
                );
            }
            if rows.is_empty() {
                println!("cell already present in {}", grid.out.display());
            }
            if let Some(path) = checkpoint {
                save_first_repeat(&dataset, &config, cell, &path)?;
            }
        }
        Command::Sweep { grid } => {
            let config = grid.config()?;
            let dataset = load_dir(&grid.dataset)?;
            let rows = sweep(&dataset, &config, &grid.out)?;
            println!("{} new rows in {}", rows.len(), grid.out.display());
        }
        Command::Report {
            results,
            x,
            series,
            out,
        } => {
            // Validates the schema before any output is produced.
            read_results(&results)?;
            match out {
                Some(out) => {
                    let n = write_plotdata(&results, &x, &series, &out)?;
                    println!("{n} rows in {}", out.display());
                }
                None => {
                    ldp_gnn::experiment::emit_plotdata(
                        std::fs::File::open(&results)?,
                        &x,
                        &series,
                        std::io::stdout().lock(),
                    )?;
                }
            }
        }
    }
    Ok(())
}

fn save_first_repeat(
    dataset: &Dataset,
    config: &ExperimentConfig,
    cell: &Cell,
    path: &Path,
) -> Result<()> {
    let spec = config.spec(cell, 0);
    let report = run_once(dataset, &spec)?;
    let mut gnn = GnnConfig::new(
        spec.backbone,
        dataset.labels.num_classes(),
        spec.plan.dropout,
    )?;
    gnn.hidden_dim = spec.hidden_dim;
    write_checkpoint(path, &gnn, &report.outcome.weights)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
