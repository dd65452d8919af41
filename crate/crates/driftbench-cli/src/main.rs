//! `driftbench` command-line front end.
//!
//! Subcommands: `generate` renders a stream spec to a CSV stream file,
//! `run` executes one algorithm on one stream, `bench` crosses an algorithm
//! set with a dataset set and emits rank tables, `sweep` runs a
//! parameter-sensitivity sweep, and `report` re-renders a saved bundle.
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftbench::bench::{
    average_rank, average_runtime_rank, run_stream, sensitivity_sweep, AlgorithmConfig, DatasetId,
    RunResult,
};
use driftbench::cse::CseParams;
use driftbench::report::{render_report, ReportBundle, SweepRow, SweepTable};
use driftbench::stream::{generate_stream, load_csv_stream, write_csv_stream, DriftStream, StreamSpec};

#[derive(Parser)]
#[command(
    name = "driftbench",
    version,
    about = "Benchmark harness for extreme-verification-latency stream classifiers",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream from a StreamSpec JSON file and write it
    /// as a CSV stream file (features then an integer label per row).
    Generate {
        /// StreamSpec JSON path.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm over one stream and write the RunResult as JSON.
    Run {
        #[command(flatten)]
        input: StreamInput,
        #[command(flatten)]
        algo: AlgoOpts,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output RunResult JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a set of algorithms across a set of datasets and emit accuracy
    /// and runtime rank tables plus per-run plots.
    Bench {
        /// Comma-separated algorithm names (fast-compose, compose-gmm,
        /// compose-alpha, scargc, mclassification, level-iw).
        #[arg(long, value_delimiter = ',', required = true)]
        algos: Vec<String>,
        /// StreamSpec JSON paths (repeatable).
        #[arg(long = "spec")]
        specs: Vec<PathBuf>,
        /// CSV stream paths (repeatable).
        #[arg(long = "data")]
        data: Vec<PathBuf>,
        #[command(flatten)]
        csv: CsvOpts,
        #[command(flatten)]
        algo: AlgoOpts,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (defaults to $DRIFTBENCH_OUT or ".").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep one tunable parameter of one algorithm over a value list.
    Sweep {
        #[command(flatten)]
        input: StreamInput,
        #[command(flatten)]
        algo: AlgoOpts,
        /// Parameter name: k (compose/scargc), r (mclassification), or
        /// sigma (level-iw).
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (defaults to $DRIFTBENCH_OUT or ".").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a saved results bundle (results.json) to CSV/Markdown/SVG.
    Report {
        /// Bundle JSON path, as written by `bench` or `sweep`.
        #[arg(long)]
        results: PathBuf,
        /// Output directory (defaults to $DRIFTBENCH_OUT or ".").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StreamInput {
    /// StreamSpec JSON path (generated stream).
    #[arg(long, conflicts_with = "data")]
    spec: Option<PathBuf>,
    /// CSV stream path (external dataset).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    csv: CsvOpts,
}

#[derive(Args)]
struct CsvOpts {
    /// Rows of the CSV treated as the initial labeled batch
    /// (defaults to --batch-size).
    #[arg(long)]
    labeled_prefix: Option<usize>,
    /// Unlabeled batch size for CSV streams.
    #[arg(long, default_value_t = 150)]
    batch_size: usize,
    /// Skip one header line in CSV streams.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct AlgoOpts {
    /// Algorithm for `run`/`sweep` (fast-compose, compose-gmm,
    /// compose-alpha, scargc, mclassification, level-iw).
    #[arg(long)]
    algo: Option<String>,
    /// Cluster count for cluster-and-label / SCARGC (default: the stream's
    /// class count).
    #[arg(long)]
    k: Option<usize>,
    /// Compaction percentage for compose-gmm / compose-alpha.
    #[arg(long, default_value_t = 0.35)]
    cp: f64,
    /// Alpha-shape detail level (default: twice the mean nearest-neighbor
    /// distance, per class).
    #[arg(long)]
    alpha: Option<f64>,
    /// GMM components per class for compose-gmm (default: the stream's
    /// modes per class, or 1 for CSV streams).
    #[arg(long)]
    gmm_components: Option<usize>,
    /// Maximum micro-cluster radius for mclassification.
    #[arg(long, default_value_t = 0.1)]
    r: f64,
    /// Min-max normalize features from the initial labeled batch
    /// (mclassification).
    #[arg(long)]
    normalize: bool,
    /// Kernel bandwidth for level-iw.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Ridge regularization for level-iw.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Kernel-center budget for the level-iw density-ratio fit.
    #[arg(long, default_value_t = 100)]
    basis_count: usize,
    /// SCARGC pool size (default: the stream batch size).
    #[arg(long)]
    pool_size: Option<usize>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
    fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn out_dir_or_default(dir: Option<PathBuf>) -> PathBuf {
    dir.or_else(|| std::env::var_os("DRIFTBENCH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn read_spec(path: &Path) -> Result<StreamSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read spec {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::data(format!("invalid stream spec {}: {e}", path.display())))
}

struct LoadedStream {
    stream: DriftStream,
    dataset: DatasetId,
    modes_per_class: Option<usize>,
}

fn load_stream(input: &StreamInput) -> Result<LoadedStream, CliError> {
    match (&input.spec, &input.data) {
        (Some(spec_path), None) => {
            let spec = read_spec(spec_path)?;
            let stream = generate_stream(&spec)
                .map_err(|e| CliError::data(format!("cannot generate stream: {e}")))?;
            Ok(LoadedStream {
                stream,
                dataset: DatasetId::generated(&spec),
                modes_per_class: Some(spec.modes_per_class),
            })
        }
        (None, Some(data_path)) => load_csv(data_path, &input.csv),
        _ => Err(CliError::usage("provide exactly one of --spec or --data")),
    }
}

fn load_csv(path: &Path, csv: &CsvOpts) -> Result<LoadedStream, CliError> {
    let prefix = csv.labeled_prefix.unwrap_or(csv.batch_size);
    let stream = load_csv_stream(path, prefix, csv.batch_size, csv.header)
        .map_err(|e| CliError::data(e.to_string()))?;
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(LoadedStream {
        stream,
        dataset: DatasetId::csv(&path.display().to_string(), &bytes),
        modes_per_class: None,
    })
}

fn build_config(
    name: &str,
    opts: &AlgoOpts,
    stream: &LoadedStream,
) -> Result<AlgorithmConfig, CliError> {
    let k = opts.k.unwrap_or_else(|| stream.stream.class_count());
    let components = opts
        .gmm_components
        .or(stream.modes_per_class)
        .unwrap_or(1);
    match name {
        "fast-compose" => Ok(AlgorithmConfig::Compose {
            k,
            cse: CseParams::identity(),
        }),
        "compose-gmm" => Ok(AlgorithmConfig::Compose {
            k,
            cse: CseParams::gmm(components, opts.cp),
        }),
        "compose-alpha" => Ok(AlgorithmConfig::Compose {
            k,
            cse: CseParams::alpha_shape(opts.alpha, opts.cp),
        }),
        "scargc" => Ok(AlgorithmConfig::Scargc {
            k,
            pool_size: opts.pool_size,
        }),
        "mclassification" => Ok(AlgorithmConfig::Mclassification {
            max_radius: opts.r,
            normalize: opts.normalize,
        }),
        "level-iw" => Ok(AlgorithmConfig::LevelIw {
            sigma: opts.sigma,
            lambda: opts.lambda,
            basis_count: opts.basis_count,
        }),
        other => Err(CliError::usage(format!(
            "unknown algorithm {other:?}; expected one of fast-compose, compose-gmm, \
             compose-alpha, scargc, mclassification, level-iw"
        ))),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::data(format!("serialization failure: {e}")))?;
    text.push('\n');
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate { spec, out } => {
            let spec = read_spec(&spec)?;
            let stream = generate_stream(&spec)
                .map_err(|e| CliError::data(format!("cannot generate stream: {e}")))?;
            let file = std::fs::File::create(&out)
                .map_err(|e| CliError::data(format!("cannot write {}: {e}", out.display())))?;
            write_csv_stream(&stream, std::io::BufWriter::new(file))
                .map_err(|e| CliError::data(format!("cannot write {}: {e}", out.display())))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Run {
            input,
            algo,
            seed,
            out,
        } => {
            let name = algo
                .algo
                .clone()
                .ok_or_else(|| CliError::usage("run requires --algo"))?;
            let loaded = load_stream(&input)?;
            let config = build_config(&name, &algo, &loaded)?;
            let outcome = run_stream(&config, &loaded.stream, loaded.dataset, seed)
                .map_err(|e| CliError::data(e.to_string()))?;
            write_json(&out, &outcome.result)?;
            println!(
                "{} on {}: average accuracy {:.4}, {:.3}s",
                config.id(),
                outcome.result.dataset.label(),
                outcome.result.average_accuracy,
                outcome.result.wall_seconds
            );
            Ok(())
        }
        Command::Bench {
            algos,
            specs,
            data,
            csv,
            algo,
            seed,
            out_dir,
        } => {
            if specs.is_empty() && data.is_empty() {
                return Err(CliError::usage("bench requires at least one --spec or --data"));
            }
            let mut datasets: Vec<LoadedStream> = Vec::new();
            for path in &specs {
                datasets.push(load_stream(&StreamInput {
                    spec: Some(path.clone()),
                    data: None,
                    csv: CsvOpts {
                        labeled_prefix: csv.labeled_prefix,
                        batch_size: csv.batch_size,
                        header: csv.header,
                    },
                })?);
            }
            for path in &data {
                datasets.push(load_csv(path, &csv)?);
            }
            let mut runs: Vec<RunResult> = Vec::new();
            for ds in &datasets {
                for name in &algos {
                    let config = build_config(name, &algo, ds)?;
                    let outcome = run_stream(&config, &ds.stream, ds.dataset.clone(), seed)
                        .map_err(|e| CliError::data(e.to_string()))?;
                    println!(
                        "{} on {}: average accuracy {:.4}, {:.3}s",
                        config.id(),
                        ds.dataset.label(),
                        outcome.result.average_accuracy,
                        outcome.result.wall_seconds
                    );
                    runs.push(outcome.result);
                }
            }
            let bundle = ReportBundle {
                accuracy_ranks: Some(
                    average_rank(&runs).map_err(|e| CliError::data(e.to_string()))?,
                ),
                runtime_ranks: Some(
                    average_runtime_rank(&runs).map_err(|e| CliError::data(e.to_string()))?,
                ),
                sweeps: Vec::new(),
                runs,
            };
            let dir = out_dir_or_default(out_dir);
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
            write_json(&dir.join("results.json"), &bundle)?;
            let written = render_report(&bundle, &dir).map_err(|e| CliError::data(e.to_string()))?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            input,
            algo,
            param,
            values,
            seed,
            out_dir,
        } => {
            let name = algo
                .algo
                .clone()
                .ok_or_else(|| CliError::usage("sweep requires --algo"))?;
            let loaded = load_stream(&input)?;
            let config = build_config(&name, &algo, &loaded)?;
            let runs = sensitivity_sweep(
                &config,
                &loaded.stream,
                &loaded.dataset,
                &param,
                &values,
                seed,
            )
            .map_err(|e| match e {
                driftbench::bench::BenchError::UnknownParameter { .. } => {
                    CliError::usage(e.to_string())
                }
                other => CliError::data(other.to_string()),
            })?;
            let table = SweepTable {
                algorithm: config.id(),
                dataset: loaded.dataset.label().to_string(),
                parameter: param.clone(),
                rows: values
                    .iter()
                    .zip(&runs)
                    .map(|(&value, r)| SweepRow {
                        value,
                        average_accuracy: r.average_accuracy,
                        wall_seconds: r.wall_seconds,
                    })
                    .collect(),
            };
            for row in &table.rows {
                println!(
                    "{param} = {}: average accuracy {:.4} ({:.3}s)",
                    row.value, row.average_accuracy, row.wall_seconds
                );
            }
            let bundle = ReportBundle {
                runs,
                accuracy_ranks: None,
                runtime_ranks: None,
                sweeps: vec![table],
            };
            let dir = out_dir_or_default(out_dir);
            std::fs::create_dir_all(&dir)
                .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
            write_json(&dir.join("results.json"), &bundle)?;
            let written = render_report(&bundle, &dir).map_err(|e| CliError::data(e.to_string()))?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Report { results, out_dir } => {
            let text = std::fs::read_to_string(&results).map_err(|e| {
                CliError::data(format!("cannot read {}: {e}", results.display()))
            })?;
            let bundle: ReportBundle = serde_json::from_str(&text).map_err(|e| {
                CliError::data(format!("invalid results bundle {}: {e}", results.display()))
            })?;
            let dir = out_dir_or_default(out_dir);
            let written = render_report(&bundle, &dir).map_err(|e| CliError::data(e.to_string()))?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}
