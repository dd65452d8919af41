//! Benchmark harness: runs (algorithm, stream) pairs under the EVL
//! protocol, recording per-batch prequential accuracy and wall-clock
//! runtime, and aggregates average ranks and parameter-sensitivity sweeps.
//!
//! Algorithms receive the initial labeled batch once and afterwards see
//! nothing but feature batches; accuracy is scored against the stream's
//! hidden labels only after each batch's predictions have been emitted.
//! Timed sections cover algorithm compute alone.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::{ComposeError, ComposeLearner};
use crate::cse::{CseMethod, CseParams};
use crate::leveliw::{LevelIwError, LevelIwLearner, LevelIwParams};
use crate::mclassification::{MClassificationError, MClassifier};
use crate::scargc::{ScargcError, ScargcLearner};
use crate::stream::DriftStream;
use crate::stream::StreamSpec;
use crate::util::mix_seed;
use crate::{Label, Point};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("algorithm requires 2-d data but the stream has dimension {0}")]
    DimensionalMismatch(usize),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Scargc(#[from] ScargcError),
    #[error(transparent)]
    MClassification(#[from] MClassificationError),
    #[error(transparent)]
    LevelIw(#[from] LevelIwError),
    #[error(transparent)]
    Stream(#[from] crate::stream::StreamError),
    #[error("parameter {parameter:?} is not tunable for algorithm {algorithm}")]
    UnknownParameter {
        algorithm: String,
        parameter: String,
    },
    #[error("missing result for algorithm {algorithm} on dataset {dataset}")]
    MissingCell { algorithm: String, dataset: String },
    #[error("duplicate result for algorithm {algorithm} on dataset {dataset}")]
    DuplicateCell { algorithm: String, dataset: String },
    #[error("no results to rank")]
    NoResults,
}

/// Full parameterization of one algorithm; doubles as the configuration
/// fingerprint stored in run results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AlgorithmConfig {
    /// COMPOSE; the CSE method selects the variant (identity extraction is
    /// FAST COMPOSE).
    Compose { k: usize, cse: CseParams },
    Scargc {
        k: usize,
        /// Defaults to the stream batch size when unset.
        pool_size: Option<usize>,
    },
    Mclassification {
        max_radius: f64,
        /// Min-max normalize features using the initial labeled batch.
        normalize: bool,
    },
    LevelIw {
        sigma: f64,
        lambda: f64,
        basis_count: usize,
    },
}

impl AlgorithmConfig {
    pub fn fast_compose(k: usize) -> Self {
        AlgorithmConfig::Compose {
            k,
            cse: CseParams::identity(),
        }
    }

    pub fn compose_gmm(k: usize, components: usize, cp: f64) -> Self {
        AlgorithmConfig::Compose {
            k,
            cse: CseParams::gmm(components, cp),
        }
    }

    pub fn compose_alpha(k: usize, alpha: Option<f64>, cp: f64) -> Self {
        AlgorithmConfig::Compose {
            k,
            cse: CseParams::alpha_shape(alpha, cp),
        }
    }

    /// Short display name, e.g. for table columns.
    pub fn id(&self) -> String {
        match self {
            AlgorithmConfig::Compose { cse, .. } => match cse.method {
                CseMethod::Identity => "fast-compose".into(),
                CseMethod::GmmDensity { .. } => "compose-gmm".into(),
                CseMethod::AlphaShape2d { .. } => "compose-alpha".into(),
            },
            AlgorithmConfig::Scargc { .. } => "scargc".into(),
            AlgorithmConfig::Mclassification { .. } => "mclassification".into(),
            AlgorithmConfig::LevelIw { .. } => "level-iw".into(),
        }
    }
}

/// Identity of the stream a result was produced on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetId {
    Generated { id: String, spec: StreamSpec },
    Csv { label: String, path: String, sha256: String },
}

impl DatasetId {
    pub fn generated(spec: &StreamSpec) -> Self {
        DatasetId::Generated {
            id: spec.id(),
            spec: spec.clone(),
        }
    }

    pub fn csv(path: &str, contents: &[u8]) -> Self {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(contents);
        let label = std::path::Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string());
        DatasetId::Csv {
            label,
            path: path.to_string(),
            sha256: format!("{digest:x}"),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            DatasetId::Generated { id, .. } => id,
            DatasetId::Csv { label, .. } => label,
        }
    }
}

/// One (algorithm, dataset) benchmark record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: AlgorithmConfig,
    pub dataset: DatasetId,
    pub per_batch_accuracy: Vec<f64>,
    pub average_accuracy: f64,
    pub wall_seconds: f64,
    pub class_loss_events: u64,
    pub seed: u64,
}

/// A run result plus the raw predictions that produced it.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: RunResult,
    pub predictions: Vec<Vec<Label>>,
}

/// Min-max feature scaling fitted on the initial labeled batch only, so no
/// information from unlabeled batches leaks into the transform.
struct Normalizer {
    lo: Vec<f64>,
    span: Vec<f64>,
}

impl Normalizer {
    fn fit(initial: &[(Point, Label)]) -> Self {
        let dim = initial[0].0.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for (x, _) in initial {
            for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(x) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
        }
        let span = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Normalizer { lo, span }
    }

    fn transform(&self, x: &[f64]) -> Point {
        x.iter()
            .zip(&self.lo)
            .zip(&self.span)
            .map(|((v, l), s)| (v - l) / s)
            .collect()
    }

    fn transform_batch(&self, batch: &[Point]) -> Vec<Point> {
        batch.iter().map(|x| self.transform(x)).collect()
    }
}

enum Runner {
    Compose(ComposeLearner),
    Scargc(ScargcLearner),
    Mclassification(MClassifier),
    LevelIw(LevelIwLearner),
}

impl Runner {
    fn step(&mut self, batch: &[Point]) -> Result<Vec<Label>, BenchError> {
        match self {
            Runner::Compose(l) => Ok(l.step(batch)?),
            Runner::Scargc(l) => Ok(l.step(batch)?),
            Runner::Mclassification(l) => Ok(l.step(batch)),
            Runner::LevelIw(l) => Ok(l.step(batch)?),
        }
    }

    fn class_loss_events(&self) -> u64 {
        match self {
            Runner::Compose(l) => l.class_loss_events(),
            Runner::LevelIw(l) => l.class_loss_events(),
            _ => 0,
        }
    }
}

/// Runs one algorithm over one stream under the EVL protocol. Wall-clock
/// time covers initialization and per-batch compute only; stream access and
/// scoring are excluded. Deterministic for a fixed seed up to
/// `wall_seconds`.
pub fn run_stream(
    config: &AlgorithmConfig,
    stream: &DriftStream,
    dataset: DatasetId,
    seed: u64,
) -> Result<RunOutcome, BenchError> {
    let class_count = stream.class_count();
    let normalizer = match config {
        AlgorithmConfig::Mclassification { normalize: true, .. } => {
            Some(Normalizer::fit(stream.initial_labeled()))
        }
        _ => None,
    };
    let initial: Vec<(Point, Label)> = match &normalizer {
        Some(nz) => stream
            .initial_labeled()
            .iter()
            .map(|(x, y)| (nz.transform(x), *y))
            .collect(),
        None => stream.initial_labeled().to_vec(),
    };

    if let AlgorithmConfig::Compose { cse, .. } = config {
        if matches!(cse.method, CseMethod::AlphaShape2d { .. }) && stream.dimension() != 2 {
            return Err(BenchError::DimensionalMismatch(stream.dimension()));
        }
    }

    let mut elapsed = std::time::Duration::ZERO;
    let start = Instant::now();
    let mut runner = match config {
        AlgorithmConfig::Compose { k, cse } => Runner::Compose(ComposeLearner::new(
            &initial,
            *k,
            cse.clone(),
            class_count,
            mix_seed(&[seed, 0xa1]),
        )?),
        AlgorithmConfig::Scargc { k, pool_size } => {
            let pool = pool_size.unwrap_or_else(|| stream.batch(0).map(<[Point]>::len).unwrap_or(1));
            Runner::Scargc(ScargcLearner::new(
                &initial,
                *k,
                pool,
                class_count,
                mix_seed(&[seed, 0xa2]),
            )?)
        }
        AlgorithmConfig::Mclassification { max_radius, .. } => {
            Runner::Mclassification(MClassifier::new(&initial, *max_radius)?)
        }
        AlgorithmConfig::LevelIw {
            sigma,
            lambda,
            basis_count,
        } => Runner::LevelIw(LevelIwLearner::new(
            &initial,
            LevelIwParams {
                sigma: *sigma,
                lambda: *lambda,
                basis_count: *basis_count,
                seed: mix_seed(&[seed, 0xa3]),
            },
            class_count,
        )?),
    };
    elapsed += start.elapsed();

    let mut per_batch_accuracy = Vec::with_capacity(stream.batch_count());
    let mut predictions = Vec::with_capacity(stream.batch_count());
    for t in 0..stream.batch_count() {
        let raw = stream.batch(t)?;
        let batch = match &normalizer {
            Some(nz) => nz.transform_batch(raw),
            None => raw.to_vec(),
        };
        let start = Instant::now();
        let preds = runner.step(&batch)?;
        elapsed += start.elapsed();
        let truth = stream.hidden_labels(t)?;
        let hits = preds.iter().zip(truth).filter(|(a, b)| a == b).count();
        per_batch_accuracy.push(hits as f64 / truth.len() as f64);
        predictions.push(preds);
    }
    let average_accuracy =
        per_batch_accuracy.iter().sum::<f64>() / per_batch_accuracy.len() as f64;
    Ok(RunOutcome {
        result: RunResult {
            algorithm: config.clone(),
            dataset,
            per_batch_accuracy,
            average_accuracy,
            wall_seconds: elapsed.as_secs_f64(),
            class_loss_events: runner.class_loss_events(),
            seed,
        },
        predictions,
    })
}

/// Per-dataset ranks for a set of algorithms plus the per-algorithm
/// average. Within a dataset, ranks are a permutation of `1..=A` with tied
/// scores receiving the mean of the tied positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub algorithms: Vec<String>,
    pub datasets: Vec<String>,
    /// `ranks[dataset][algorithm]`.
    pub ranks: Vec<Vec<f64>>,
    /// Average rank per algorithm, aligned with `algorithms`.
    pub average: Vec<f64>,
}

/// Mean-of-tied-positions ranks. `descending` ranks the largest score 1.
pub fn rank_scores(scores: &[f64], descending: bool) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).unwrap();
        if descending {
            cmp.reverse()
        } else {
            cmp
        }
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the mean of ranks i+1..=j+1.
        let mean = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn rank_table_by<F>(results: &[RunResult], score: F, descending: bool) -> Result<RankTable, BenchError>
where
    F: Fn(&RunResult) -> f64,
{
    if results.is_empty() {
        return Err(BenchError::NoResults);
    }
    let mut algorithms: Vec<String> = Vec::new();
    let mut datasets: Vec<String> = Vec::new();
    for r in results {
        let a = r.algorithm.id();
        if !algorithms.contains(&a) {
            algorithms.push(a);
        }
        let d = r.dataset.label().to_string();
        if !datasets.contains(&d) {
            datasets.push(d);
        }
    }
    let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; algorithms.len()]; datasets.len()];
    for r in results {
        let ai = algorithms.iter().position(|a| *a == r.algorithm.id()).unwrap();
        let di = datasets
            .iter()
            .position(|d| *d == r.dataset.label())
            .unwrap();
        if cells[di][ai].is_some() {
            return Err(BenchError::DuplicateCell {
                algorithm: algorithms[ai].clone(),
                dataset: datasets[di].clone(),
            });
        }
        cells[di][ai] = Some(score(r));
    }
    let mut ranks = Vec::with_capacity(datasets.len());
    for (di, row) in cells.iter().enumerate() {
        let scores: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(ai, cell)| {
                cell.ok_or_else(|| BenchError::MissingCell {
                    algorithm: algorithms[ai].clone(),
                    dataset: datasets[di].clone(),
                })
            })
            .collect::<Result<_, _>>()?;
        ranks.push(rank_scores(&scores, descending));
    }
    let average = (0..algorithms.len())
        .map(|ai| ranks.iter().map(|row| row[ai]).sum::<f64>() / datasets.len() as f64)
        .collect();
    Ok(RankTable {
        algorithms,
        datasets,
        ranks,
        average,
    })
}

/// Ranks algorithms per dataset by descending average accuracy (rank 1 is
/// best) and averages the ranks across datasets. Every algorithm must have
/// exactly one result per dataset.
pub fn average_rank(results: &[RunResult]) -> Result<RankTable, BenchError> {
    rank_table_by(results, |r| r.average_accuracy, true)
}

/// Same aggregation keyed by ascending wall-clock seconds (rank 1 fastest).
pub fn average_runtime_rank(results: &[RunResult]) -> Result<RankTable, BenchError> {
    rank_table_by(results, |r| r.wall_seconds, false)
}

/// Runs `config` once per parameter value, holding everything else fixed.
/// `parameter` must be `"k"` (compose, scargc), `"r"` (mclassification), or
/// `"sigma"` (level-iw).
pub fn sensitivity_sweep(
    config: &AlgorithmConfig,
    stream: &DriftStream,
    dataset: &DatasetId,
    parameter: &str,
    values: &[f64],
    seed: u64,
) -> Result<Vec<RunResult>, BenchError> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let tuned = apply_parameter(config, parameter, v)?;
        out.push(run_stream(&tuned, stream, dataset.clone(), seed)?.result);
    }
    Ok(out)
}

fn apply_parameter(
    config: &AlgorithmConfig,
    parameter: &str,
    value: f64,
) -> Result<AlgorithmConfig, BenchError> {
    let mut tuned = config.clone();
    match (&mut tuned, parameter) {
        (AlgorithmConfig::Compose { k, .. }, "k") | (AlgorithmConfig::Scargc { k, .. }, "k") => {
            *k = value.round() as usize;
        }
        (AlgorithmConfig::Mclassification { max_radius, .. }, "r") => {
            *max_radius = value;
        }
        (AlgorithmConfig::LevelIw { sigma, .. }, "sigma") => {
            *sigma = value;
        }
        _ => {
            return Err(BenchError::UnknownParameter {
                algorithm: config.id(),
                parameter: parameter.to_string(),
            })
        }
    }
    Ok(tuned)
}
