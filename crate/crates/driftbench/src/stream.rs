//! Synthetic drifting-stream generation and CSV stream ingest.
//!
//! A [`DriftStream`] is an initially labeled batch followed by an ordered
//! sequence of unlabeled batches. Ground-truth labels for the unlabeled
//! batches are retained for scoring only; the algorithm-facing accessors
//! ([`DriftStream::batch`]) expose features alone.

use std::fmt;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::mix_seed;
use crate::{Label, Point};

/// Canonical distance between adjacent class anchors at time zero. All
/// generator geometry (overlap, lane offsets, ring radii) is expressed
/// relative to this unit.
pub const CLASS_SEPARATION: f64 = 1.0;

const LANE_OFFSET: f64 = 0.3 * CLASS_SEPARATION;
const MODE_RADIUS: f64 = 0.35 * CLASS_SEPARATION;
const SURROUND_START_RADIUS: f64 = 1.5 * CLASS_SEPARATION;
const RING_RADIUS_STEP: f64 = 0.75 * CLASS_SEPARATION;

const SALT_SEQUENCE: u64 = 0x5e9;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("invalid stream spec: {0}")]
    InvalidSpec(String),
    #[error("batch index {index} out of range (stream has {count} batches)")]
    BatchOutOfRange { index: usize, count: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse failure in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("malformed row {row} in {path}: expected {expected} columns, found {found}")]
    WrongArity {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("malformed value {value:?} at row {row}, column {column} in {path}: {kind}")]
    BadCell {
        path: String,
        row: usize,
        column: usize,
        value: String,
        kind: &'static str,
    },
    #[error("{path} has rows of width {width}; need at least one feature column plus a label column")]
    MissingLabelColumn { path: String, width: usize },
    #[error("labeled prefix of {prefix} exceeds row count {rows} in {path}")]
    PrefixExceedsRows {
        path: String,
        prefix: usize,
        rows: usize,
    },
    #[error("no unlabeled rows remain after the labeled prefix in {path}")]
    NoUnlabeledRows { path: String },
    #[error("class {label} has no instance in the labeled prefix")]
    ClassMissingFromPrefix { label: i64 },
    #[error("inconsistent stream parts: {0}")]
    InvalidParts(String),
}

/// Benchmark stream family. Each family is a qualitative analog of a group
/// of published synthetic EVL datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Class means move along fixed linear trajectories toward (a laterally
    /// offset image of) the opposite side of the layout circle, so large
    /// total drift makes the class means cross mid-stream.
    TranslatingGaussians,
    /// Class means rotate about the global centroid at `drift_rate` radians
    /// per batch.
    RotatingClasses,
    /// Class 0 stays at the origin; every other class translates straight
    /// through it.
    CrossingSurround,
    /// Static class centers with `modes_per_class >= 2` components per class
    /// orbiting each center.
    MultimodalGaussians,
    /// Class 0 is a central blob; each further class is a toothed ring
    /// around it, rotating at `drift_rate` radians per batch.
    GearsRing,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::TranslatingGaussians => "translating-gaussians",
            Family::RotatingClasses => "rotating-classes",
            Family::CrossingSurround => "crossing-surround",
            Family::MultimodalGaussians => "multimodal-gaussians",
            Family::GearsRing => "gears-ring",
        };
        f.write_str(s)
    }
}

/// Full parameterization of a generated stream. Serializes to JSON with
/// exactly these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub family: Family,
    pub class_count: usize,
    pub modes_per_class: usize,
    pub dimension: usize,
    pub total_instances: usize,
    pub batch_size: usize,
    pub drift_rate: f64,
    pub class_overlap: f64,
    pub seed: u64,
}

impl StreamSpec {
    fn validate(&self) -> Result<(), StreamError> {
        let err = |msg: String| Err(StreamError::InvalidSpec(msg));
        if self.batch_size == 0 {
            return err("batch_size must be positive".into());
        }
        if self.class_count < 2 {
            return err(format!("class_count must be >= 2, got {}", self.class_count));
        }
        if self.modes_per_class == 0 {
            return err("modes_per_class must be positive".into());
        }
        if self.family == Family::MultimodalGaussians && self.modes_per_class < 2 {
            return err("multimodal-gaussians requires modes_per_class >= 2".into());
        }
        if self.dimension < 2 {
            return err(format!(
                "family {} requires dimension >= 2, got {}",
                self.family, self.dimension
            ));
        }
        if self.total_instances == 0 || self.total_instances % self.batch_size != 0 {
            return err(format!(
                "total_instances ({}) must be a positive multiple of batch_size ({})",
                self.total_instances, self.batch_size
            ));
        }
        if self.batch_size < self.class_count * self.modes_per_class {
            return err(format!(
                "batch_size ({}) too small to cover {} classes x {} modes",
                self.batch_size, self.class_count, self.modes_per_class
            ));
        }
        if self.drift_rate.is_nan() || self.drift_rate < 0.0 {
            return err("drift_rate must be >= 0".into());
        }
        if self.class_overlap.is_nan() || self.class_overlap < 0.0 {
            return err("class_overlap must be >= 0".into());
        }
        Ok(())
    }

    /// A short, filesystem-friendly identifier for this configuration.
    pub fn id(&self) -> String {
        format!(
            "{}-c{}-m{}-d{}-n{}x{}-dr{}-ov{}-s{}",
            self.family,
            self.class_count,
            self.modes_per_class,
            self.dimension,
            self.total_instances / self.batch_size,
            self.batch_size,
            self.drift_rate,
            self.class_overlap,
            self.seed
        )
    }
}

/// An initially labeled batch plus ordered unlabeled batches with hidden
/// ground truth.
///
/// `batches[t]` is the unlabeled batch at drift time `t + 1`; the initial
/// labeled data sits at drift time 0. Hidden labels are for evaluation
/// only and are not reachable from the batch accessor used by algorithms.
#[derive(Debug, Clone)]
pub struct DriftStream {
    initial_labeled: Vec<(Point, Label)>,
    batches: Vec<Vec<Point>>,
    hidden_labels: Vec<Vec<Label>>,
    class_count: usize,
    dimension: usize,
}

impl DriftStream {
    /// Assembles a stream from parts, validating alignment invariants.
    pub fn from_parts(
        initial_labeled: Vec<(Point, Label)>,
        batches: Vec<Vec<Point>>,
        hidden_labels: Vec<Vec<Label>>,
    ) -> Result<Self, StreamError> {
        let inv = |msg: String| Err(StreamError::InvalidParts(msg));
        if initial_labeled.is_empty() {
            return inv("initial_labeled is empty".into());
        }
        if batches.is_empty() {
            return inv("stream has no unlabeled batches".into());
        }
        if batches.len() != hidden_labels.len() {
            return inv(format!(
                "{} batches but {} hidden label sets",
                batches.len(),
                hidden_labels.len()
            ));
        }
        let dimension = initial_labeled[0].0.len();
        if dimension == 0 {
            return inv("zero-dimensional features".into());
        }
        let class_count = 1 + initial_labeled
            .iter()
            .map(|(_, y)| *y)
            .chain(hidden_labels.iter().flatten().copied())
            .max()
            .unwrap_or(0);
        for c in 0..class_count {
            if !initial_labeled.iter().any(|(_, y)| *y == c) {
                return inv(format!("class {c} has no initial labeled instance"));
            }
        }
        for (x, _) in &initial_labeled {
            if x.len() != dimension {
                return inv("inconsistent feature dimension in initial data".into());
            }
        }
        for (t, (batch, labels)) in batches.iter().zip(&hidden_labels).enumerate() {
            if batch.is_empty() {
                return inv(format!("batch {t} is empty"));
            }
            if batch.len() != labels.len() {
                return inv(format!(
                    "batch {t} has {} instances but {} hidden labels",
                    batch.len(),
                    labels.len()
                ));
            }
            if batch.iter().any(|x| x.len() != dimension) {
                return inv(format!("batch {t} has inconsistent feature dimension"));
            }
        }
        Ok(DriftStream {
            initial_labeled,
            batches,
            hidden_labels,
            class_count,
            dimension,
        })
    }

    pub fn initial_labeled(&self) -> &[(Point, Label)] {
        &self.initial_labeled
    }

    /// The unlabeled batch at index `t`. This is the only batch accessor
    /// algorithms are given; it never exposes labels. Repeated calls return
    /// the identical slice.
    pub fn batch(&self, t: usize) -> Result<&[Point], StreamError> {
        self.batches.get(t).map(Vec::as_slice).ok_or(StreamError::BatchOutOfRange {
            index: t,
            count: self.batches.len(),
        })
    }

    /// Ground-truth labels for batch `t`. Evaluation only: the benchmark
    /// harness scores predictions with these after they are emitted.
    pub fn hidden_labels(&self, t: usize) -> Result<&[Label], StreamError> {
        self.hidden_labels
            .get(t)
            .map(Vec::as_slice)
            .ok_or(StreamError::BatchOutOfRange {
                index: t,
                count: self.batches.len(),
            })
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn total_unlabeled(&self) -> usize {
        self.batches.iter().map(Vec::len).sum()
    }
}

/// Per-instance class/mode assignment sequence shared by every batch, so
/// per-batch class composition is constant and the hidden labels of the
/// first unlabeled batch equal the initial labels.
fn assignment_sequence(spec: &StreamSpec) -> Vec<(usize, usize)> {
    let mut seq = Vec::with_capacity(spec.batch_size);
    let per_class = spec.batch_size / spec.class_count;
    let extra = spec.batch_size % spec.class_count;
    for c in 0..spec.class_count {
        let n_c = per_class + usize::from(c < extra);
        let per_mode = n_c / spec.modes_per_class;
        let extra_m = n_c % spec.modes_per_class;
        for m in 0..spec.modes_per_class {
            let n_m = per_mode + usize::from(m < extra_m);
            seq.extend(std::iter::repeat((c, m)).take(n_m));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(&[spec.seed, SALT_SEQUENCE]));
    seq.shuffle(&mut rng);
    seq
}

fn class_angle(c: usize, class_count: usize) -> f64 {
    std::f64::consts::TAU * c as f64 / class_count as f64
}

fn layout_radius(class_count: usize) -> f64 {
    CLASS_SEPARATION / (2.0 * (std::f64::consts::PI / class_count as f64).sin())
}

/// Anchor mean of (class, mode) at drift time `t`, in the first two
/// dimensions. Gaussian families draw `anchor + sigma * z`; gears-ring
/// ignores this for its ring classes.
fn anchor_mean(spec: &StreamSpec, class: usize, mode: usize, t: f64) -> (f64, f64) {
    let c_count = spec.class_count;
    let theta = class_angle(class, c_count);
    let radius = layout_radius(c_count);
    let mode_offset = |phase: f64| -> (f64, f64) {
        if spec.modes_per_class == 1 {
            (0.0, 0.0)
        } else {
            let phi = std::f64::consts::TAU * mode as f64 / spec.modes_per_class as f64 + phase;
            (MODE_RADIUS * phi.cos(), MODE_RADIUS * phi.sin())
        }
    };
    match spec.family {
        Family::TranslatingGaussians => {
            let start = (radius * theta.cos(), radius * theta.sin());
            // Unit tangent at the start angle; shifts the far target sideways
            // so trajectories pass each other in offset lanes.
            let tangent = (-theta.sin(), theta.cos());
            let target = (
                -start.0 + LANE_OFFSET * tangent.0,
                -start.1 + LANE_OFFSET * tangent.1,
            );
            let dir = (target.0 - start.0, target.1 - start.1);
            let norm = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
            let step = spec.drift_rate * t / norm;
            let (mx, my) = mode_offset(0.0);
            (start.0 + step * dir.0 + mx, start.1 + step * dir.1 + my)
        }
        Family::RotatingClasses => {
            let a = theta + spec.drift_rate * t;
            let (mx, my) = mode_offset(0.0);
            (radius * a.cos() + mx, radius * a.sin() + my)
        }
        Family::CrossingSurround => {
            let (mx, my) = mode_offset(0.0);
            if class == 0 {
                (mx, my)
            } else {
                let phi = class_angle(class - 1, c_count - 1);
                let start = (SURROUND_START_RADIUS * phi.cos(), SURROUND_START_RADIUS * phi.sin());
                let dir = (-phi.cos(), -phi.sin());
                (
                    start.0 + spec.drift_rate * t * dir.0 + mx,
                    start.1 + spec.drift_rate * t * dir.1 + my,
                )
            }
        }
        Family::MultimodalGaussians => {
            let center = (radius * theta.cos(), radius * theta.sin());
            let phi = std::f64::consts::TAU * mode as f64 / spec.modes_per_class as f64
                + theta
                + spec.drift_rate * t;
            (
                center.0 + MODE_RADIUS * phi.cos(),
                center.1 + MODE_RADIUS * phi.sin(),
            )
        }
        Family::GearsRing => {
            // Only used for class 0 (the core); ring classes sample angles.
            let (mx, my) = mode_offset(0.0);
            (mx, my)
        }
    }
}

fn sample_point(
    spec: &StreamSpec,
    class: usize,
    mode: usize,
    t: f64,
    rng: &mut ChaCha20Rng,
) -> Point {
    let sigma = spec.class_overlap * CLASS_SEPARATION;
    let mut x = vec![0.0; spec.dimension];
    if spec.family == Family::GearsRing && class > 0 {
        let teeth = spec.modes_per_class as f64;
        let tooth_center =
            std::f64::consts::TAU * mode as f64 / teeth + spec.drift_rate * t;
        let half_arc = std::f64::consts::PI / (2.0 * teeth);
        let angle = tooth_center + rng.gen_range(-half_arc..=half_arc);
        let ring_radius = RING_RADIUS_STEP * class as f64;
        let r = ring_radius + sigma * rng.sample::<f64, _>(StandardNormal);
        x[0] = r * angle.cos();
        x[1] = r * angle.sin();
        for coord in x.iter_mut().skip(2) {
            *coord = sigma * rng.sample::<f64, _>(StandardNormal);
        }
        return x;
    }
    let (ax, ay) = anchor_mean(spec, class, mode, t);
    x[0] = ax;
    x[1] = ay;
    for coord in x.iter_mut() {
        *coord += sigma * rng.sample::<f64, _>(StandardNormal);
    }
    x
}

/// Generates a drifting stream: a labeled batch at drift time 0, then
/// `total_instances / batch_size` unlabeled batches at drift times 1, 2, ...
/// Deterministic for a fixed spec (including seed).
pub fn generate_stream(spec: &StreamSpec) -> Result<DriftStream, StreamError> {
    spec.validate()?;
    let seq = assignment_sequence(spec);
    let batch_count = spec.total_instances / spec.batch_size;

    let draw_batch = |time: usize| -> Vec<Point> {
        let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(&[spec.seed, 1, time as u64]));
        seq.iter()
            .map(|&(c, m)| sample_point(spec, c, m, time as f64, &mut rng))
            .collect()
    };

    let labels: Vec<Label> = seq.iter().map(|&(c, _)| c).collect();
    let initial_labeled = draw_batch(0).into_iter().zip(labels.iter().copied()).collect();
    let mut batches = Vec::with_capacity(batch_count);
    let mut hidden_labels = Vec::with_capacity(batch_count);
    for t in 1..=batch_count {
        batches.push(draw_batch(t));
        hidden_labels.push(labels.clone());
    }
    DriftStream::from_parts(initial_labeled, batches, hidden_labels)
}

/// Loads a stream from a CSV file: `dimension` numeric feature columns then
/// one integer label column, rows in chronological order. The first
/// `labeled_prefix_count` rows become the initial labeled data; the rest are
/// chunked into unlabeled batches of `batch_size`, keeping a trailing short
/// batch. `skip_header` drops one leading line.
pub fn load_csv_stream(
    path: impl AsRef<Path>,
    labeled_prefix_count: usize,
    batch_size: usize,
    skip_header: bool,
) -> Result<DriftStream, StreamError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| StreamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_reader(file, &path.display().to_string(), labeled_prefix_count, batch_size, skip_header)
}

fn load_csv_reader(
    reader: impl Read,
    path: &str,
    labeled_prefix_count: usize,
    batch_size: usize,
    skip_header: bool,
) -> Result<DriftStream, StreamError> {
    if batch_size == 0 {
        return Err(StreamError::InvalidSpec("batch_size must be positive".into()));
    }
    if labeled_prefix_count == 0 {
        return Err(StreamError::InvalidSpec(
            "labeled_prefix_count must be positive".into(),
        ));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<(Point, i64)> = Vec::new();
    let mut width: Option<usize> = None;
    // 1-based data row numbers; the skipped header, if any, is not counted.
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| StreamError::Csv {
            path: path.to_string(),
            source,
        })?;
        let w = *width.get_or_insert(record.len());
        if w < 2 {
            return Err(StreamError::MissingLabelColumn {
                path: path.to_string(),
                width: w,
            });
        }
        if record.len() != w {
            return Err(StreamError::WrongArity {
                path: path.to_string(),
                row,
                expected: w,
                found: record.len(),
            });
        }
        let mut features = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().take(w - 1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| StreamError::BadCell {
                path: path.to_string(),
                row,
                column: j + 1,
                value: cell.to_string(),
                kind: "expected a numeric feature",
            })?;
            features.push(v);
        }
        let label_cell = record.get(w - 1).unwrap_or_default();
        let label: i64 = label_cell.parse().map_err(|_| StreamError::BadCell {
            path: path.to_string(),
            row,
            column: w,
            value: label_cell.to_string(),
            kind: "expected an integer label",
        })?;
        rows.push((features, label));
    }

    if labeled_prefix_count > rows.len() {
        return Err(StreamError::PrefixExceedsRows {
            path: path.to_string(),
            prefix: labeled_prefix_count,
            rows: rows.len(),
        });
    }
    if labeled_prefix_count == rows.len() {
        return Err(StreamError::NoUnlabeledRows { path: path.to_string() });
    }

    let mut raw_labels: Vec<i64> = rows.iter().map(|(_, y)| *y).collect();
    raw_labels.sort_unstable();
    raw_labels.dedup();
    let dense = |raw: i64| raw_labels.binary_search(&raw).expect("label present");
    for raw in &raw_labels {
        if !rows[..labeled_prefix_count].iter().any(|(_, y)| y == raw) {
            return Err(StreamError::ClassMissingFromPrefix { label: *raw });
        }
    }

    let initial_labeled: Vec<(Point, Label)> = rows[..labeled_prefix_count]
        .iter()
        .map(|(x, y)| (x.clone(), dense(*y)))
        .collect();
    let mut batches = Vec::new();
    let mut hidden_labels = Vec::new();
    for chunk in rows[labeled_prefix_count..].chunks(batch_size) {
        batches.push(chunk.iter().map(|(x, _)| x.clone()).collect());
        hidden_labels.push(chunk.iter().map(|(_, y)| dense(*y)).collect());
    }
    DriftStream::from_parts(initial_labeled, batches, hidden_labels)
}

/// Writes a stream back out in the loader's CSV format: initial labeled rows
/// first, then every batch with its ground-truth label, chronological order,
/// no header.
pub fn write_csv_stream(stream: &DriftStream, mut w: impl std::io::Write) -> std::io::Result<()> {
    let mut write_row = |x: &[f64], y: Label| -> std::io::Result<()> {
        let mut line = String::new();
        for v in x {
            line.push_str(&format!("{v}"));
            line.push(',');
        }
        line.push_str(&format!("{y}\n"));
        w.write_all(line.as_bytes())
    };
    for (x, y) in stream.initial_labeled() {
        write_row(x, *y)?;
    }
    for t in 0..stream.batch_count() {
        let batch = stream.batch(t).expect("in range");
        let labels = stream.hidden_labels(t).expect("in range");
        for (x, y) in batch.iter().zip(labels) {
            write_row(x, *y)?;
        }
    }
    Ok(())
}
