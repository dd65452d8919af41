//! Report rendering: run-record CSV, Markdown tables shaped like the
//! accuracy/runtime comparison tables, and per-run SVG accuracy plots.
//!
//! Numbers in Markdown are fixed to two decimals (accuracy as percent);
//! CSV carries full-precision values so re-parsing reproduces the records
//! exactly.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{RankTable, RunResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report bundle has no runs")]
    EmptyBundle,
    #[error("run {0} has an empty accuracy list")]
    EmptyAccuracy(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed runs csv at record {record}: {message}")]
    Malformed { record: usize, message: String },
}

/// Everything the `report` command renders.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportBundle {
    pub runs: Vec<RunResult>,
    pub accuracy_ranks: Option<RankTable>,
    pub runtime_ranks: Option<RankTable>,
    pub sweeps: Vec<SweepTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub algorithm: String,
    pub dataset: String,
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub average_accuracy: f64,
    pub wall_seconds: f64,
}

/// The flat form of a [`RunResult`] stored in `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub dataset: String,
    pub seed: u64,
    pub average_accuracy: f64,
    pub wall_seconds: f64,
    pub class_loss_events: u64,
    pub per_batch_accuracy: Vec<f64>,
}

impl RunRecord {
    pub fn from_result(r: &RunResult) -> Self {
        RunRecord {
            algorithm: r.algorithm.id(),
            dataset: r.dataset.label().to_string(),
            seed: r.seed,
            average_accuracy: r.average_accuracy,
            wall_seconds: r.wall_seconds,
            class_loss_events: r.class_loss_events,
            per_batch_accuracy: r.per_batch_accuracy.clone(),
        }
    }
}

const RUNS_HEADER: [&str; 7] = [
    "algorithm",
    "dataset",
    "seed",
    "average_accuracy",
    "wall_seconds",
    "class_loss_events",
    "per_batch_accuracy",
];

fn runs_csv(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUNS_HEADER).expect("in-memory write");
    for r in records {
        let per_batch = r
            .per_batch_accuracy
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.algorithm.as_str(),
            r.dataset.as_str(),
            &r.seed.to_string(),
            &format!("{}", r.average_accuracy),
            &format!("{}", r.wall_seconds),
            &r.class_loss_events.to_string(),
            &per_batch,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

/// Parses `runs.csv` content back into records; exact values round-trip.
pub fn parse_runs_csv(reader: impl Read) -> Result<Vec<RunRecord>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<&str, ReportError> {
            rec.get(j).ok_or(ReportError::Malformed {
                record: i + 1,
                message: format!("missing column {j}"),
            })
        };
        let parse_err = |message: String| ReportError::Malformed {
            record: i + 1,
            message,
        };
        let per_batch_raw = field(6)?;
        let per_batch_accuracy = if per_batch_raw.is_empty() {
            Vec::new()
        } else {
            per_batch_raw
                .split(';')
                .map(|s| s.parse::<f64>().map_err(|e| parse_err(e.to_string())))
                .collect::<Result<_, _>>()?
        };
        out.push(RunRecord {
            algorithm: field(0)?.to_string(),
            dataset: field(1)?.to_string(),
            seed: field(2)?.parse().map_err(|_| parse_err("bad seed".into()))?,
            average_accuracy: field(3)?
                .parse()
                .map_err(|_| parse_err("bad average_accuracy".into()))?,
            wall_seconds: field(4)?
                .parse()
                .map_err(|_| parse_err("bad wall_seconds".into()))?,
            class_loss_events: field(5)?
                .parse()
                .map_err(|_| parse_err("bad class_loss_events".into()))?,
            per_batch_accuracy,
        });
    }
    Ok(out)
}

fn format_rank(rank: f64) -> String {
    if rank.fract() == 0.0 {
        format!("{}", rank as i64)
    } else {
        format!("{rank:.1}")
    }
}

fn rank_markdown(table: &RankTable, values: &dyn Fn(usize, usize) -> f64, title: &str) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "## {title}");
    let _ = writeln!(md);
    let _ = writeln!(md, "| DATASETS | {} |", table.algorithms.join(" | "));
    let _ = writeln!(
        md,
        "|{}|",
        vec!["---"; table.algorithms.len() + 1].join("|")
    );
    for (di, dataset) in table.datasets.iter().enumerate() {
        let cells: Vec<String> = (0..table.algorithms.len())
            .map(|ai| format!("{:.2}({})", values(di, ai), format_rank(table.ranks[di][ai])))
            .collect();
        let _ = writeln!(md, "| {dataset} | {} |", cells.join(" | "));
    }
    let footer: Vec<String> = table.average.iter().map(|a| format!("{a:.4}")).collect();
    let _ = writeln!(
        md,
        "| Average Rank (lower is better) | {} |",
        footer.join(" | ")
    );
    let _ = writeln!(md);
    md
}

fn rank_csv(table: &RankTable, values: &dyn Fn(usize, usize) -> f64) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset".to_string()];
    header.extend(table.algorithms.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (di, dataset) in table.datasets.iter().enumerate() {
        let mut row = vec![dataset.clone()];
        for ai in 0..table.algorithms.len() {
            row.push(format!("{}", values(di, ai)));
        }
        w.write_record(&row).expect("in-memory write");
    }
    let mut footer = vec!["Average Rank (lower is better)".to_string()];
    footer.extend(table.average.iter().map(|a| format!("{a}")));
    w.write_record(&footer).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn sweep_markdown(sweep: &SweepTable) -> String {
    let mut md = String::new();
    let _ = writeln!(
        md,
        "## Sensitivity of {} to {} on {}",
        sweep.algorithm, sweep.parameter, sweep.dataset
    );
    let _ = writeln!(md);
    let _ = writeln!(md, "| {} | accuracy | seconds |", sweep.parameter);
    let _ = writeln!(md, "|---|---|---|");
    for row in &sweep.rows {
        let _ = writeln!(
            md,
            "| {} | {:.2} | {:.2} |",
            row.value,
            row.average_accuracy * 100.0,
            row.wall_seconds
        );
    }
    let _ = writeln!(md);
    md
}

fn sweep_csv(sweep: &SweepTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([sweep.parameter.as_str(), "average_accuracy", "wall_seconds"])
        .expect("in-memory write");
    for row in &sweep.rows {
        w.write_record([
            format!("{}", row.value),
            format!("{}", row.average_accuracy),
            format!("{}", row.wall_seconds),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn accuracy_svg(record: &RunRecord) -> String {
    let (w, h) = (640.0, 320.0);
    let (left, right, top, bottom) = (50.0, 620.0, 20.0, 290.0);
    let n = record.per_batch_accuracy.len();
    let mut points = String::new();
    for (i, acc) in record.per_batch_accuracy.iter().enumerate() {
        let x = if n == 1 {
            (left + right) / 2.0
        } else {
            left + (right - left) * i as f64 / (n - 1) as f64
        };
        let y = bottom - (bottom - top) * acc.clamp(0.0, 1.0);
        let _ = write!(points, "{x:.2},{y:.2} ");
    }
    let title = xml_escape(&format!(
        "{} on {} (avg {:.2}%)",
        record.algorithm,
        record.dataset,
        record.average_accuracy * 100.0
    ));
    format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "  <text x=\"{tx}\" y=\"14\" font-size=\"12\" text-anchor=\"middle\">{title}</text>\n",
            "  <line x1=\"{left}\" y1=\"{bottom}\" x2=\"{right}\" y2=\"{bottom}\" stroke=\"black\"/>\n",
            "  <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{bottom}\" stroke=\"black\"/>\n",
            "  <text x=\"{left}\" y=\"308\" font-size=\"10\">0</text>\n",
            "  <text x=\"{right}\" y=\"308\" font-size=\"10\" text-anchor=\"end\">batch {last}</text>\n",
            "  <text x=\"6\" y=\"{top}\" font-size=\"10\">1.0</text>\n",
            "  <text x=\"6\" y=\"{bottom}\" font-size=\"10\">0.0</text>\n",
            "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{points}\"/>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        tx = w / 2.0,
        title = title,
        left = left,
        right = right,
        top = top,
        bottom = bottom,
        last = n.saturating_sub(1),
        points = points.trim_end(),
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Renders the bundle into `out_dir`: `runs.csv`, one CSV per rank/sweep
/// table, a single `report.md` mirroring the accuracy and runtime table
/// layout (with the average-rank footer), and one SVG accuracy-over-batches
/// plot per run. All content is built before anything is written, so a
/// rendering error leaves no partial files. Returns the paths written.
pub fn render_report(bundle: &ReportBundle, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, ReportError> {
    let out_dir = out_dir.as_ref();
    if bundle.runs.is_empty() {
        return Err(ReportError::EmptyBundle);
    }
    let records: Vec<RunRecord> = bundle.runs.iter().map(RunRecord::from_result).collect();
    for r in &records {
        if r.per_batch_accuracy.is_empty() {
            return Err(ReportError::EmptyAccuracy(format!(
                "{} on {}",
                r.algorithm, r.dataset
            )));
        }
    }

    let mut files: Vec<(PathBuf, String)> = Vec::new();
    files.push((out_dir.join("runs.csv"), runs_csv(&records)));

    let mut markdown = String::from("# Benchmark report\n\n");
    let lookup = |di: usize, ai: usize, table: &RankTable, key: &dyn Fn(&RunRecord) -> f64| -> f64 {
        records
            .iter()
            .find(|r| r.dataset == table.datasets[di] && r.algorithm == table.algorithms[ai])
            .map(key)
            .unwrap_or(f64::NAN)
    };
    if let Some(table) = &bundle.accuracy_ranks {
        let acc = |di: usize, ai: usize| lookup(di, ai, table, &|r| r.average_accuracy * 100.0);
        markdown.push_str(&rank_markdown(table, &acc, "Average classification accuracy"));
        files.push((out_dir.join("accuracy_table.csv"), rank_csv(table, &acc)));
    }
    if let Some(table) = &bundle.runtime_ranks {
        let secs = |di: usize, ai: usize| lookup(di, ai, table, &|r| r.wall_seconds);
        markdown.push_str(&rank_markdown(table, &secs, "Average execution time (in seconds)"));
        files.push((out_dir.join("runtime_table.csv"), rank_csv(table, &secs)));
    }
    for sweep in &bundle.sweeps {
        markdown.push_str(&sweep_markdown(sweep));
        let name = format!(
            "sweep_{}_{}_{}.csv",
            sanitize(&sweep.algorithm),
            sanitize(&sweep.parameter),
            sanitize(&sweep.dataset)
        );
        files.push((out_dir.join(name), sweep_csv(sweep)));
    }
    files.push((out_dir.join("report.md"), markdown));

    let mut used: Vec<PathBuf> = Vec::new();
    for record in &records {
        let base = format!(
            "accuracy_{}__{}",
            sanitize(&record.algorithm),
            sanitize(&record.dataset)
        );
        let mut path = out_dir.join(format!("{base}.svg"));
        let mut suffix = 1;
        while used.contains(&path) {
            path = out_dir.join(format!("{base}__{suffix}.svg"));
            suffix += 1;
        }
        used.push(path.clone());
        files.push((path, accuracy_svg(record)));
    }

    std::fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::with_capacity(files.len());
    for (path, content) in files {
        std::fs::write(&path, content).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
