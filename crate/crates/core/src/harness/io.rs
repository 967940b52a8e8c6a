use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::experiment::ExperimentReport;

/// Failures reading inputs or writing artifacts.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Files written by [`write_artifacts`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifacts {
    pub table: PathBuf,
    pub summary: PathBuf,
    pub series: Vec<PathBuf>,
}

/// Reads a headerless or single-header numeric CSV into rows. Every row must
/// have the same number of columns; a first row that does not parse as
/// numbers is taken as a header.
pub fn read_columns(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv { path: path.into(), source })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|source| IoError::Csv { path: path.into(), source })?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(IoError::Parse { path: path.into(), line: i + 1, msg: e.to_string() })
            }
        }
    }
    if rows.is_empty() {
        return Err(IoError::Parse { path: path.into(), line: 0, msg: "no numeric rows".into() });
    }
    Ok(rows)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|source| IoError::Io { path: path.into(), source })
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.into(), source })
}

fn file_stem(metric: &str) -> String {
    metric
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Writes `<id>.csv` (risk table), `<id>.json` (summary with config echo,
/// slopes and checks) and one `<id>.<metric>.series.csv` of `(n, mean)`
/// pairs per metric into `dir`, creating it if needed.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<Artifacts, IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.into(), source })?;
    let id = report.config.id.name();
    let table = dir.join(format!("{id}.csv"));
    let rows: Vec<Vec<String>> = report
        .table
        .rows()
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.metric.clone(),
                r.mean.to_string(),
                r.median.to_string(),
                r.std_error.to_string(),
                r.scaled.to_string(),
            ]
        })
        .collect();
    write_csv(&table, &["n", "metric", "mean", "median", "std_error", "scaled"], &rows)?;
    let summary = dir.join(format!("{id}.json"));
    write_json(&summary, report)?;
    let mut series = Vec::new();
    for metric in report.table.metrics() {
        let path = dir.join(format!("{id}.{}.series.csv", file_stem(&metric)));
        let pts: Vec<Vec<String>> = report
            .table
            .metric_rows(&metric)
            .into_iter()
            .map(|r| vec![r.n.to_string(), r.mean.to_string()])
            .collect();
        write_csv(&path, &["x", "y"], &pts)?;
        series.push(path);
    }
    Ok(Artifacts { table, summary, series })
}
