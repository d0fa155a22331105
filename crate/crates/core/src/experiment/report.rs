use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::metrics::{EpisodeSummary, MetricsRecord, RecordKind};

use super::{ExperimentError, Result};

/// Reads a metrics file, reporting the first malformed line.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ExperimentError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scheme: String,
    /// Number of files that contributed a value.
    pub files: usize,
    pub mean: [f64; 9],
    pub std: [f64; 9],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// `scheme,files,<column>_mean,<column>_std,...` in
    /// [`EpisodeSummary::COLUMNS`] order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,files");
        for c in EpisodeSummary::COLUMNS {
            let _ = write!(out, ",{c}_mean,{c}_std");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", row.scheme, row.files);
            for (m, s) in row.mean.iter().zip(&row.std) {
                let _ = write!(out, ",{m},{s}");
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width mean ± std table, one row per scheme.
    pub fn to_table(&self) -> String {
        let headers = [
            "scheme", "reward", "precision%", "time(min)", "amr kg", "wh kg", "amr over", "wh over", "amr under",
            "wh under",
        ];
        let mut out = String::new();
        let _ = write!(out, "{:<10}", headers[0]);
        for h in &headers[1..] {
            let _ = write!(out, " {h:>20}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<10}", row.scheme);
            for (m, s) in row.mean.iter().zip(&row.std) {
                let _ = write!(out, " {:>20}", format!("{m:.2}±{s:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(values: &[[f64; 9]]) -> ([f64; 9], [f64; 9]) {
    let n = values.len() as f64;
    let mut mean = [0.0; 9];
    let mut std = [0.0; 9];
    for k in 0..9 {
        mean[k] = values.iter().map(|v| v[k]).sum::<f64>() / n;
        if values.len() > 1 {
            std[k] = (values.iter().map(|v| (v[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        }
    }
    (mean, std)
}

/// Each file contributes, per scheme, the mean of its evaluation rows (its
/// training rows when it has none). Rows are then the per-scheme mean and
/// sample standard deviation over files, schemes in name order.
pub fn emit_report(files: &[PathBuf]) -> Result<Report> {
    if files.is_empty() {
        return Err(ExperimentError::Config("report needs at least one metrics file".into()));
    }
    let mut per_scheme: BTreeMap<String, Vec<[f64; 9]>> = BTreeMap::new();
    for path in files {
        let records = read_metrics(path)?;
        let mut by_scheme: BTreeMap<&str, (Vec<[f64; 9]>, Vec<[f64; 9]>)> = BTreeMap::new();
        for r in &records {
            let entry = by_scheme.entry(r.scheme.as_str()).or_default();
            match r.kind {
                RecordKind::Eval => entry.0.push(r.summary().values()),
                RecordKind::Train => entry.1.push(r.summary().values()),
            }
        }
        for (scheme, (eval, train)) in by_scheme {
            let rows = if eval.is_empty() { train } else { eval };
            per_scheme.entry(scheme.to_string()).or_default().push(mean_std(&rows).0);
        }
    }
    let rows = per_scheme
        .into_iter()
        .map(|(scheme, values)| {
            let (mean, std) = mean_std(&values);
            ReportRow { scheme, files: values.len(), mean, std }
        })
        .collect();
    Ok(Report { rows })
}
