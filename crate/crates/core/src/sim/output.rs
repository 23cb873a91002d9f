use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{RunReport, SimError, LEDGER_FILE};

pub const INTERVALS_FILE: &str = "intervals.csv";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const PLOT_INITIAL_FILE: &str = "plot_initial.csv";
pub const PLOT_FINAL_FILE: &str = "plot_final.csv";

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub intervals: PathBuf,
    pub iterations: PathBuf,
    pub summary: PathBuf,
    pub ledger: PathBuf,
    pub plots: Option<(PathBuf, PathBuf)>,
}

fn out_err(path: &Path, e: impl ToString) -> SimError {
    SimError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

impl RunReport {
    pub fn intervals_csv(&self) -> Result<String, SimError> {
        to_csv_string(&self.intervals)
    }

    pub fn iterations_csv(&self) -> Result<String, SimError> {
        to_csv_string(&self.iterations)
    }

    pub fn summary_toml(&self) -> Result<String, SimError> {
        toml::to_string(&self.summary).map_err(|e| out_err(Path::new(SUMMARY_FILE), e))
    }
}

fn to_csv_string<R: Serialize>(rows: &[R]) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| out_err(Path::new("<memory>"), e))?;
    }
    let bytes = w.into_inner().map_err(|e| out_err(Path::new("<memory>"), e))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes the report into `dir`, creating it if needed.
pub fn write_outputs(report: &RunReport, dir: &Path, emit_plot_data: bool) -> Result<OutputFiles, SimError> {
    fs::create_dir_all(dir).map_err(|e| out_err(dir, e))?;
    let files = OutputFiles {
        intervals: dir.join(INTERVALS_FILE),
        iterations: dir.join(ITERATIONS_FILE),
        summary: dir.join(SUMMARY_FILE),
        ledger: dir.join(LEDGER_FILE),
        plots: emit_plot_data.then(|| (dir.join(PLOT_INITIAL_FILE), dir.join(PLOT_FINAL_FILE))),
    };
    write_csv(&files.intervals, &report.intervals)?;
    write_csv(&files.iterations, &report.iterations)?;
    fs::write(&files.summary, report.summary_toml()?).map_err(|e| out_err(&files.summary, e))?;
    fs::write(&files.ledger, report.ledger.to_jsonl()).map_err(|e| out_err(&files.ledger, e))?;
    if let Some((initial, fin)) = &files.plots {
        write_csv(initial, &report.plot_initial)?;
        write_csv(fin, &report.plot_final)?;
    }
    Ok(files)
}
