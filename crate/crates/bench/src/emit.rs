//! Result files: CSV or JSON tables, plot data and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{BenchError, CouplingPoint, IndexGapPoint, PointReport, Result, StudyOutput, SwitchingPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(BenchError::Config(format!("unknown format {other:?}"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub const RESULT_COLUMNS: [&str; 10] =
    ["preset", "param", "T", "B", "policy", "mean_obj", "stderr", "abs_loss", "abs_loss_stderr", "rel_loss"];

/// One `(preset, grid point, policy)` summary line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub preset: String,
    pub param: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    pub policy: String,
    pub mean_obj: f64,
    pub stderr: f64,
    pub abs_loss: f64,
    pub abs_loss_stderr: f64,
    pub rel_loss: f64,
}

pub fn result_rows(preset: &str, points: &[PointReport]) -> Vec<ResultRow> {
    points
        .iter()
        .flat_map(|p| {
            p.report.stats.iter().map(move |s| ResultRow {
                preset: preset.to_string(),
                param: p.param,
                horizon: p.report.horizon,
                capacity: p.report.capacity,
                policy: s.name.clone(),
                mean_obj: s.mean_obj,
                stderr: s.stderr,
                abs_loss: s.abs_loss,
                abs_loss_stderr: s.abs_loss_stderr,
                rel_loss: s.rel_loss,
            })
        })
        .collect()
}

pub const ACCEPTANCE_COLUMNS: [&str; 7] = ["preset", "B", "T", "solver", "type", "accepted", "objective"];

/// Long-form acceptance counts of a switching study; types are 1-based
/// input positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceRow {
    pub preset: String,
    #[serde(rename = "B")]
    pub capacity: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub solver: String,
    #[serde(rename = "type")]
    pub type_id: usize,
    pub accepted: usize,
    pub objective: f64,
}

pub fn acceptance_rows(preset: &str, points: &[SwitchingPoint]) -> Vec<AcceptanceRow> {
    let mut rows = Vec::new();
    for p in points {
        let general = match p.general_solver {
            overbook::offline::GeneralSolver::Exact => "clairvoyant_general",
            overbook::offline::GeneralSolver::Ascent => "clairvoyant_general_ascent",
        };
        for (solver, x, obj) in [(general, &p.general, p.general_objective), ("clairvoyant_index", &p.index, p.index_objective)] {
            for (j, &n) in x.iter().enumerate() {
                rows.push(AcceptanceRow {
                    preset: preset.to_string(),
                    capacity: p.capacity,
                    horizon: p.horizon,
                    solver: solver.to_string(),
                    type_id: j + 1,
                    accepted: n,
                    objective: obj,
                });
            }
        }
    }
    rows
}

pub const INDEX_GAP_COLUMNS: [&str; 6] = ["preset", "T", "B", "index_objective", "alternative_objective", "gap"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexGapRow {
    pub preset: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    pub index_objective: f64,
    pub alternative_objective: f64,
    pub gap: f64,
}

pub fn index_gap_rows(preset: &str, points: &[IndexGapPoint]) -> Vec<IndexGapRow> {
    points
        .iter()
        .map(|p| IndexGapRow {
            preset: preset.to_string(),
            horizon: p.horizon,
            capacity: p.capacity,
            index_objective: p.index_objective,
            alternative_objective: p.alternative_objective,
            gap: p.gap,
        })
        .collect()
}

pub const COUPLING_COLUMNS: [&str; 12] = [
    "preset",
    "param",
    "T",
    "B",
    "paths",
    "mean_loss_events",
    "loss_events_stderr",
    "mean_total_loss",
    "total_loss_stderr",
    "mean_terminal_gap",
    "max_step",
    "within_bound",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRow {
    pub preset: String,
    pub param: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    pub paths: usize,
    pub mean_loss_events: f64,
    pub loss_events_stderr: f64,
    pub mean_total_loss: f64,
    pub total_loss_stderr: f64,
    pub mean_terminal_gap: f64,
    pub max_step: f64,
    pub within_bound: bool,
}

impl CouplingRow {
    pub fn new(preset: &str, p: &CouplingPoint) -> Self {
        Self {
            preset: preset.to_string(),
            param: p.param,
            horizon: p.horizon,
            capacity: p.capacity,
            paths: p.paths,
            mean_loss_events: p.mean_loss_events,
            loss_events_stderr: p.loss_events_stderr,
            mean_total_loss: p.mean_total_loss,
            total_loss_stderr: p.total_loss_stderr,
            mean_terminal_gap: p.mean_terminal_gap,
            max_step: p.max_step,
            within_bound: p.within_bound,
        }
    }
}

pub const PLOT_COLUMNS: [&str; 4] = ["x", "y", "ln_x", "ln_y"];

/// One plot point; log coordinates are left empty when undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    pub ln_x: Option<f64>,
    pub ln_y: Option<f64>,
}

pub fn plot_rows(points: impl IntoIterator<Item = (f64, f64)>) -> Vec<PlotRow> {
    let ln = |v: f64| (v > 0.0).then(|| v.ln());
    points.into_iter().map(|(x, y)| PlotRow { x, y, ln_x: ln(x), ln_y: ln(y) }).collect()
}

/// Writes `rows` as CSV with an explicit header, so an empty table still
/// gets one.
pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let wrap = |e: csv::Error| BenchError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.serialize(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| BenchError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn write_table<R: Serialize>(dir: &Path, stem: &str, format: Format, header: &[&str], rows: &[R]) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&path, header, rows)?,
        Format::Json => write_json(&path, rows)?,
    }
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))
}

/// Writes the tables and plot data of a study; returns the paths written.
pub fn emit_study(dir: &Path, preset: &str, output: &StudyOutput, format: Format) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    match output {
        StudyOutput::Replications(points) => {
            let rows = result_rows(preset, points);
            files.push(write_table(dir, "results", format, &RESULT_COLUMNS, &rows)?);
            let mut names: Vec<&str> = Vec::new();
            for r in &rows {
                if !names.contains(&r.policy.as_str()) {
                    names.push(&r.policy);
                }
            }
            for name in names {
                let of = |metric: fn(&ResultRow) -> f64| {
                    plot_rows(rows.iter().filter(|r| r.policy == name).map(|r| (r.param, metric(r))))
                };
                for (metric, data) in [("abs_loss", of(|r| r.abs_loss)), ("rel_loss", of(|r| r.rel_loss))] {
                    let path = dir.join(format!("plot_{name}_{metric}.csv"));
                    write_csv(&path, &PLOT_COLUMNS, &data)?;
                    files.push(path);
                }
            }
        }
        StudyOutput::Switching(points) => {
            let rows = acceptance_rows(preset, points);
            files.push(write_table(dir, "acceptances", format, &ACCEPTANCE_COLUMNS, &rows)?);
        }
        StudyOutput::IndexGap(points) => {
            let rows = index_gap_rows(preset, points);
            files.push(write_table(dir, "index_gap", format, &INDEX_GAP_COLUMNS, &rows)?);
            let path = dir.join("plot_index_gap.csv");
            write_csv(&path, &PLOT_COLUMNS, &plot_rows(points.iter().map(|p| (p.horizon as f64, p.gap))))?;
            files.push(path);
        }
    }
    Ok(files)
}

pub fn emit_coupling(dir: &Path, preset: &str, points: &[CouplingPoint], format: Format) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let rows: Vec<CouplingRow> = points.iter().map(|p| CouplingRow::new(preset, p)).collect();
    let table = write_table(dir, "coupling", format, &COUPLING_COLUMNS, &rows)?;
    let plot = dir.join("plot_loss_events.csv");
    write_csv(&plot, &PLOT_COLUMNS, &plot_rows(points.iter().map(|p| (p.horizon as f64, p.mean_loss_events))))?;
    Ok(vec![table, plot])
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub preset: Option<crate::Preset>,
    pub instance: Option<overbook::InstanceSpec>,
    pub options: crate::RunOptions,
    pub seed: u64,
    pub reps: usize,
    pub format: Format,
    /// Seed-stream layout used for every grid point.
    pub streams: &'static str,
    pub points: Vec<ManifestPoint>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestPoint {
    pub param: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "B")]
    pub capacity: usize,
    pub seed: u64,
    /// Clairvoyant-general solves by exhaustive enumeration.
    pub exact_solves: usize,
    /// Clairvoyant-general solves that exceeded the budget and used ascent.
    pub ascent_solves: usize,
    pub alpha: Option<Vec<f64>>,
}

pub const STREAMS: &str = "point seed = stream(seed, point, 7); per replication r: arrivals stream(point seed, r, 0), \
     policy sampling stream(point seed, r, 1), ascent restarts stream(point seed, r, 2); \
     DPD fractions stream(point seed, 2^64-1, 3)";

impl Manifest {
    pub fn new(command: impl Into<String>, seed: u64, reps: usize, options: crate::RunOptions, format: Format) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            preset: None,
            instance: None,
            options,
            seed,
            reps,
            format,
            streams: STREAMS,
            points: Vec::new(),
            notes: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn record_reports(&mut self, points: &[PointReport]) {
        self.points.extend(points.iter().map(|p| ManifestPoint {
            param: p.param,
            horizon: p.report.horizon,
            capacity: p.report.capacity,
            seed: p.report.seed,
            exact_solves: p.report.exact_solves,
            ascent_solves: p.report.ascent_solves,
            alpha: p.report.alpha.clone(),
        }));
    }

    pub fn record_files(&mut self, dir: &Path, files: &[PathBuf]) {
        self.files.extend(
            files
                .iter()
                .map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string()),
        );
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_rows_skip_undefined_logs() {
        let rows = plot_rows([(10.0, 0.5), (20.0, 0.0), (30.0, -1.0)]);
        assert_eq!(rows[0].ln_y, Some(0.5f64.ln()));
        assert_eq!(rows[1].ln_y, None);
        assert_eq!(rows[2].ln_y, None);
        assert_eq!(rows[2].ln_x, Some(30f64.ln()));
    }

    #[test]
    fn format_parsing() {
        assert_eq!(Format::parse("csv").unwrap(), Format::Csv);
        assert_eq!(Format::parse("json").unwrap().extension(), "json");
        assert!(Format::parse("xml").is_err());
    }
}
