use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Scenario, SimParams, WtdSpec};
use crate::error::{Error, Result};
use crate::lindblad::WaitingTimeDensity;
use crate::phase_space::{GridSpec, Histogram, WignerGrid};
use crate::trajectories::{DetectionConfig, TrajectoryRecord};

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "t", "X", "Y", "Z", "re_a", "im_a", "dq_re", "dq_im", "i_re", "i_im", "click",
];
pub const WTD_HEADER: [&str; 2] = ["tau", "w"];
pub const CLICKS_HEADER: [&str; 1] = ["t"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_center", "density", "count"];
/// Top-left cell of a Wigner grid file.
pub const WIGNER_CORNER: &str = "y\\x";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    Trajectory,
    Clicks,
    Wigner,
    Wtd,
    Histogram,
    Summary,
    SteadyState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub kind: FileKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub seed: u64,
    pub trajectory: String,
    pub clicks: Option<String>,
    pub params: SimParams,
    pub rows: usize,
    pub n_clicks: usize,
    pub cavity_jumps: usize,
    pub norm_drift: f64,
    pub max_top_population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSummary {
    pub residual: f64,
    pub trace: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub top_population: f64,
    pub field_mean: [f64; 2],
    pub photon_number: f64,
    pub bloch: [f64; 3],
    pub excited_population: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub max_top_population: f64,
    pub max_norm_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub command: String,
    pub scenario: Scenario,
    pub params: SimParams,
    pub detection: DetectionConfig,
    pub snapshot_times: Vec<f64>,
    pub record_every: usize,
    pub grid: GridSpec,
    pub wtd: WtdSpec,
    pub seeds: Vec<u64>,
    pub records: Vec<RecordEntry>,
    pub files: Vec<FileEntry>,
    pub steady_state: Option<SteadyStateSummary>,
    /// `∫W d²α` for every Wigner file, keyed by file name.
    pub wigner_normalization: BTreeMap<String, f64>,
    pub invariants: Invariants,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(Self::FILE_NAME))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(dir.join(Self::FILE_NAME))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that every listed file exists and parses under its column
    /// contract, and that every record carries the manifest's parameters.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.files {
            let path = dir.join(&entry.name);
            match entry.kind {
                FileKind::Trajectory => {
                    read_numeric_csv(&path, &TRAJECTORY_HEADER)?;
                }
                FileKind::Clicks => {
                    read_numeric_csv(&path, &CLICKS_HEADER)?;
                }
                FileKind::Wtd => {
                    read_numeric_csv(&path, &WTD_HEADER)?;
                }
                FileKind::Histogram => {
                    read_numeric_csv(&path, &HISTOGRAM_HEADER)?;
                }
                FileKind::Wigner => {
                    read_wigner_csv(&path)?;
                }
                FileKind::Summary => {
                    read_numeric_csv(&path, &super::scenario::summary_header())?;
                }
                FileKind::SteadyState => {
                    let text = std::fs::read_to_string(&path)?;
                    serde_json::from_str::<SteadyStateSummary>(&text)?;
                }
            }
        }
        for record in &self.records {
            if record.params != self.params {
                return Err(mismatch(&record.trajectory, "parameter block differs from the manifest"));
            }
            for name in std::iter::once(&record.trajectory).chain(record.clicks.iter()) {
                if !self.files.iter().any(|f| &f.name == name) {
                    return Err(mismatch(name, "record file missing from the inventory"));
                }
            }
        }
        Ok(())
    }
}

fn mismatch(file: &str, message: &str) -> Error {
    Error::Config {
        location: file.to_string(),
        message: message.to_string(),
    }
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub(crate) fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for k in 0..record.len() {
        let [x, y, z] = record.bloch[k];
        let a = record.field_mean[k];
        let dq = record.dq_raw[k];
        let i = record.photocurrent[k];
        w.write_record(&[
            num(record.times[k]),
            num(x),
            num(y),
            num(z),
            num(a.re),
            num(a.im),
            num(dq.re),
            num(dq.im),
            num(i.re),
            num(i.im),
            record.click_flags[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_clicks(path: &Path, clicks: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CLICKS_HEADER)?;
    for t in clicks {
        w.write_record([num(*t)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_wtd(path: &Path, wtd: &WaitingTimeDensity) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(WTD_HEADER)?;
    for (tau, v) in wtd.tau_grid.iter().zip(&wtd.values) {
        w.write_record([num(*tau), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(HISTOGRAM_HEADER)?;
    for k in 0..hist.counts.len() {
        w.write_record([
            num(hist.bin_centers[k]),
            num(hist.densities[k]),
            hist.counts[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// First row: corner cell then the x axis; each following row: y then
/// `W(x + iy)` along x.
pub fn write_wigner(path: &Path, grid: &WignerGrid) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once(WIGNER_CORNER.to_string())
        .chain(grid.x_axis.iter().map(|&x| num(x)))
        .collect();
    w.write_record(&header)?;
    for (iy, y) in grid.y_axis.iter().enumerate() {
        let row: Vec<String> = std::iter::once(num(*y))
            .chain(grid.values.row(iy).iter().map(|&v| num(v)))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed Wigner file: `(x_axis, y_axis, values[[iy, ix]])`.
pub fn read_wigner_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| mismatch(&origin, "empty Wigner file"))??;
    let x: Vec<f64> = header.iter().skip(1).map(|s| parse_cell(s, &origin)).collect::<Result<_>>()?;
    let mut y = Vec::new();
    let mut body = Vec::new();
    for row in rows {
        let row = row?;
        if row.len() != x.len() + 1 {
            return Err(mismatch(&origin, "ragged Wigner row"));
        }
        y.push(parse_cell(&row[0], &origin)?);
        for cell in row.iter().skip(1) {
            body.push(parse_cell(cell, &origin)?);
        }
    }
    let values = Array2::from_shape_vec((y.len(), x.len()), body).map_err(|e| mismatch(&origin, &e.to_string()))?;
    Ok((x, y, values))
}

fn parse_cell(s: &str, origin: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| mismatch(origin, &format!("non-numeric cell `{s}`")))
}

/// Reads a CSV whose header must equal `header`; returns the rows.
pub fn read_numeric_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let origin = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if found != header {
        return Err(mismatch(&origin, &format!("header {found:?}, expected {header:?}")));
    }
    reader
        .records()
        .map(|row| row?.iter().map(|c| parse_cell(c, &origin)).collect())
        .collect()
}
