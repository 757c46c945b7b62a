//! File formats: recording CSV, embedding CSV, manifest JSON, report CSV,
//! fit CSV.
//!
//! All floating-point output uses Rust's shortest round-trip formatting, so
//! written files are byte-stable across runs and `read(write(x)) == x`
//! exactly for finite values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fitting::FitResult;
use crate::model::{DatasetManifest, EmbeddingMatrix, GazeRecording, ManipulationKind, Session};

pub const RECORDING_HEADER: &str = "x_deg,y_deg";

/// Parses one recording-CSV cell: a finite number, or an invalid sample
/// written as an empty cell or a (case-insensitive) `NaN` literal.
fn parse_gaze_cell(cell: &str) -> Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) => Err(format!("non-finite sample {v}")),
        Err(_) => Err(format!("not a number: {cell:?}")),
    }
}

/// Reads the two-column gaze position CSV at `path`.
///
/// The header row `x_deg,y_deg` is optional on input (always written on
/// output); data rows are numbered from 1 in error messages.
pub fn read_recording_csv(path: &Path) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut h = Vec::new();
    let mut v = Vec::new();
    let mut row = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if idx == 0 && line.trim().eq_ignore_ascii_case(RECORDING_HEADER) {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let mut cells = line.split(',');
        let (cx, cy) = match (cells.next(), cells.next(), cells.next()) {
            (Some(cx), Some(cy), None) => (cx, cy),
            _ => {
                return Err(Error::parse(
                    &shown,
                    row,
                    format!("expected 2 columns, got {}", line.split(',').count()),
                ));
            }
        };
        h.push(parse_gaze_cell(cx).map_err(|m| Error::parse(&shown, row, m))?);
        v.push(parse_gaze_cell(cy).map_err(|m| Error::parse(&shown, row, m))?);
    }
    if h.is_empty() {
        return Err(Error::EmptyRecording(shown));
    }
    Ok((h, v))
}

/// Loads the recording at `path` with the given stream metadata.
pub fn load_recording(
    path: &Path,
    subject_id: &str,
    session: Session,
    task: &str,
    sampling_rate_hz: f64,
) -> Result<GazeRecording> {
    let (h, v) = read_recording_csv(path)?;
    GazeRecording::new(subject_id, session, task, sampling_rate_hz, h, v)
}

fn gaze_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".to_string(),
    }
}

pub fn write_recording_csv(path: &Path, recording: &GazeRecording) -> Result<()> {
    let mut out = String::with_capacity(recording.len() * 16 + 16);
    out.push_str(RECORDING_HEADER);
    out.push('\n');
    for i in 0..recording.len() {
        let _ = writeln!(
            out,
            "{},{}",
            gaze_cell(recording.horizontal[i]),
            gaze_cell(recording.vertical[i])
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads an embedding matrix from CSV with header
/// `subject_id,session,e0,..,e{d-1}`.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{shown}: empty embedding file")))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < 3 || cols[0] != "subject_id" || cols[1] != "session" {
        return Err(Error::Format(format!(
            "{shown}: expected header subject_id,session,e0,.. got {header:?}"
        )));
    }
    let dimension = cols.len() - 2;
    for (i, col) in cols[2..].iter().enumerate() {
        if *col != format!("e{i}") {
            return Err(Error::Format(format!(
                "{shown}: embedding column {} named {col:?}, expected \"e{i}\"",
                i + 2
            )));
        }
    }
    let mut matrix = EmbeddingMatrix::new(dimension)?;
    for (row, line) in lines.enumerate() {
        let row = row + 1;
        let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if cells.len() != dimension + 2 {
            return Err(Error::Format(format!(
                "{shown}: row {row}: {} columns, expected {} (inconsistent dimension)",
                cells.len(),
                dimension + 2
            )));
        }
        let session: Session = cells[1]
            .trim()
            .parse()
            .map_err(|e| Error::parse(&shown, row, format!("{e}")))?;
        let mut vector = Vec::with_capacity(dimension);
        for cell in &cells[2..] {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::parse(&shown, row, format!("not a number: {cell:?}")))?;
            if !value.is_finite() {
                return Err(Error::parse(&shown, row, format!("non-finite value {value}")));
            }
            vector.push(value);
        }
        matrix.insert(cells[0].trim(), session, vector)?;
    }
    if matrix.is_empty() {
        return Err(Error::Format(format!("{shown}: no embedding rows")));
    }
    Ok(matrix)
}

pub fn write_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str("subject_id,session");
    for i in 0..matrix.dimension() {
        let _ = write!(out, ",e{i}");
    }
    out.push('\n');
    for (subject, session, vector) in matrix.iter() {
        if subject.contains([',', '\n', '\r']) {
            return Err(Error::Format(format!(
                "subject id {subject:?} cannot be written to CSV"
            )));
        }
        let _ = write!(out, "{subject},{session}");
        for value in vector {
            let _ = write!(out, ",{value}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    manifest.check_invariants()?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    manifest.check_invariants()?;
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub const REPORT_HEADER: &str = "manipulation,level,kcc,eer,intercorr_mean_abs,intercorr_sd,n_subjects,seed,norm_mean,norm_sd,error";

/// One report CSV row. Metric fields are `None` on error rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub manipulation: ManipulationKind,
    pub level: f64,
    pub kcc: Option<f64>,
    pub eer: Option<f64>,
    pub intercorr_mean_abs: Option<f64>,
    pub intercorr_sd: Option<f64>,
    pub n_subjects: usize,
    pub seed: u64,
    pub norm_mean: Option<f64>,
    pub norm_sd: Option<f64>,
    pub error: Option<String>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

fn parse_opt_cell(cell: &str, shown: &str, row: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::parse(shown, row, format!("not a number: {cell:?}")))
}

pub fn report_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        // Commas and newlines in error text would break the row structure.
        let error = r
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n', '\r'], ";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.manipulation,
            r.level,
            opt_cell(r.kcc),
            opt_cell(r.eer),
            opt_cell(r.intercorr_mean_abs),
            opt_cell(r.intercorr_sd),
            r.n_subjects,
            r.seed,
            opt_cell(r.norm_mean),
            opt_cell(r.norm_sd),
            error
        );
    }
    out
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    fs::write(path, report_to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let shown = path.display().to_string();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{shown}: empty report file")))?;
    if header.trim_end_matches('\r') != REPORT_HEADER {
        return Err(Error::Format(format!(
            "{shown}: unexpected report header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (row, line) in lines.enumerate() {
        let row = row + 1;
        let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if cells.len() != 11 {
            return Err(Error::parse(
                &shown,
                row,
                format!("expected 11 columns, got {}", cells.len()),
            ));
        }
        let manipulation: ManipulationKind = cells[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse(&shown, row, format!("{e}")))?;
        let level: f64 = cells[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&shown, row, format!("bad level {:?}", cells[1])))?;
        let n_subjects: usize = cells[6]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&shown, row, format!("bad n_subjects {:?}", cells[6])))?;
        let seed: u64 = cells[7]
            .trim()
            .parse()
            .map_err(|_| Error::parse(&shown, row, format!("bad seed {:?}", cells[7])))?;
        let error = cells[10].trim();
        rows.push(ReportRow {
            manipulation,
            level,
            kcc: parse_opt_cell(cells[2], &shown, row)?,
            eer: parse_opt_cell(cells[3], &shown, row)?,
            intercorr_mean_abs: parse_opt_cell(cells[4], &shown, row)?,
            intercorr_sd: parse_opt_cell(cells[5], &shown, row)?,
            n_subjects,
            seed,
            norm_mean: parse_opt_cell(cells[8], &shown, row)?,
            norm_sd: parse_opt_cell(cells[9], &shown, row)?,
            error: if error.is_empty() {
                None
            } else {
                Some(error.to_string())
            },
        });
    }
    Ok(rows)
}

pub const FIT_HEADER: &str = "x_name,y_name,model,a,b,r2,n_points";

/// One trend-fit row written next to a sweep report.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub x_name: String,
    pub y_name: String,
    pub fit: FitResult<f64>,
}

pub fn fits_to_csv(rows: &[FitRow]) -> String {
    let mut out = String::new();
    out.push_str(FIT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.x_name,
            r.y_name,
            r.fit.model,
            r.fit.a,
            r.fit.b,
            r.fit.r2,
            r.fit.n_points
        );
    }
    out
}

pub fn write_fit_csv(path: &Path, rows: &[FitRow]) -> Result<()> {
    fs::write(path, fits_to_csv(rows)).map_err(|e| Error::io(path, e))
}
