//! File formats: CSV matrices, raw little-endian `f64` arrays with a JSON
//! sidecar, trajectory logs and probe reports.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::LogRow;
use crate::error::{Error, Result};
use crate::estimates::ProbeReport;
use crate::field::PhaseField;
use crate::grid::PhaseGrid;
use crate::operator::DensityOperator;

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// One array per line of the real parts, comma-separated.
pub fn matrix_csv(m: &DMatrix<C64>, imag: bool) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| if imag { m[(i, j)].im } else { m[(i, j)].re }.to_string()).collect();
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes `<stem>.csv` with the real parts and, for complex data,
/// `<stem>.imag.csv`. Returns the written paths.
pub fn write_matrix_csv(stem: &Path, m: &DMatrix<C64>, complex: bool) -> Result<Vec<PathBuf>> {
    let mut out = vec![with_suffix(stem, ".csv")];
    fs::write(&out[0], matrix_csv(m, false))?;
    if complex {
        out.push(with_suffix(stem, ".imag.csv"));
        fs::write(&out[1], matrix_csv(m, true))?;
    }
    Ok(out)
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------- raw arrays

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    /// Samples `f(x_i, xi_k)`.
    PhaseField,
    /// Kernel `K(x_i, x_j)`.
    OperatorKernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub lx: f64,
    pub lxi: f64,
}

/// Sidecar of a raw array: row-major `shape`, with `components = 2`
/// interleaving real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub kind: ArrayKind,
    pub shape: Vec<usize>,
    pub components: usize,
    pub dtype: String,
    pub order: String,
    pub grid: GridSpec,
    pub hbar: f64,
}

impl RawSidecar {
    fn for_grid(kind: ArrayKind, grid: &PhaseGrid, components: usize) -> Self {
        Self {
            kind,
            shape: vec![grid.n(), grid.n()],
            components,
            dtype: "f64le".into(),
            order: "row-major".into(),
            grid: GridSpec { d: grid.d(), n: grid.n(), lx: grid.lx(), lxi: grid.lxi() },
            hbar: grid.hbar(),
        }
    }

    /// Rebuilds the grid and checks shape, dtype and `hbar` consistency.
    pub fn validate(&self) -> Result<PhaseGrid> {
        let g = PhaseGrid::new(self.grid.d, self.grid.n, self.grid.lx, self.grid.lxi)?;
        if self.dtype != "f64le" || self.order != "row-major" {
            return Err(Error::Parse(format!("unsupported layout {} / {}", self.dtype, self.order)));
        }
        if self.shape != [g.n(), g.n()] {
            return Err(Error::Parse(format!("shape {:?} does not match N = {}", self.shape, g.n())));
        }
        if !(self.components == 1 || self.components == 2) {
            return Err(Error::Parse(format!("components must be 1 or 2, got {}", self.components)));
        }
        if !((self.hbar - g.hbar()).abs() <= 1e-12 * g.hbar()) {
            return Err(Error::Parse(format!("hbar {} disagrees with grid value {}", self.hbar, g.hbar())));
        }
        Ok(g)
    }

    pub fn byte_len(&self) -> usize {
        self.shape.iter().fold(self.components.saturating_mul(8), |acc, &d| acc.saturating_mul(d))
    }
}

pub fn encode_raw(m: &DMatrix<C64>, complex: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.len() * if complex { 16 } else { 8 });
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            if complex {
                out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
            }
        }
    }
    out
}

/// Decodes raw bytes against a sidecar.
pub fn decode_raw(sidecar: &RawSidecar, bytes: &[u8]) -> Result<(PhaseGrid, DMatrix<C64>)> {
    let g = sidecar.validate()?;
    if bytes.len() != sidecar.byte_len() {
        return Err(Error::Parse(format!("raw array holds {} bytes, sidecar implies {}", bytes.len(), sidecar.byte_len())));
    }
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let n = g.n();
    let c = sidecar.components;
    let m = DMatrix::from_fn(n, n, |i, j| {
        let at = (i * n + j) * c;
        C64::new(vals[at], if c == 2 { vals[at + 1] } else { 0.0 })
    });
    Ok((g, m))
}

pub fn parse_sidecar(text: &str) -> Result<RawSidecar> {
    let s: RawSidecar = serde_json::from_str(text).map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    s.validate()?;
    Ok(s)
}

fn write_raw(stem: &Path, sidecar: &RawSidecar, m: &DMatrix<C64>) -> Result<()> {
    fs::write(with_suffix(stem, ".f64"), encode_raw(m, sidecar.components == 2))?;
    fs::write(with_suffix(stem, ".json"), to_sorted_json(sidecar)?)?;
    Ok(())
}

/// Writes `<stem>.f64` and the sidecar `<stem>.json`.
pub fn write_field_raw(stem: &Path, f: &PhaseField) -> Result<()> {
    let complex = !f.is_numerically_real();
    write_raw(stem, &RawSidecar::for_grid(ArrayKind::PhaseField, &f.grid, 1 + complex as usize), &f.values)
}

pub fn write_operator_raw(stem: &Path, op: &DensityOperator) -> Result<()> {
    write_raw(stem, &RawSidecar::for_grid(ArrayKind::OperatorKernel, &op.grid, 2), &op.kernel)
}

fn read_raw(stem: &Path, want: ArrayKind) -> Result<(PhaseGrid, DMatrix<C64>)> {
    let sidecar = parse_sidecar(&fs::read_to_string(with_suffix(stem, ".json"))?)?;
    if sidecar.kind != want {
        return Err(Error::Parse(format!("expected {want:?}, sidecar says {:?}", sidecar.kind)));
    }
    decode_raw(&sidecar, &fs::read(with_suffix(stem, ".f64"))?)
}

pub fn read_field_raw(stem: &Path) -> Result<PhaseField> {
    let (g, m) = read_raw(stem, ArrayKind::PhaseField)?;
    Ok(PhaseField::from_values(g, m))
}

pub fn read_operator_raw(stem: &Path) -> Result<DensityOperator> {
    let (g, m) = read_raw(stem, ArrayKind::OperatorKernel)?;
    Ok(DensityOperator::new(g, m).recheck_flags())
}

// ---------------------------------------------------------------- logs

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "mass", "l2_norm", "energy", "min_eigenvalue", "min_value"]).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.time.to_string(),
            r.mass.to_string(),
            r.l2_norm.to_string(),
            r.energy.to_string(),
            opt(r.min_eigenvalue),
            opt(r.min_value),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii")
}

// ---------------------------------------------------------------- reports

/// Pretty JSON with object keys in sorted order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is ordered by key without the preserve_order feature
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

pub fn report_json(report: &ProbeReport) -> Result<String> {
    to_sorted_json(report)
}

pub fn parse_report_json(text: &str) -> Result<ProbeReport> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
}

/// Flat report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportCsvRow {
    pub probe: String,
    pub hbar: f64,
    pub time: f64,
    pub lhs: f64,
    pub budget: f64,
    pub ratio: f64,
    /// Empty when the report carries no slope fit.
    pub slope: Option<f64>,
    pub pass: bool,
}

pub const REPORT_CSV_HEADER: [&str; 8] = ["probe", "hbar", "time", "lhs", "budget", "ratio", "slope", "pass"];

pub fn report_rows(report: &ProbeReport) -> Vec<ReportCsvRow> {
    let slope = report.slope.map(|s| s.slope);
    report
        .rows
        .iter()
        .map(|r| ReportCsvRow {
            probe: report.probe.clone(),
            hbar: r.hbar,
            time: r.time,
            lhs: r.lhs,
            budget: r.budget,
            ratio: r.ratio,
            slope,
            pass: report.pass,
        })
        .collect()
}

pub fn report_csv(rows: &[ReportCsvRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.probe.clone(),
            r.hbar.to_string(),
            r.time.to_string(),
            r.lhs.to_string(),
            r.budget.to_string(),
            r.ratio.to_string(),
            opt(r.slope),
            r.pass.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportCsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(REPORT_CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: '{s}'")));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let slope = match &rec[6] {
            "" => None,
            s => Some(num(s)?),
        };
        let pass = match &rec[7] {
            "true" => true,
            "false" => false,
            s => return Err(Error::Parse(format!("pass must be true or false, got '{s}'"))),
        };
        out.push(ReportCsvRow {
            probe: rec[0].to_owned(),
            hbar: num(&rec[1])?,
            time: num(&rec[2])?,
            lhs: num(&rec[3])?,
            budget: num(&rec[4])?,
            ratio: num(&rec[5])?,
            slope,
            pass,
        });
    }
    Ok(out)
}
