use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use wignerlab::config::{Experiment, ProbeKind};
use wignerlab::dynamics::{evolve_hartree, evolve_linear_hartree, evolve_vlasov, FieldSnapshot, LogRow};
use wignerlab::estimates::{
    classical_stability_experiment, quantum_stability_experiment, run_sweep, wick_square_root_datum, ProbeReport,
};
use wignerlab::io::{
    log_csv, parse_report_json, report_csv, report_json, report_rows, to_sorted_json, write_field_raw,
    write_matrix_csv, write_operator_raw, ReportCsvRow,
};
use wignerlab::{sample_field, DensityOperator, Error, PhaseField, SimConfig};

use crate::probes::{self, Context};

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.json");

/// Process outcome other than success.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Self { code: 2, kind: "config", message }
    }

    fn probe(message: String) -> Self {
        Self { code: 1, kind: "probe", message }
    }

    pub fn code(&self) -> u8 {
        self.code
    }

    /// Single-line `wignerlab: error[kind]: reason`.
    pub fn message(&self) -> Option<String> {
        let flat: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        Some(format!("wignerlab: error[{}]: {flat}", self.kind))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match e {
            Error::Config(_) | Error::FieldHistory(_) => (2, "config"),
            Error::Parse(_) | Error::Json(_) => (2, "parse"),
            Error::Io(_) => (2, "io"),
            _ => (3, "solver"),
        };
        let message = match e {
            Error::Config(m) | Error::Parse(m) => m,
            other => other.to_string(),
        };
        Self { code, kind, message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn write(path: PathBuf, text: impl AsRef<[u8]>) -> Outcome {
    fs::write(&path, text).map_err(|e| Failure { code: 2, kind: "io", message: format!("{}: {e}", path.display()) })
}

fn prepare(out: &Path, cfg: &SimConfig) -> Outcome {
    fs::create_dir_all(out)
        .map_err(|e| Failure { code: 2, kind: "io", message: format!("{}: {e}", out.display()) })?;
    write(out.join("config.resolved.json"), cfg.to_json() + "\n")
}

/// Report file stem: probe name with every non-alphanumeric run collapsed to `_`.
pub fn file_stem(probe: &str) -> String {
    let mut s = String::new();
    for c in probe.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_owned()
}

fn write_report(out: &Path, r: &ProbeReport) -> Outcome {
    let stem = file_stem(&r.probe);
    write(out.join(format!("{stem}.report.json")), report_json(r)?)?;
    write(out.join(format!("{stem}.report.csv")), report_csv(&report_rows(r)))
}

// ---------------------------------------------------------------- run

fn write_logs(out: &Path, logs: &[LogRow], fields: &[FieldSnapshot]) -> Outcome {
    write(out.join("log.csv"), log_csv(logs))?;
    write(out.join("fields.json"), to_sorted_json(&fields)?)
}

fn dump_fields(out: &Path, cfg: &SimConfig, first: &PhaseField, last: &PhaseField) -> Outcome {
    if cfg.output.snapshots {
        for (name, f) in [("f_initial", first), ("f_final", last)] {
            write_matrix_csv(&out.join(name), &f.values, !f.is_numerically_real())?;
            write_field_raw(&out.join(name), f)?;
        }
    }
    Ok(())
}

fn dump_operators(out: &Path, cfg: &SimConfig, first: &DensityOperator, last: &DensityOperator) -> Outcome {
    if cfg.output.snapshots {
        for (name, op) in [("op_initial", first), ("op_final", last)] {
            write_matrix_csv(&out.join(name), &op.kernel, true)?;
            write_operator_raw(&out.join(name), op)?;
        }
    }
    Ok(())
}

fn field_history(cfg: &SimConfig, f0: &PhaseField, schedule: wignerlab::dynamics::Schedule) -> Result<Vec<FieldSnapshot>, Failure> {
    match cfg.field_history.as_deref() {
        Some("vlasov") => Ok(evolve_vlasov(f0, schedule, cfg.sign)?.fields),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("field_history {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("field_history {path}: {e}")))
        }
        None => Err(Failure::config("linear-hartree needs a field_history source".into())),
    }
}

pub fn run(cfg: &SimConfig, out: &Path) -> Outcome {
    let experiment = cfg.experiment()?;
    let grid = cfg.grid()?;
    let schedule = cfg.schedule(&grid)?;
    let f0 = sample_field(&grid, &cfg.initial)?;
    prepare(out, cfg)?;
    match experiment {
        Experiment::Vlasov => {
            let traj = evolve_vlasov(&f0, schedule, cfg.sign)?;
            write_logs(out, &traj.logs, &traj.fields)?;
            dump_fields(out, cfg, &traj.snapshots[0], traj.last())
        }
        Experiment::Hartree => {
            let (op0, _) = wick_square_root_datum(&f0)?;
            let traj = evolve_hartree(&op0, schedule, cfg.sign)?;
            write_logs(out, &traj.logs, &traj.fields)?;
            dump_operators(out, cfg, &traj.snapshots[0], traj.last())
        }
        Experiment::LinearHartree => {
            let history = field_history(cfg, &f0, schedule)?;
            let (op0, _) = wick_square_root_datum(&f0)?;
            let traj = evolve_linear_hartree(&op0, &history, schedule)?;
            write_logs(out, &traj.logs, &traj.fields)?;
            dump_operators(out, cfg, &traj.snapshots[0], traj.last())
        }
        Experiment::TwinClassical | Experiment::TwinQuantum => {
            let second = cfg.second.as_ref().expect("checked by experiment()");
            let f1 = sample_field(&grid, second)?;
            let report = if experiment == Experiment::TwinClassical {
                classical_stability_experiment(&f0, &f1, schedule, cfg.sign)?
            } else {
                let (op0, _) = wick_square_root_datum(&f0)?;
                let (op1, _) = wick_square_root_datum(&f1)?;
                quantum_stability_experiment(&op0, &op1, schedule, cfg.sign, cfg.n, cfg.eps)?
            };
            write_report(out, &report)?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::probe(format!("{} failed: {}", report.probe, failed_checks(&report))))
            }
        }
    }
}

// ---------------------------------------------------------------- sweep / probe

fn failed_checks(r: &ProbeReport) -> String {
    r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect::<Vec<_>>().join("; ")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into())
}

/// Writes the reports, prints the summary table and turns failures into exit 1.
fn summarize(out: &Path, reports: &[ProbeReport], color: bool) -> Outcome {
    let mut csv = String::from("probe,slope,ratio_slope,pass\n");
    let width = reports.iter().map(|r| r.probe.len()).max().unwrap_or(5).max(5);
    println!("{:<width$}  {:>8}  {:>11}  result", "probe", "slope", "ratio_slope");
    for r in reports {
        write_report(out, r)?;
        let slope = r.slope.map(|s| s.slope);
        let ratio = r.ratio_slope.map(|s| s.slope);
        let _ = writeln!(csv, "{},{},{},{}", r.probe, slope.map(|v| v.to_string()).unwrap_or_default(), ratio.map(|v| v.to_string()).unwrap_or_default(), r.pass);
        let verdict = match (r.pass, color) {
            (true, true) => "\x1b[32mPASS\x1b[0m".to_owned(),
            (false, true) => format!("\x1b[31mFAIL\x1b[0m  <- {}", failed_checks(r)),
            (true, false) => "PASS".to_owned(),
            (false, false) => format!("FAIL  <- {}", failed_checks(r)),
        };
        println!("{:<width$}  {:>8}  {:>11}  {verdict}", r.probe, fmt_opt(slope), fmt_opt(ratio));
    }
    write(out.join("summary.csv"), csv)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.probe.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::probe(format!("{} probe(s) failed: {}", failed.len(), failed.join(", "))))
    }
}

pub fn sweep(cfg: &SimConfig, out: &Path, color: bool) -> Outcome {
    let kinds = cfg.sweep_probes()?;
    let grids = cfg.sweep_grids()?;
    let members = if kinds.iter().any(|k| k.needs_dynamics()) {
        Some(run_sweep(&cfg.sweep_settings()?)?)
    } else {
        None
    };
    prepare(out, cfg)?;
    let ctx = Context { cfg, grids, members };
    let mut reports = Vec::new();
    for kind in kinds {
        if kind == ProbeKind::Norms {
            write_norms(out, cfg)?;
        }
        reports.extend(probes::evaluate(kind, &ctx)?);
    }
    summarize(out, &reports, color)
}

fn write_norms(out: &Path, cfg: &SimConfig) -> Outcome {
    let mut text = String::from("spec,value\n");
    for (spec, value) in probes::norm_table(cfg)? {
        let _ = writeln!(text, "\"{spec}\",{value}");
    }
    write(out.join("norms.csv"), text)
}

pub fn probe(cfg: &SimConfig, out: &Path, color: bool) -> Outcome {
    if cfg.probes.is_empty() {
        return Err(Failure::config("probe list is empty".into()));
    }
    if let Some(k) = cfg.probes.iter().find(|k| k.needs_dynamics()) {
        return Err(Failure::config(format!("probe {} needs evolved members; use the sweep verb", k.name())));
    }
    let mut kinds = cfg.probes.clone();
    kinds.sort();
    kinds.dedup();
    let grids = if kinds.iter().any(|&k| k != ProbeKind::Norms) {
        cfg.sweep_probes()?;
        cfg.sweep_grids()?
    } else {
        Vec::new()
    };
    prepare(out, cfg)?;
    let ctx = Context { cfg, grids, members: None };
    let mut reports = Vec::new();
    for kind in kinds {
        if kind == ProbeKind::Norms {
            write_norms(out, cfg)?;
            print!("{}", fs::read_to_string(out.join("norms.csv"))?);
        } else {
            reports.extend(probes::evaluate(kind, &ctx)?);
        }
    }
    if reports.is_empty() {
        Ok(())
    } else {
        summarize(out, &reports, color)
    }
}

// ---------------------------------------------------------------- report

fn collect_reports(root: &Path, dir: &Path, found: &mut Vec<(String, PathBuf)>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_reports(root, &path, found)?;
        } else if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".report.json")) {
            let parent = path.parent().unwrap_or(root);
            let run = parent.strip_prefix(root).map(|p| p.to_string_lossy().into_owned()).unwrap_or_default();
            found.push((if run.is_empty() { ".".into() } else { run }, path));
        }
    }
    Ok(())
}

pub fn report(dir: &Path, out: &Path) -> Outcome {
    if !dir.is_dir() {
        return Err(Failure::config(format!("{} is not a directory", dir.display())));
    }
    let mut found = Vec::new();
    collect_reports(dir, dir, &mut found)?;
    if found.is_empty() {
        return Err(Failure::config(format!("no *.report.json files under {}", dir.display())));
    }
    let mut parsed: Vec<(String, ProbeReport)> = Vec::new();
    for (run, path) in found {
        let text = fs::read_to_string(&path)?;
        let r = parse_report_json(&text).map_err(|e| Failure {
            code: 2,
            kind: "parse",
            message: format!("malformed report {}: {e}", path.display()),
        })?;
        parsed.push((run, r));
    }
    fs::create_dir_all(out)?;

    let mut merged = String::from("run,");
    let rows: Vec<(String, ReportCsvRow)> =
        parsed.iter().flat_map(|(run, r)| report_rows(r).into_iter().map(move |row| (run.clone(), row))).collect();
    let flat = report_csv(&rows.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
    let mut lines = flat.lines();
    merged.push_str(lines.next().unwrap_or_default());
    merged.push('\n');
    for ((run, _), line) in rows.iter().zip(lines) {
        let _ = writeln!(merged, "{},{line}", csv_field(run));
    }
    write(out.join("merged.csv"), merged)?;

    let mut by_probe: std::collections::BTreeMap<String, String> = Default::default();
    for (run, row) in &rows {
        if row.hbar > 0.0 && row.lhs > 0.0 {
            let text = by_probe.entry(file_stem(&row.probe)).or_insert_with(|| "run,time,log_hbar,log_lhs\n".into());
            let _ = writeln!(text, "{},{},{},{}", csv_field(run), row.time, row.hbar.ln(), row.lhs.ln());
        }
    }
    for (stem, text) in by_probe {
        write(out.join(format!("plot_{stem}.csv")), text)?;
    }

    let mut rate = String::new();
    for (_, r) in parsed.iter().filter(|(_, r)| r.probe == "convergence") {
        let slope = r.slope.map(|s| s.slope.to_string()).unwrap_or_default();
        for row in &r.rows {
            let _ = writeln!(rate, "{},{},{slope}", row.hbar, row.lhs);
        }
    }
    if !rate.is_empty() {
        write(out.join("main_rate.csv"), format!("hbar,l2_error,fitted_slope\n{rate}"))?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
