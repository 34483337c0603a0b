//! Run configuration: a strict JSON document plus dotted-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::Schedule;
use crate::error::{Error, Result};
use crate::estimates::{SweepSettings, MIN_SWEEP_POINTS};
use crate::grid::PhaseGrid;
use crate::profile::Profile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub lx: f64,
    pub lxi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Hartree,
    Vlasov,
    LinearHartree,
    TwinClassical,
    TwinQuantum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Convergence,
    InitialGap,
    PositivityDefect,
    DiagDrift,
    SqrtComparison,
    QuantumLambda,
    BRemainder,
    Regularity,
    WickSquare,
    InitDiff,
    WickWeyl,
    Commutator,
    WeightRemainder,
    GaussianCommutator,
    Norms,
}

impl ProbeKind {
    /// Probes that need the evolved sweep members.
    pub fn needs_dynamics(self) -> bool {
        matches!(
            self,
            ProbeKind::Convergence
                | ProbeKind::InitialGap
                | ProbeKind::PositivityDefect
                | ProbeKind::DiagDrift
                | ProbeKind::SqrtComparison
                | ProbeKind::QuantumLambda
                | ProbeKind::BRemainder
                | ProbeKind::Regularity
        )
    }

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Also dump the first and last snapshots as CSV and raw arrays.
    #[serde(default)]
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), snapshots: false }
    }
}

fn default_dir() -> String {
    "out".into()
}
fn default_sign() -> f64 {
    1.0
}
fn default_dt_over_hbar() -> f64 {
    0.1
}
fn default_log_intervals() -> usize {
    10
}
fn default_n() -> f64 {
    3.0
}
fn default_eps() -> f64 {
    0.5
}
fn default_pairs() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridConfig,
    /// `+1` repulsive, `-1` attractive, `0` free.
    #[serde(default = "default_sign")]
    pub sign: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Absolute step; when absent the step is `dt_over_hbar * hbar` of each grid.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_dt_over_hbar")]
    pub dt_over_hbar: f64,
    pub initial: Profile,
    /// Second datum of the twin experiments.
    #[serde(default)]
    pub second: Option<Profile>,
    #[serde(default)]
    pub sweep: Vec<usize>,
    #[serde(default)]
    pub probes: Vec<ProbeKind>,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    /// Potential source of `linear-hartree`: `"vlasov"` or a `fields.json` path.
    #[serde(default)]
    pub field_history: Option<String>,
    #[serde(default = "default_log_intervals")]
    pub log_intervals: usize,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    /// Momentum-weight exponent of the quantum budgets.
    #[serde(default = "default_n")]
    pub n: f64,
    /// Schatten offsets `3 -+ eps`.
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Random operator pairs (or samples) per grid for the randomized probes.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

impl SimConfig {
    /// Parses and validates a document after applying `key=value` overrides.
    pub fn from_json_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: SimConfig = serde_json::from_value(doc).map_err(|e| Error::Config(format!("schema: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with(text, &[])
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("T must be nonnegative, got {}", self.t_final)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.dt_over_hbar > 0.0) || !self.dt_over_hbar.is_finite() {
            return Err(Error::Config(format!("dt_over_hbar must be positive, got {}", self.dt_over_hbar)));
        }
        if ![-1.0, 0.0, 1.0].contains(&self.sign) {
            return Err(Error::Config(format!("sign must be -1, 0 or 1, got {}", self.sign)));
        }
        if self.sweep.iter().any(|n| n % 2 == 1) {
            return Err(Error::Config("sweep N values must be even".into()));
        }
        if self.sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep N values must be increasing".into()));
        }
        if !(self.n >= 0.0) {
            return Err(Error::Config(format!("n must be nonnegative, got {}", self.n)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.log_intervals == 0 {
            return Err(Error::Config("log_intervals must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::line(self.grid.n, self.grid.lx, self.grid.lxi)
    }

    pub fn schedule(&self, grid: &PhaseGrid) -> Result<Schedule> {
        let dt = self.dt.unwrap_or(self.dt_over_hbar * grid.hbar());
        let s = Schedule::new(self.t_final, dt);
        let (steps, _) = s.steps()?;
        Ok(s.every((steps / self.log_intervals).max(1)))
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let e = self.experiment.ok_or_else(|| Error::Config("run needs an experiment".into()))?;
        match e {
            Experiment::TwinClassical | Experiment::TwinQuantum if self.second.is_none() => {
                Err(Error::Config("twin experiments need a second profile".into()))
            }
            Experiment::LinearHartree if self.field_history.is_none() => {
                Err(Error::Config("linear-hartree needs a field_history source".into()))
            }
            _ => Ok(e),
        }
    }

    /// Probe list for sweeps: non-empty with enough sweep points.
    pub fn sweep_probes(&self) -> Result<Vec<ProbeKind>> {
        if self.probes.is_empty() {
            return Err(Error::Config("probe list is empty".into()));
        }
        if self.sweep.len() < MIN_SWEEP_POINTS {
            return Err(Error::Config(format!(
                "sweep needs >= {MIN_SWEEP_POINTS} values of N, got {}",
                self.sweep.len()
            )));
        }
        let mut p = self.probes.clone();
        p.sort();
        p.dedup();
        Ok(p)
    }

    pub fn sweep_grids(&self) -> Result<Vec<PhaseGrid>> {
        self.sweep.iter().map(|&n| PhaseGrid::line(n, self.grid.lx, self.grid.lxi)).collect()
    }

    pub fn sweep_settings(&self) -> Result<SweepSettings> {
        let s = SweepSettings {
            profile: self.initial.clone(),
            lx: self.grid.lx,
            lxi: self.grid.lxi,
            ns: self.sweep.clone(),
            t_final: self.t_final,
            dt_over_hbar: self.dt_over_hbar,
            sign: self.sign,
            log_intervals: self.log_intervals,
            n_weight: self.n,
            eps: self.eps,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Sets `a.b.c=value` in a JSON document. The value is read as JSON when
/// it parses, otherwise as a string. Missing objects are created; array
/// elements are addressed by index.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) =
        assignment.split_once('=').ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override key '{path}' is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*key).to_owned(), value);
                    return Ok(());
                }
                map.entry((*key).to_owned()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize =
                    key.parse().map_err(|_| Error::Config(format!("override '{path}': '{key}' is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override '{path}': index {idx} out of range {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("override '{path}': '{key}' is below a scalar"))),
        };
    }
    Ok(())
}
