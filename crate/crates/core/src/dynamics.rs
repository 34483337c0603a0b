//! Poisson solves and the Vlasov-Poisson, Hartree and linear Hartree flows.

use std::f64::consts::PI;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::calculus::{ensure_wrap_safe, schatten_norm, spatial_density};
use crate::error::{Error, Result};
use crate::field::PhaseField;
use crate::grid::PhaseGrid;
use crate::operator::DensityOperator;
use crate::quantize::chord_midpoint;
use crate::spectral;

/// Boundary-strip mass that stops a Vlasov run.
pub const SUPPORT_LIMIT: f64 = 1e-8;

/// Potential, force and density at one instant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub time: f64,
    pub v: Vec<f64>,
    pub e: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Periodic neutralized Poisson solve `-V'' = sign (rho - mean rho)`, `E = -V'`.
pub fn solve_poisson(rho: &[f64], lx: f64, sign: f64) -> FieldSnapshot {
    let n = rho.len();
    let mut buf: Vec<C64> = rho.iter().map(|&r| C64::new(r, 0.0)).collect();
    spectral::forward(&mut buf);
    for (idx, b) in buf.iter_mut().enumerate() {
        let q = spectral::signed(idx, n);
        if q == 0 || sign == 0.0 {
            *b = C64::new(0.0, 0.0);
        } else {
            let w = 2.0 * PI * q as f64 / lx;
            *b *= sign / (w * w) / n as f64;
        }
    }
    spectral::inverse(&mut buf);
    let v: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mut e = buf;
    spectral::derivative(&mut e, lx);
    let e = e.iter().map(|c| -c.re).collect();
    FieldSnapshot { time: 0.0, v, e, rho: rho.to_vec() }
}

/// Step count and logging cadence of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_final: f64,
    pub dt: f64,
    /// Keep a full snapshot every this many steps (the final state is always kept).
    pub snapshot_every: usize,
}

impl Schedule {
    pub fn new(t_final: f64, dt: f64) -> Self {
        Self { t_final, dt, snapshot_every: 1 }
    }

    pub fn every(mut self, k: usize) -> Self {
        self.snapshot_every = k.max(1);
        self
    }

    /// Number of steps and the step length that lands exactly on `t_final`.
    pub fn steps(&self) -> Result<(usize, f64)> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("T must be nonnegative, got {}", self.t_final)));
        }
        if self.t_final == 0.0 {
            return Ok((0, self.dt));
        }
        let k = (self.t_final / self.dt - 1e-9).ceil().max(1.0) as usize;
        Ok((k, self.t_final / k as f64))
    }
}

/// Conserved-quantity log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time: f64,
    /// `int f` or `h^d Tr op`.
    pub mass: f64,
    pub l2_norm: f64,
    pub energy: f64,
    pub min_eigenvalue: Option<f64>,
    pub min_value: Option<f64>,
}

/// Snapshots at stored times plus per-step logs and mean fields.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub grid: PhaseGrid,
    pub dt: f64,
    pub sign: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<S>,
    pub logs: Vec<LogRow>,
    /// Mean field at every step time `0, dt, ..., T`.
    pub fields: Vec<FieldSnapshot>,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    /// Snapshot whose time is closest to `t`.
    pub fn at(&self, t: f64) -> &S {
        let idx = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        &self.snapshots[idx]
    }
}

pub type FieldTrajectory = Trajectory<PhaseField>;
pub type OperatorTrajectory = Trajectory<DensityOperator>;

// ---------------------------------------------------------------- Vlasov

fn vlasov_energy(f: &PhaseField, field: &FieldSnapshot, sign: f64) -> f64 {
    let kinetic = f.map_with_coords(|_, xi, v| v * 0.5 * xi * xi).integral().re;
    let dx = f.grid.dx();
    let potential = 0.5 * sign * field.e.iter().map(|e| e * e).sum::<f64>() * dx;
    kinetic + potential
}

fn field_log(f: &PhaseField, field: &FieldSnapshot, sign: f64, time: f64) -> LogRow {
    LogRow {
        time,
        mass: f.integral().re,
        l2_norm: crate::calculus::lebesgue_norm(f, 2.0),
        energy: vlasov_energy(f, field, sign),
        min_eigenvalue: None,
        min_value: Some(f.min_real()),
    }
}

fn field_at(f: &PhaseField, sign: f64, time: f64) -> FieldSnapshot {
    let mut s = solve_poisson(&f.density(), f.grid.lx(), sign);
    s.time = time;
    s
}

/// Per-row shift `f(x, xi) <- f(x - xi tau, xi)`.
fn drift(values: &mut DMatrix<f64>, g: &PhaseGrid, tau: f64, scratch: &mut Vec<C64>) {
    let n = g.n();
    let mut col = vec![0.0; n];
    for k in 0..n {
        col.copy_from_slice(values.column(k).as_slice());
        spectral::translate_real(&mut col, g.xi(k) * tau, g.lx(), scratch);
        values.column_mut(k).copy_from_slice(&col);
    }
}

/// Per-column shift `f(x, xi) <- f(x, xi - E(x) tau)`.
fn kick(values: &mut DMatrix<f64>, g: &PhaseGrid, e: &[f64], tau: f64, scratch: &mut Vec<C64>) {
    let n = g.n();
    let mut row = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            row[k] = values[(i, k)];
        }
        spectral::translate_real(&mut row, e[i] * tau, g.lxi(), scratch);
        for k in 0..n {
            values[(i, k)] = row[k];
        }
    }
}

fn to_field(g: PhaseGrid, values: &DMatrix<f64>) -> PhaseField {
    let mut f = PhaseField::from_values(g, values.map(|v| C64::new(v, 0.0)));
    f.parity = crate::field::Parity::Real;
    f
}

/// Strang splitting for `d_t f + xi d_x f + E d_xi f = 0`: half drift,
/// kick with the mid-step force, half drift. `sign = 0` switches the
/// interaction off.
pub fn evolve_vlasov(f0: &PhaseField, schedule: Schedule, sign: f64) -> Result<FieldTrajectory> {
    let g = f0.grid;
    let (steps, dt) = schedule.steps()?;
    if f0.max_imag() > 1e-12 * f0.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain("Vlasov initial data must be real".into()));
    }
    let scale = f0.max_abs();
    if f0.min_real() < -1e-12 * scale.max(1.0) {
        return Err(Error::Domain(format!("Vlasov initial data has negative value {:.3e}", f0.min_real())));
    }
    let tail = f0.boundary_mass_fraction();
    if tail > SUPPORT_LIMIT {
        return Err(Error::SupportEscape { mass: tail, limit: SUPPORT_LIMIT, time: 0.0 });
    }
    let mut values = f0.values.map(|v| v.re);
    let mut scratch = Vec::with_capacity(g.n());
    let mut current = to_field(g, &values);
    let first = field_at(&current, sign, 0.0);
    let mut traj = Trajectory {
        grid: g,
        dt,
        sign,
        times: vec![0.0],
        snapshots: vec![current.clone()],
        logs: vec![field_log(&current, &first, sign, 0.0)],
        fields: vec![first],
    };
    let mut warned = false;
    for step in 1..=steps {
        let time = step as f64 * dt;
        drift(&mut values, &g, 0.5 * dt, &mut scratch);
        if sign != 0.0 {
            let mid = to_field(g, &values);
            let e = solve_poisson(&mid.density(), g.lx(), sign).e;
            kick(&mut values, &g, &e, dt, &mut scratch);
        }
        drift(&mut values, &g, 0.5 * dt, &mut scratch);
        current = to_field(g, &values);
        let tail = current.boundary_mass_fraction();
        if tail > SUPPORT_LIMIT {
            return Err(Error::SupportEscape { mass: tail, limit: SUPPORT_LIMIT, time });
        }
        let lo = current.min_real();
        if !warned && lo < -1e-6 * scale {
            warn!("Vlasov solution dips to {lo:.3e} at t = {time:.4}");
            warned = true;
        }
        let field = field_at(&current, sign, time);
        traj.logs.push(field_log(&current, &field, sign, time));
        traj.fields.push(field);
        if step % schedule.snapshot_every == 0 || step == steps {
            traj.times.push(time);
            traj.snapshots.push(current.clone());
        }
    }
    Ok(traj)
}

// ---------------------------------------------------------------- Hartree

/// `h^d Tr(|p|^2/2 op)` from the momentum-basis diagonal.
pub fn kinetic_energy(op: &DensityOperator) -> f64 {
    let g = op.grid;
    let n = g.n();
    op.momentum_diagonal()
        .iter()
        .enumerate()
        .map(|(idx, d)| {
            let p = spectral::signed(idx, n) as f64 * g.dxi();
            0.5 * p * p * d
        })
        .sum::<f64>()
        * g.h_d()
}

/// Kinetic energy plus `1/2 int rho V`.
pub fn hartree_energy(op: &DensityOperator, field: &FieldSnapshot) -> f64 {
    let dx = op.grid.dx();
    let pot: f64 = field.rho.iter().zip(&field.v).map(|(r, v)| r * v).sum::<f64>() * dx;
    kinetic_energy(op) + 0.5 * pot
}

/// `K_ij <- e^{-i tau (V_i - V_j) / hbar} K_ij`.
fn potential_kick(kernel: &mut DMatrix<C64>, v: &[f64], tau: f64, hbar: f64) {
    let n = v.len();
    let phase: Vec<C64> = v.iter().map(|&x| C64::from_polar(1.0, -tau * x / hbar)).collect();
    for j in 0..n {
        let cj = phase[j].conj();
        for i in 0..n {
            kernel[(i, j)] *= phase[i] * cj;
        }
    }
}

/// `op <- e^{-i tau |p|^2 / (2 hbar)} op e^{i tau |p|^2 / (2 hbar)}`.
fn kinetic_drift(op: &DensityOperator, tau: f64) -> DensityOperator {
    let hbar = op.grid.hbar();
    let u = move |p: f64| C64::from_polar(1.0, -tau * p * p / (2.0 * hbar));
    let ud = move |p: f64| C64::from_polar(1.0, tau * p * p / (2.0 * hbar));
    let mut out = op.left_multiplier(u).right_multiplier(ud);
    out.hermitian = op.hermitian;
    out.positive = op.positive;
    out
}

fn operator_log(op: &DensityOperator, field: &FieldSnapshot, time: f64, spectrum: bool) -> LogRow {
    LogRow {
        time,
        mass: op.grid.h_d() * op.trace().re,
        l2_norm: schatten_norm(op, 2.0),
        energy: hartree_energy(op, field),
        min_eigenvalue: if spectrum { Some(op.eigenvalues()[0]) } else { None },
        min_value: None,
    }
}

fn density_field(op: &DensityOperator, sign: f64, time: f64) -> FieldSnapshot {
    let mut s = solve_poisson(&spatial_density(op), op.grid.lx(), sign);
    s.time = time;
    s
}

/// Source of the potential driving one step `[t, t + dt]`.
trait Drive {
    fn at(&mut self, op: &DensityOperator, time: f64) -> Result<FieldSnapshot>;
}

struct SelfConsistent {
    sign: f64,
}

impl Drive for SelfConsistent {
    fn at(&mut self, op: &DensityOperator, time: f64) -> Result<FieldSnapshot> {
        Ok(density_field(op, self.sign, time))
    }
}

struct History<'a> {
    fields: &'a [FieldSnapshot],
}

impl Drive for History<'_> {
    fn at(&mut self, op: &DensityOperator, time: f64) -> Result<FieldSnapshot> {
        let v = interpolate_potential(self.fields, time)?;
        let rho = spatial_density(op);
        Ok(FieldSnapshot { time, e: vec![0.0; v.len()], v, rho })
    }
}

/// Linear-in-time interpolation of the potential history.
pub fn interpolate_potential(fields: &[FieldSnapshot], t: f64) -> Result<Vec<f64>> {
    let tol = 1e-9 * t.abs().max(1.0);
    let first = fields.first().ok_or_else(|| Error::FieldHistory("empty field history".into()))?;
    if t < first.time - tol {
        return Err(Error::FieldHistory(format!("t = {t} precedes the history start {}", first.time)));
    }
    let idx = fields.partition_point(|s| s.time <= t + tol);
    if idx == 0 {
        return Ok(first.v.clone());
    }
    let a = &fields[idx - 1];
    if (a.time - t).abs() <= tol {
        return Ok(a.v.clone());
    }
    let b = fields
        .get(idx)
        .ok_or_else(|| Error::FieldHistory(format!("t = {t} is past the history end {}", a.time)))?;
    let w = (t - a.time) / (b.time - a.time);
    Ok(a.v.iter().zip(&b.v).map(|(x, y)| (1.0 - w) * x + w * y).collect())
}

fn check_history(fields: &[FieldSnapshot], t_final: f64, dt: f64) -> Result<()> {
    if fields.is_empty() {
        return Err(Error::FieldHistory("empty field history".into()));
    }
    let tol = 1e-9 * t_final.max(1.0);
    if fields[0].time > tol {
        return Err(Error::FieldHistory(format!("history starts at {} > 0", fields[0].time)));
    }
    let end = fields[fields.len() - 1].time;
    if end < t_final - tol {
        return Err(Error::FieldHistory(format!("history ends at {end} before T = {t_final}")));
    }
    for w in fields.windows(2) {
        let gap = w[1].time - w[0].time;
        if !(gap > 0.0) {
            return Err(Error::FieldHistory(format!("history times not increasing at {}", w[1].time)));
        }
        if gap > 2.0 * dt + tol {
            return Err(Error::FieldHistory(format!(
                "history gap {gap:.3e} between t = {} and t = {} exceeds 2 dt",
                w[0].time, w[1].time
            )));
        }
    }
    Ok(())
}

fn run_unitary(op0: &DensityOperator, schedule: Schedule, sign: f64, drive: &mut dyn Drive) -> Result<OperatorTrajectory> {
    op0.ensure_hermitian()?;
    let g = op0.grid;
    let hbar = g.hbar();
    let (steps, dt) = schedule.steps()?;
    let mut op = op0.clone();
    op.hermitian = true;
    let mut field = drive.at(&op, 0.0)?;
    let mut traj = Trajectory {
        grid: g,
        dt,
        sign,
        times: vec![0.0],
        snapshots: vec![op.clone()],
        logs: vec![operator_log(&op, &field, 0.0, true)],
        fields: vec![field.clone()],
    };
    for step in 1..=steps {
        let time = step as f64 * dt;
        // the potential kick leaves the diagonal, hence rho, unchanged
        potential_kick(&mut op.kernel, &field.v, 0.5 * dt, hbar);
        op = kinetic_drift(&op, dt);
        field = drive.at(&op, time)?;
        potential_kick(&mut op.kernel, &field.v, 0.5 * dt, hbar);
        let keep = step % schedule.snapshot_every == 0 || step == steps;
        traj.logs.push(operator_log(&op, &field, time, keep));
        traj.fields.push(field.clone());
        if keep {
            traj.times.push(time);
            traj.snapshots.push(op.clone());
        }
    }
    Ok(traj)
}

/// Kick-drift-kick splitting for `i hbar d_t op = [-hbar^2 Delta / 2 + V_op, op]`
/// with `-V'' = sign (rho - mean rho)`.
pub fn evolve_hartree(op0: &DensityOperator, schedule: Schedule, sign: f64) -> Result<OperatorTrajectory> {
    run_unitary(op0, schedule, sign, &mut SelfConsistent { sign })
}

/// The same splitting with the potential read from a precomputed history,
/// interpolated linearly in time.
pub fn evolve_linear_hartree(
    op0: &DensityOperator,
    field_history: &[FieldSnapshot],
    schedule: Schedule,
) -> Result<OperatorTrajectory> {
    let (_, dt) = schedule.steps()?;
    check_history(field_history, schedule.t_final, dt)?;
    run_unitary(op0, schedule, f64::NAN, &mut History { fields: field_history })
}

/// Applies the flow recorded in a trajectory's fields to another operator.
/// Used to carry square roots along a linear Hartree flow.
pub fn replay_linear_hartree(op0: &DensityOperator, traj: &OperatorTrajectory) -> Result<OperatorTrajectory> {
    let schedule = Schedule { t_final: traj.fields.last().map_or(0.0, |f| f.time), dt: traj.dt, snapshot_every: 1 };
    let mut out = run_unitary(op0, schedule, traj.sign, &mut History { fields: &traj.fields })?;
    // keep only the times the source trajectory stored
    let keep: Vec<usize> = traj
        .times
        .iter()
        .map(|t| out.times.iter().position(|s| (s - t).abs() <= 1e-9 * t.max(1.0)).unwrap_or(0))
        .collect();
    out.snapshots = keep.iter().map(|&i| out.snapshots[i].clone()).collect();
    out.times = traj.times.clone();
    Ok(out)
}

// ---------------------------------------------------------------- B remainder

/// A potential that can report the second-order Taylor defect
/// `V(x) - V(y) - (x - y) V'((x + y)/2)` over lattice pairs.
pub trait Potential {
    /// Defect for kernel entry `(i, j)`, with `x - y` the minimal-image chord.
    fn delta2(&self, grid: &PhaseGrid, i: usize, j: usize) -> f64;
}

/// Periodic lattice potential; midpoint gradients come from half-sample
/// trigonometric interpolation.
#[derive(Clone, Debug)]
pub struct GridPotential {
    v: Vec<f64>,
    /// `V'` on the doubled lattice: even slots are nodes, odd slots midpoints.
    grad2: Vec<f64>,
}

impl GridPotential {
    pub fn new(v: &[f64], lx: f64) -> Self {
        let n = v.len();
        let mut d: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        spectral::derivative(&mut d, lx);
        let mut half = d.clone();
        spectral::fractional_shift(&mut half, 0.5);
        let mut grad2 = vec![0.0; 2 * n];
        for a in 0..n {
            grad2[2 * a] = d[a].re;
            grad2[2 * a + 1] = half[a].re;
        }
        Self { v: v.to_vec(), grad2 }
    }
}

impl Potential for GridPotential {
    fn delta2(&self, grid: &PhaseGrid, i: usize, j: usize) -> f64 {
        let (r, m) = chord_midpoint(i, j, grid.n());
        self.v[i] - self.v[j] - r as f64 * grid.dx() * self.grad2[m]
    }
}

/// Analytic potential evaluated on the unwrapped window `y = x_j`,
/// `x = y + r dx`.
pub struct AnalyticPotential<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Potential for AnalyticPotential<F, G> {
    fn delta2(&self, grid: &PhaseGrid, i: usize, j: usize) -> f64 {
        let (r, _) = chord_midpoint(i, j, grid.n());
        let y = grid.x(j);
        let x = y + r as f64 * grid.dx();
        (self.value)(x) - (self.value)(y) - (x - y) * (self.gradient)(0.5 * (x + y))
    }
}

/// `B(x, y) = (V(x) - V(y) - (x - y) V'((x + y)/2)) op(x, y)`.
pub fn b_remainder(op: &DensityOperator, potential: &dyn Potential) -> Result<DensityOperator> {
    ensure_wrap_safe(op)?;
    Ok(b_remainder_unchecked(op, potential))
}

fn b_remainder_unchecked(op: &DensityOperator, potential: &dyn Potential) -> DensityOperator {
    let g = op.grid;
    let n = g.n();
    let kernel = DMatrix::from_fn(n, n, |i, j| op.kernel[(i, j)] * potential.delta2(&g, i, j));
    let mut out = DensityOperator::new(g, kernel);
    out.positive = false;
    out
}

/// `[H, op]` with `H = |p|^2/2 + V`.
pub fn hamiltonian_commutator(op: &DensityOperator, v: &[f64]) -> DensityOperator {
    let kin = |p: f64| C64::new(0.5 * p * p, 0.0);
    let left = op.left_multiplier(kin);
    let right = op.right_multiplier(kin);
    let n = op.n();
    let kernel = DMatrix::from_fn(n, n, |i, j| left.kernel[(i, j)] - right.kernel[(i, j)] + op.kernel[(i, j)] * (v[i] - v[j]));
    DensityOperator::new(op.grid, kernel)
}

/// Per interior step `n`, the `L^2` norm of
/// `i hbar (op_{n+1} - op_{n-1}) / (2 dt) - [H_f, op_n] + B_f(op_n)`
/// for the Weyl quantization of a Vlasov run stored at every step.
/// With `with_b = false` the remainder term is left out.
pub fn weyl_vlasov_residual(traj: &FieldTrajectory, with_b: bool) -> Result<Vec<(f64, f64)>> {
    if traj.snapshots.len() != traj.fields.len() {
        return Err(Error::Config("residual needs a snapshot at every step".into()));
    }
    let hbar = traj.grid.hbar();
    let dt = traj.dt;
    let ops: Vec<DensityOperator> = traj.snapshots.iter().map(crate::quantize::weyl_quantize).collect();
    let mut out = Vec::new();
    for k in 1..ops.len().saturating_sub(1) {
        let v = &traj.fields[k].v;
        let dtop = ops[k + 1].sub(&ops[k - 1])?.kernel * C64::new(0.0, hbar / (2.0 * dt));
        let comm = hamiltonian_commutator(&ops[k], v);
        let mut res = dtop - comm.kernel;
        if with_b {
            let b = b_remainder(&ops[k], &GridPotential::new(v, traj.grid.lx()))?;
            res += b.kernel;
        }
        let r = DensityOperator::new(traj.grid, res);
        out.push((traj.times[k], schatten_norm(&r, 2.0)));
    }
    Ok(out)
}
