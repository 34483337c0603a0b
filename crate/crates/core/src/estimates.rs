//! Inequality probes: Grönwall budgets, twin-run stability experiments,
//! lemma-level ratio probes, the semiclassical convergence sweep and
//! regularity tracking.
//!
//! Every inequality with an unspecified constant is probed two ways: the
//! ħ-scaling slope of the measured left side, and the boundedness of the
//! ratio left side / budget across the sweep. Envelopes with a fitted
//! constant `C*` calibrate `C*` on the earliest logged data point and hold
//! it fixed for all later times.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{
    derivative_sobolev_norm, lebesgue_norm, lorentz_norm, mixed_norm, momentum_weight_apply, operator_sqrt, partial, quantum_gradient_xi,
    quantum_sobolev_norm, schatten_norm, spatial_density, spatial_norm, weighted_schatten_norm,
    weighted_sobolev_norm, Side,
};
use crate::dynamics::{
    b_remainder, evolve_hartree, evolve_linear_hartree, evolve_vlasov, replay_linear_hartree, solve_poisson,
    FieldTrajectory, GridPotential, OperatorTrajectory, Schedule,
};
use crate::error::{Error, Result};
use crate::field::PhaseField;
use crate::grid::PhaseGrid;
use crate::operator::DensityOperator;
use crate::profile::{sample_field, Profile};
use crate::quantize::{husimi_convolve, weyl_quantize, wick_quantize, wigner_transform};
use crate::spectral;

// ---------------------------------------------------------------- reports

/// Least-squares fit of `log y = slope log x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

impl SlopeFit {
    /// Two-standard-error band around the slope.
    pub fn band(&self) -> (f64, f64) {
        (self.slope - 2.0 * self.stderr, self.slope + 2.0 * self.stderr)
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

pub const MIN_SWEEP_POINTS: usize = 4;

/// Log-log regression; needs at least [`MIN_SWEEP_POINTS`] positive finite points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() {
        return Err(Error::Config(format!("slope fit over {} abscissae and {} values", x.len(), y.len())));
    }
    if x.len() < MIN_SWEEP_POINTS {
        return Err(Error::Config(format!("slope fit needs >= {MIN_SWEEP_POINTS} points, got {}", x.len())));
    }
    if let Some(bad) = x.iter().chain(y).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Domain(format!("slope fit needs positive finite data, got {bad}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if lx.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, intercept, stderr, points: lx.len() })
}

/// One measured point of a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub hbar: f64,
    pub time: f64,
    pub lhs: f64,
    pub budget: f64,
    pub ratio: f64,
}

impl ProbeRow {
    pub fn new(hbar: f64, time: f64, lhs: f64, budget: f64) -> Self {
        let ratio = if budget > 0.0 {
            lhs / budget
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::MAX
        };
        Self { hbar, time, lhs, budget, ratio }
    }
}

/// A hard assertion attached to a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

/// Outcome of one probe or experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub rows: Vec<ProbeRow>,
    /// Fit of the left side against ħ.
    pub slope: Option<SlopeFit>,
    /// Fit of the ratio against ħ.
    pub ratio_slope: Option<SlopeFit>,
    /// Fitted constants and other informative measurements.
    pub constants: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl ProbeReport {
    pub fn new(probe: impl Into<String>) -> Self {
        Self {
            probe: probe.into(),
            rows: Vec::new(),
            slope: None,
            ratio_slope: None,
            constants: BTreeMap::new(),
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, bound: impl Into<String>, pass: bool) {
        let pass = pass && !value.is_nan();
        self.pass &= pass;
        self.checks.push(Check { name: name.into(), value, bound: bound.into(), pass });
    }

    /// `value <= limit`.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.check(name, value, format!("<= {limit:e}"), value <= limit);
    }

    /// `lo <= value <= hi`.
    pub fn check_in(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        self.check(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.insert(name.into(), value);
    }

    /// Fits the left side against ħ over the rows and checks the slope.
    pub fn fit_lhs(&mut self, lo: f64, hi: f64) -> Result<SlopeFit> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.hbar).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.lhs).collect();
        let fit = fit_slope(&h, &y)?;
        self.slope = Some(fit);
        self.check_in("lhs slope", fit.slope, lo, hi);
        Ok(fit)
    }

    /// Fits the ratio against ħ over the rows and checks `|slope| <= tol`.
    pub fn fit_ratio(&mut self, tol: f64) -> Result<SlopeFit> {
        let h: Vec<f64> = self.rows.iter().map(|r| r.hbar).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.ratio).collect();
        let fit = fit_slope(&h, &y)?;
        self.ratio_slope = Some(fit);
        self.check_in("ratio slope", fit.slope, -tol, tol);
        Ok(fit)
    }

    /// First failing check, if any.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }
}

// ---------------------------------------------------------------- budgets

/// Cumulative trapezoid rule.
pub fn cumulative_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Grönwall ingredients `lambda(t)`, `Lambda(t) = int_0^t lambda`, an
/// optional source series `c(t)` and the initial-data constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallBudget {
    pub times: Vec<f64>,
    pub lambda: Vec<f64>,
    pub big_lambda: Vec<f64>,
    pub c: Vec<f64>,
    pub c_init: f64,
}

impl GronwallBudget {
    pub fn new(times: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if times.len() != lambda.len() {
            return Err(Error::Config("budget times and lambda differ in length".into()));
        }
        if let Some(bad) = lambda.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("lambda must be finite and nonnegative, got {bad}")));
        }
        let big_lambda = cumulative_integral(&times, &lambda);
        Ok(Self { times, lambda, big_lambda, c: Vec::new(), c_init: 0.0 })
    }

    pub fn with_source(mut self, c: Vec<f64>, c_init: f64) -> Self {
        self.c = c;
        self.c_init = c_init;
        self
    }

    /// `initial * exp(c_star * Lambda(t))`.
    pub fn envelope(&self, initial: f64, c_star: f64) -> Vec<f64> {
        self.big_lambda.iter().map(|l| initial * (c_star * l).exp()).collect()
    }

    /// `(int_0^t c(s)^2 exp(2 c_star (Lambda(t) - Lambda(s))) ds)^{1/2}` per time.
    pub fn duhamel(&self, c_star: f64) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| {
                let w: Vec<f64> = (0..=k)
                    .map(|s| self.c[s].powi(2) * (2.0 * c_star * (self.big_lambda[k] - self.big_lambda[s])).exp())
                    .collect();
                cumulative_integral(&self.times[..=k], &w)[k].sqrt()
            })
            .collect()
    }
}

/// `C*` making `initial * exp(C* Lambda(t1)) = lhs(t1)` at the first logged
/// time with `Lambda > 0`; never negative.
pub fn calibrate_exponent(budget: &GronwallBudget, lhs: &[f64]) -> f64 {
    let initial = lhs[0];
    for k in 1..lhs.len() {
        let l = budget.big_lambda[k];
        if l > 0.0 && initial > 0.0 {
            return ((lhs[k] / initial).ln() / l).max(0.0);
        }
    }
    0.0
}

// ---------------------------------------------------------------- norm ingredients

fn spatial_derivative(v: &[f64], lx: f64, order: usize) -> Vec<f64> {
    let mut buf: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    for _ in 0..order {
        spectral::derivative(&mut buf, lx);
    }
    buf.iter().map(|c| c.re).collect()
}

/// `(sum_{j <= k} ||d^j rho||_{L^p}^2)^{1/2}` of a periodic spatial field.
pub fn spatial_sobolev_norm(rho: &[f64], k: usize, p: f64, lx: f64) -> f64 {
    let dx = lx / rho.len() as f64;
    (0..=k).map(|j| spatial_norm(&spatial_derivative(rho, lx, j), p, dx).powi(2)).sum::<f64>().sqrt()
}

/// `||rho||_{W^{1,inf}} = ||rho||_inf + ||rho'||_inf`.
pub fn w1inf(rho: &[f64], lx: f64) -> f64 {
    let dx = lx / rho.len() as f64;
    spatial_norm(rho, f64::INFINITY, dx) + spatial_norm(&spatial_derivative(rho, lx, 1), f64::INFINITY, dx)
}

/// `||grad E||_inf` of the force generated by `rho`.
pub fn force_gradient_sup(rho: &[f64], lx: f64, sign: f64) -> f64 {
    let e = solve_poisson(rho, lx, sign).e;
    let de = spatial_derivative(&e, lx, 1);
    de.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Pointwise `|grad f| = (|d_x f|^2 + |d_xi f|^2)^{1/2}`.
pub fn gradient_magnitude(f: &PhaseField) -> PhaseField {
    let gx = f.d_dx();
    let gxi = f.d_dxi();
    gx.zip_with(&gxi, |a, b| C64::new((a.norm_sqr() + b.norm_sqr()).sqrt(), 0.0)).expect("same grid")
}

/// `C^init = ||sqrt f||^2_{W^{1,4}_1 cap H^3} + ||f||_{H^1_1 cap H^2}`, with
/// intersection norms taken as sums.
pub fn c_init(f: &PhaseField) -> f64 {
    let g = f.sqrt_clamped();
    let a = weighted_sobolev_norm(&g, 1, 4.0, 1.0) + weighted_sobolev_norm(&g, 3, 2.0, 0.0);
    let b = weighted_sobolev_norm(f, 1, 2.0, 1.0) + weighted_sobolev_norm(f, 2, 2.0, 0.0);
    a * a + b
}

/// Norms of the regularity checklist for initial data: `W^{4,inf}_4` and
/// `H^4_4` of `f` and of `sqrt f`, all of which must be finite.
pub fn regularity_checklist(f: &PhaseField) -> Result<BTreeMap<String, f64>> {
    let g = f.sqrt_clamped();
    let mut out = BTreeMap::new();
    out.insert("f W^{4,inf}_4".to_string(), weighted_sobolev_norm(f, 4, f64::INFINITY, 4.0));
    out.insert("f H^4_4".to_string(), weighted_sobolev_norm(f, 4, 2.0, 4.0));
    out.insert("sqrt f W^{4,inf}_4".to_string(), weighted_sobolev_norm(&g, 4, f64::INFINITY, 4.0));
    out.insert("sqrt f H^4_4".to_string(), weighted_sobolev_norm(&g, 4, 2.0, 4.0));
    if let Some((k, v)) = out.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Config(format!("regularity checklist: {k} = {v}")));
    }
    if f.min_real() < -1e-12 * f.max_abs() {
        return Err(Error::Config(format!("regularity checklist: f has negative value {:.3e}", f.min_real())));
    }
    Ok(out)
}

// ---------------------------------------------------------------- classical stability

/// `lambda(t) = ||rho_2||_inf^{1/2} ||d_xi sqrt f_2||_{L^3_x L^2_xi}
/// + C_inf^{1/2} ||d_xi sqrt f_2||_{L^{3,1}_x L^1_xi}`.
pub fn classical_lambda_at(f2: &PhaseField, c_inf: f64) -> Result<f64> {
    let scale = f2.max_abs();
    if f2.min_real() < -1e-6 * scale {
        return Err(Error::Domain(format!("f_2 dips to {:.3e}; sqrt undefined", f2.min_real())));
    }
    let g = f2.grid;
    let d = f2.sqrt_clamped().d_dxi();
    let rho = f2.density();
    let rho_inf = spatial_norm(&rho, f64::INFINITY, g.dx());
    let l3l2 = mixed_norm(&d, 3.0, 2.0);
    let inner: Vec<f64> =
        (0..g.n()).map(|i| d.values.row(i).iter().map(|v| v.norm()).sum::<f64>() * g.dxi()).collect();
    let lorentz = lorentz_norm(&inner, 3.0, 1.0, g.dx());
    Ok(rho_inf.sqrt() * l3l2 + c_inf.sqrt() * lorentz)
}

/// Budget from the stored snapshots of the second trajectory.
pub fn classical_lambda(f2_traj: &FieldTrajectory, c_inf: f64) -> Result<GronwallBudget> {
    let lambda = f2_traj.snapshots.iter().map(|f| classical_lambda_at(f, c_inf)).collect::<Result<Vec<_>>>()?;
    GronwallBudget::new(f2_traj.times.clone(), lambda)
}

/// Evolves both data under Vlasov-Poisson and tracks `||sqrt f1 - sqrt f2||_{L^2}`
/// against `initial * exp(C* Lambda)` and the `L^2`-`L^1` corollary.
pub fn classical_stability_experiment(
    f1_0: &PhaseField,
    f2_0: &PhaseField,
    schedule: Schedule,
    sign: f64,
) -> Result<ProbeReport> {
    let c_inf = f1_0.max_abs().max(f2_0.max_abs());
    let (t1, t2) = rayon::join(|| evolve_vlasov(f1_0, schedule, sign), || evolve_vlasov(f2_0, schedule, sign));
    let (t1, t2) = (t1?, t2?);
    let budget = classical_lambda(&t2, c_inf)?;
    let hbar = f1_0.grid.hbar();
    let lhs: Vec<f64> = t1
        .snapshots
        .iter()
        .zip(&t2.snapshots)
        .map(|(a, b)| lebesgue_norm(&a.sqrt_clamped().sub(&b.sqrt_clamped()).expect("same grid"), 2.0))
        .collect();
    let diff: Vec<f64> =
        t1.snapshots.iter().zip(&t2.snapshots).map(|(a, b)| lebesgue_norm(&a.sub(b).expect("same grid"), 2.0)).collect();
    let l1_init = lebesgue_norm(&f1_0.sub(f2_0)?, 1.0);
    let mut report = ProbeReport::new("classical_stability");
    stability_checks(&mut report, hbar, &budget, &lhs, &diff, l1_init, c_inf);
    Ok(report)
}

fn stability_checks(
    report: &mut ProbeReport,
    hbar: f64,
    budget: &GronwallBudget,
    lhs: &[f64],
    diff: &[f64],
    l1_init: f64,
    c_inf: f64,
) {
    let c_star = calibrate_exponent(budget, lhs);
    let env = budget.envelope(lhs[0], c_star);
    let corollary = budget.envelope(2.0 * c_inf.sqrt() * l1_init.sqrt(), c_star);
    for k in 0..lhs.len() {
        report.rows.push(ProbeRow::new(hbar, budget.times[k], lhs[k], env[k]));
    }
    report.constant("c_star", c_star);
    report.constant("c_inf", c_inf);
    report.constant("initial distance", lhs[0]);
    report.constant("max lambda", budget.lambda.iter().copied().fold(0.0, f64::max));
    if lhs[0] <= 1e-12 {
        report.check_le("identical data: max left side", lhs.iter().copied().fold(0.0, f64::max), 1e-9);
        return;
    }
    let worst = lhs.iter().zip(&env).skip(1).map(|(l, e)| l / e).fold(0.0, f64::max);
    report.check_le("max left side / envelope", worst, 1.0 + 1e-9);
    let worst_cor = diff.iter().zip(&corollary).map(|(l, e)| l / e).fold(0.0, f64::max);
    report.check_le("max L2-L1 corollary ratio", worst_cor, 1.0);
}

// ---------------------------------------------------------------- quantum stability

/// `lambda = ||grad_xi v||_{W^{1,2}} ||rho||_inf^{1/2}
/// + C_inf^{1/2} max_{p = 3 +- eps} ||grad_xi v <p>^n||_{L^p}`.
pub fn quantum_lambda_at(v: &DensityOperator, rho: &[f64], c_inf: f64, n: f64, eps: f64) -> Result<f64> {
    let w12 = derivative_sobolev_norm(v, (0, 1), 1, 2.0, 0.0)?;
    let gv = quantum_gradient_xi(v)?;
    let rho_inf = spatial_norm(rho, f64::INFINITY, v.grid.dx());
    let w = weighted_schatten_norm(&gv, 3.0 - eps, n).max(weighted_schatten_norm(&gv, 3.0 + eps, n));
    Ok(w12 * rho_inf.sqrt() + c_inf.sqrt() * w)
}

/// Budget along a square-root trajectory `vtilde` driven by the densities `rho`.
pub fn quantum_lambda_series(
    v: &[DensityOperator],
    times: &[f64],
    rho: &[Vec<f64>],
    c_inf: f64,
    n: f64,
    eps: f64,
) -> Result<GronwallBudget> {
    let lambda = v
        .par_iter()
        .zip(rho.par_iter())
        .map(|(v, r)| quantum_lambda_at(v, r, c_inf, n, eps))
        .collect::<Result<Vec<_>>>()?;
    GronwallBudget::new(times.to_vec(), lambda)
}

/// Budget for the linear-Hartree square roots against the Vlasov densities.
pub fn quantum_lambda(
    vtilde_traj: &OperatorTrajectory,
    f_traj: &FieldTrajectory,
    c_inf: f64,
    n: f64,
    eps: f64,
) -> Result<GronwallBudget> {
    let rho: Vec<Vec<f64>> = f_traj.snapshots.iter().map(PhaseField::density).collect();
    if rho.len() != vtilde_traj.snapshots.len() {
        return Err(Error::Config("trajectories stored at different times".into()));
    }
    quantum_lambda_series(&vtilde_traj.snapshots, &vtilde_traj.times, &rho, c_inf, n, eps)
}

/// Evolves both operators under the nonlinear Hartree flow and tracks
/// `||sqrt op1 - sqrt op2||_{L^2}` against `initial * exp(C* Lambda)`,
/// plus the `L^2`-`L^1` corollary.
pub fn quantum_stability_experiment(
    op1_0: &DensityOperator,
    op2_0: &DensityOperator,
    schedule: Schedule,
    sign: f64,
    n: f64,
    eps: f64,
) -> Result<ProbeReport> {
    let v1_0 = operator_sqrt(op1_0)?;
    let v2_0 = operator_sqrt(op2_0)?;
    let c_inf = schatten_norm(op1_0, f64::INFINITY).max(schatten_norm(op2_0, f64::INFINITY));
    let (t1, t2) = rayon::join(|| evolve_hartree(op1_0, schedule, sign), || evolve_hartree(op2_0, schedule, sign));
    let (t1, t2) = (t1?, t2?);
    let v1: Vec<DensityOperator> = t1.snapshots.par_iter().map(operator_sqrt).collect::<Result<_>>()?;
    let v2: Vec<DensityOperator> = t2.snapshots.par_iter().map(operator_sqrt).collect::<Result<_>>()?;
    let rho: Vec<Vec<f64>> = t2.snapshots.iter().map(spatial_density).collect();
    let budget = quantum_lambda_series(&v2, &t2.times, &rho, c_inf, n, eps)?;
    let lhs: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| schatten_norm(&a.sub(b).expect("same grid"), 2.0)).collect();
    let diff: Vec<f64> = t1
        .snapshots
        .iter()
        .zip(&t2.snapshots)
        .map(|(a, b)| schatten_norm(&a.sub(b).expect("same grid"), 2.0))
        .collect();
    let l1_init = schatten_norm(&op1_0.sub(op2_0)?, 1.0);
    let mut report = ProbeReport::new("quantum_stability");
    report.constant("initial sqrt distance", schatten_norm(&v1_0.sub(&v2_0)?, 2.0));
    stability_checks(&mut report, op1_0.grid.hbar(), &budget, &lhs, &diff, l1_init, c_inf);
    Ok(report)
}

/// Matrix-level Powers-Størmer defect `||A - B||_{L^1} - ||sqrt A - sqrt B||_{L^2}^2`.
pub fn powers_stormer_gap(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    let lhs = schatten_norm(&operator_sqrt(a)?.sub(&operator_sqrt(b)?)?, 2.0).powi(2);
    let rhs = schatten_norm(&a.sub(b)?, 1.0);
    Ok(rhs - lhs)
}

// ---------------------------------------------------------------- lemma probes

/// `(lhs, budget)` for `(1/hbar) ||[V_src, mu]||_{L^2} <= C ||rho||_{L^2} ||grad_xi mu||_{W^{1,2}}`.
pub fn commutator_probe(op_src: &DensityOperator, mu: &DensityOperator, sign: f64) -> Result<(f64, f64)> {
    let g = op_src.grid;
    let rho = spatial_density(op_src);
    let v = solve_poisson(&rho, g.lx(), sign).v;
    let vop = DensityOperator::multiplication(g, &v);
    let lhs = schatten_norm(&vop.commutator(mu)?, 2.0) / g.hbar();
    let budget = spatial_norm(&rho, 2.0, g.dx()) * derivative_sobolev_norm(mu, (0, 1), 1, 2.0, 0.0)?;
    Ok((lhs, budget))
}

/// `(lhs, budget)` for `||wick(g^2) - wick(g)^2||_{L^p} <= 48 hbar ||grad g||^2_{L^{2p}}`.
pub fn wick_square_probe(g: &PhaseField, p: f64) -> Result<(f64, f64)> {
    let g2 = g.mul(g)?;
    let a = wick_quantize(&g2)?;
    let w = wick_quantize(g)?;
    let lhs = schatten_norm(&a.sub(&w.compose(&w)?)?, p);
    let grad = lebesgue_norm(&gradient_magnitude(g), 2.0 * p);
    Ok((lhs, g.grid.hbar() * grad * grad))
}

/// `(lhs, budget)` for the weighted bound
/// `||<p>(wick(g)^2 - wick(g^2))<p>||_{L^2} <= C hbar C^init(g^2)`.
pub fn init_diff_probe(g: &PhaseField) -> Result<(f64, f64)> {
    let g2 = g.mul(g)?;
    let w = wick_quantize(g)?;
    let d = w.compose(&w)?.sub(&wick_quantize(&g2)?)?;
    let lhs = schatten_norm(&momentum_weight_apply(&momentum_weight_apply(&d, 1.0, Side::Left), 1.0, Side::Right), 2.0);
    Ok((lhs, g.grid.hbar() * c_init(&g2)))
}

/// Ratios of the weight-remainder bounds
/// `||op_{<xi> f} - op_f <p>||_{L^2} / ((hbar/2) ||d_x f||_{L^2})` and
/// `||<p> op_f <p> - op_{<xi>^2 f}||_{L^2} / ((hbar^2/4) ||d_x^2 f||_{L^2})`.
pub fn weight_remainder_ratios(f: &PhaseField) -> Result<(f64, f64)> {
    let hbar = f.grid.hbar();
    let bracket = f.map_with_coords(|_, xi, v| v * (1.0 + xi * xi).sqrt());
    let bracket2 = f.map_with_coords(|_, xi, v| v * (1.0 + xi * xi));
    let opf = weyl_quantize(f);
    let a = weyl_quantize(&bracket).sub(&momentum_weight_apply(&opf, 1.0, Side::Right))?;
    let b = momentum_weight_apply(&momentum_weight_apply(&opf, 1.0, Side::Left), 1.0, Side::Right)
        .sub(&weyl_quantize(&bracket2))?;
    let r1 = schatten_norm(&a, 2.0) / (0.5 * hbar * lebesgue_norm(&f.d_dx(), 2.0));
    let r2 = schatten_norm(&b, 2.0) / (0.25 * hbar * hbar * lebesgue_norm(&partial(f, 2, 0), 2.0));
    Ok((r1, r2))
}

/// `(lhs, budget)` for `||<xi>(g_h * f) - g_h * (<xi> f)||_{L^p} <= C hbar ||f||_{W^{1,p}}`.
pub fn gaussian_commutator_probe(f: &PhaseField, p: f64) -> Result<(f64, f64)> {
    let weight = |v: &PhaseField| v.map_with_coords(|_, xi, z| z * (1.0 + xi * xi).sqrt());
    let a = weight(&husimi_convolve(f)?);
    let b = husimi_convolve(&weight(f))?;
    let lhs = lebesgue_norm(&a.sub(&b)?, p);
    Ok((lhs, f.grid.hbar() * weighted_sobolev_norm(f, 1, p, 0.0)))
}

/// `||op_f - wick(f)||_{L^2}`.
pub fn wick_weyl_gap(f: &PhaseField) -> Result<f64> {
    Ok(schatten_norm(&weyl_quantize(f).sub(&wick_quantize(f)?)?, 2.0))
}

// ---------------------------------------------------------------- random smooth data

/// A sum of phase-space Gaussian bumps with parameters independent of the
/// grid, so the same continuum function is sampled at every resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomBumps {
    pub bumps: Vec<Profile>,
    /// Signed amplitudes allowed.
    pub signed: bool,
}

impl RandomBumps {
    /// Draws `count` bumps centered in the middle half of the box with
    /// widths in `[0.8, 1.1] x [0.4, 0.5]` and momentum centers within 0.1 of 0.
    pub fn draw(rng: &mut impl Rng, count: usize, lx: f64, signed: bool) -> Self {
        Self::draw_scaled(rng, count, lx, 1.0, signed)
    }

    /// As [`RandomBumps::draw`] with the momentum widths and centers scaled
    /// by `xi_scale`.
    pub fn draw_scaled(rng: &mut impl Rng, count: usize, lx: f64, xi_scale: f64, signed: bool) -> Self {
        let bumps = (0..count)
            .map(|_| {
                let amp = if signed { rng.random_range(-1.0..1.0) } else { rng.random_range(0.2..1.0) };
                Profile::Gaussian {
                    amp,
                    x0: rng.random_range(0.25 * lx..0.75 * lx),
                    xi0: xi_scale * rng.random_range(-0.1..0.1),
                    sigma_x: rng.random_range(0.8..1.1),
                    sigma_xi: xi_scale * rng.random_range(0.4..0.5),
                }
            })
            .collect();
        Self { bumps, signed }
    }

    pub fn sample(&self, grid: &PhaseGrid) -> Result<PhaseField> {
        let mut f = PhaseField::zeros(*grid);
        for b in &self.bumps {
            f = f.add(&sample_field(grid, b)?)?;
        }
        Ok(f.into_real())
    }
}

/// Deterministic generator for probe randomness.
pub fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------- sweep

/// Settings shared by every member of an ħ sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub profile: Profile,
    pub lx: f64,
    pub lxi: f64,
    pub ns: Vec<usize>,
    pub t_final: f64,
    /// Time step as a multiple of ħ.
    pub dt_over_hbar: f64,
    pub sign: f64,
    /// Number of logged intervals on `[0, T]`.
    pub log_intervals: usize,
    pub n_weight: f64,
    pub eps: f64,
}

impl SweepSettings {
    pub fn grid(&self, n: usize) -> Result<PhaseGrid> {
        PhaseGrid::line(n, self.lx, self.lxi)
    }

    pub fn schedule(&self, grid: &PhaseGrid) -> Result<Schedule> {
        let dt = self.dt_over_hbar * grid.hbar();
        let s = Schedule::new(self.t_final, dt);
        let (steps, _) = s.steps()?;
        Ok(s.every((steps / self.log_intervals.max(1)).max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.len() < MIN_SWEEP_POINTS {
            return Err(Error::Config(format!("sweep needs >= {MIN_SWEEP_POINTS} values of N, got {}", self.ns.len())));
        }
        if self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep N values must be increasing".into()));
        }
        for &n in &self.ns {
            self.grid(n)?;
        }
        if !(self.dt_over_hbar > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        Ok(())
    }
}

/// All trajectories of one sweep member; states stored at the same logged
/// times in every trajectory.
#[derive(Clone, Debug)]
pub struct SweepMember {
    pub grid: PhaseGrid,
    pub f_init: PhaseField,
    /// Vlasov-Poisson solution `f`.
    pub vlasov: FieldTrajectory,
    /// Nonlinear Hartree solution `op` from `wick(sqrt f^init)^2`.
    pub hartree: OperatorTrajectory,
    /// Linear Hartree solution `optilde` driven by the Vlasov potential.
    pub linear: OperatorTrajectory,
    /// `vtilde = sqrt(optilde)`, carried along the linear flow from `wick(sqrt f^init)`.
    pub vtilde: OperatorTrajectory,
}

impl SweepMember {
    pub fn hbar(&self) -> f64 {
        self.grid.hbar()
    }

    pub fn times(&self) -> &[f64] {
        &self.vlasov.times
    }
}

/// `wick(sqrt f)^2` and `wick(sqrt f)`.
pub fn wick_square_root_datum(f: &PhaseField) -> Result<(DensityOperator, DensityOperator)> {
    let v = wick_quantize(&f.sqrt_clamped())?;
    let mut op = v.compose(&v)?.hermitize();
    op.positive = true;
    Ok((op, v))
}

pub fn run_member(settings: &SweepSettings, n: usize) -> Result<SweepMember> {
    let grid = settings.grid(n)?;
    let f_init = sample_field(&grid, &settings.profile)?;
    let schedule = settings.schedule(&grid)?;
    let (op0, v0) = wick_square_root_datum(&f_init)?;
    let (vlasov, hartree) = rayon::join(
        || evolve_vlasov(&f_init, schedule, settings.sign),
        || evolve_hartree(&op0, schedule, settings.sign),
    );
    let vlasov = vlasov?;
    let hartree = hartree?;
    let linear = evolve_linear_hartree(&op0, &vlasov.fields, schedule)?;
    let vtilde = replay_linear_hartree(&v0, &linear)?;
    Ok(SweepMember { grid, f_init, vlasov, hartree, linear, vtilde })
}

/// Runs every member, concurrently, in the order of `settings.ns`.
pub fn run_sweep(settings: &SweepSettings) -> Result<Vec<SweepMember>> {
    settings.validate()?;
    regularity_checklist(&sample_field(&settings.grid(settings.ns[0])?, &settings.profile)?)?;
    settings.ns.par_iter().map(|&n| run_member(settings, n)).collect()
}

// ---------------------------------------------------------------- sweep probes

fn l2_gap(a: &DensityOperator, b: &DensityOperator) -> f64 {
    schatten_norm(&a.sub(b).expect("same grid"), 2.0)
}

/// Headline rate: `||f_op(T) - f(T)||_{L^2}` and `||op(T) - op_f(T)||_{L^2}`
/// against ħ, slopes in `[lo, hi]`.
pub fn convergence_report(members: &[SweepMember], lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("convergence");
    let mut op_gap = Vec::new();
    let mut hb = Vec::new();
    for m in members {
        let t = *m.times().last().unwrap();
        let f = m.vlasov.last();
        let op = m.hartree.last();
        let lhs = lebesgue_norm(&wigner_transform(op).sub(f)?, 2.0);
        report.rows.push(ProbeRow::new(m.hbar(), t, lhs, m.hbar()));
        op_gap.push(l2_gap(op, &weyl_quantize(f)));
        hb.push(m.hbar());
    }
    // triangle split through the linear flow at every logged time
    let mut split: f64 = f64::NEG_INFINITY;
    for m in members {
        for ((op, ot), f) in m.hartree.snapshots.iter().zip(&m.linear.snapshots).zip(&m.vlasov.snapshots) {
            let opf = weyl_quantize(f);
            split = split.max(l2_gap(op, &opf) - l2_gap(op, ot) - l2_gap(ot, &opf));
        }
    }
    report.check_le("triangle split excess", split, 1e-12);
    report.fit_lhs(lo, hi)?;
    let fit = fit_slope(&hb, &op_gap)?;
    report.constant("operator slope", fit.slope);
    report.constant("operator slope stderr", fit.stderr);
    report.check_in("operator lhs slope", fit.slope, lo, hi);
    for (m, g) in members.iter().zip(&op_gap) {
        report.constant(format!("operator gap N={}", m.grid.n()), *g);
    }
    Ok(report)
}

/// Error at `T = 0`: the initial gap `||wick(sqrt f)^2 - op_f||_{L^2}`.
pub fn initial_gap_report(members: &[SweepMember], lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("initial_gap");
    for m in members {
        let lhs = l2_gap(&m.hartree.snapshots[0], &weyl_quantize(&m.f_init));
        report.rows.push(ProbeRow::new(m.hbar(), 0.0, lhs, m.hbar()));
    }
    report.fit_lhs(lo, hi)?;
    Ok(report)
}

/// Positivity defect `||optilde - op_f||_{L^2}` with budget
/// `lhs(0) + C* hbar int ||grad E_f||_inf ||d_xi^2 f||_{L^2}`.
pub fn positivity_defect_report(members: &[SweepMember], lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("positivity_defect");
    let mut c_stars = Vec::new();
    let mut worst: f64 = 0.0;
    for m in members {
        let times = m.times();
        let lhs: Vec<f64> =
            m.linear.snapshots.iter().zip(&m.vlasov.snapshots).map(|(o, f)| l2_gap(o, &weyl_quantize(f))).collect();
        let integrand: Vec<f64> = m
            .vlasov
            .snapshots
            .iter()
            .map(|f| force_gradient_sup(&f.density(), m.grid.lx(), m.vlasov.sign) * lebesgue_norm(&partial(f, 0, 2), 2.0))
            .collect();
        let integral: Vec<f64> = cumulative_integral(times, &integrand).iter().map(|v| v * m.hbar()).collect();
        let k1 = integral.iter().position(|v| *v > 0.0);
        let c_star = k1.map_or(0.0, |k| ((lhs[k] - lhs[0]) / integral[k]).max(0.0));
        c_stars.push(c_star);
        for k in 1..lhs.len() {
            let env = lhs[0] + c_star * integral[k];
            worst = worst.max(lhs[k] / env);
        }
        let k = lhs.len() - 1;
        report.rows.push(ProbeRow::new(m.hbar(), times[k], lhs[k], lhs[0] + c_star * integral[k]));
        report.constant(format!("c_star N={}", m.grid.n()), c_star);
        report.constant(format!("initial defect N={}", m.grid.n()), lhs[0]);
    }
    report.fit_lhs(lo, hi)?;
    report.check_le("max left side / envelope", worst, 1.0 + 1e-9);
    let max = c_stars.iter().copied().fold(0.0, f64::max);
    let min = c_stars.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max > 0.0 { (max - min) / max } else { 0.0 };
    report.constant("c_star spread", spread);
    report.check_le("c_star spread", spread, 0.5);
    Ok(report)
}

/// `||diag(optilde - op_f)||_{L^2_x}` at `T` with budget
/// `hbar (C^init + sup_t ||rho_f||_{W^{1,inf}} ||op_f||_{W^{2,2}(<p>^2)})`.
pub fn diag_drift_report(members: &[SweepMember], lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("diag_drift");
    for m in members {
        let times = m.times();
        let ci = c_init(&m.f_init);
        let k = times.len() - 1;
        let f = m.vlasov.last();
        let rho_f = f.density();
        let rho_t = spatial_density(m.linear.last());
        let d: Vec<f64> = rho_t.iter().zip(&rho_f).map(|(a, b)| a - b).collect();
        let lhs = spatial_norm(&d, 2.0, m.grid.dx());
        let mut sup: f64 = 0.0;
        for f in &m.vlasov.snapshots {
            let opf = momentum_weight_apply(&weyl_quantize(f), 2.0, Side::Right);
            let w = quantum_sobolev_norm(&opf, 2, 2.0, 0.0)?;
            sup = sup.max(w1inf(&f.density(), m.grid.lx()) * w);
        }
        report.rows.push(ProbeRow::new(m.hbar(), times[k], lhs, m.hbar() * (ci + sup)));
    }
    report.fit_lhs(lo, hi)?;
    Ok(report)
}

/// `||v_1 - vtilde||_{L^2}` for `v_1 = sqrt(op)` from the nonlinear Hartree
/// flow, against the fitted envelope `C* hbar (int c^2 e^{2(Lambda(t) - Lambda(s))})^{1/2}`.
/// `C*` is calibrated on the smallest-ħ member at its first logged time.
pub fn sqrt_comparison_report(members: &[SweepMember], c_inf: f64, n: f64, eps: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("sqrt_comparison");
    let mut curves = Vec::with_capacity(members.len());
    for m in members {
        let v1: Vec<DensityOperator> = m.hartree.snapshots.par_iter().map(operator_sqrt).collect::<Result<_>>()?;
        let vt: Vec<DensityOperator> = m.linear.snapshots.par_iter().map(operator_sqrt).collect::<Result<_>>()?;
        let lhs: Vec<f64> = v1.iter().zip(&vt).map(|(a, b)| l2_gap(a, b)).collect();
        let budget = quantum_lambda(&m.vtilde, &m.vlasov, c_inf, n, eps)?;
        let ci = c_init(&m.f_init);
        let c: Vec<f64> = m
            .vtilde
            .snapshots
            .par_iter()
            .zip(m.vlasov.snapshots.par_iter())
            .map(|(v, f)| -> Result<f64> {
                let gv = derivative_sobolev_norm(v, (0, 1), 1, 2.0, 0.0)?;
                let opf = momentum_weight_apply(&weyl_quantize(f), 2.0, Side::Right);
                Ok(gv * (ci + w1inf(&f.density(), m.grid.lx()) * quantum_sobolev_norm(&opf, 2, 2.0, 0.0)?))
            })
            .collect::<Result<_>>()?;
        let env: Vec<f64> = budget.with_source(c, ci).duhamel(1.0).iter().map(|v| v * m.hbar()).collect();
        curves.push((m.hbar(), m.times(), lhs, env));
    }
    let at_zero = curves.iter().map(|c| c.2[0]).fold(0.0, f64::max);
    // Calibrate on the smallest hbar at its first logged time.
    let finest = curves.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty sweep");
    let k1 = (1..finest.2.len()).find(|&k| finest.3[k] > 0.0).unwrap_or(1);
    let c_star = finest.2[k1] / finest.3[k1];
    let mut worst: f64 = 0.0;
    for (hbar, times, lhs, env) in &curves {
        let mut sup: f64 = 0.0;
        for k in 1..lhs.len() {
            let r = lhs[k] / (c_star * env[k]);
            sup = sup.max(r);
            report.rows.push(ProbeRow::new(*hbar, times[k], lhs[k], c_star * env[k]));
        }
        report.constant(format!("max ratio hbar={hbar:.6}"), sup);
        worst = worst.max(sup);
    }
    report.constant("c_star", c_star);
    report.check_le("left side at t = 0", at_zero, 1e-9);
    report.check_le("max left side / fitted envelope", worst, 1.0 + 1e-9);
    Ok(report)
}

/// `lambda` along the linear-Hartree square roots, bounded across the sweep.
pub fn quantum_lambda_report(members: &[SweepMember], c_inf: f64, n: f64, eps: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("quantum_lambda");
    let mut maxima = Vec::new();
    for m in members {
        let b = quantum_lambda(&m.vtilde, &m.vlasov, c_inf, n, eps)?;
        let max = b.lambda.iter().copied().fold(0.0, f64::max);
        maxima.push(max);
        report.rows.push(ProbeRow::new(m.hbar(), 0.0, b.lambda[0], max));
    }
    let hi = maxima.iter().copied().fold(0.0, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    report.constant("max lambda spread", (hi - lo) / hi);
    report.check_le("max lambda spread", (hi - lo) / hi, 0.2);
    Ok(report)
}

/// `||B_f(op_f)||_{L^2}` at `T` against ħ.
pub fn b_remainder_report(members: &[SweepMember], lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("b_remainder");
    for m in members {
        let f = m.vlasov.last();
        let field = m.vlasov.fields.last().unwrap();
        let b = b_remainder(&weyl_quantize(f), &GridPotential::new(&field.v, m.grid.lx()))?;
        let lhs = schatten_norm(&b, 2.0);
        let budget = m.hbar().powi(2)
            * force_gradient_sup(&field.rho, m.grid.lx(), m.vlasov.sign)
            * lebesgue_norm(&partial(f, 0, 2), 2.0);
        report.rows.push(ProbeRow::new(m.hbar(), *m.times().last().unwrap(), lhs, budget));
    }
    report.fit_lhs(lo, hi)?;
    Ok(report)
}

/// Time series of `||vtilde(t)||_{W^k(<p>^{2n})}` in `L^q` against
/// `||vtilde(0)|| exp(C* int_0^t ||rho_f||_{W^{2n, 3 +- eps}})` with `C*`
/// fitted at the first logged step; the norm may exceed it by at most `slack`.
pub fn regularity_tracking(
    vtilde: &OperatorTrajectory,
    f_traj: &FieldTrajectory,
    k: usize,
    q: f64,
    n: usize,
    eps: f64,
    slack: f64,
) -> Result<ProbeReport> {
    let g = vtilde.grid;
    let norms: Vec<f64> = vtilde
        .snapshots
        .par_iter()
        .map(|v| quantum_sobolev_norm(v, k, q, 2.0 * n as f64))
        .collect::<Result<_>>()?;
    let rho_norm: Vec<f64> = f_traj
        .snapshots
        .iter()
        .map(|f| {
            let rho = f.density();
            spatial_sobolev_norm(&rho, 2 * n, 3.0 - eps, g.lx()).max(spatial_sobolev_norm(&rho, 2 * n, 3.0 + eps, g.lx()))
        })
        .collect();
    let integral = cumulative_integral(&vtilde.times, &rho_norm);
    let c_star = if norms.len() > 1 && integral[1] > 0.0 { ((norms[1] / norms[0]).ln() / integral[1]).max(0.0) } else { 0.0 };
    let mut report = ProbeReport::new(format!("regularity k={k} q={q} n={n}"));
    let mut worst: f64 = 0.0;
    for i in 0..norms.len() {
        let env = norms[0] * (c_star * integral[i]).exp();
        report.rows.push(ProbeRow::new(g.hbar(), vtilde.times[i], norms[i], env));
        worst = worst.max(norms[i] / env);
    }
    report.constant("c_star", c_star);
    report.constant("initial norm", norms[0]);
    report.check_le("max norm / envelope", worst, slack);
    Ok(report)
}

/// Relative change of `||wick(sqrt f^init)||_{W^k(<p>^{2n})}` in `L^q`
/// between a grid and its refinement with twice the points.
pub fn regularity_refinement(profile: &Profile, coarse: &PhaseGrid, k: usize, q: f64, n: usize) -> Result<f64> {
    let fine = PhaseGrid::line(2 * coarse.n(), coarse.lx(), coarse.lxi())?;
    let norm = |g: &PhaseGrid| -> Result<f64> {
        let (_, v0) = wick_square_root_datum(&sample_field(g, profile)?)?;
        quantum_sobolev_norm(&v0, k, q, 2.0 * n as f64)
    };
    let (a, b) = rayon::join(|| norm(coarse), || norm(&fine));
    let (a, b) = (a?, b?);
    Ok((b - a).abs() / b)
}

/// Concatenates reports under one name; checks keep their origin as a prefix.
pub fn merge_reports(name: impl Into<String>, parts: Vec<ProbeReport>) -> ProbeReport {
    let mut out = ProbeReport::new(name);
    for r in parts {
        out.rows.extend(r.rows);
        for (k, v) in r.constants {
            out.constants.insert(format!("{} {k}", r.probe), v);
        }
        for c in r.checks {
            out.check(format!("{} {}", r.probe, c.name), c.value, c.bound, c.pass);
        }
    }
    out
}

/// Regularity tracking over every sweep member plus the `N -> 2N`
/// refinement of the initial norm on the finest member.
pub fn regularity_report(
    members: &[SweepMember],
    profile: &Profile,
    (k, q, n): (usize, f64, usize),
    eps: f64,
    slack: f64,
    refine_tol: f64,
) -> Result<ProbeReport> {
    let parts = members
        .iter()
        .map(|m| {
            let mut r = regularity_tracking(&m.vtilde, &m.vlasov, k, q, n, eps, slack)?;
            r.probe = format!("N={}", m.grid.n());
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = merge_reports(format!("regularity k={k} q={q} n={n}"), parts);
    let finest = members.last().ok_or_else(|| Error::Config("regularity needs sweep members".into()))?;
    let change = regularity_refinement(profile, &finest.grid, k, q, n)?;
    report.check_le(format!("refinement N={} -> {}", finest.grid.n(), 2 * finest.grid.n()), change, refine_tol);
    Ok(report)
}

/// Wick-square bound for `g = sqrt f^init` over the sweep.
pub fn wick_square_report(grids: &[PhaseGrid], profile: &Profile, p: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new(format!("wick_square p={p}"));
    for g in grids {
        let root = sample_field(g, profile)?.sqrt_clamped();
        let (lhs, budget) = wick_square_probe(&root, p)?;
        report.rows.push(ProbeRow::new(g.hbar(), 0.0, lhs, budget));
    }
    let max_ratio = report.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    report.constant("max ratio", max_ratio);
    report.check_le("max ratio", max_ratio, 48.0);
    report.fit_lhs(0.85, 1.15)?;
    Ok(report)
}

/// Weighted initial-difference bound over the sweep.
pub fn init_diff_report(grids: &[PhaseGrid], profile: &Profile, lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("init_diff");
    for g in grids {
        let f = sample_field(g, profile)?.sqrt_clamped();
        let (lhs, budget) = init_diff_probe(&f)?;
        report.rows.push(ProbeRow::new(g.hbar(), 0.0, lhs, budget));
    }
    report.fit_lhs(lo, hi)?;
    Ok(report)
}

/// Wick-Weyl gap `||op_f - wick(f)||_{L^2}` over the sweep.
pub fn wick_weyl_report(grids: &[PhaseGrid], profile: &Profile, lo: f64, hi: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("wick_weyl_gap");
    for g in grids {
        let f = sample_field(g, profile)?;
        let budget = g.hbar() * lebesgue_norm(&laplacian(&f), 2.0);
        report.rows.push(ProbeRow::new(g.hbar(), 0.0, wick_weyl_gap(&f)?, budget));
    }
    report.fit_lhs(lo, hi)?;
    Ok(report)
}

/// Phase-space Laplacian `d_x^2 f + d_xi^2 f`.
pub fn laplacian(f: &PhaseField) -> PhaseField {
    partial(f, 2, 0).add(&partial(f, 0, 2)).expect("same grid")
}

/// Commutator ratio over `pairs` random smooth Wick-quantized pairs per grid.
pub fn commutator_report(grids: &[PhaseGrid], pairs: usize, seed: u64, sign: f64, tol: f64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("commutator");
    let lx = grids[0].lx();
    let data: Vec<(RandomBumps, RandomBumps)> = {
        let mut rng = probe_rng(seed, 8);
        (0..pairs).map(|_| (RandomBumps::draw(&mut rng, 3, lx, false), RandomBumps::draw(&mut rng, 2, lx, true))).collect()
    };
    let mut worst_slope: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for (idx, (src, mu)) in data.iter().enumerate() {
        let rows: Vec<ProbeRow> = grids
            .par_iter()
            .map(|g| -> Result<ProbeRow> {
                let a = wick_quantize(&src.sample(g)?)?;
                let b = wick_quantize(&mu.sample(g)?)?;
                let (lhs, budget) = commutator_probe(&a, &b, sign)?;
                Ok(ProbeRow::new(g.hbar(), idx as f64, lhs, budget))
            })
            .collect::<Result<_>>()?;
        let h: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
        let r: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let fit = fit_slope(&h, &r)?;
        if fit.slope.abs() > worst_slope.abs() {
            worst_slope = fit.slope;
        }
        max_ratio = r.iter().copied().fold(max_ratio, f64::max);
        report.rows.extend(rows);
    }
    report.constant("max ratio", max_ratio);
    report.check_in("worst ratio slope", worst_slope, -tol, tol);
    Ok(report)
}

/// Weight-remainder ratios on random bumps over the sweep grids.
pub fn weight_remainder_report(grids: &[PhaseGrid], samples: usize, seed: u64) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("weight_remainder");
    let lx = grids[0].lx();
    let data: Vec<RandomBumps> = {
        let mut rng = probe_rng(seed, 9);
        (0..samples).map(|_| RandomBumps::draw(&mut rng, 3, lx, true)).collect()
    };
    let ratios: Vec<(f64, f64, f64)> = grids
        .iter()
        .flat_map(|g| data.iter().map(move |b| (*g, b)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(g, b)| -> Result<(f64, f64, f64)> {
            let (r1, r2) = weight_remainder_ratios(&b.sample(g)?)?;
            Ok((g.hbar(), r1, r2))
        })
        .collect::<Result<_>>()?;
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    for &(hbar, r1, r2) in &ratios {
        report.rows.push(ProbeRow::new(hbar, 0.0, r1, 1.0));
        report.rows.push(ProbeRow::new(hbar, 0.0, r2, 1.0));
        w1 = w1.max(r1);
        w2 = w2.max(r2);
    }
    report.check_le("max first-order ratio", w1, 1.0 + 1e-6);
    report.check_le("max second-order ratio", w2, 1.0 + 1e-6);
    Ok(report)
}

/// Ratio `||<xi>(g_h * f) - g_h * (<xi> f)||_{L^p} / (hbar ||f||_{W^{1,p}})`
/// on random bumps; each bump's ratio slope against ħ must be within `tol` of 0.
pub fn gaussian_commutator_report(
    grids: &[PhaseGrid],
    samples: usize,
    xi_scale: f64,
    seed: u64,
    p: f64,
    tol: f64,
) -> Result<ProbeReport> {
    let mut report = ProbeReport::new(format!("gaussian_commutator p={p}"));
    let lx = grids[0].lx();
    let data: Vec<RandomBumps> = {
        let mut rng = probe_rng(seed, 10);
        (0..samples).map(|_| RandomBumps::draw_scaled(&mut rng, 3, lx, xi_scale, true)).collect()
    };
    let mut worst_slope: f64 = 0.0;
    for b in &data {
        let rows: Vec<ProbeRow> = grids
            .par_iter()
            .map(|g| -> Result<ProbeRow> {
                let (lhs, budget) = gaussian_commutator_probe(&b.sample(g)?, p)?;
                Ok(ProbeRow::new(g.hbar(), 0.0, lhs, budget))
            })
            .collect::<Result<_>>()?;
        let h: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
        let r: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let fit = fit_slope(&h, &r)?;
        if fit.slope.abs() > worst_slope.abs() {
            worst_slope = fit.slope;
        }
        report.rows.extend(rows);
    }
    let max_ratio = report.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    report.constant("max ratio", max_ratio);
    report.check_in("worst ratio slope", worst_slope, -tol, tol);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PhaseGrid {
        PhaseGrid::line(n, 2.0 * PI, 2.2 * PI).unwrap()
    }

    fn bump(x0: f64, xi0: f64) -> Profile {
        Profile::Gaussian { amp: 1.0, x0, xi0, sigma_x: 0.8, sigma_xi: 0.5 }
    }

    #[test]
    fn fit_slope_recovers_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let fit = fit_slope(&x, &y).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert!(fit.within(1.4, 1.6));
    }

    #[test]
    fn fit_slope_rejects_short_or_nonpositive_data() {
        assert!(matches!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Err(Error::Config(_))));
        assert!(matches!(fit_slope(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_over_zero_ratio_is_zero() {
        assert_eq!(ProbeRow::new(0.1, 0.0, 0.0, 0.0).ratio, 0.0);
        assert_eq!(ProbeRow::new(0.1, 0.0, 2.0, 4.0).ratio, 0.5);
    }

    #[test]
    fn calibrated_exponent_reproduces_exponential() {
        let times: Vec<f64> = (0..11).map(|k| 0.05 * k as f64).collect();
        let lambda: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
        let b = GronwallBudget::new(times, lambda).unwrap();
        assert!(b.big_lambda.windows(2).all(|w| w[1] >= w[0]));
        let lhs: Vec<f64> = b.big_lambda.iter().map(|l| 0.3 * (2.0 * l).exp()).collect();
        let c = calibrate_exponent(&b, &lhs);
        assert!((c - 2.0).abs() < 1e-12);
        for (e, l) in b.envelope(0.3, c).iter().zip(&lhs) {
            assert!((e - l).abs() < 1e-12 * l);
        }
    }

    #[test]
    fn duhamel_without_growth_is_root_time() {
        let times: Vec<f64> = (0..21).map(|k| 0.025 * k as f64).collect();
        let n = times.len();
        let b = GronwallBudget::new(times.clone(), vec![0.0; n]).unwrap().with_source(vec![2.0; n], 1.0);
        for (d, t) in b.duhamel(5.0).iter().zip(&times) {
            assert!((d - 2.0 * t.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(GronwallBudget::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn classical_lambda_matches_quadrature_oracle() {
        let g = PhaseGrid::line(64, 2.0 * PI, 2.0 * PI).unwrap();
        let (amp, alpha, theta) = (0.7, 0.3, 0.09);
        let f = sample_field(&g, &Profile::PerturbedMaxwellian { amp, alpha, mode: 1, theta, drift: 0.0 }).unwrap();
        let c_inf = amp * (1.0 + alpha);
        let lambda = classical_lambda_at(&f, c_inf).unwrap();

        // d/dxi sqrt f = -sqrt(amp s(x)) xi / (2 theta) exp(-xi^2 / (4 theta)), summed on the lattice
        let (dx, dxi) = (g.dx(), g.dxi());
        let s: Vec<f64> = (0..64).map(|i| amp * (1.0 + alpha * g.x(i).cos())).collect();
        let prof: Vec<f64> = (0..64).map(|k| g.xi(k) / (2.0 * theta) * (-g.xi(k).powi(2) / (4.0 * theta)).exp()).collect();
        let rho_inf = s.iter().fold(0.0f64, |m, v| m.max(*v))
            * (0..64).map(|k| (-g.xi(k).powi(2) / (2.0 * theta)).exp()).sum::<f64>()
            * dxi;
        let l2_xi = (prof.iter().map(|v| v * v).sum::<f64>() * dxi).sqrt();
        let l1_xi = prof.iter().map(|v| v.abs()).sum::<f64>() * dxi;
        let l3l2 = (s.iter().map(|v| (v.sqrt() * l2_xi).powi(3)).sum::<f64>() * dx).cbrt();
        // L^{3,1} by the layer-cake formula 3 int |{g > s}|^{1/3} ds
        let mut inner: Vec<f64> = s.iter().map(|v| l1_xi * v.sqrt()).collect();
        inner.sort_by(|a, b| b.partial_cmp(a).unwrap());
        inner.push(0.0);
        let lorentz: f64 = (0..64).map(|k| 3.0 * ((k + 1) as f64 * dx).cbrt() * (inner[k] - inner[k + 1])).sum();
        let oracle = rho_inf.sqrt() * l3l2 + c_inf.sqrt() * lorentz;
        assert!((lambda - oracle).abs() < 1e-8 * oracle, "{lambda} vs {oracle}");
    }

    #[test]
    fn homogeneous_lambda_is_constant() {
        let g = PhaseGrid::line(64, 2.0 * PI, 2.0 * PI).unwrap();
        let f = sample_field(&g, &Profile::Homogeneous { amp: 1.0, theta: 0.1 }).unwrap();
        let traj = evolve_vlasov(&f, Schedule::new(0.2, 0.01).every(5), 1.0).unwrap();
        let b = classical_lambda(&traj, 1.0).unwrap();
        assert!(b.lambda[0] > 0.0);
        for l in &b.lambda {
            assert!((l - b.lambda[0]).abs() < 1e-7 * b.lambda[0], "{l} vs {}", b.lambda[0]);
        }
    }

    #[test]
    fn classical_identical_twins_coincide() {
        let g = grid(64);
        let f = sample_field(&g, &bump(PI, 0.0)).unwrap();
        let r = classical_stability_experiment(&f, &f, Schedule::new(0.2, 0.01).every(5), 1.0).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.lhs <= 1e-9));
    }

    #[test]
    fn free_classical_distance_is_constant() {
        let g = grid(64);
        let f1 = sample_field(&g, &bump(PI, 0.0)).unwrap();
        let f2 = sample_field(&g, &bump(PI + 0.3, 0.1)).unwrap();
        let r = classical_stability_experiment(&f1, &f2, Schedule::new(0.3, 0.01).every(5), 0.0).unwrap();
        let d0 = r.rows[0].lhs;
        assert!(d0 > 0.1);
        for row in &r.rows {
            assert!((row.lhs - d0).abs() < 1e-9, "{} vs {d0}", row.lhs);
        }
    }

    #[test]
    fn quantum_identical_twins_coincide() {
        let g = grid(64);
        let (op, _) = wick_square_root_datum(&sample_field(&g, &bump(PI, 0.0)).unwrap()).unwrap();
        let schedule = Schedule::new(0.1, g.hbar() / 10.0).every(10);
        let r = quantum_stability_experiment(&op, &op, schedule, 1.0, 3.0, 0.5).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.lhs < 1e-9));
    }

    #[test]
    fn zero_square_root_has_zero_lambda() {
        let g = grid(64);
        let zero = DensityOperator::zeros(g);
        assert_eq!(quantum_lambda_at(&zero, &vec![0.0; 64], 1.0, 3.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantum_lambda_refines_stably() {
        let lam = |n: usize| {
            let g = grid(n);
            let f = sample_field(&g, &bump(PI, 0.0)).unwrap();
            let (_, v) = wick_square_root_datum(&f).unwrap();
            quantum_lambda_at(&v, &f.density(), f.max_abs(), 3.0, 0.5).unwrap()
        };
        let (a, b) = (lam(128), lam(256));
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() < 0.05 * b, "{a} vs {b}");
    }

    #[test]
    fn commutator_vanishes_for_multiplication_and_constant_density() {
        let g = grid(64);
        let src = wick_quantize(&sample_field(&g, &bump(PI, 0.0)).unwrap()).unwrap();
        let diag = DensityOperator::multiplication(g, &(0..64).map(|i| g.x(i).sin()).collect::<Vec<_>>());
        assert!(commutator_probe(&src, &diag, 1.0).unwrap().0 < 1e-12);
        let flat = DensityOperator::identity(g).scale(0.2);
        let mu = wick_quantize(&sample_field(&g, &bump(PI, 0.1)).unwrap()).unwrap();
        assert!(commutator_probe(&flat, &mu, 1.0).unwrap().0 < 1e-12);
    }

    #[test]
    fn constant_symbol_has_no_wick_defects() {
        let g = grid(64);
        let c = PhaseField::constant(g, 0.7);
        for p in [1.0, 2.0, f64::INFINITY] {
            assert!(wick_square_probe(&c, p).unwrap().0 < 1e-12);
        }
        assert!(init_diff_probe(&c).unwrap().0 < 1e-12);
    }

    #[test]
    fn weight_remainder_ratios_stay_below_one() {
        let g = grid(64);
        let mut rng = probe_rng(3, 0);
        for _ in 0..3 {
            let f = RandomBumps::draw(&mut rng, 2, g.lx(), true).sample(&g).unwrap();
            let (r1, r2) = weight_remainder_ratios(&f).unwrap();
            assert!(r1 <= 1.0 + 1e-6 && r2 <= 1.0 + 1e-6, "{r1} {r2}");
        }
    }

    #[test]
    fn random_bumps_are_reproducible_and_grid_independent() {
        let a = RandomBumps::draw(&mut probe_rng(7, 1), 3, 2.0 * PI, false);
        let b = RandomBumps::draw(&mut probe_rng(7, 1), 3, 2.0 * PI, false);
        assert_eq!(a, b);
        let (fa, fb) = (a.sample(&grid(64)).unwrap(), a.sample(&grid(128)).unwrap());
        let probe = |f: &PhaseField| f.values[(f.n() / 2, f.n() / 2)].re;
        assert!((probe(&fa) - probe(&fb)).abs() < 1e-12);
    }

    #[test]
    fn sweep_settings_validation() {
        let mut s = SweepSettings {
            profile: bump(PI, 0.0),
            lx: 2.0 * PI,
            lxi: 2.2 * PI,
            ns: vec![64, 96, 128, 192],
            t_final: 0.5,
            dt_over_hbar: 0.1,
            sign: 1.0,
            log_intervals: 10,
            n_weight: 3.0,
            eps: 0.5,
        };
        assert!(s.validate().is_ok());
        s.ns = vec![64, 96, 128];
        assert!(s.validate().is_err());
        s.ns = vec![64, 128, 96, 192];
        assert!(s.validate().is_err());
        s.ns = vec![63, 96, 128, 192];
        assert!(s.validate().is_err());
    }

    fn free_member() -> SweepMember {
        let s = SweepSettings {
            profile: bump(PI, 0.0),
            lx: 2.0 * PI,
            lxi: 2.2 * PI,
            ns: vec![64],
            t_final: 0.2,
            dt_over_hbar: 0.2,
            sign: 0.0,
            log_intervals: 4,
            n_weight: 3.0,
            eps: 0.5,
        };
        run_member(&s, 64).unwrap()
    }

    #[test]
    fn interaction_off_keeps_gaps_constant() {
        let m = free_member();
        let defect: Vec<f64> =
            m.linear.snapshots.iter().zip(&m.vlasov.snapshots).map(|(o, f)| l2_gap(o, &weyl_quantize(f))).collect();
        let err: Vec<f64> =
            m.hartree.snapshots.iter().zip(&m.vlasov.snapshots).map(|(o, f)| lebesgue_norm(&wigner_transform(o).sub(f).unwrap(), 2.0)).collect();
        for series in [&defect, &err] {
            assert!(series[0] > 1e-4);
            for v in series.iter() {
                assert!((v - series[0]).abs() < 1e-9, "{v} vs {}", series[0]);
            }
        }
    }

    #[test]
    fn square_roots_agree_initially() {
        let m = free_member();
        let v1 = operator_sqrt(&m.hartree.snapshots[0]).unwrap();
        let vt = operator_sqrt(&m.linear.snapshots[0]).unwrap();
        assert_eq!(l2_gap(&v1, &vt), 0.0);
    }

    #[test]
    fn free_flow_shears_xi_gradient() {
        let m = free_member();
        let v0 = &m.vtilde.snapshots[0];
        let gx0 = crate::calculus::quantum_gradient_x(v0);
        let gxi0 = quantum_gradient_xi(v0).unwrap();
        for (t, v) in m.vtilde.times.iter().zip(&m.vtilde.snapshots) {
            let sheared = gxi0.sub(&gx0.scale(*t)).unwrap();
            let measured = schatten_norm(&quantum_gradient_xi(v).unwrap(), 2.0);
            let expected = schatten_norm(&sheared, 2.0);
            assert!((measured - expected).abs() < 1e-8 * expected, "t={t}: {measured} vs {expected}");
            let full = quantum_sobolev_norm(v, 1, 2.0, 0.0).unwrap();
            let full0 = quantum_sobolev_norm(v0, 1, 2.0, 0.0).unwrap();
            assert!(full <= full0 * (1.0 + t) + 1e-12);
        }
    }

    #[test]
    fn homogeneous_state_norms_are_constant() {
        let g = grid(64);
        let f = sample_field(&g, &Profile::Homogeneous { amp: 1.0, theta: 0.1 }).unwrap();
        let (op0, v0) = wick_square_root_datum(&f).unwrap();
        let schedule = Schedule::new(0.2, g.hbar() / 5.0).every(10);
        let vl = evolve_vlasov(&f, schedule, 1.0).unwrap();
        let lin = evolve_linear_hartree(&op0, &vl.fields, schedule).unwrap();
        let vt = replay_linear_hartree(&v0, &lin).unwrap();
        for (k, q, n) in [(1, 2.0, 1), (2, 2.0, 2), (1, 3.5, 1)] {
            let r = regularity_tracking(&vt, &vl, k, q, n, 0.5, 2.0).unwrap();
            let n0 = r.rows[0].lhs;
            for row in &r.rows {
                assert!((row.lhs - n0).abs() < 1e-8 * n0, "{} vs {n0}", row.lhs);
            }
        }
    }
}
