//! Named analytic initial-data families and their lattice sampling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PhaseField;
use crate::grid::PhaseGrid;

/// Relative mass allowed on the momentum-box edge strip at sampling time.
pub const SAMPLING_TAIL_LIMIT: f64 = 1e-10;

/// Analytic phase-space profile. Position dependence is `L_x`-periodic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `amp * exp(-(|x - x0|^2 / sigma_x^2 + |xi - xi0|^2 / sigma_xi^2))`,
    /// with `x - x0` taken as a minimal image.
    Gaussian { amp: f64, x0: f64, xi0: f64, sigma_x: f64, sigma_xi: f64 },
    /// `amp * (1 + alpha cos(2 pi mode x / L_x)) * exp(-(xi - drift)^2 / (2 theta))`.
    PerturbedMaxwellian { amp: f64, alpha: f64, mode: u32, theta: f64, drift: f64 },
    /// Two counter-propagating Maxwellian beams at `+-v0`, spatially perturbed.
    TwoStream { amp: f64, alpha: f64, mode: u32, theta: f64, v0: f64 },
    /// Position-homogeneous Maxwellian `amp * exp(-xi^2 / (2 theta))`.
    Homogeneous { amp: f64, theta: f64 },
}

impl Profile {
    pub fn eval(&self, grid: &PhaseGrid, x: f64, xi: f64) -> f64 {
        let lx = grid.lx();
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian { amp, x0, xi0, sigma_x, sigma_xi } => {
                // periodic image sum keeps the profile smooth across x = 0
                let mut sx = 0.0;
                for l in -2..=2 {
                    let dx = grid.wrap_dx(x - x0) + l as f64 * lx;
                    sx += (-(dx * dx) / (sigma_x * sigma_x)).exp();
                }
                let dxi = xi - xi0;
                amp * sx * (-(dxi * dxi) / (sigma_xi * sigma_xi)).exp()
            }
            Profile::PerturbedMaxwellian { amp, alpha, mode, theta, drift } => {
                let s = 1.0 + alpha * (2.0 * PI * mode as f64 * x / lx).cos();
                amp * s * (-(xi - drift).powi(2) / (2.0 * theta)).exp()
            }
            Profile::TwoStream { amp, alpha, mode, theta, v0 } => {
                let s = 1.0 + alpha * (2.0 * PI * mode as f64 * x / lx).cos();
                let b = (-(xi - v0).powi(2) / (2.0 * theta)).exp() + (-(xi + v0).powi(2) / (2.0 * theta)).exp();
                amp * s * 0.5 * b
            }
            Profile::Homogeneous { amp, theta } => amp * (-xi * xi / (2.0 * theta)).exp(),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match *self {
            Profile::Constant { value } => value >= 0.0,
            Profile::Gaussian { amp, .. } | Profile::Homogeneous { amp, .. } => amp >= 0.0,
            Profile::PerturbedMaxwellian { amp, alpha, .. } | Profile::TwoStream { amp, alpha, .. } => {
                amp >= 0.0 && alpha.abs() <= 1.0
            }
        }
    }
}

/// Samples `profile` on the lattice, refusing profiles whose mass reaches
/// the momentum-box edge.
pub fn sample_field(grid: &PhaseGrid, profile: &Profile) -> Result<PhaseField> {
    let field = PhaseField::from_fn(*grid, |x, xi| profile.eval(grid, x, xi));
    if !matches!(profile, Profile::Constant { .. }) {
        let tail = field.boundary_mass_fraction();
        if tail > SAMPLING_TAIL_LIMIT {
            return Err(Error::Truncation(format!(
                "profile tail mass {tail:.3e} on the momentum boundary exceeds {SAMPLING_TAIL_LIMIT:.0e}"
            )));
        }
    }
    Ok(field)
}
