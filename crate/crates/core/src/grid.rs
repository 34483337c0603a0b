//! Phase-space lattice with Planck's constant slaved to the resolution.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of `[0, L_x) x [-L_xi/2, L_xi/2)` with `N` points per axis.
///
/// The momentum lattice fills the momentum box exactly, which fixes
/// `h = L_x * L_xi / N` and makes every lattice plane wave periodic in `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    d: usize,
    n: usize,
    lx: f64,
    lxi: f64,
}

impl PhaseGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(d: usize, n: usize, lx: f64, lxi: f64) -> Result<Self> {
        if d != 1 {
            return Err(Error::Config(format!("dimension d = {d} unsupported; only d = 1 is implemented")));
        }
        if n % 2 != 0 {
            return Err(Error::Config(format!("N = {n} must be even")));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::Config(format!("N = {n} below minimum {}", Self::MIN_POINTS)));
        }
        if !(lx > 0.0 && lx.is_finite() && lxi > 0.0 && lxi.is_finite()) {
            return Err(Error::Config(format!("box lengths must be positive, got L_x = {lx}, L_xi = {lxi}")));
        }
        Ok(Self { d, n, lx, lxi })
    }

    /// One-dimensional grid shorthand.
    pub fn line(n: usize, lx: f64, lxi: f64) -> Result<Self> {
        Self::new(1, n, lx, lxi)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn lxi(&self) -> f64 {
        self.lxi
    }

    /// Planck's constant `h = L_x L_xi / N`.
    pub fn h(&self) -> f64 {
        self.lx * self.lxi / self.n as f64
    }

    pub fn hbar(&self) -> f64 {
        self.h() / (2.0 * PI)
    }

    /// `h^d`, the phase-space cell attached to one quantum state.
    pub fn h_d(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.n as f64
    }

    /// Momentum spacing, equal to `h / L_x`.
    pub fn dxi(&self) -> f64 {
        self.lxi / self.n as f64
    }

    /// Quadrature weight of one phase-space cell.
    pub fn cell(&self) -> f64 {
        self.dx() * self.dxi()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Signed momentum index `k in [-N/2, N/2)` of storage column `kidx`.
    pub fn k_of(&self, kidx: usize) -> i64 {
        kidx as i64 - (self.n / 2) as i64
    }

    pub fn xi(&self, kidx: usize) -> f64 {
        self.k_of(kidx) as f64 * self.dxi()
    }

    /// Storage column of the momentum nearest to `xi` (wrapped into the box).
    pub fn nearest_xi_index(&self, xi: f64) -> usize {
        let k = (xi / self.dxi()).round() as i64;
        (k + (self.n / 2) as i64).rem_euclid(self.n as i64) as usize
    }

    /// Minimal-image representative of a position offset, in `[-L_x/2, L_x/2)`.
    pub fn wrap_dx(&self, delta: f64) -> f64 {
        let l = self.lx;
        let r = delta.rem_euclid(l);
        if r < l / 2.0 {
            r
        } else {
            r - l
        }
    }

    /// Whether `dx <= sqrt(hbar)` and `dxi <= sqrt(hbar)`.
    pub fn resolves_hbar(&self) -> bool {
        let s = self.hbar().sqrt();
        self.dx() <= s && self.dxi() <= s
    }

    /// Grids agree when every parameter matches exactly.
    pub fn ensure_same(&self, other: &PhaseGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// The same box resolved with a different `N`.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.d, n, self.lx, self.lxi)
    }
}
