//! Phase-space samples on a [`PhaseGrid`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::PhaseGrid;
use crate::spectral;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Real,
    Complex,
}

/// Samples `values[(i, kidx)] = f(x_i, xi_kidx)`.
#[derive(Clone, Debug)]
pub struct PhaseField {
    pub grid: PhaseGrid,
    pub values: DMatrix<C64>,
    pub parity: Parity,
}

impl PhaseField {
    pub fn from_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let values = DMatrix::from_fn(n, n, |i, k| C64::new(f(grid.x(i), grid.xi(k)), 0.0));
        Self { grid, values, parity: Parity::Real }
    }

    pub fn from_complex_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> C64) -> Self {
        let n = grid.n();
        let values = DMatrix::from_fn(n, n, |i, k| f(grid.x(i), grid.xi(k)));
        Self::from_values(grid, values)
    }

    /// Wraps raw samples, flagging them real when the imaginary parts are
    /// negligible.
    pub fn from_values(grid: PhaseGrid, values: DMatrix<C64>) -> Self {
        let mut out = Self { grid, values, parity: Parity::Complex };
        if out.is_numerically_real() {
            out.parity = Parity::Real;
        }
        out
    }

    pub fn constant(grid: PhaseGrid, c: f64) -> Self {
        Self::from_fn(grid, |_, _| c)
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn is_numerically_real(&self) -> bool {
        self.max_imag() <= 1e-12 * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Drops imaginary parts and flags the field real.
    pub fn into_real(mut self) -> Self {
        for v in self.values.iter_mut() {
            v.im = 0.0;
        }
        self.parity = Parity::Real;
        self
    }

    /// Cell-sum quadrature `sum f dx dxi`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.grid.cell()
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_values(self.grid, self.values.map(f))
    }

    /// Pointwise map using the lattice coordinates.
    pub fn map_with_coords(&self, f: impl Fn(f64, f64, C64) -> C64) -> Self {
        let g = self.grid;
        let n = g.n();
        let values = DMatrix::from_fn(n, n, |i, k| f(g.x(i), g.xi(k), self.values[(i, k)]));
        Self::from_values(g, values)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.zip_map(&other.values, f);
        Ok(Self::from_values(self.grid, values))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, values: &self.values * C64::new(c, 0.0), parity: self.parity }
    }

    /// `sqrt(max(f, 0))` of the real part.
    pub fn sqrt_clamped(&self) -> Self {
        let mut out = self.map(|v| C64::new(v.re.max(0.0).sqrt(), 0.0));
        out.parity = Parity::Real;
        out
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(v.re))
    }

    /// Spatial density `rho(x) = integral f dxi`.
    pub fn density(&self) -> Vec<f64> {
        let n = self.n();
        let dxi = self.grid.dxi();
        (0..n).map(|i| self.values.row(i).iter().map(|v| v.re).sum::<f64>() * dxi).collect()
    }

    /// Spectral `d/dx` along the position axis.
    pub fn d_dx(&self) -> Self {
        let n = self.n();
        let mut out = self.values.clone();
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            for i in 0..n {
                buf[i] = out[(i, k)];
            }
            spectral::derivative(&mut buf, self.grid.lx());
            for i in 0..n {
                out[(i, k)] = buf[i];
            }
        }
        Self { grid: self.grid, values: out, parity: self.parity }
    }

    /// Spectral `d/dxi` along the (periodically extended) momentum axis.
    pub fn d_dxi(&self) -> Self {
        let n = self.n();
        let mut out = self.values.clone();
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            for k in 0..n {
                buf[k] = out[(i, k)];
            }
            spectral::derivative(&mut buf, self.grid.lxi());
            for k in 0..n {
                out[(i, k)] = buf[k];
            }
        }
        Self { grid: self.grid, values: out, parity: self.parity }
    }

    /// Mass on the outer eighth of the momentum box on each side, relative
    /// to the total absolute mass.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let g = self.grid;
        let edge = 3.0 * g.lxi() / 8.0;
        let mut tail = 0.0;
        let mut total = 0.0;
        for k in 0..g.n() {
            let on_edge = g.xi(k).abs() >= edge;
            for i in 0..g.n() {
                let a = self.values[(i, k)].norm();
                total += a;
                if on_edge {
                    tail += a;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}
