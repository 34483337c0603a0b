//! Density operators stored as integral kernels on the spatial lattice.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::spectral;

/// Kernel `K[(i, j)] ~ op(x_i, x_j)`.
///
/// The operator acts on lattice wavefunctions by `(op psi)_i = sum_j K_ij psi_j dx`,
/// so its matrix in the orthonormal lattice basis is `K dx`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub grid: PhaseGrid,
    pub kernel: DMatrix<C64>,
    pub hermitian: bool,
    pub positive: bool,
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

impl DensityOperator {
    pub fn new(grid: PhaseGrid, kernel: DMatrix<C64>) -> Self {
        let mut op = Self { grid, kernel, hermitian: false, positive: false };
        op.hermitian = op.hermitian_defect() <= 1e-12;
        op
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        let n = grid.n();
        Self { grid, kernel: DMatrix::zeros(n, n), hermitian: true, positive: true }
    }

    /// The identity, whose kernel is the lattice delta `I / dx`.
    pub fn identity(grid: PhaseGrid) -> Self {
        let n = grid.n();
        let kernel = DMatrix::from_diagonal_element(n, n, C64::new(1.0 / grid.dx(), 0.0));
        Self { grid, kernel, hermitian: true, positive: true }
    }

    /// Multiplication by a lattice function.
    pub fn multiplication(grid: PhaseGrid, values: &[f64]) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), n);
        let mut kernel = DMatrix::zeros(n, n);
        for i in 0..n {
            kernel[(i, i)] = C64::new(values[i] / grid.dx(), 0.0);
        }
        let positive = values.iter().all(|&v| v >= 0.0);
        Self { grid, kernel, hermitian: true, positive }
    }

    /// Fourier multiplier `w(p)` evaluated on the lattice momenta
    /// `xi_q = q dxi`, `q in [-N/2, N/2)`.
    pub fn fourier_multiplier(grid: PhaseGrid, w: impl Fn(f64) -> C64) -> Self {
        let n = grid.n();
        let dxi = grid.dxi();
        let mut col = vec![ZERO; n];
        // K_ij depends on i - j only: K_ij = (1/L_x) sum_q w_q e^{2 pi i q (i-j)/N}
        for (idx, c) in col.iter_mut().enumerate() {
            *c = w(spectral::signed(idx, n) as f64 * dxi);
        }
        spectral::inverse(&mut col);
        let lx = grid.lx();
        let kernel = DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n] / lx);
        Self::new(grid, kernel)
    }

    /// Operator matrix `K dx` in the orthonormal lattice basis.
    pub fn matrix(&self) -> DMatrix<C64> {
        &self.kernel * C64::new(self.grid.dx(), 0.0)
    }

    pub fn from_matrix(grid: PhaseGrid, m: DMatrix<C64>) -> Self {
        Self::new(grid, m * C64::new(1.0 / grid.dx(), 0.0))
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn max_abs(&self) -> f64 {
        self.kernel.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max |K - K^*| / max |K|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                defect = defect.max((self.kernel[(i, j)] - self.kernel[(j, i)].conj()).norm());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        let d = self.hermitian_defect();
        if d <= 1e-12 {
            Ok(())
        } else {
            Err(Error::NotHermitian(d))
        }
    }

    /// Replaces the kernel by its Hermitian part.
    pub fn hermitize(mut self) -> Self {
        let adj = self.kernel.adjoint();
        self.kernel = (&self.kernel + adj) * C64::new(0.5, 0.0);
        self.hermitian = true;
        self
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.matrix();
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Hermitian eigendecomposition `(values, vectors)` of the operator matrix.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<C64>) {
        let m = self.matrix();
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let e = SymmetricEigen::new(m);
        (e.eigenvalues, e.eigenvectors)
    }

    /// Operator singular values (`dx` times the kernel singular values).
    pub fn singular_values(&self) -> Vec<f64> {
        self.matrix().singular_values().iter().copied().collect()
    }

    /// Re-evaluates positivity: smallest eigenvalue `>= -1e-10 * largest`.
    pub fn check_positive(&self) -> bool {
        let ev = self.eigenvalues();
        let lo = ev[0];
        let hi = ev[ev.len() - 1].abs().max(lo.abs());
        lo >= -1e-10 * hi
    }

    /// Sets both advisory flags from fresh checks.
    pub fn recheck_flags(mut self) -> Self {
        self.hermitian = self.hermitian_defect() <= 1e-12;
        self.positive = self.hermitian && self.check_positive();
        self
    }

    /// Operator trace `dx sum K_ii`.
    pub fn trace(&self) -> C64 {
        self.kernel.diagonal().iter().sum::<C64>() * self.grid.dx()
    }

    /// Operator product: kernel `K_A K_B dx`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let kernel = &self.kernel * &other.kernel * C64::new(self.grid.dx(), 0.0);
        Ok(Self::new(self.grid, kernel))
    }

    pub fn adjoint(&self) -> Self {
        Self { grid: self.grid, kernel: self.kernel.adjoint(), hermitian: self.hermitian, positive: self.positive }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let mut op = Self::new(self.grid, &self.kernel + &other.kernel);
        op.positive = self.positive && other.positive;
        Ok(op)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self::new(self.grid, &self.kernel - &other.kernel))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            kernel: &self.kernel * C64::new(c, 0.0),
            hermitian: self.hermitian,
            positive: self.positive && c >= 0.0,
        }
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        ab.sub(&ba)
    }

    /// `(op psi)_i = sum_j K_ij psi_j dx`.
    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        let v = DVector::from_column_slice(psi);
        let out = &self.kernel * v * C64::new(self.grid.dx(), 0.0);
        out.iter().copied().collect()
    }

    /// `sum_ij |K_ij|^2 dx^2`, the squared Hilbert-Schmidt norm.
    pub fn hs_norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        self.kernel.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Left multiplication by the Fourier multiplier `w(p)`.
    pub fn left_multiplier(&self, w: impl Fn(f64) -> C64) -> Self {
        let n = self.n();
        let weights = self.multiplier_weights(w);
        let mut kernel = self.kernel.clone();
        let mut buf = vec![ZERO; n];
        for j in 0..n {
            buf.copy_from_slice(kernel.column(j).as_slice());
            spectral::forward(&mut buf);
            for (b, w) in buf.iter_mut().zip(&weights) {
                *b *= *w / n as f64;
            }
            spectral::inverse(&mut buf);
            kernel.column_mut(j).copy_from_slice(&buf);
        }
        Self::new(self.grid, kernel)
    }

    /// Right multiplication by the Fourier multiplier `w(p)`.
    pub fn right_multiplier(&self, w: impl Fn(f64) -> C64) -> Self {
        let n = self.n();
        let weights = self.multiplier_weights(w);
        let mut kernel = self.kernel.clone();
        let mut buf = vec![ZERO; n];
        for i in 0..n {
            for j in 0..n {
                buf[j] = kernel[(i, j)];
            }
            spectral::inverse(&mut buf);
            for (b, w) in buf.iter_mut().zip(&weights) {
                *b *= *w / n as f64;
            }
            spectral::forward(&mut buf);
            for j in 0..n {
                kernel[(i, j)] = buf[j];
            }
        }
        Self::new(self.grid, kernel)
    }

    fn multiplier_weights(&self, w: impl Fn(f64) -> C64) -> Vec<C64> {
        let n = self.n();
        let dxi = self.grid.dxi();
        (0..n).map(|idx| w(spectral::signed(idx, n) as f64 * dxi)).collect()
    }

    /// Expectation in the momentum basis: `<phi_q, op phi_q>` for each
    /// lattice momentum `xi_q = q dxi`, in FFT bin order.
    pub fn momentum_diagonal(&self) -> Vec<f64> {
        let n = self.n();
        // phi_q(x_j) = e^{i xi_q x_j / hbar} / sqrt(L_x); <phi, K phi> dx^2
        let mut m = self.kernel.clone();
        let mut buf = vec![ZERO; n];
        for j in 0..n {
            buf.copy_from_slice(m.column(j).as_slice());
            spectral::forward(&mut buf);
            m.column_mut(j).copy_from_slice(&buf);
        }
        let dx = self.grid.dx();
        let lx = self.grid.lx();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                buf[j] = m[(i, j)];
            }
            spectral::inverse(&mut buf);
            out[i] = buf[i].re;
        }
        out.iter().map(|v| v * dx * dx / lx).collect()
    }
}
