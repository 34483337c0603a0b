//! Weyl, Wigner and Wick (coherent-state) quantization on the lattice.
//!
//! The Weyl/Wigner pair is an exact bijection between `N x N` phase fields
//! and `N x N` kernels. A kernel entry `K[(i, j)]` is addressed by its chord
//! `r = i - j` (minimal image, `r in [-N/2, N/2)`) and its midpoint
//! `m = 2j + r (mod 2N)` on the doubled lattice. Entries with even `m` sit
//! over primal nodes; entries with odd `m` sit over cell midpoints and are
//! linked to the primal field by half-sample trigonometric interpolation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{Parity, PhaseField};
use crate::grid::PhaseGrid;
use crate::operator::DensityOperator;
use crate::spectral;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
fn chord_sign(r: i64) -> f64 {
    if r.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps kernel index `(i, j)` to `(chord r, midpoint m)`.
#[inline]
pub fn chord_midpoint(i: usize, j: usize, n: usize) -> (i64, usize) {
    let r = spectral::minimal_image(i as i64 - j as i64, n);
    let m = (2 * j as i64 + r).rem_euclid(2 * n as i64) as usize;
    (r, m)
}

/// Kernel index `(i, j)` holding chord `r` over midpoint `m` (same parity).
#[inline]
pub fn kernel_index(r: i64, m: usize, n: usize) -> (usize, usize) {
    let j = ((m as i64 - r) / 2).rem_euclid(n as i64) as usize;
    let i = (j as i64 + r).rem_euclid(n as i64) as usize;
    (i, j)
}

/// Weyl quantization `op_f(x, y) = (1/h) int e^{i (x - y) eta / hbar} f((x + y)/2, eta) d eta`.
pub fn weyl_quantize(f: &PhaseField) -> DensityOperator {
    let g = f.grid;
    let n = g.n();
    let lx = g.lx();
    // midpoint samples: row m of `mid` is F~(m, .)
    let mut mid = DMatrix::from_element(2 * n, n, ZERO);
    let mut col = vec![ZERO; n];
    for k in 0..n {
        for a in 0..n {
            col[a] = f.values[(a, k)];
            mid[(2 * a, k)] = col[a];
        }
        spectral::fractional_shift(&mut col, 0.5);
        for a in 0..n {
            mid[(2 * a + 1, k)] = col[a];
        }
    }
    // chord transform per midpoint, then scatter the matching-parity chords
    let mut kernel = DMatrix::from_element(n, n, ZERO);
    let mut row = vec![ZERO; n];
    for m in 0..2 * n {
        for k in 0..n {
            row[k] = mid[(m, k)];
        }
        spectral::inverse(&mut row);
        let parity = (m % 2) as i64;
        let mut r = -(n as i64) / 2;
        if r.rem_euclid(2) != parity {
            r += 1;
        }
        while r < n as i64 / 2 {
            let idx = r.rem_euclid(n as i64) as usize;
            let (i, j) = kernel_index(r, m, n);
            kernel[(i, j)] = row[idx] * (chord_sign(r) / lx);
            r += 2;
        }
    }
    mix_unpaired_chord(&mut kernel, false);
    let mut op = DensityOperator::new(g, kernel);
    op.positive = false;
    op
}

/// The chord `r = -N/2` is its own mirror image, and `K[(i, j)]`,
/// `K[(j, i)]` sit over midpoints `m` and `m + N`. The unitary pairing
/// `K_m = ((1+i) s_m + (1-i) s_{m+N}) / 2` maps real midpoint samples `s`
/// to Hermitian pairs; `inverse` applies its adjoint.
fn mix_unpaired_chord(kernel: &mut DMatrix<C64>, inverse: bool) {
    let n = kernel.nrows();
    let r = -(n as i64) / 2;
    let parity = r.rem_euclid(2) as usize;
    let plus = C64::new(0.5, 0.5);
    let minus = C64::new(0.5, -0.5);
    let (a, b) = if inverse { (minus, plus) } else { (plus, minus) };
    for t in 0..n / 2 {
        let m = parity + 2 * t;
        let p = kernel_index(r, m, n);
        let q = kernel_index(r, m + n, n);
        let (s1, s2) = (kernel[p], kernel[q]);
        kernel[p] = a * s1 + b * s2;
        kernel[q] = b * s1 + a * s2;
    }
}

/// Wigner transform `f_op(x, xi) = int e^{-i xi y / hbar} op(x + y/2, x - y/2) dy`,
/// the exact inverse of [`weyl_quantize`] on the lattice.
pub fn wigner_transform(op: &DensityOperator) -> PhaseField {
    let g = op.grid;
    let n = g.n();
    let dx = g.dx();
    // chords over primal midpoints: slab[(a, r mod N)] = G(2a, r)
    let mut slab = DMatrix::from_element(n, n, ZERO);
    let mut buf = vec![ZERO; n];
    let mut kernel = op.kernel.clone();
    mix_unpaired_chord(&mut kernel, true);
    for r in -(n as i64) / 2..(n as i64) / 2 {
        let ridx = r.rem_euclid(n as i64) as usize;
        let parity = r.rem_euclid(2) as usize;
        for t in 0..n {
            let (i, j) = kernel_index(r, parity + 2 * t, n);
            buf[t] = kernel[(i, j)];
        }
        if parity == 1 {
            spectral::fractional_shift(&mut buf, -0.5);
        }
        for a in 0..n {
            slab[(a, ridx)] = buf[a] * chord_sign(r);
        }
    }
    let mut values = DMatrix::from_element(n, n, ZERO);
    for a in 0..n {
        for ridx in 0..n {
            buf[ridx] = slab[(a, ridx)];
        }
        spectral::forward(&mut buf);
        for k in 0..n {
            values[(a, k)] = buf[k] * dx;
        }
    }
    let mut field = PhaseField::from_values(g, values);
    if op.hermitian {
        field = field.into_real();
    }
    field
}

fn ensure_resolved(grid: &PhaseGrid) -> Result<()> {
    let s = grid.hbar().sqrt();
    if grid.dx() > s {
        return Err(Error::Resolution(format!("dx = {:.4e} > sqrt(hbar) = {s:.4e}", grid.dx())));
    }
    if grid.dxi() > s {
        return Err(Error::Resolution(format!("dxi = {:.4e} > sqrt(hbar) = {s:.4e}", grid.dxi())));
    }
    Ok(())
}

/// The periodized phase-space Gaussian `g_h(z) = (pi hbar)^{-d} e^{-|z|^2 / hbar}`.
pub fn gaussian_phase_kernel(grid: &PhaseGrid) -> Result<PhaseField> {
    ensure_resolved(grid)?;
    let hbar = grid.hbar();
    let d = grid.d() as i32;
    let norm = (PI * hbar).powi(-d);
    let (lx, lxi) = (grid.lx(), grid.lxi());
    Ok(PhaseField::from_fn(*grid, |x, xi| {
        let x = grid.wrap_dx(x);
        let mut s = 0.0;
        for l in -2i32..=2 {
            for m in -2i32..=2 {
                let u = x + l as f64 * lx;
                let v = xi + m as f64 * lxi;
                s += (-(u * u + v * v) / hbar).exp();
            }
        }
        norm * s
    }))
}

/// Fourier multiplier of `g_h *` at wavevector `(omega_x, omega_xi)`.
pub fn gaussian_multiplier(hbar: f64, omega_x: f64, omega_xi: f64) -> f64 {
    (-hbar * (omega_x * omega_x + omega_xi * omega_xi) / 4.0).exp()
}

/// `g_h * f`, periodic convolution on the phase box.
pub fn husimi_convolve(f: &PhaseField) -> Result<PhaseField> {
    let g = f.grid;
    ensure_resolved(&g)?;
    let n = g.n();
    let hbar = g.hbar();
    let mut v = f.values.clone();
    let mut buf = vec![ZERO; n];
    // along xi (rows)
    for i in 0..n {
        for k in 0..n {
            buf[k] = v[(i, k)];
        }
        spectral::fourier_multiply(&mut buf, |p| {
            C64::new(gaussian_multiplier(hbar, 0.0, 2.0 * PI * p as f64 / g.lxi()), 0.0)
        });
        for k in 0..n {
            v[(i, k)] = buf[k];
        }
    }
    // along x (columns)
    for k in 0..n {
        buf.copy_from_slice(v.column(k).as_slice());
        spectral::fourier_multiply(&mut buf, |q| {
            C64::new(gaussian_multiplier(hbar, 2.0 * PI * q as f64 / g.lx(), 0.0), 0.0)
        });
        v.column_mut(k).copy_from_slice(&buf);
    }
    let mut out = PhaseField::from_values(g, v);
    if f.parity == Parity::Real {
        out = out.into_real();
    }
    Ok(out)
}

/// Wick quantization `h^{-d} int f(z) |psi_z><psi_z| dz`, evaluated as `op_{g_h * f}`.
pub fn wick_quantize(f: &PhaseField) -> Result<DensityOperator> {
    let smoothed = husimi_convolve(f)?;
    let mut op = weyl_quantize(&smoothed);
    op.positive = f.parity == Parity::Real && f.min_real() >= 0.0;
    Ok(op)
}

/// Normalized, periodically wrapped Gaussian wave packet.
#[derive(Clone, Debug)]
pub struct CoherentState {
    pub x0: f64,
    /// Center momentum after snapping to the lattice.
    pub xi0: f64,
    /// `|requested xi0 - snapped xi0|`.
    pub snap_distance: f64,
    pub grid: PhaseGrid,
    pub values: Vec<C64>,
}

/// `psi_z(y) = (pi hbar)^{-d/4} e^{-|y - x|^2 / (2 hbar)} e^{i y xi / hbar}`.
pub fn coherent_state(x0: f64, xi0: f64, grid: &PhaseGrid) -> Result<CoherentState> {
    let (lx, lxi) = (grid.lx(), grid.lxi());
    if !(0.0..lx).contains(&x0) || !(-lxi / 2.0..lxi / 2.0).contains(&xi0) {
        return Err(Error::Domain(format!("center ({x0}, {xi0}) outside the phase box")));
    }
    let hbar = grid.hbar();
    let kidx = grid.nearest_xi_index(xi0);
    let snapped = grid.xi(kidx);
    let norm = (PI * hbar).powf(-(grid.d() as f64) / 4.0);
    let values = (0..grid.n())
        .map(|j| {
            let y = grid.x(j);
            let dy = grid.wrap_dx(y - x0);
            let mut env = 0.0;
            for l in -2i32..=2 {
                let u = dy + l as f64 * lx;
                env += (-(u * u) / (2.0 * hbar)).exp();
            }
            C64::from_polar(norm * env, y * snapped / hbar)
        })
        .collect();
    Ok(CoherentState { x0, xi0: snapped, snap_distance: (xi0 - snapped).abs(), grid: *grid, values })
}

impl CoherentState {
    /// `h^{-d} |psi_z><psi_z|`.
    pub fn projector(&self) -> DensityOperator {
        let n = self.grid.n();
        let s = 1.0 / self.grid.h_d();
        let kernel = DMatrix::from_fn(n, n, |i, j| self.values[i] * self.values[j].conj() * s);
        let mut op = DensityOperator::new(self.grid, kernel);
        op.positive = true;
        op
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }
}

/// Closed-form overlap `<psi_z, psi_z'> = e^{-|z - z'|^2 / (4 hbar)} e^{i (x + x')(xi' - xi) / (2 hbar)}`,
/// with `x'` taken as the image nearest to `x`.
pub fn coherent_overlap(grid: &PhaseGrid, z: (f64, f64), zp: (f64, f64)) -> C64 {
    let hbar = grid.hbar();
    let (x, xi) = z;
    let xp = x + grid.wrap_dx(zp.0 - x);
    let xip = zp.1;
    let dist2 = (x - xp).powi(2) + (xi - xip).powi(2);
    C64::from_polar((-dist2 / (4.0 * hbar)).exp(), (x + xp) * (xip - xi) / (2.0 * hbar))
}

/// Quadrature inner product `sum conj(psi) phi dx`.
pub fn coherent_overlap_quadrature(a: &CoherentState, b: &CoherentState) -> C64 {
    a.values.iter().zip(&b.values).map(|(u, v)| u.conj() * v).sum::<C64>() * a.grid.dx()
}

/// Exchange of position and momentum: `op* = F_h^{-1} conj(op) F_h`, whose
/// Wigner transform is `conj f(xi, x)`. Needs a square box so that the
/// momentum lattice coincides with the position lattice.
pub fn exchange(op: &DensityOperator) -> Result<DensityOperator> {
    let g = op.grid;
    if (g.lx() - g.lxi()).abs() > 1e-12 * g.lx() {
        return Err(Error::Incompatible(format!(
            "exchange needs L_x = L_xi, got {} and {}",
            g.lx(),
            g.lxi()
        )));
    }
    let n = g.n();
    let mut k = op.kernel.map(|v| v.conj());
    let mut buf = vec![ZERO; n];
    for j in 0..n {
        buf.copy_from_slice(k.column(j).as_slice());
        spectral::inverse(&mut buf);
        k.column_mut(j).copy_from_slice(&buf);
    }
    for i in 0..n {
        for j in 0..n {
            buf[j] = k[(i, j)];
        }
        spectral::forward(&mut buf);
        for j in 0..n {
            k[(i, j)] = buf[j] / n as f64;
        }
    }
    let mut out = DensityOperator::new(g, k);
    out.positive = op.positive;
    Ok(out)
}

/// `conj f(xi, x)` on a square lattice.
pub fn swap_field(f: &PhaseField) -> PhaseField {
    let g = f.grid;
    let n = g.n();
    let values = DMatrix::from_fn(n, n, |a, kidx| {
        let src_x = (g.k_of(kidx)).rem_euclid(n as i64) as usize;
        let src_k = (spectral::signed(a, n) + (n / 2) as i64) as usize;
        f.values[(src_x, src_k)].conj()
    });
    PhaseField::from_values(g, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;

    fn square(n: usize) -> PhaseGrid {
        PhaseGrid::line(n, 2.0 * PI, 2.0 * PI).unwrap()
    }

    fn bump(g: &PhaseGrid) -> PhaseField {
        let p = Profile::Gaussian { amp: 1.0, x0: 2.5, xi0: 0.3, sigma_x: 0.9, sigma_xi: 0.45 };
        PhaseField::from_fn(*g, |x, xi| p.eval(g, x, xi))
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        a.iter().zip(b.iter()).fold(0.0, |m, (u, v)| m.max((u - v).norm()))
    }

    #[test]
    fn weyl_of_real_field_is_hermitian() {
        let g = square(16);
        let f = PhaseField::from_fn(g, |x, xi| ((3.0 * x).sin() + xi).cos() * (1.0 + (x - xi).sin()));
        let op = weyl_quantize(&f);
        assert!(op.hermitian_defect() < 1e-13, "{}", op.hermitian_defect());
    }

    #[test]
    fn weyl_of_one_is_identity() {
        let g = square(32);
        let op = weyl_quantize(&PhaseField::constant(g, 1.0));
        let id = DensityOperator::identity(g);
        assert!(max_diff(&op.kernel, &id.kernel) < 1e-10);
    }

    #[test]
    fn weyl_of_momentum_is_spectral_derivative() {
        let g = square(32);
        let n = 32;
        let op = weyl_quantize(&PhaseField::from_fn(g, |_, xi| xi));
        let oracle = DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| C64::from_polar(g.xi(k), 2.0 * PI * (i as f64 - j as f64) * g.k_of(k) as f64 / n as f64))
                .sum::<C64>()
                / g.lx()
        });
        assert!(max_diff(&op.kernel, &oracle) < 1e-10);
    }

    #[test]
    fn weyl_matches_direct_quadrature_for_gaussian() {
        let g = square(32);
        let n = 32;
        let p = Profile::Gaussian { amp: 1.0, x0: 2.5, xi0: 0.3, sigma_x: 0.9, sigma_xi: 0.9 };
        let op = weyl_quantize(&PhaseField::from_fn(g, |x, xi| p.eval(&g, x, xi)));
        // K_ij = (1/h) sum_k dxi e^{i (x_i - x_j) xi_k / hbar} f(midpoint, xi_k)
        // K_ij = (1/h) sum_k dxi e^{i (x_i - x_j) xi_k / hbar} f(midpoint, xi_k);
        // the unpaired chord -N/2 combines its two torus midpoints
        let quad = |mid: f64, chord: f64| {
            (0..n)
                .map(|k| C64::from_polar(p.eval(&g, mid, g.xi(k)), chord * g.xi(k) / g.hbar()))
                .sum::<C64>()
                * (g.dxi() / g.h())
        };
        let oracle = DMatrix::from_fn(n, n, |i, j| {
            let r = spectral::minimal_image(i as i64 - j as i64, n);
            let mid = g.x(j) + 0.5 * r as f64 * g.dx();
            let chord = r as f64 * g.dx();
            if r == -(n as i64) / 2 {
                let own = quad(mid, chord);
                let other = quad(mid + 0.5 * g.lx(), chord);
                own * C64::new(0.5, 0.5) + other * C64::new(0.5, -0.5)
            } else {
                quad(mid, chord)
            }
        });
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(max_diff(&op.kernel, &oracle) / scale < 1e-8);
    }

    #[test]
    fn wigner_inverts_weyl() {
        let g = square(32);
        let f = PhaseField::from_complex_fn(g, |x, xi| C64::new((x + 0.3).sin() * xi, (2.0 * x).cos() - xi * xi));
        let back = wigner_transform(&weyl_quantize(&f));
        assert!(max_diff(&back.values, &f.values) < 1e-12 * f.max_abs().max(1.0));
    }

    #[test]
    fn weyl_inverts_wigner() {
        let g = square(16);
        let k = DMatrix::from_fn(16, 16, |i, j| C64::new(((3 * i + j) % 7) as f64, (i as f64 - 2.0 * j as f64).sin()));
        let op = DensityOperator::new(g, k);
        let back = weyl_quantize(&wigner_transform(&op));
        assert!(max_diff(&back.kernel, &op.kernel) < 1e-12 * op.max_abs());
    }

    #[test]
    fn wigner_of_hermitian_is_real() {
        let g = square(16);
        let k = DMatrix::from_fn(16, 16, |i, j| C64::new(((3 * i + j) % 7) as f64, (i as f64 - 0.3 * j as f64).sin()));
        let op = DensityOperator::new(g, &k + k.adjoint());
        assert!(op.hermitian);
        let mut raw = op.clone();
        raw.hermitian = false;
        let w = wigner_transform(&raw);
        assert!(w.max_imag() < 1e-12 * w.max_abs());
    }

    #[test]
    fn coherent_projector_wigner_is_gaussian() {
        let g = square(64);
        let psi = coherent_state(3.0, 0.7, &g).unwrap();
        assert!((psi.norm_sq() - 1.0).abs() < 1e-10);
        let w = wigner_transform(&psi.projector());
        assert!((w.integral().re - 1.0).abs() < 1e-10);
        // closed form is g_h(z - z0); compare pointwise against quadrature oracle of the
        // defining integral at a few probes
        let hbar = g.hbar();
        let mut best = (0usize, 0usize, f64::MIN);
        for i in 0..64 {
            for k in 0..64 {
                let v = w.values[(i, k)].re;
                let dist2 = g.wrap_dx(g.x(i) - psi.x0).powi(2) + (g.xi(k) - psi.xi0).powi(2);
                let want = (-dist2 / hbar).exp() / (PI * hbar);
                assert!((v - want).abs() < 1e-9 * want.max(1.0), "({i},{k}) {v} vs {want}");
                assert!(v > -1e-11, "{v}");
                if v > best.2 {
                    best = (i, k, v);
                }
            }
        }
        assert!(g.wrap_dx(g.x(best.0) - psi.x0).abs() <= g.dx());
        assert!((g.xi(best.1) - psi.xi0).abs() <= g.dxi());
    }

    #[test]
    fn coherent_state_moments() {
        let g = square(64);
        let psi = coherent_state(2.2, -0.5, &g).unwrap();
        let dx = g.dx();
        let mean_x: f64 = (0..64).map(|j| g.x(j) * psi.values[j].norm_sqr()).sum::<f64>() * dx;
        assert!((mean_x - 2.2).abs() < dx);
        let p = DensityOperator::fourier_multiplier(g, |p| C64::new(p, 0.0));
        let ppsi = p.apply(&psi.values);
        let mean_p: f64 = psi.values.iter().zip(&ppsi).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * dx;
        assert!((mean_p - psi.xi0).abs() < g.dxi());
        assert!(coherent_state(7.0, 0.0, &g).is_err());
        assert!(coherent_state(1.0, 4.0, &g).is_err());
    }

    #[test]
    fn overlap_closed_form_matches_quadrature() {
        let g = square(64);
        let s = g.hbar().sqrt();
        assert!((coherent_overlap(&g, (1.0, 0.2), (1.0, 0.2)) - 1.0).norm() < 1e-15);
        let z = (3.0, 0.0);
        let zp = (3.0 + 2.0 * s, 0.0);
        assert!((coherent_overlap(&g, z, zp).norm() - (-1.0f64).exp()).abs() < 1e-12);
        for &(x, xi, xp, xip) in &[(1.0, 0.3, 1.4, 0.1), (6.1, -0.2, 0.2, 0.4), (3.0, 1.0, 3.5, 0.6)] {
            let a = coherent_state(x, xi, &g).unwrap();
            let b = coherent_state(xp, xip, &g).unwrap();
            let closed = coherent_overlap(&g, (a.x0, a.xi0), (b.x0, b.xi0));
            let quad = coherent_overlap_quadrature(&a, &b);
            assert!((closed - quad).norm() / closed.norm() < 1e-8, "{closed} vs {quad}");
        }
    }

    #[test]
    fn gaussian_kernel_normalization_and_moments() {
        let g = square(64);
        let k = gaussian_phase_kernel(&g).unwrap();
        let hbar = g.hbar();
        assert!((k.integral().re - 1.0).abs() < 1e-10);
        let peak = k.values[(0, 32)].re;
        assert!((peak * PI * hbar - 1.0).abs() < 1e-12);
        let m2 = k.map_with_coords(|x, xi, v| v * (g.wrap_dx(x).powi(2) + xi * xi)).integral().re;
        assert!((m2 - 2.0 * hbar / 2.0).abs() < 1e-8);
    }

    #[test]
    fn unresolved_gaussian_is_rejected() {
        // dx = 1 > sqrt(hbar) for this elongated box
        let g = PhaseGrid::line(8, 8.0, 0.1).unwrap();
        assert!(matches!(gaussian_phase_kernel(&g), Err(Error::Resolution(_))));
        assert!(matches!(husimi_convolve(&PhaseField::constant(g, 1.0)), Err(Error::Resolution(_))));
    }

    #[test]
    fn husimi_basic_properties() {
        let g = square(32);
        let one = husimi_convolve(&PhaseField::constant(g, 1.0)).unwrap();
        assert!(one.values.iter().all(|v| (v - 1.0).norm() < 1e-10));
        // plane wave e^{2 pi i (q x / L_x + p xi / L_xi)}
        let (q, p) = (3.0, -2.0);
        let wave = PhaseField::from_complex_fn(g, |x, xi| {
            C64::from_polar(1.0, 2.0 * PI * (q * x / g.lx() + p * xi / g.lxi()))
        });
        let conv = husimi_convolve(&wave).unwrap();
        let mult = gaussian_multiplier(g.hbar(), 2.0 * PI * q / g.lx(), 2.0 * PI * p / g.lxi());
        assert!(max_diff(&conv.values, &wave.values.map(|v| v * mult)) < 1e-10);
        let f = bump(&g);
        let c = husimi_convolve(&f).unwrap();
        assert!((c.integral() - f.integral()).norm() < 1e-10);
    }

    #[test]
    fn husimi_matches_direct_convolution() {
        let g = square(32);
        let n = 32;
        let f = bump(&g);
        let kern = gaussian_phase_kernel(&g).unwrap();
        let fast = husimi_convolve(&f).unwrap();
        let cell = g.cell();
        for &(i, k) in &[(5usize, 16usize), (13, 18), (20, 10)] {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..n {
                for b in 0..n {
                    let di = (i + n - a) % n;
                    let dk = (k as i64 - b as i64 + (n / 2) as i64).rem_euclid(n as i64) as usize;
                    s += kern.values[(di, dk)] * f.values[(a, b)] * cell;
                }
            }
            assert!((s - fast.values[(i, k)]).norm() < 1e-10, "{s} vs {}", fast.values[(i, k)]);
        }
    }

    #[test]
    fn wick_of_one_is_identity() {
        let g = square(32);
        let op = wick_quantize(&PhaseField::constant(g, 1.0)).unwrap();
        assert!(max_diff(&op.kernel, &DensityOperator::identity(g).kernel) < 1e-10);
    }

    #[test]
    fn wick_matches_coherent_state_sum() {
        let g = square(32);
        let n = 32;
        let p = Profile::Gaussian { amp: 1.0, x0: PI, xi0: 0.2, sigma_x: 0.6, sigma_xi: 0.45 };
        let f = PhaseField::from_fn(g, |x, xi| p.eval(&g, x, xi));
        let fast = wick_quantize(&f).unwrap();
        // sub-lattice with at least 4 points per sqrt(hbar) per axis
        let hbar = g.hbar();
        let per = (g.lx() / (hbar.sqrt() / 4.0)).ceil() as usize;
        let step = g.lx() / per as f64;
        let norm = (PI * hbar).powf(-0.25);
        let mut k = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let mut psi = vec![C64::new(0.0, 0.0); n];
        for a in 0..per {
            let x0 = a as f64 * step;
            for b in 0..per {
                let xi0 = -g.lxi() / 2.0 + b as f64 * step;
                let w = p.eval(&g, x0, xi0);
                if w < 1e-18 {
                    continue;
                }
                for (j, v) in psi.iter_mut().enumerate() {
                    let y = g.x(j);
                    let mut env = 0.0;
                    for l in -2i32..=2 {
                        let u = g.wrap_dx(y - x0) + l as f64 * g.lx();
                        env += (-(u * u) / (2.0 * hbar)).exp();
                    }
                    *v = C64::from_polar(norm * env, y * xi0 / hbar);
                }
                let c = w * step * step / g.h();
                for i in 0..n {
                    for j in 0..n {
                        k[(i, j)] += psi[i] * psi[j].conj() * c;
                    }
                }
            }
        }
        let err = (&fast.kernel - &k).norm() / k.norm();
        assert!(err < 1e-6, "relative L2 error {err:.3e}");
    }

    #[test]
    fn exchange_is_involution_and_swaps_symbol() {
        let g = square(32);
        let f = bump(&g);
        let op = weyl_quantize(&f);
        let ex = exchange(&op).unwrap();
        let twice = exchange(&ex).unwrap();
        assert!(max_diff(&twice.kernel, &op.kernel) < 1e-10 * op.max_abs());
        let w = wigner_transform(&ex);
        let sw = swap_field(&f);
        assert!(max_diff(&w.values, &sw.values) < 1e-6, "{}", max_diff(&w.values, &sw.values));
        let s1: Vec<f64> = op.singular_values();
        let s2: Vec<f64> = ex.singular_values();
        let mut a = s1.clone();
        let mut b = s2.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10 * a[a.len() - 1]);
        }
    }

    #[test]
    fn exchange_maps_momentum_weight_to_position_weight() {
        let g = square(32);
        let bracket_p = DensityOperator::fourier_multiplier(g, |p| C64::new((1.0 + p * p).sqrt(), 0.0));
        let ex = exchange(&bracket_p).unwrap();
        let bx: Vec<f64> = (0..32).map(|i| (1.0 + g.wrap_dx(g.x(i)).powi(2)).sqrt()).collect();
        let want = DensityOperator::multiplication(g, &bx);
        assert!(max_diff(&ex.kernel, &want.kernel) < 1e-10 * want.max_abs());
    }

    #[test]
    fn exchange_rejects_rectangular_box() {
        let g = PhaseGrid::line(16, 2.0, 3.0).unwrap();
        assert!(matches!(exchange(&DensityOperator::identity(g)), Err(Error::Incompatible(_))));
    }
}
