//! Classical and quantum norms, quantum gradients, momentum weights,
//! spatial densities and operator square roots.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::PhaseField;
use crate::operator::DensityOperator;
use crate::quantize::{chord_midpoint, kernel_index};
use crate::spectral;

/// Eigenvalue clamp for [`operator_sqrt`], relative to the operator norm.
pub const SQRT_CLAMP: f64 = 1e-8;

/// Kernel mass limit near the chord cut `|x - y| = L_x / 2`.
pub const WRAP_LIMIT: f64 = 1e-8;

fn lp_sum(values: impl Iterator<Item = f64>, p: f64, measure: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        (values.map(|a| a.powf(p)).sum::<f64>() * measure).powf(1.0 / p)
    }
}

/// `||f||_{L^p}` over the phase box; `p = inf` is the grid maximum.
pub fn lebesgue_norm(f: &PhaseField, p: f64) -> f64 {
    lp_sum(f.values.iter().map(|v| v.norm()), p, f.grid.cell())
}

/// `|| ||f(x, .)||_{L^q_xi} ||_{L^p_x}`.
pub fn mixed_norm(f: &PhaseField, p: f64, q: f64) -> f64 {
    let g = f.grid;
    let inner: Vec<f64> =
        (0..g.n()).map(|i| lp_sum(f.values.row(i).iter().map(|v| v.norm()), q, g.dxi())).collect();
    lp_sum(inner.into_iter(), p, g.dx())
}

/// `||f||_{L^p_x}` of a spatial field.
pub fn spatial_norm(f: &[f64], p: f64, dx: f64) -> f64 {
    lp_sum(f.iter().map(|v| v.abs()), p, dx)
}

/// Multi-indices `(a, b)` with `a + b <= k`, ordered by total degree then
/// position derivatives first.
pub fn multi_indices(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=k {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

/// Spectral `d^a/dx^a d^b/dxi^b f`.
pub fn partial(f: &PhaseField, a: usize, b: usize) -> PhaseField {
    let mut out = f.clone();
    for _ in 0..a {
        out = out.d_dx();
    }
    for _ in 0..b {
        out = out.d_dxi();
    }
    out
}

/// `||f||_{W^{k,p}_n} = (sum_{|alpha| <= k} ||<xi>^n d^alpha f||_{L^p}^2)^{1/2}`.
pub fn weighted_sobolev_norm(f: &PhaseField, k: usize, p: f64, n: f64) -> f64 {
    multi_indices(k)
        .into_iter()
        .map(|(a, b)| {
            let d = partial(f, a, b);
            let w = if n == 0.0 { d } else { d.map_with_coords(|_, xi, v| v * (1.0 + xi * xi).powf(n / 2.0)) };
            lebesgue_norm(&w, p).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// `||f||_{H^s}` through the Fourier multiplier `(1 + |omega|^2)^{s/2}` on the
/// periodic phase box.
pub fn fractional_sobolev_norm(f: &PhaseField, s: f64) -> f64 {
    let g = f.grid;
    let n = g.n();
    let mut m = f.values.clone();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        buf.copy_from_slice(m.column(k).as_slice());
        spectral::forward(&mut buf);
        m.column_mut(k).copy_from_slice(&buf);
    }
    for i in 0..n {
        for k in 0..n {
            buf[k] = m[(i, k)];
        }
        spectral::forward(&mut buf);
        for k in 0..n {
            m[(i, k)] = buf[k];
        }
    }
    // Parseval: sum |f|^2 cell = cell / N^2 sum |f^|^2
    let mut acc = 0.0;
    for q in 0..n {
        let wx = 2.0 * std::f64::consts::PI * spectral::signed(q, n) as f64 / g.lx();
        for p in 0..n {
            let wxi = 2.0 * std::f64::consts::PI * spectral::signed(p, n) as f64 / g.lxi();
            acc += (1.0 + wx * wx + wxi * wxi).powf(s) * m[(q, p)].norm_sqr();
        }
    }
    (acc * g.cell() / (n * n) as f64).sqrt()
}

/// Lorentz quasi-norm `||f||_{L^{p,q}}` of a spatial field with cell
/// measure `dx`.
///
/// The decreasing rearrangement is piecewise constant on cells
/// `[t_i, t_{i+1})` of the cumulative measure. For finite `q` the integral
/// `int (t^{1/p} f*(t))^q dt/t` is evaluated exactly cell by cell; for
/// `q = inf` the supremum is taken at the right endpoint of each cell.
pub fn lorentz_norm(f: &[f64], p: f64, q: f64, dx: f64) -> f64 {
    let mut star: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    star.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if p.is_infinite() {
        return star.first().copied().unwrap_or(0.0);
    }
    if q.is_infinite() {
        return star
            .iter()
            .enumerate()
            .fold(0.0, |m, (i, &v)| m.max(((i + 1) as f64 * dx).powf(1.0 / p) * v));
    }
    let r = q / p;
    let sum: f64 = star
        .iter()
        .enumerate()
        .map(|(i, &v)| v.powf(q) * (((i + 1) as f64 * dx).powf(r) - (i as f64 * dx).powf(r)) / r)
        .sum();
    sum.powf(1.0 / q)
}

/// Rescaled Schatten norm `h^{d/p} (sum sigma_i^p)^{1/p}`; `p = inf` is the
/// largest singular value.
pub fn schatten_norm(op: &DensityOperator, p: f64) -> f64 {
    let sv = op.singular_values();
    if p.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    if p == 2.0 {
        return (op.grid.h_d() * op.hs_norm_sq()).sqrt();
    }
    let h = op.grid.h_d();
    (h * sv.iter().map(|s| s.powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// `[nabla, op]`: spectral derivative of the kernel along the midpoint at
/// fixed chord.
pub fn quantum_gradient_x(op: &DensityOperator) -> DensityOperator {
    let n = op.n();
    let mut kernel = op.kernel.clone();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for r in -(n as i64) / 2..(n as i64) / 2 {
        let parity = r.rem_euclid(2) as usize;
        for (t, b) in buf.iter_mut().enumerate() {
            let (i, j) = kernel_index(r, parity + 2 * t, n);
            *b = op.kernel[(i, j)];
        }
        spectral::derivative(&mut buf, op.grid.lx());
        for (t, b) in buf.iter().enumerate() {
            let (i, j) = kernel_index(r, parity + 2 * t, n);
            kernel[(i, j)] = *b;
        }
    }
    let mut out = DensityOperator::new(op.grid, kernel);
    out.positive = false;
    out
}

/// Relative kernel norm on chords `|r| > 3N/8`.
pub fn wrap_mass(op: &DensityOperator) -> f64 {
    let n = op.n();
    let cut = 3 * n as i64 / 8;
    let mut tail = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = op.kernel[(i, j)].norm_sqr();
            total += a;
            if spectral::minimal_image(i as i64 - j as i64, n).abs() > cut {
                tail += a;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        (tail / total).sqrt()
    }
}

pub(crate) fn ensure_wrap_safe(op: &DensityOperator) -> Result<()> {
    let mass = wrap_mass(op);
    if mass > WRAP_LIMIT {
        Err(Error::WrapAmbiguity { mass, limit: WRAP_LIMIT })
    } else {
        Ok(())
    }
}

/// `[x / (i hbar), op]`: kernel times `(x - y) / (i hbar)` with the
/// minimal-image chord. The unpaired chord `r = -N/2` is dropped.
pub fn quantum_gradient_xi(op: &DensityOperator) -> Result<DensityOperator> {
    ensure_wrap_safe(op)?;
    Ok(quantum_gradient_xi_unchecked(op))
}

pub(crate) fn quantum_gradient_xi_unchecked(op: &DensityOperator) -> DensityOperator {
    let n = op.n();
    let g = op.grid;
    let scale = C64::new(0.0, -g.dx() / g.hbar());
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let (r, _) = chord_midpoint(i, j, n);
        if r == -(n as i64) / 2 {
            C64::new(0.0, 0.0)
        } else {
            op.kernel[(i, j)] * scale * r as f64
        }
    });
    let mut out = DensityOperator::new(g, kernel);
    out.positive = false;
    out
}

/// Applies `grad_x^a grad_xi^b`.
pub fn quantum_partial(op: &DensityOperator, a: usize, b: usize) -> Result<DensityOperator> {
    let mut out = op.clone();
    for _ in 0..a {
        out = quantum_gradient_x(&out);
    }
    if b > 0 {
        ensure_wrap_safe(op)?;
    }
    for _ in 0..b {
        out = quantum_gradient_xi_unchecked(&out);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Both,
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "both" => Ok(Side::Both),
            other => Err(Error::Parse(format!("unknown side {other:?}"))),
        }
    }
}

/// Momentum bracket `<p>^n = (1 + |p|^2)^{n/2}` applied as a Fourier
/// multiplier: `<p>^n op`, `op <p>^n`, or the symmetric split
/// `<p>^{n/2} op <p>^{n/2}`.
pub fn momentum_weight_apply(op: &DensityOperator, n: f64, side: Side) -> DensityOperator {
    let bracket = |e: f64| move |p: f64| C64::new((1.0 + p * p).powf(e / 2.0), 0.0);
    let out = match side {
        Side::Left => op.left_multiplier(bracket(n)),
        Side::Right => op.right_multiplier(bracket(n)),
        Side::Both => op.left_multiplier(bracket(n / 2.0)).right_multiplier(bracket(n / 2.0)),
    };
    let mut out = out;
    out.positive = side == Side::Both && op.positive;
    out
}

/// Weighted Schatten norm `||op m||_{L^p}` with `m = <p>^n`.
pub fn weighted_schatten_norm(op: &DensityOperator, p: f64, n: f64) -> f64 {
    if n == 0.0 {
        schatten_norm(op, p)
    } else {
        schatten_norm(&momentum_weight_apply(op, n, Side::Right), p)
    }
}

/// Inhomogeneous quantum Sobolev norm `||op||_{W^{k,p}(<p>^n)}`:
/// the `p`-sum over multi-indices `|alpha| <= k` (each counted once) of
/// `||grad^alpha op||_{L^p(<p>^n)}`, or their maximum for `p = inf`.
pub fn quantum_sobolev_norm(op: &DensityOperator, k: usize, p: f64, n: f64) -> Result<f64> {
    derivative_sobolev_norm(op, (0, 0), k, p, n)
}

/// `||grad_x^a0 grad_xi^b0 op||_{W^{k,p}(<p>^n)}`, with the wrap guard
/// applied once to `op` itself.
pub fn derivative_sobolev_norm(op: &DensityOperator, base: (usize, usize), k: usize, p: f64, n: f64) -> Result<f64> {
    let indices = multi_indices(k);
    if base.1 > 0 || indices.iter().any(|&(_, b)| b > 0) {
        ensure_wrap_safe(op)?;
    }
    let mut parts = Vec::new();
    for (a, b) in indices {
        let mut d = op.clone();
        for _ in 0..a + base.0 {
            d = quantum_gradient_x(&d);
        }
        for _ in 0..b + base.1 {
            d = quantum_gradient_xi_unchecked(&d);
        }
        parts.push(weighted_schatten_norm(&d, p, n));
    }
    Ok(lp_sum(parts.into_iter(), p, 1.0))
}

/// `rho(x_i) = h^d K_ii`.
pub fn spatial_density(op: &DensityOperator) -> Vec<f64> {
    let h = op.grid.h_d();
    op.kernel.diagonal().iter().map(|v| v.re * h).collect()
}

/// Positive square root through the Hermitian eigendecomposition.
///
/// Eigenvalues in `[-SQRT_CLAMP * ||op||, 0)` are clamped to zero; anything
/// lower is reported as [`Error::NotPositive`].
pub fn operator_sqrt(op: &DensityOperator) -> Result<DensityOperator> {
    op.ensure_hermitian()?;
    let (vals, vecs) = op.eigen();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if lo < -SQRT_CLAMP * scale {
        return Err(Error::NotPositive { value: lo, tolerance: SQRT_CLAMP, scale });
    }
    let roots = vals.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    let mut scaled = vecs.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r.re);
    }
    let m = &scaled * vecs.adjoint();
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut out = DensityOperator::from_matrix(op.grid, m);
    out.hermitian = true;
    out.positive = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseGrid;
    use crate::profile::Profile;
    use crate::quantize::{coherent_state, weyl_quantize, wigner_transform};
    use std::f64::consts::PI;

    fn square(n: usize) -> PhaseGrid {
        PhaseGrid::line(n, 2.0 * PI, 2.0 * PI).unwrap()
    }

    fn bump(g: &PhaseGrid, sx: f64, sxi: f64) -> PhaseField {
        let p = Profile::Gaussian { amp: 1.0, x0: PI, xi0: 0.2, sigma_x: sx, sigma_xi: sxi };
        PhaseField::from_fn(*g, |x, xi| p.eval(g, x, xi))
    }

    fn max_diff(a: &PhaseField, b: &PhaseField) -> f64 {
        a.values.iter().zip(b.values.iter()).fold(0.0, |m, (u, v)| m.max((u - v).norm()))
    }

    #[test]
    fn constant_lebesgue_norms() {
        let g = square(16);
        let f = PhaseField::constant(g, -3.0);
        let vol = g.lx() * g.lxi();
        for p in [1.0, 2.0, 3.5] {
            assert!((lebesgue_norm(&f, p) - 3.0 * vol.powf(1.0 / p)).abs() < 1e-10);
        }
        assert_eq!(lebesgue_norm(&f, f64::INFINITY), 3.0);
    }

    #[test]
    fn mixed_two_two_is_l2() {
        let g = square(32);
        let f = bump(&g, 0.8, 0.5);
        assert!((mixed_norm(&f, 2.0, 2.0) - lebesgue_norm(&f, 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_h1_norm_matches_closed_form() {
        let g = square(64);
        let (sx, sxi) = (0.7, 0.5);
        let f = bump(&g, sx, sxi);
        let l2sq = (PI * sx * sx / 2.0).sqrt() * (PI * sxi * sxi / 2.0).sqrt();
        let want = (l2sq * (1.0 + 1.0 / (sx * sx) + 1.0 / (sxi * sxi))).sqrt();
        let got = weighted_sobolev_norm(&f, 1, 2.0, 0.0);
        assert!((got - want).abs() / want < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn lorentz_indicator_and_diagonal() {
        let dx = 0.1;
        let ind: Vec<f64> = (0..50).map(|i| if i < 17 { 1.0 } else { 0.0 }).collect();
        let m = 17.0 * dx;
        for p in [1.5, 3.0] {
            assert!((lorentz_norm(&ind, p, f64::INFINITY, dx) - m.powf(1.0 / p)).abs() < 1e-12);
        }
        let f: Vec<f64> = (0..64).map(|i| ((i * 37 % 64) as f64 / 10.0).sin()).collect();
        for p in [1.0, 2.0, 3.0] {
            let lp = spatial_norm(&f, p, dx);
            assert!((lorentz_norm(&f, p, p, dx) - lp).abs() / lp < 0.02);
        }
        let a = lorentz_norm(&f, 3.0, 1.0, dx);
        let b = lorentz_norm(&f.iter().map(|v| -2.5 * v).collect::<Vec<_>>(), 3.0, 1.0, dx);
        assert!((b - 2.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn schatten_of_coherent_projector_and_isometry() {
        let g = square(32);
        let op = coherent_state(2.0, 0.5, &g).unwrap().projector();
        assert!((schatten_norm(&op, 1.0) - 1.0).abs() < 1e-10);
        let f = bump(&g, 0.8, 0.5);
        let opf = weyl_quantize(&f);
        assert!((schatten_norm(&opf, 2.0) - lebesgue_norm(&f, 2.0)).abs() < 1e-10);
        let sv = opf.singular_values();
        let direct = (g.h() * sv.iter().map(|s| s * s).sum::<f64>()).sqrt();
        assert!((direct - schatten_norm(&opf, 2.0)).abs() < 1e-10);
    }

    #[test]
    fn gradients_intertwine_with_wigner() {
        let g = square(64);
        let f = bump(&g, 0.8, 0.5);
        let op = weyl_quantize(&f);
        let gx = wigner_transform(&quantum_gradient_x(&op));
        assert!(max_diff(&gx, &f.d_dx()) < 1e-9);
        let gxi = wigner_transform(&quantum_gradient_xi(&op).unwrap());
        assert!(max_diff(&gxi, &f.d_dxi()) < 1e-9, "{}", max_diff(&gxi, &f.d_dxi()));
    }

    #[test]
    fn gradient_trivial_cases() {
        let g = square(32);
        let phi: Vec<f64> = (0..32).map(|i| (g.x(i)).cos()).collect();
        let mult = DensityOperator::multiplication(g, &phi);
        assert!(quantum_gradient_xi(&mult).unwrap().max_abs() < 1e-14);
        let p = DensityOperator::fourier_multiplier(g, |p| C64::new(p, 0.0));
        assert!(quantum_gradient_x(&p).max_abs() < 1e-10 * p.max_abs());
        assert!(matches!(quantum_gradient_xi(&p), Err(Error::WrapAmbiguity { .. })));
    }

    #[test]
    fn momentum_weight_examples() {
        let g = square(16);
        let id = DensityOperator::identity(g);
        let w = momentum_weight_apply(&id, 2.0, Side::Both);
        let want = DensityOperator::fourier_multiplier(g, |p| C64::new(1.0 + p * p, 0.0));
        let d = (&w.kernel - &want.kernel).camax();
        assert!(d < 1e-10 * want.max_abs());
        let f = bump(&square(32), 0.8, 0.5);
        let op = weyl_quantize(&f.map_with_coords(|x, _, v| v * C64::new(1.0, x.sin())));
        let a = schatten_norm(&momentum_weight_apply(&op, 2.0, Side::Right), 2.0);
        let b = schatten_norm(&momentum_weight_apply(&op.adjoint(), 2.0, Side::Left), 2.0);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn quantum_sobolev_matches_classical_h_k() {
        let g = square(64);
        let f = bump(&g, 0.8, 0.5);
        let op = weyl_quantize(&f);
        for k in 0..=2 {
            let q = quantum_sobolev_norm(&op, k, 2.0, 0.0).unwrap();
            let c = weighted_sobolev_norm(&f, k, 2.0, 0.0);
            assert!((q - c).abs() / c < 1e-8, "k={k}: {q} vs {c}");
        }
        assert_eq!(quantum_sobolev_norm(&DensityOperator::zeros(g), 2, 2.0, 3.0).unwrap(), 0.0);
        let s = schatten_norm(&op, 2.5);
        assert!((quantum_sobolev_norm(&op, 0, 2.5, 0.0).unwrap() - s).abs() < 1e-12 * s);
    }

    #[test]
    fn spatial_density_examples() {
        let g = square(32);
        let psi = coherent_state(2.0, 0.5, &g).unwrap();
        let rho = spatial_density(&psi.projector());
        for (r, v) in rho.iter().zip(&psi.values) {
            assert!((r - v.norm_sqr()).abs() < 1e-12);
        }
        assert!((rho.iter().sum::<f64>() * g.dx() - 1.0).abs() < 1e-10);
        let flat = spatial_density(&weyl_quantize(&PhaseField::constant(g, 1.0)));
        assert!(flat.iter().all(|v| (v - g.lxi()).abs() < 1e-10));
        let a = weyl_quantize(&bump(&g, 0.8, 0.5));
        let b = psi.projector();
        let sum = spatial_density(&a.add(&b).unwrap());
        let ra = spatial_density(&a);
        for i in 0..32 {
            assert!((sum[i] - ra[i] - rho[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn square_root_examples() {
        let g = square(16);
        let c = DensityOperator::identity(g).scale(4.0);
        let r = operator_sqrt(&c).unwrap();
        assert!((&r.kernel - &DensityOperator::identity(g).scale(2.0).kernel).camax() < 1e-12 * c.max_abs());
        let psi = coherent_state(2.0, 0.5, &square(32)).unwrap();
        let op = psi.projector().add(&weyl_quantize(&bump(&square(32), 0.8, 0.5)).scale(0.0)).unwrap();
        let s = operator_sqrt(&op).unwrap();
        let back = s.compose(&s).unwrap();
        let err = schatten_norm(&back.sub(&op).unwrap(), 2.0) / schatten_norm(&op, 2.0);
        assert!(err < 1e-9, "{err}");
        let neg = DensityOperator::identity(g).sub(&DensityOperator::identity(g).scale(0.0)).unwrap();
        let mut k = neg.kernel.clone();
        k[(3, 3)] = C64::new(-0.1 / g.dx(), 0.0);
        let bad = DensityOperator::new(g, k);
        assert!(matches!(operator_sqrt(&bad), Err(Error::NotPositive { .. })));
    }
}
