//! Randomized invariants of the transforms, norms and budgets.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wignerlab::calculus::{
    lebesgue_norm, lorentz_norm, quantum_gradient_x, quantum_gradient_xi, schatten_norm, spatial_norm,
};
use wignerlab::estimates::{
    cumulative_integral, powers_stormer_gap, weight_remainder_ratios, GronwallBudget, RandomBumps,
};
use wignerlab::quantize::{husimi_convolve, weyl_quantize, wick_quantize, wigner_transform};
use wignerlab::{DensityOperator, PhaseField, PhaseGrid};

fn grid(n: usize) -> PhaseGrid {
    PhaseGrid::line(n, 2.0 * PI, 2.2 * PI).unwrap()
}

/// Sum of a few low plane waves in both variables.
fn band_limited(g: PhaseGrid, rng: &mut ChaCha8Rng) -> PhaseField {
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (rng.random_range(-1.0..1.0), rng.random_range(-4..=4) as f64, rng.random_range(-4..=4) as f64, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let (lx, lxi) = (g.lx(), g.lxi());
    PhaseField::from_fn(g, |x, xi| {
        modes.iter().map(|(a, kx, kxi, ph)| a * (2.0 * PI * (kx * x / lx + kxi * xi / lxi) + ph).cos()).sum()
    })
}

fn random_positive(g: PhaseGrid, rng: &mut ChaCha8Rng, rank: usize) -> DensityOperator {
    let n = g.n();
    let m = DMatrix::from_fn(n, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mat = &m * m.adjoint() * C64::new(1.0 / (n * rank) as f64, 0.0);
    DensityOperator::from_matrix(g, mat).hermitize().recheck_flags()
}

fn random_hermitian(g: PhaseGrid, rng: &mut ChaCha8Rng) -> DensityOperator {
    let n = g.n();
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    DensityOperator::from_matrix(g, (&m + m.adjoint()) * C64::new(0.5 / n as f64, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn powers_stormer_holds(seed in any::<u64>(), rank in 1usize..12) {
        let g = PhaseGrid::line(16, 2.0 * PI, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_positive(g, &mut rng, rank);
        let b = random_positive(g, &mut rng, rank);
        prop_assert!(powers_stormer_gap(&a, &b).unwrap() >= -1e-12);
    }

    #[test]
    fn schatten_holder(seed in any::<u64>()) {
        let g = PhaseGrid::line(16, 2.0 * PI, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_hermitian(g, &mut rng);
        let b = random_hermitian(g, &mut rng);
        let ab = a.compose(&b).unwrap();
        let tol = 1e-12;
        prop_assert!(schatten_norm(&ab, 1.0) <= schatten_norm(&a, 2.0) * schatten_norm(&b, 2.0) + tol);
        prop_assert!(schatten_norm(&ab, 2.0) <= schatten_norm(&a, f64::INFINITY) * schatten_norm(&b, 2.0) + tol);
        prop_assert!(schatten_norm(&ab, 1.0) <= schatten_norm(&a, f64::INFINITY) * schatten_norm(&b, 1.0) + tol);
        prop_assert!(schatten_norm(&ab, 2.0) <= schatten_norm(&a, 4.0) * schatten_norm(&b, 4.0) + tol);
    }

    #[test]
    fn schatten_triangle(seed in any::<u64>()) {
        let g = PhaseGrid::line(16, 2.0 * PI, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_hermitian(g, &mut rng), random_hermitian(g, &mut rng), random_hermitian(g, &mut rng));
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            let direct = schatten_norm(&a.sub(&c).unwrap(), p);
            let split = schatten_norm(&a.sub(&b).unwrap(), p) + schatten_norm(&b.sub(&c).unwrap(), p);
            prop_assert!(direct <= split + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn weyl_is_isometric_and_trace_exact(seed in any::<u64>(), big in any::<bool>()) {
        let g = grid(if big { 128 } else { 64 });
        let f = band_limited(g, &mut ChaCha8Rng::seed_from_u64(seed));
        let op = weyl_quantize(&f);
        let back = wigner_transform(&op);
        prop_assert!(back.sub(&f).unwrap().max_abs() < 1e-12);
        let l2 = lebesgue_norm(&f, 2.0);
        prop_assert!((schatten_norm(&op, 2.0) - l2).abs() < 1e-10 * l2.max(1.0));
        let trace = g.h() * op.trace().re;
        prop_assert!((trace - f.integral().re).abs() < 1e-10);
        prop_assert!(op.hermitian);
    }

    #[test]
    fn wick_contracts_and_stays_positive(seed in any::<u64>()) {
        let g = grid(64);
        let f = RandomBumps::draw(&mut ChaCha8Rng::seed_from_u64(seed), 3, g.lx(), false).sample(&g).unwrap();
        let op = wick_quantize(&f).unwrap();
        let eig = op.eigenvalues();
        let top = eig.iter().copied().fold(0.0, f64::max);
        prop_assert!(eig.iter().all(|&e| e >= -1e-10 * top));
        for p in [1.0, 2.0, f64::INFINITY] {
            prop_assert!(schatten_norm(&op, p) <= lebesgue_norm(&f, p) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn wick_weyl_gap_is_smoothing_gap(seed in any::<u64>()) {
        let g = grid(64);
        let f = RandomBumps::draw(&mut ChaCha8Rng::seed_from_u64(seed), 3, g.lx(), true).sample(&g).unwrap();
        let smooth = husimi_convolve(&f).unwrap();
        let lhs = schatten_norm(&weyl_quantize(&f).sub(&wick_quantize(&f).unwrap()).unwrap(), 2.0);
        let rhs = lebesgue_norm(&f.sub(&smooth).unwrap(), 2.0);
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn quantum_gradients_match_symbol_derivatives(seed in any::<u64>()) {
        let g = grid(64);
        let f = RandomBumps::draw(&mut ChaCha8Rng::seed_from_u64(seed), 2, g.lx(), true).sample(&g).unwrap();
        let op = weyl_quantize(&f);
        let dx = wigner_transform(&quantum_gradient_x(&op));
        let dxi = wigner_transform(&quantum_gradient_xi(&op).unwrap());
        let scale = f.d_dx().max_abs().max(f.d_dxi().max_abs());
        prop_assert!(dx.sub(&f.d_dx()).unwrap().max_abs() < 1e-9 * scale);
        prop_assert!(dxi.sub(&f.d_dxi()).unwrap().max_abs() < 1e-6 * scale);
    }

    #[test]
    fn weight_remainders_are_bounded(seed in any::<u64>()) {
        let g = grid(64);
        let f = RandomBumps::draw(&mut ChaCha8Rng::seed_from_u64(seed), 3, g.lx(), true).sample(&g).unwrap();
        let (first, second) = weight_remainder_ratios(&f).unwrap();
        prop_assert!(first <= 1.0 + 1e-6);
        prop_assert!(second <= 1.0 + 1e-6);
    }
}

proptest! {
    #[test]
    fn lorentz_diagonal_is_lebesgue(values in prop::collection::vec(-5.0f64..5.0, 1..80), p in 1.0f64..6.0) {
        let dx = 0.1;
        let direct = spatial_norm(&values, p, dx);
        let lorentz = lorentz_norm(&values, p, p, dx);
        prop_assert!((lorentz - direct).abs() <= 0.02 * direct + 1e-300);
    }

    #[test]
    fn lorentz_decreases_in_second_index(values in prop::collection::vec(0.0f64..5.0, 1..80)) {
        let dx = 0.05;
        let a = lorentz_norm(&values, 3.0, 1.0, dx);
        let b = lorentz_norm(&values, 3.0, 3.0, dx);
        let c = lorentz_norm(&values, 3.0, f64::INFINITY, dx);
        prop_assert!(c <= b * (1.0 + 1e-12) + 1e-300);
        prop_assert!(b <= a * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn envelopes_never_decrease(lambda in prop::collection::vec(0.0f64..10.0, 2..40), c in 0.0f64..5.0, init in 0.0f64..3.0) {
        let times: Vec<f64> = (0..lambda.len()).map(|k| 0.05 * k as f64).collect();
        let big = cumulative_integral(&times, &lambda);
        prop_assert!(big.windows(2).all(|w| w[1] >= w[0]));
        let b = GronwallBudget::new(times, lambda).unwrap();
        let env = b.envelope(init, c);
        prop_assert!(env.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((env[0] - init).abs() <= 1e-15 * init.max(1.0));
    }
}
