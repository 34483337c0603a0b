//! FFT plumbing shared by the transforms and solvers.
//!
//! All transforms are unnormalized; callers apply `1/n` where needed.
//! Frequency index `q` in `[0, n)` is read as the signed integer in
//! `[-n/2, n/2)`, so the Nyquist bin is `-n/2`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    planner: FftPlanner<f64>,
    cache: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<Plans>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| {
        Mutex::new(Plans { planner: FftPlanner::new(), cache: HashMap::new() })
    });
    let mut guard = plans.lock().expect("fft plan cache poisoned");
    if let Some(p) = guard.cache.get(&(len, inverse)) {
        return p.clone();
    }
    let p = if inverse {
        guard.planner.plan_fft_inverse(len)
    } else {
        guard.planner.plan_fft_forward(len)
    };
    guard.cache.insert((len, inverse), p.clone());
    p
}

/// In-place forward DFT: `X_q = sum_j x_j e^{-2 pi i q j / n}`.
pub fn forward(buf: &mut [C64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place unnormalized inverse DFT: `x_j = sum_q X_q e^{+2 pi i q j / n}`.
pub fn inverse(buf: &mut [C64]) {
    plan(buf.len(), true).process(buf);
}

/// Signed frequency of bin `idx` for a length-`n` transform.
#[inline]
pub fn signed(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Minimal-image representative of an integer offset, in `[-n/2, n/2)`.
#[inline]
pub fn minimal_image(offset: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = offset.rem_euclid(n);
    if r < n / 2 {
        r
    } else {
        r - n
    }
}

/// Multiplies every Fourier mode of `buf` by `mult(q)` (signed `q`).
pub fn fourier_multiply(buf: &mut [C64], mult: impl Fn(i64) -> C64) {
    let n = buf.len();
    forward(buf);
    for (idx, v) in buf.iter_mut().enumerate() {
        *v *= mult(signed(idx, n)) / n as f64;
    }
    inverse(buf);
}

/// Trigonometric interpolation of periodic samples shifted by `frac` of one
/// sample: output `j` is the interpolant at position `j + frac`.
///
/// The Nyquist mode is passed through unchanged. The map is unitary, keeps
/// real input real, and the shift by `-frac` inverts it exactly.
pub fn fractional_shift(buf: &mut [C64], frac: f64) {
    let n = buf.len();
    let nyquist = -(n as i64) / 2;
    fourier_multiply(buf, |q| {
        if q == nyquist {
            C64::new(1.0, 0.0)
        } else {
            C64::from_polar(1.0, 2.0 * PI * q as f64 * frac / n as f64)
        }
    });
}

/// Spectral derivative of periodic samples over a period `length`.
/// The Nyquist mode is dropped so real data stays real.
pub fn derivative(buf: &mut [C64], length: f64) {
    let n = buf.len();
    fourier_multiply(buf, |q| {
        if q == -(n as i64) / 2 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, 2.0 * PI * q as f64 / length)
        }
    });
}

/// Shifts real periodic samples by `shift` (in units of the period
/// `length`): output is `f(x - shift)`. The Nyquist mode is damped by the
/// cosine of its phase so real input stays real.
pub fn translate_real(buf: &mut [f64], shift: f64, length: f64, scratch: &mut Vec<C64>) {
    let n = buf.len();
    scratch.clear();
    scratch.extend(buf.iter().map(|&v| C64::new(v, 0.0)));
    forward(scratch);
    for (idx, v) in scratch.iter_mut().enumerate() {
        let q = signed(idx, n);
        let phase = -2.0 * PI * q as f64 * shift / length;
        if q == -(n as i64) / 2 {
            *v *= phase.cos() / n as f64;
        } else {
            *v *= C64::from_polar(1.0 / n as f64, phase);
        }
    }
    inverse(scratch);
    for (o, v) in buf.iter_mut().zip(scratch.iter()) {
        *o = v.re;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_shift_round_trip_is_exact() {
        let mut data: Vec<C64> = (0..16).map(|i| C64::new((i as f64).sin(), (i * i) as f64 * 0.01)).collect();
        let orig = data.clone();
        fractional_shift(&mut data, 0.5);
        fractional_shift(&mut data, -0.5);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let n = 32;
        let l = 3.0;
        let mut data: Vec<C64> = (0..n)
            .map(|i| C64::new((2.0 * PI * 3.0 * i as f64 / n as f64).sin(), 0.0))
            .collect();
        derivative(&mut data, l);
        for (i, v) in data.iter().enumerate() {
            let want = 2.0 * PI * 3.0 / l * (2.0 * PI * 3.0 * i as f64 / n as f64).cos();
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_image_range() {
        assert_eq!(minimal_image(5, 8), -3);
        assert_eq!(minimal_image(4, 8), -4);
        assert_eq!(minimal_image(-4, 8), -4);
        assert_eq!(minimal_image(3, 8), 3);
        assert_eq!(minimal_image(-9, 8), -1);
    }
}
