//! Discretization helpers: a diagonal-norm summation-by-parts first
//! derivative, periodic spectral derivatives and filters, Lagrange
//! interpolation on uniform grids.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

/// Fourth-order interior, second-order boundary SBP first derivative on a
/// uniform grid (the 2-4 diagonal-norm operator).
#[derive(Debug, Clone, Copy)]
pub struct Sbp4 {
    pub n: usize,
    pub h: f64,
}

const NORM: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
const B0: [f64; 4] = [-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0];
const B1: [f64; 4] = [-0.5, 0.0, 0.5, 0.0];
const B2: [f64; 5] = [4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0];
const B3: [f64; 6] = [3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0];
const INTERIOR: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

impl Sbp4 {
    /// Needs at least 8 points.
    pub fn new(n: usize, h: f64) -> Self {
        assert!(n >= 8, "SBP operator needs at least 8 points");
        Self { n, h }
    }

    /// Diagonal norm weight at `i` (without the factor `h`).
    pub fn norm_weight(&self, i: usize) -> f64 {
        if i < 4 {
            NORM[i]
        } else if i >= self.n - 4 {
            NORM[self.n - 1 - i]
        } else {
            1.0
        }
    }

    /// Applies the operator at row `i` to values produced by `f`.
    #[inline]
    pub fn row<T, F>(&self, i: usize, f: F) -> T
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
        F: Fn(usize) -> T,
    {
        let n = self.n;
        let inv = 1.0 / self.h;
        let (start, w, sign): (usize, &[f64], f64) = if i < 4 {
            let w: &[f64] = match i {
                0 => &B0,
                1 => &B1,
                2 => &B2,
                _ => &B3,
            };
            (0, w, 1.0)
        } else if i >= n - 4 {
            let r = n - 1 - i;
            let w: &[f64] = match r {
                0 => &B0,
                1 => &B1,
                2 => &B2,
                _ => &B3,
            };
            // mirrored rows with reversed sign, read right to left
            let mut acc = f(n - 1) * (-w[0] * inv);
            for (k, wk) in w.iter().enumerate().skip(1) {
                if *wk != 0.0 {
                    acc = acc + f(n - 1 - k) * (-wk * inv);
                }
            }
            return acc;
        } else {
            (i - 2, &INTERIOR, 1.0)
        };
        let mut acc = f(start) * (sign * w[0] * inv);
        for (k, wk) in w.iter().enumerate().skip(1) {
            if *wk != 0.0 {
                acc = acc + f(start + k) * (sign * wk * inv);
            }
        }
        acc
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i, |k| v[k])).collect()
    }

    pub fn apply_c(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n).map(|i| self.row(i, |k| v[k])).collect()
    }
}

/// Fourth-order first derivative: centered inside, one-sided near the ends.
/// Needs at least 5 points.
pub fn diff4(n: usize, h: f64, i: usize, f: impl Fn(usize) -> C64) -> C64 {
    const ONE_SIDED: [[f64; 5]; 2] = [[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]];
    let w = 1.0 / (12.0 * h);
    if i < 2 {
        (0..5).map(|k| f(k) * ONE_SIDED[i][k]).sum::<C64>() * w
    } else if i + 2 >= n {
        let r = n - 1 - i;
        -(0..5).map(|k| f(n - 1 - k) * ONE_SIDED[r][k]).sum::<C64>() * w
    } else {
        (f(i - 2) - f(i - 1) * 8.0 + f(i + 1) * 8.0 - f(i + 2)) * w
    }
}

/// Trapezoid rule weights on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Periodic spectral operations on lines of length `n` over `[0, period)`.
#[derive(Clone)]
pub struct Spectral {
    pub n: usize,
    pub period: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral({}, {})", self.n, self.period)
    }
}

impl Spectral {
    pub fn new(n: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, period, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// Signed harmonic index of FFT bin `k`.
    pub fn harmonic(&self, k: usize) -> i64 {
        signed_harmonic(k, self.n)
    }

    /// Bin of signed harmonic `s`, if representable.
    pub fn bin(&self, s: i64) -> Option<usize> {
        let n = self.n as i64;
        if 2 * s.abs() >= n && !(n % 2 == 0 && s == n / 2) {
            return None;
        }
        Some(s.rem_euclid(n) as usize)
    }

    pub fn wavenumber(&self, k: usize) -> f64 {
        wavenumber(k, self.n, self.period)
    }

    /// Normalized Fourier coefficients: `line = sum_k c_k e^{i k x}`.
    pub fn forward(&self, line: &mut [C64]) {
        self.fwd.process(line);
        let s = 1.0 / self.n as f64;
        line.iter_mut().for_each(|x| *x *= s);
    }

    pub fn inverse(&self, line: &mut [C64]) {
        self.inv.process(line);
    }

    /// In-place derivative. The Nyquist bin is dropped.
    pub fn derivative(&self, line: &mut [C64]) {
        if self.n == 1 {
            line[0] = C64::new(0.0, 0.0);
            return;
        }
        self.forward(line);
        for (k, x) in line.iter_mut().enumerate() {
            if self.n.is_multiple_of(2) && k == self.n / 2 {
                *x = C64::new(0.0, 0.0);
            } else {
                *x *= C64::new(0.0, self.wavenumber(k));
            }
        }
        self.inverse(line);
    }

    /// Two-thirds rule: removes harmonics with `|k| > n / 3`.
    pub fn dealias(&self, line: &mut [C64]) {
        if self.n < 3 {
            return;
        }
        self.forward(line);
        let cut = (self.n / 3) as i64;
        for (k, x) in line.iter_mut().enumerate() {
            if self.harmonic(k).abs() > cut || (self.n.is_multiple_of(2) && k == self.n / 2) {
                *x = C64::new(0.0, 0.0);
            }
        }
        self.inverse(line);
    }
}

/// Signed harmonic of FFT bin `k` out of `n`.
pub fn signed_harmonic(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Angular wavenumber of FFT bin `k` out of `n` on a period `period`.
pub fn wavenumber(k: usize, n: usize, period: f64) -> f64 {
    2.0 * std::f64::consts::PI / period * signed_harmonic(k, n) as f64
}

/// Four-point Lagrange weights at `x` on nodes `x0 + i h`, `i < n`.
/// Returns the first node and the weights.
pub fn cubic_weights(x0: f64, h: f64, n: usize, x: f64) -> (usize, [f64; 4]) {
    if n < 4 {
        let i = (((x - x0) / h).round().max(0.0) as usize).min(n - 1);
        let mut w = [0.0; 4];
        w[0] = 1.0;
        return (i, w);
    }
    let s = (x - x0) / h;
    let i0 = ((s.floor() as i64) - 1).clamp(0, n as i64 - 4) as usize;
    let mut w = [0.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        let xa = (i0 + a) as f64;
        let mut p = 1.0;
        for b in 0..4 {
            if b != a {
                let xb = (i0 + b) as f64;
                p *= (s - xb) / (xa - xb);
            }
        }
        *wa = p;
    }
    (i0, w)
}

/// Third-order reflection extension past the end of `f` by `extra` points,
/// blended to zero over `blend` points.
pub fn extend_reflect(f: &[C64], extra: usize, blend: usize) -> Vec<C64> {
    let n = f.len();
    let mut out = f.to_vec();
    let get = |i: i64| if i >= 0 && (i as usize) < n { f[i as usize] } else { C64::new(0.0, 0.0) };
    let last = n as i64 - 1;
    for s in 1..=extra as i64 {
        let v = get(last - s) * 6.0 - get(last - 2 * s) * 8.0 + get(last - 3 * s) * 3.0;
        out.push(v * smooth_cutoff(s as f64 / blend.max(1) as f64));
    }
    out
}

/// Smooth step: 1 for `s <= 0`, 0 for `s >= 1`, infinitely differentiable
/// with all derivatives vanishing at both ends.
pub fn smooth_cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - s)).exp();
        let b = (-1.0 / s).exp();
        a / (a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sbp_exact_for_quadratics() {
        let d = Sbp4::new(20, 0.1);
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let df = d.apply(&f);
        for (i, v) in df.iter().enumerate() {
            assert!((v - (2.0 + 6.0 * x[i])).abs() < 1e-11, "row {i}");
        }
    }

    #[test]
    fn sbp_property() {
        let n = 12;
        let d = Sbp4::new(n, 1.0);
        for i in 0..n {
            for j in 0..n {
                let dij = d.row(i, |k| if k == j { 1.0 } else { 0.0 });
                let dji = d.row(j, |k| if k == i { 1.0 } else { 0.0 });
                let q = d.norm_weight(i) * dij + d.norm_weight(j) * dji;
                let want = if i == 0 && j == 0 {
                    -1.0
                } else if i == n - 1 && j == n - 1 {
                    1.0
                } else {
                    0.0
                };
                assert!((q - want).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let s = Spectral::new(16, 2.0 * std::f64::consts::PI);
        let mut line: Vec<C64> = (0..16).map(|i| C64::new((3.0 * i as f64 * std::f64::consts::PI / 8.0).sin(), 0.0)).collect();
        s.derivative(&mut line);
        for (i, v) in line.iter().enumerate() {
            let want = 3.0 * (3.0 * i as f64 * std::f64::consts::PI / 8.0).cos();
            assert!((v.re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_reproduces_cubics() {
        let f = |x: f64| x * x * x - x;
        let vals: Vec<f64> = (0..10).map(|i| f(0.3 * i as f64)).collect();
        for x in [0.05, 1.0, 2.6, 2.7] {
            let (i0, w) = cubic_weights(0.0, 0.3, 10, x);
            let v: f64 = (0..4).map(|a| w[a] * vals[i0 + a]).sum();
            assert!((v - f(x)).abs() < 1e-12);
        }
    }
}
