//! Uniform periodic grids with Fourier differentiation, Helmholtz inversion,
//! band-limited interpolation and trapezoidal quadrature.
//!
//! Conventions:
//! - points are `x_j = j L / n`, `j = 0..n`;
//! - odd derivatives drop the Nyquist mode, even derivatives keep it with
//!   wavenumber `n/2`, so `helmholtz` and `helmholtz_inv` are exact inverses
//!   on every representable mode;
//! - products used by the nonlinear terms are truncated with the 2/3 rule
//!   (modes with `3|k| >= n` are zeroed), which keeps cubic integrals exact.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

fn fft_inverse(buf: &mut [Complex64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

/// Uniform periodic 1D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        Ok(Self { n, length })
    }

    /// Grid on the circle of circumference 2π.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Fundamental wavenumber 2π/L.
    pub fn kappa(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Integer mode number of FFT slot `j` in the symmetric range; the
    /// Nyquist slot reports `+n/2`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// True when mode `k` survives 2/3-rule truncation.
    pub fn is_resolved(&self, k: i64) -> bool {
        3 * k.unsigned_abs() < self.n as u64
    }

    /// Reduce `x` into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.length)
    }
}

/// Real samples of a periodic function on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("periodic field"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n);
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid1D, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|j| f(grid.point(j))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.n] }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Unnormalized forward DFT.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(&mut buf);
        buf
    }

    /// Inverse of [`spectrum`](Self::spectrum); keeps the real part.
    pub fn from_spectrum(grid: Grid1D, mut spec: Vec<Complex64>) -> Self {
        fft_inverse(&mut spec);
        let scale = 1.0 / grid.n as f64;
        Self::from_raw(grid, spec.iter().map(|c| c.re * scale).collect())
    }

    fn apply_symbol(&self, symbol: impl Fn(usize, f64) -> Complex64) -> Self {
        let mut spec = self.spectrum();
        let kappa = self.grid.kappa();
        for (j, c) in spec.iter_mut().enumerate() {
            *c *= symbol(j, self.grid.mode(j) as f64 * kappa);
        }
        Self::from_spectrum(self.grid, spec)
    }

    /// Spectral derivative of order 1, 2 or 3.
    pub fn deriv(&self, order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("derivative input"));
        }
        Ok(self.diff(order))
    }

    pub(crate) fn diff(&self, order: u32) -> Self {
        debug_assert!((1..=3).contains(&order));
        let grid = self.grid;
        self.apply_symbol(|j, k| {
            if order % 2 == 1 && grid.is_nyquist(j) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order)
            }
        })
    }

    /// The forward Helmholtz operator `(1 - α² ∂xx) f`.
    pub fn helmholtz(&self, alpha: f64) -> Self {
        let a2 = alpha * alpha;
        self.apply_symbol(|_, k| Complex64::new(1.0 + a2 * k * k, 0.0))
    }

    /// Solve `(1 - α² ∂xx) u = f` mode by mode.
    pub fn helmholtz_inv(&self, alpha: f64) -> Self {
        let a2 = alpha * alpha;
        self.apply_symbol(|_, k| Complex64::new(1.0 / (1.0 + a2 * k * k), 0.0))
    }

    /// 2/3-rule truncation.
    pub fn dealias(&self) -> Self {
        let grid = self.grid;
        self.apply_symbol(|j, _| {
            if grid.is_resolved(grid.mode(j)) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Pointwise product followed by 2/3-rule truncation.
    pub fn mul_dealiased(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b).dealias()
    }

    /// Trapezoidal quadrature `L/n Σ f_j`, exact for band-limited data.
    pub fn integrate(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    /// Quadrature of `|f|`.
    pub fn integrate_abs(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::new(self)
    }

    /// Band-limited interpolation at arbitrary points (reduced mod L).
    pub fn interp(&self, points: &[f64]) -> Vec<f64> {
        let it = self.interpolant();
        points.iter().map(|&x| it.eval(x)).collect()
    }
}

macro_rules! field_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&PeriodicField> for &PeriodicField {
            type Output = PeriodicField;
            fn $method(self, rhs: &PeriodicField) -> PeriodicField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl $trait<PeriodicField> for PeriodicField {
            type Output = PeriodicField;
            fn $method(self, rhs: PeriodicField) -> PeriodicField {
                (&self).$method(&rhs)
            }
        }
    };
}

field_binop!(Add, add, +);
field_binop!(Sub, sub, -);

impl Mul<f64> for &PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        self.scale(rhs)
    }
}

impl Mul<f64> for PeriodicField {
    type Output = PeriodicField;
    fn mul(self, rhs: f64) -> PeriodicField {
        self.scale(rhs)
    }
}

impl Neg for &PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.scale(-1.0)
    }
}

impl Neg for PeriodicField {
    type Output = PeriodicField;
    fn neg(self) -> PeriodicField {
        self.scale(-1.0)
    }
}

/// Trigonometric interpolant of a sampled field, evaluable anywhere.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    kappa: f64,
    /// Normalized coefficients for modes `0..=n/2`.
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(f: &PeriodicField) -> Self {
        let n = f.grid.n;
        let scale = 1.0 / n as f64;
        let spec = f.spectrum();
        Self::from_half_spectrum(
            f.grid.kappa(),
            spec[..=n / 2].iter().map(|c| c * scale).collect(),
        )
    }

    /// Build from normalized coefficients of modes `0..=n/2`.
    pub(crate) fn from_half_spectrum(kappa: f64, coeffs: Vec<Complex64>) -> Self {
        Self { kappa, coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    /// Value and first derivative (Nyquist mode excluded from the latter).
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let last = self.coeffs.len() - 1;
        let z = Complex64::from_polar(1.0, self.kappa * x);
        let mut zk = Complex64::new(1.0, 0.0);
        let mut value = self.coeffs[0].re;
        let mut slope = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            // Refresh the rotation periodically to bound recurrence drift.
            zk = if k % 64 == 0 {
                Complex64::from_polar(1.0, self.kappa * x * k as f64)
            } else {
                zk * z
            };
            let term = c * zk;
            if k == last {
                value += term.re;
            } else {
                value += 2.0 * term.re;
                slope -= 2.0 * self.kappa * k as f64 * term.im;
            }
        }
        (value, slope)
    }
}

/// Uniform periodic 2D grid (x fastest in storage).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }
}

/// Real samples on a [`Grid2D`], stored row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Field2D {
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.x.n * grid.y.n);
        for iy in 0..grid.y.n {
            for ix in 0..grid.x.n {
                values.push(f(grid.x.point(ix), grid.y.point(iy)));
            }
        }
        Self { grid, values }
    }

    /// Extend a 1D field constantly along `y`.
    pub fn extend_in_y(f: &PeriodicField, y: Grid1D) -> Self {
        let grid = Grid2D::new(f.grid, y);
        let mut values = Vec::with_capacity(f.grid.n * y.n);
        for _ in 0..y.n {
            values.extend_from_slice(&f.values);
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, iy: usize) -> PeriodicField {
        let nx = self.grid.x.n;
        PeriodicField::from_raw(self.grid.x, self.values[iy * nx..(iy + 1) * nx].to_vec())
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.x.n, self.grid.y.n);
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in buf.chunks_mut(nx) {
            fft_forward(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for ix in 0..nx {
            for iy in 0..ny {
                col[iy] = buf[iy * nx + ix];
            }
            fft_forward(&mut col);
            for iy in 0..ny {
                buf[iy * nx + ix] = col[iy];
            }
        }
        buf
    }

    fn from_spectrum(grid: Grid2D, mut buf: Vec<Complex64>) -> Self {
        let (nx, ny) = (grid.x.n, grid.y.n);
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        for ix in 0..nx {
            for iy in 0..ny {
                col[iy] = buf[iy * nx + ix];
            }
            fft_inverse(&mut col);
            for iy in 0..ny {
                buf[iy * nx + ix] = col[iy];
            }
        }
        for row in buf.chunks_mut(nx) {
            fft_inverse(row);
        }
        let scale = 1.0 / (nx * ny) as f64;
        Self { grid, values: buf.iter().map(|c| c.re * scale).collect() }
    }

    fn apply_symbol(&self, symbol: impl Fn(usize, usize) -> Complex64) -> Self {
        let nx = self.grid.x.n;
        let mut spec = self.spectrum();
        for (idx, c) in spec.iter_mut().enumerate() {
            *c *= symbol(idx % nx, idx / nx);
        }
        Self::from_spectrum(self.grid, spec)
    }

    fn axis_symbol(axis: &Grid1D, j: usize, order: u32) -> Complex64 {
        if order % 2 == 1 && axis.is_nyquist(j) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, axis.mode(j) as f64 * axis.kappa()).powu(order)
        }
    }

    pub fn deriv_x(&self, order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        let gx = self.grid.x;
        Ok(self.apply_symbol(|jx, _| Self::axis_symbol(&gx, jx, order)))
    }

    pub fn deriv_y(&self, order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        let gy = self.grid.y;
        Ok(self.apply_symbol(|_, jy| Self::axis_symbol(&gy, jy, order)))
    }

    pub fn dealias(&self) -> Self {
        let g = self.grid;
        self.apply_symbol(|jx, jy| {
            if g.x.is_resolved(g.x.mode(jx)) && g.y.is_resolved(g.y.mode(jy)) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn mul_dealiased(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b).dealias()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn l2_norm(&self) -> f64 {
        let cell = self.grid.x.dx() * self.grid.y.dx();
        (cell * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid1D {
        Grid1D::periodic(n).unwrap()
    }

    fn rel_l2(a: &PeriodicField, b: &PeriodicField) -> f64 {
        (a - b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// Random trigonometric polynomial with modes `1..=kmax`.
    fn random_trig(g: Grid1D, kmax: usize, seed: u64) -> PeriodicField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> = (0..=kmax)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        PeriodicField::from_fn(g, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| a * (k as f64 * x).cos() + b * (k as f64 * x).sin())
                .sum()
        })
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid1D::new(4, 1.0).is_err());
        assert!(Grid1D::new(24, 1.0).is_err());
        assert!(Grid1D::new(32, 0.0).is_err());
        assert!(Grid1D::new(32, 3.0).is_ok());
    }

    #[test]
    fn rejects_wrong_length_and_nonfinite() {
        let g = grid(16);
        assert!(PeriodicField::new(g, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert_eq!(PeriodicField::new(g, v), Err(Error::NonFinite("periodic field")));
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid(64);
        let f = PeriodicField::from_fn(g, f64::sin);
        let df = f.deriv(1).unwrap();
        let exact = PeriodicField::from_fn(g, f64::cos);
        assert!((&df - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = PeriodicField::constant(grid(32), 3.5);
        for order in 1..=3 {
            assert!(f.deriv(order).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn second_derivative_eigenfunction() {
        let g = grid(64);
        let f = PeriodicField::from_fn(g, |x| (3.0 * x).sin());
        let d2 = f.deriv(2).unwrap();
        assert!((&d2 + &f.scale(9.0)).max_abs() < 1e-12);
    }

    #[test]
    fn derivative_order_errors() {
        let f = PeriodicField::constant(grid(16), 1.0);
        assert_eq!(f.deriv(0), Err(Error::InvalidOrder(0)));
        assert_eq!(f.deriv(4), Err(Error::InvalidOrder(4)));
        let bad = PeriodicField::from_raw(grid(16), vec![f64::INFINITY; 16]);
        assert!(bad.deriv(1).is_err());
    }

    #[test]
    fn derivative_on_scaled_domain() {
        let g = Grid1D::new(32, 3.0).unwrap();
        let k = 2.0 * PI / 3.0;
        let f = PeriodicField::from_fn(g, |x| (k * x).sin());
        let df = f.deriv(1).unwrap();
        let exact = PeriodicField::from_fn(g, |x| k * (k * x).cos());
        assert!((&df - &exact).max_abs() < 1e-12);
    }

    #[test]
    fn helmholtz_inverse_of_eigenfunction() {
        let g = grid(64);
        let alpha = 0.5;
        for k in [1.0, 4.0, 11.0] {
            let f = PeriodicField::from_fn(g, |x| (k * x).sin());
            let u = f.helmholtz_inv(alpha);
            let exact = f.scale(1.0 / (1.0 + alpha * alpha * k * k));
            assert!((&u - &exact).max_abs() < 1e-13);
        }
    }

    #[test]
    fn helmholtz_alpha_zero_is_identity() {
        let f = random_trig(grid(64), 20, 1);
        assert!((&f.helmholtz_inv(0.0) - &f).max_abs() < 1e-13);
    }

    #[test]
    fn helmholtz_round_trip_with_nyquist_content() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = PeriodicField::from_fn(g, |_| rng.random_range(-1.0..1.0));
        for alpha in [0.25, 0.5, 1.0, 3.0] {
            let back = f.helmholtz_inv(alpha).helmholtz(alpha);
            assert!(rel_l2(&back, &f) < 1e-12);
        }
    }

    #[test]
    fn interpolation_of_cosine() {
        let f = PeriodicField::from_fn(grid(32), f64::cos);
        let v = f.interp(&[PI / 5.0])[0];
        assert!((v - (PI / 5.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_samples() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = PeriodicField::from_fn(g, |_| rng.random_range(-1.0..1.0));
        let back = f.interp(&g.points());
        for (a, b) in back.iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_at_random_points() {
        let f = PeriodicField::from_fn(grid(64), |x| (2.0 * x).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<f64> = (0..1000).map(|_| rng.random_range(-10.0..10.0)).collect();
        let vals = f.interp(&pts);
        let err = pts
            .iter()
            .zip(&vals)
            .map(|(x, v)| ((2.0 * x).sin() - v).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "max error {err}");
    }

    #[test]
    fn interpolant_derivative_matches_spectral_derivative() {
        let g = grid(128);
        let f = random_trig(g, 30, 5);
        let df = f.deriv(1).unwrap();
        let it = f.interpolant();
        let dit = df.interpolant();
        for x in [0.1, 1.7, 4.4, 6.0] {
            let (_, slope) = it.eval_with_derivative(x);
            assert!((slope - dit.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature() {
        let g = grid(16);
        assert!((PeriodicField::constant(g, 1.5).integrate() - 3.0 * PI).abs() < 1e-13);
        assert!(PeriodicField::from_fn(g, f64::sin).integrate().abs() < 1e-14);
        let s2 = PeriodicField::from_fn(g, |x| x.sin().powi(2)).integrate();
        assert!((s2 - PI).abs() < 1e-12);
    }

    #[test]
    fn dealias_removes_only_unresolved_modes() {
        let g = grid(32);
        let low = PeriodicField::from_fn(g, |x| (10.0 * x).cos());
        assert!((&low.dealias() - &low).max_abs() < 1e-13);
        let high = PeriodicField::from_fn(g, |x| (11.0 * x).cos());
        assert!(high.dealias().max_abs() < 1e-13);
    }

    #[test]
    fn two_dimensional_derivatives() {
        let g = Grid2D::new(grid(32), grid(16));
        let f = Field2D::from_fn(g, |x, y| (2.0 * x).sin() * (3.0 * y).cos());
        let fx = f.deriv_x(1).unwrap();
        let fy = f.deriv_y(2).unwrap();
        let ex = Field2D::from_fn(g, |x, y| 2.0 * (2.0 * x).cos() * (3.0 * y).cos());
        let ey = Field2D::from_fn(g, |x, y| -9.0 * (2.0 * x).sin() * (3.0 * y).cos());
        assert!(fx.sub(&ex).max_abs() < 1e-12);
        assert!(fy.sub(&ey).max_abs() < 1e-12);
    }

    #[test]
    fn y_constant_extension_matches_rows() {
        let f = random_trig(grid(32), 8, 9);
        let f2 = Field2D::extend_in_y(&f, grid(8));
        let d2 = f2.deriv_x(1).unwrap();
        let d1 = f.deriv(1).unwrap();
        for iy in 0..8 {
            assert!((&d2.row(iy) - &d1).max_abs() < 1e-12);
        }
        assert!(f2.deriv_y(1).unwrap().max_abs() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn first_derivative_twice_is_second(seed in 0u64..1000, kmax in 1usize..40) {
            let f = random_trig(grid(128), kmax, seed);
            let twice = f.deriv(1).unwrap().deriv(1).unwrap();
            let d2 = f.deriv(2).unwrap();
            prop_assert!(rel_l2(&twice, &d2) < 1e-11);
        }

        #[test]
        fn derivative_integrates_to_zero(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(64);
            let f = PeriodicField::from_fn(g, |_| rng.random_range(-1.0..1.0));
            let total = f.deriv(1).unwrap().integrate();
            prop_assert!(total.abs() <= 1e-12 * f.l2_norm().max(1.0));
        }

        #[test]
        fn helmholtz_round_trip(seed in 0u64..1000, alpha in 0.0f64..3.0) {
            let f = random_trig(grid(64), 25, seed);
            let back = f.helmholtz_inv(alpha).helmholtz(alpha);
            prop_assert!(rel_l2(&back, &f) < 1e-12);
        }
    }
}
