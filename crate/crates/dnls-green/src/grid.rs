//! Periodic grid on [-L, L), FFT-backed fields and Fourier multipliers.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub struct Grid {
    half_length: f64,
    n: usize,
    h: f64,
    xi: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Arc<Grid>> {
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(Error::BadHalfLength(half_length));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        // FFT ordering: 0, 1, .., N/2-1, -N/2, .., -1
        let xi = (0..n)
            .map(|k| {
                let k = if k < n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                PI * k / half_length
            })
            .collect();
        Ok(Arc::new(Grid {
            half_length,
            n,
            h: 2.0 * half_length / n as f64,
            xi,
            fwd,
            inv,
        }))
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.h
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Frequencies in FFT order.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Frequencies sorted from -N/2 to N/2-1.
    pub fn frequencies(&self) -> Vec<f64> {
        let m = self.n / 2;
        (0..self.n)
            .map(|k| PI * (k as f64 - m as f64) / self.half_length)
            .collect()
    }

    pub fn max_frequency(&self) -> f64 {
        PI * (self.n / 2) as f64 / self.half_length
    }

    fn nyquist(&self) -> usize {
        self.n / 2
    }

    pub fn fft(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.fwd.process(&mut buf);
        buf
    }

    pub fn ifft(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.inv.process(&mut buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|v| *v *= s);
        buf
    }

    /// Symbol of the first derivative, with the Nyquist mode zeroed.
    pub fn derivative_symbol(&self, k: usize) -> C64 {
        if k == self.nyquist() {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.0, self.xi[k])
        }
    }

    pub fn apply_multiplier<F: Fn(usize) -> C64>(&self, f: &[C64], m: F) -> Vec<C64> {
        let mut s = self.fft(f);
        for (k, v) in s.iter_mut().enumerate() {
            *v *= m(k);
        }
        self.ifft(&s)
    }

    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        self.apply_multiplier(f, |k| self.derivative_symbol(k))
    }

    pub fn second_derivative(&self, f: &[C64]) -> Vec<C64> {
        self.apply_multiplier(f, |k| {
            let d = self.derivative_symbol(k);
            d * d
        })
    }

    /// (c + d/dx)^{-1} as the multiplier 1/(c + i xi).
    pub fn resolvent(&self, f: &[C64], c: f64) -> Result<Vec<C64>> {
        if c == 0.0 {
            return Err(Error::SingularResolvent);
        }
        Ok(self.apply_multiplier(f, |k| 1.0 / (c + self.derivative_symbol(k))))
    }

    pub(crate) fn res(&self, f: &[C64], c: f64) -> Vec<C64> {
        debug_assert!(c != 0.0);
        self.apply_multiplier(f, |k| 1.0 / (c + self.derivative_symbol(k)))
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() * self.h
    }

    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter().zip(g).map(|(a, b)| a.conj() * b).sum::<C64>() * self.h
    }

    pub fn l2_norm(&self, f: &[C64]) -> f64 {
        (f.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.h).sqrt()
    }

    pub fn l1_norm(&self, f: &[C64]) -> f64 {
        f.iter().map(|v| v.norm()).sum::<f64>() * self.h
    }

    /// ||f||_{H^sigma_kappa} with weight (4 tau^2 + xi^2)^sigma.
    pub fn sobolev_norm(&self, f: &[C64], sigma: f64, tau: f64) -> f64 {
        let s = self.fft(f);
        let w0 = 4.0 * tau * tau;
        let sum: f64 = s
            .iter()
            .zip(&self.xi)
            .map(|(v, xi)| (w0 + xi * xi).powf(sigma) * v.norm_sqr())
            .sum();
        (sum * self.h / self.n as f64).sqrt()
    }

    /// Band-limited resampling onto another grid with the same half length.
    pub fn resample(&self, f: &[C64], target: &Grid) -> Result<Vec<C64>> {
        if target.half_length != self.half_length {
            return Err(Error::GridMismatch);
        }
        let s = self.fft(f);
        let m = target.n;
        let mut t = vec![C64::new(0.0, 0.0); m];
        let keep = self.n.min(m) / 2;
        for k in 0..keep {
            t[k] = s[k];
            if k > 0 {
                t[m - k] = s[self.n - k];
            }
        }
        let scale = m as f64 / self.n as f64;
        t.iter_mut().for_each(|v| *v *= scale);
        Ok(target.ifft(&t))
    }
}

pub fn sup_norm(f: &[C64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.norm()))
}

pub fn sup_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<C64>,
    spectrum: OnceLock<Vec<C64>>,
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match grid");
        ComplexField {
            grid,
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self::new(grid, vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_fn<F: Fn(f64) -> C64>(grid: Arc<Grid>, f: F) -> Self {
        let v = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self::new(grid, v)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn spectrum(&self) -> &[C64] {
        self.spectrum.get_or_init(|| self.grid.fft(&self.values))
    }

    fn with(&self, values: Vec<C64>) -> Self {
        ComplexField::new(self.grid.clone(), values)
    }

    fn same_grid(&self, other: &ComplexField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn derivative(&self) -> Self {
        let s: Vec<C64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.derivative_symbol(k))
            .collect();
        self.with(self.grid.ifft(&s))
    }

    pub fn resolvent(&self, c: f64) -> Result<Self> {
        if c == 0.0 {
            return Err(Error::SingularResolvent);
        }
        let s: Vec<C64> = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(k, v)| v / (c + self.grid.derivative_symbol(k)))
            .collect();
        Ok(self.with(self.grid.ifft(&s)))
    }

    pub fn sobolev_norm(&self, sigma: f64, tau: f64) -> f64 {
        let w0 = 4.0 * tau * tau;
        let sum: f64 = self
            .spectrum()
            .iter()
            .zip(self.grid.xi())
            .map(|(v, xi)| (w0 + xi * xi).powf(sigma) * v.norm_sqr())
            .sum();
        (sum * self.grid.h() / self.grid.len() as f64).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.l2_norm(&self.values)
    }

    pub fn inner(&self, other: &ComplexField) -> Result<C64> {
        self.same_grid(other)?;
        Ok(self.grid.inner(&self.values, &other.values))
    }

    pub fn integral(&self) -> C64 {
        self.grid.integrate(&self.values)
    }

    pub fn sup(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn conj(&self) -> Self {
        self.with(self.values.iter().map(|v| v.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.with(self.values.iter().map(|v| v * s).collect())
    }

    pub fn resample(&self, target: &Arc<Grid>) -> Result<Self> {
        Ok(ComplexField::new(
            target.clone(),
            self.grid.resample(&self.values, target)?,
        ))
    }

    /// Largest magnitude at the two ends of the box.
    pub fn tail(&self) -> f64 {
        let n = self.values.len();
        self.values[0].norm().max(self.values[n - 1].norm())
    }
}
