//! A(kappa) as a trace series and as a log determinant of the explicit kernel
//! K = (d + tau)^{-1} kappa q (d - tau)^{-1} kappa r.
//!
//! The explicit kernels jump on the diagonal, so the low-order discrete traces
//! carry an O(h) quadrature error. The first two traces are therefore taken in
//! closed form from the series terms and only the m >= 3 tail comes from the
//! matrix.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::series_terms;
use crate::grid::{C64, I};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

const WINDOW_CUTOFF: f64 = 1e-18;
const HOMOTOPY_STEPS: usize = 8;
const MIN_HOMOTOPY_STEP: f64 = 1.0 / 1024.0;

#[derive(Clone, Debug)]
pub struct TraceKernel {
    pub sp: SpectralParameter,
    /// K restricted to the index window where q or r is non-negligible
    pub k: DMatrix<C64>,
    pub window: (usize, usize),
    pub n_full: usize,
    /// closed-form tr K and tr K^2
    pub exact_tr1: C64,
    pub exact_tr2: C64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    Series(usize),
    LogDet,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceResult {
    pub value: C64,
    /// A_m = -sgn(tau) tr K^m / m, m = 1.. (series mode)
    pub terms: Vec<C64>,
    pub spectral_radius: f64,
}

impl TraceResult {
    /// |A_{m+1}| / |A_m| for consecutive terms.
    pub fn ratios(&self) -> Vec<f64> {
        self.terms
            .windows(2)
            .map(|w| w[1].norm() / w[0].norm())
            .collect()
    }
}

/// h e^{-c(x_i - x_j)} on the causal side of the diagonal, half weight on it.
fn free_kernel(xs: &[f64], h: f64, c: f64) -> DMatrix<C64> {
    let n = xs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let v = if c > 0.0 {
            match i.cmp(&j) {
                std::cmp::Ordering::Greater => h * (-c * (xs[i] - xs[j])).exp(),
                std::cmp::Ordering::Equal => 0.5 * h,
                std::cmp::Ordering::Less => 0.0,
            }
        } else {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => -h * (-c * (xs[i] - xs[j])).exp(),
                std::cmp::Ordering::Equal => -0.5 * h,
                std::cmp::Ordering::Greater => 0.0,
            }
        };
        C64::new(v, 0.0)
    })
}

impl TraceKernel {
    pub fn new(pair: &FieldPair, sp: SpectralParameter) -> Result<Self> {
        let grid = pair.grid();
        let n = grid.len();
        let (q, r) = (pair.q(), pair.r());
        let peak = q.iter().chain(r).fold(0.0f64, |m, v| m.max(v.norm()));
        let live = |j: &usize| q[*j].norm().max(r[*j].norm()) > WINDOW_CUTOFF * peak;
        let (lo, hi) = match ((0..n).find(live), (0..n).rev().find(live)) {
            (Some(a), Some(b)) if peak > 0.0 => (a, b + 1),
            _ => (0, 0),
        };
        let tau = sp.tau();
        let k = sp.kappa();
        let xs: Vec<f64> = (lo..hi).map(|j| grid.x(j)).collect();
        let a = free_kernel(&xs, grid.h(), tau);
        let b = free_kernel(&xs, grid.h(), -tau);
        let mut aq = a;
        let mut br = b;
        for (c, j) in (lo..hi).enumerate() {
            aq.column_mut(c).iter_mut().for_each(|v| *v *= k * q[j]);
            br.column_mut(c).iter_mut().for_each(|v| *v *= k * r[j]);
        }
        let kmat = aq * br;

        let series = series_terms(pair, sp);
        let s = sp.sign();
        let a1 = -grid.integrate(
            &(0..n)
                .map(|j| q[j] * k * series.g21_1[j])
                .collect::<Vec<_>>(),
        );
        let a2 = -0.5
            * grid.integrate(
                &(0..n)
                    .map(|j| q[j] * k * series.g21_3[j])
                    .collect::<Vec<_>>(),
            );
        Ok(TraceKernel {
            sp,
            k: kmat,
            window: (lo, hi),
            n_full: n,
            exact_tr1: -s * a1,
            exact_tr2: -2.0 * s * a2,
        })
    }

    pub fn spectral_radius(&self) -> f64 {
        if self.k.nrows() == 0 {
            return 0.0;
        }
        match self.k.clone().try_schur(1e-14, 10_000) {
            Some(schur) => {
                let (_, t) = schur.unpack();
                t.diagonal().iter().fold(0.0f64, |m, v| m.max(v.norm()))
            }
            None => power_iteration(&self.k),
        }
    }

    /// log det(I - theta K) with principal pivot logs.
    fn log_det_principal(&self, theta: f64) -> Result<C64> {
        let n = self.k.nrows();
        let m = DMatrix::<C64>::identity(n, n) - &self.k * C64::new(theta, 0.0);
        let lu = m.lu();
        let u = lu.u();
        let mut sum = C64::new(0.0, 0.0);
        for i in 0..n {
            let p = u[(i, i)];
            if p.norm() == 0.0 {
                return Err(Error::Singular("I - K"));
            }
            sum += p.ln();
        }
        if lu.p().determinant::<f64>() < 0.0 {
            sum += I * std::f64::consts::PI;
        }
        Ok(sum)
    }

    /// log det(I - K) on the branch continued from theta = 0. A step whose
    /// phase jump exceeds pi/2 is halved, down to a minimum step.
    pub fn log_det(&self) -> Result<C64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let unwrap =
            |v: C64, prev: C64| C64::new(v.re, v.im - two_pi * ((v.im - prev.im) / two_pi).round());
        let mut prev = C64::new(0.0, 0.0);
        let mut theta = 0.0;
        let mut step = 1.0 / HOMOTOPY_STEPS as f64;
        while theta < 1.0 {
            let next = (theta + step).min(1.0);
            let v = unwrap(self.log_det_principal(next)?, prev);
            if (v.im - prev.im).abs() > std::f64::consts::FRAC_PI_2 && step > MIN_HOMOTOPY_STEP {
                step *= 0.5;
                continue;
            }
            prev = v;
            theta = next;
        }
        Ok(prev)
    }

    /// Discrete tr K and tr K^2.
    fn low_traces(&self) -> (C64, C64) {
        let t1 = self.k.trace();
        let t2 = self.k.component_mul(&self.k.transpose()).sum();
        (t1, t2)
    }
}

fn power_iteration(k: &DMatrix<C64>) -> f64 {
    let n = k.nrows();
    let mut v = nalgebra::DVector::<C64>::from_element(n, C64::new(1.0, 0.0));
    let mut est = 0.0;
    for _ in 0..500 {
        let w = k * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / v.norm();
        v = w / C64::new(norm, 0.0);
    }
    est
}

pub fn a_trace(kern: &TraceKernel, mode: TraceMode) -> Result<TraceResult> {
    let s = kern.sp.sign();
    let radius = kern.spectral_radius();
    match mode {
        TraceMode::Series(m_max) => {
            if radius >= 1.0 {
                return Err(Error::SeriesRadius(radius));
            }
            let mut terms = Vec::with_capacity(m_max);
            let mut power = kern.k.clone();
            for m in 1..=m_max {
                let tr = match m {
                    1 => kern.exact_tr1,
                    2 => kern.exact_tr2,
                    _ => power.trace(),
                };
                terms.push(-s * tr / m as f64);
                if m < m_max {
                    power = &power * &kern.k;
                }
            }
            Ok(TraceResult {
                value: terms.iter().sum(),
                terms,
                spectral_radius: radius,
            })
        }
        TraceMode::LogDet => {
            let ld = kern.log_det()?;
            let (t1, t2) = kern.low_traces();
            let value = s * (ld + t1 + 0.5 * t2) - s * (kern.exact_tr1 + 0.5 * kern.exact_tr2);
            Ok(TraceResult {
                value,
                terms: Vec::new(),
                spectral_radius: radius,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::invariants::a_kappa;
    use crate::profile::{sample_profile, ProfileSpec};

    fn pair(a: f64) -> FieldPair {
        sample_profile(&ProfileSpec::gaussian(a), &Grid::new(40.0, 1024).unwrap()).unwrap()
    }

    #[test]
    fn zero_data() {
        let k = TraceKernel::new(&pair(0.0), SpectralParameter::new(2.0).unwrap()).unwrap();
        assert_eq!(k.k.nrows(), 0);
        assert_eq!(
            a_trace(&k, TraceMode::LogDet).unwrap().value,
            C64::default()
        );
        assert_eq!(
            a_trace(&k, TraceMode::Series(4)).unwrap().value,
            C64::default()
        );
    }

    #[test]
    fn free_kernel_inverts_derivative() {
        // (d + c) applied to the kernel column by finite differences away from the jump
        let h = 0.01;
        let xs: Vec<f64> = (0..200).map(|j| j as f64 * h).collect();
        let a = free_kernel(&xs, h, 3.0);
        let (i, j) = (120, 50);
        let d = (a[(i + 1, j)] - a[(i - 1, j)]) / (2.0 * h) + 3.0 * a[(i, j)];
        assert!(d.norm() < 1e-4 * h);
    }

    #[test]
    fn density_and_log_det_agree() {
        let p = pair(0.1);
        for tau in [2.0, 8.0, -2.0] {
            let sp = SpectralParameter::new(tau).unwrap();
            let kern = TraceKernel::new(&p, sp).unwrap();
            let ld = a_trace(&kern, TraceMode::LogDet).unwrap().value;
            let dens = a_kappa(&p, sp).unwrap();
            let err = (ld - dens).norm() / dens.norm().max(1e-3);
            assert!(err < 1e-7, "tau {tau}: {err:e}");
        }
    }

    #[test]
    fn series_converges_to_log_det() {
        let p = pair(0.1);
        let kern = TraceKernel::new(&p, SpectralParameter::new(4.0).unwrap()).unwrap();
        let ser = a_trace(&kern, TraceMode::Series(8)).unwrap();
        let ld = a_trace(&kern, TraceMode::LogDet).unwrap();
        assert!((ser.value - ld.value).norm() < 1e-9);
        assert!(ser.ratios().iter().all(|r| *r < 0.1), "{:?}", ser.ratios());
        assert!(ser.spectral_radius < 0.1);
    }

    #[test]
    fn large_data_series_rejected() {
        let p = pair(3.0);
        let kern = TraceKernel::new(&p, SpectralParameter::new(1.0).unwrap()).unwrap();
        if kern.spectral_radius() >= 1.0 {
            assert!(matches!(
                a_trace(&kern, TraceMode::Series(4)),
                Err(Error::SeriesRadius(_))
            ));
        }
    }
}
