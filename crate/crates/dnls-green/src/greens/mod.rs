//! Diagonal Green's function triple (gamma, kappa g12, kappa g21) of the Lax operator.

mod dense;
mod jost;

use std::sync::Arc;

use serde::Serialize;

pub use dense::greens_dense_oracle;
pub use jost::greens_jost;

use crate::error::{Error, Result};
use crate::grid::{sup_norm, ComplexField, Grid, C64};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

/// Above this L2 size the fixed point is not trusted.
pub const SMALL_DATA_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    Jost,
    DenseOracle,
    Series,
}

#[derive(Clone, Debug)]
pub struct DiagonalGreens {
    pub sp: SpectralParameter,
    pub gamma: ComplexField,
    pub h12: ComplexField,
    pub h21: ComplexField,
    pub method: Method,
    pub iterations: usize,
    /// sup |gamma' - 2(q h21 - r h12)| when computed by the producing method.
    pub rho_id_residual: f64,
    /// Jost only: Wronskian value and its variation over the grid.
    pub wronskian: Option<(C64, f64)>,
}

impl DiagonalGreens {
    pub fn zero(grid: &Arc<Grid>, sp: SpectralParameter, method: Method) -> Self {
        DiagonalGreens {
            sp,
            gamma: ComplexField::zeros(grid.clone()),
            h12: ComplexField::zeros(grid.clone()),
            h21: ComplexField::zeros(grid.clone()),
            method,
            iterations: 0,
            rho_id_residual: 0.0,
            wronskian: None,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.gamma.grid()
    }

    pub fn gamma(&self) -> &[C64] {
        self.gamma.values()
    }

    pub fn h12(&self) -> &[C64] {
        self.h12.values()
    }

    pub fn h21(&self) -> &[C64] {
        self.h21.values()
    }

    pub fn g12(&self) -> Vec<C64> {
        let k = self.sp.kappa();
        self.h12().iter().map(|v| v / k).collect()
    }

    pub fn g21(&self) -> Vec<C64> {
        let k = self.sp.kappa();
        self.h21().iter().map(|v| v / k).collect()
    }

    /// Same triple read with the other square root of -i tau.
    pub fn with_branch_flipped(&self) -> Self {
        let mut out = self.clone();
        out.sp = self.sp.flipped();
        out
    }

    pub fn resample(&self, target: &Arc<Grid>) -> Result<Self> {
        let mut out = self.clone();
        out.gamma = self.gamma.resample(target)?;
        out.h12 = self.h12.resample(target)?;
        out.h21 = self.h21.resample(target)?;
        Ok(out)
    }

    /// max over the three components of the sup distance.
    pub fn distance(&self, other: &DiagonalGreens) -> f64 {
        let d = |a: &[C64], b: &[C64]| crate::grid::sup_diff(a, b);
        let g12 = d(&self.g12(), &other.g12());
        let g21 = d(&self.g21(), &other.g21());
        d(self.gamma(), other.gamma()).max(g12).max(g21)
    }

    /// Max sup distance of gamma, h12, h21; zero between the two branches.
    pub fn distance_h(&self, other: &DiagonalGreens) -> f64 {
        let d = crate::grid::sup_diff;
        d(self.gamma(), other.gamma())
            .max(d(self.h12(), other.h12()))
            .max(d(self.h21(), other.h21()))
    }

    /// sup |gamma + gamma^2/2 + 2 g12 g21|.
    pub fn quadratic_residual(&self) -> f64 {
        let k2 = self.sp.kappa2();
        self.gamma()
            .iter()
            .zip(self.h12().iter().zip(self.h21()))
            .fold(0.0, |m, (g, (a, b))| {
                m.max((g + g * g / 2.0 + 2.0 * a * b / k2).norm())
            })
    }

    /// Residuals of the three first-order identities, each a sup norm.
    pub fn ode_residuals(&self, pair: &FieldPair) -> [f64; 3] {
        let grid = self.grid();
        let (q, r) = (pair.q(), pair.r());
        let k2 = self.sp.kappa2();
        let tau = self.sp.tau();
        let dg = grid.derivative(self.gamma());
        let d12 = grid.derivative(self.h12());
        let d21 = grid.derivative(self.h21());
        let mut res = [0.0f64; 3];
        for j in 0..grid.len() {
            let g1 = self.gamma()[j] + 1.0;
            let a = dg[j] - 2.0 * (q[j] * self.h21()[j] - r[j] * self.h12()[j]);
            // multiplied through by kappa: h12' = -2 tau h12 - kappa^2 q (gamma + 1)
            let b = d12[j] + 2.0 * tau * self.h12()[j] + k2 * q[j] * g1;
            let c = d21[j] - 2.0 * tau * self.h21()[j] - k2 * r[j] * g1;
            let k = self.sp.kappa().norm();
            res[0] = res[0].max(a.norm());
            res[1] = res[1].max(b.norm() / k);
            res[2] = res[2].max(c.norm() / k);
        }
        res
    }
}

pub(crate) fn rho_id_residual(
    grid: &Grid,
    pair: &FieldPair,
    gamma: &[C64],
    h12: &[C64],
    h21: &[C64],
) -> f64 {
    let dg = grid.derivative(gamma);
    let (q, r) = (pair.q(), pair.r());
    (0..grid.len()).fold(0.0, |m, j| {
        m.max((dg[j] - 2.0 * (q[j] * h21[j] - r[j] * h12[j])).norm())
    })
}

fn check_small(pair: &FieldPair) -> Result<()> {
    let s = pair.size();
    if s > SMALL_DATA_THRESHOLD {
        return Err(Error::SmallData(format!(
            "L2 size {s:.3} exceeds {SMALL_DATA_THRESHOLD}"
        )));
    }
    Ok(())
}

pub fn greens_fixed_point(
    pair: &FieldPair,
    sp: SpectralParameter,
    tol: f64,
    max_iter: usize,
) -> Result<DiagonalGreens> {
    greens_fixed_point_from(pair, sp, tol, max_iter, None)
}

/// Fixed point with an optional warm start (e.g. the previous stage of a flow).
pub fn greens_fixed_point_from(
    pair: &FieldPair,
    sp: SpectralParameter,
    tol: f64,
    max_iter: usize,
    init: Option<&DiagonalGreens>,
) -> Result<DiagonalGreens> {
    check_small(pair)?;
    let grid = pair.grid().clone();
    let n = grid.len();
    let tau = sp.tau();
    let k2 = sp.kappa2();
    let (q, r) = (pair.q(), pair.r());
    let zero = vec![C64::new(0.0, 0.0); n];
    let (mut gamma, mut h12, mut h21) = match init {
        Some(d) if d.grid().len() == n => (d.gamma().to_vec(), d.h12().to_vec(), d.h21().to_vec()),
        _ => (zero.clone(), zero.clone(), zero),
    };
    let mut scale = 0.0f64;
    let mut last_change = f64::INFINITY;
    let mut growth = 0;
    for it in 1..=max_iter {
        let s12: Vec<C64> = (0..n).map(|j| k2 * q[j] * (1.0 + gamma[j])).collect();
        let s21: Vec<C64> = (0..n).map(|j| k2 * r[j] * (1.0 + gamma[j])).collect();
        // -(2 tau + d)^{-1} and -(2 tau - d)^{-1} = (d - 2 tau)^{-1}
        let n12: Vec<C64> = grid.res(&s12, 2.0 * tau).iter().map(|v| -v).collect();
        let n21 = grid.res(&s21, -2.0 * tau);
        let ng: Vec<C64> = (0..n)
            .map(|j| -2.0 * n12[j] * n21[j] / k2 - gamma[j] * gamma[j] / 2.0)
            .collect();
        let change = crate::grid::sup_diff(&n12, &h12)
            .max(crate::grid::sup_diff(&n21, &h21))
            .max(crate::grid::sup_diff(&ng, &gamma));
        h12 = n12;
        h21 = n21;
        gamma = ng;
        let sizes = [
            ("gamma", sup_norm(&gamma)),
            ("kappa g12", sup_norm(&h12)),
            ("kappa g21", sup_norm(&h21)),
        ];
        if it == 1 {
            scale = sizes.iter().fold(1.0f64, |m, s| m.max(s.1));
        }
        for (name, v) in sizes {
            if !v.is_finite() || v > 1e3 * scale {
                return Err(Error::Contraction {
                    field: name,
                    value: v,
                });
            }
        }
        if change <= tol {
            let rho = rho_id_residual(&grid, pair, &gamma, &h12, &h21);
            return Ok(DiagonalGreens {
                sp,
                gamma: ComplexField::new(grid.clone(), gamma),
                h12: ComplexField::new(grid.clone(), h12),
                h21: ComplexField::new(grid.clone(), h21),
                method: Method::FixedPoint,
                iterations: it,
                rho_id_residual: rho,
                wronskian: None,
            });
        }
        if change > last_change && it > 3 {
            growth += 1;
            if growth >= 5 {
                let (name, v) = sizes
                    .iter()
                    .fold(("gamma", 0.0), |a, s| if s.1 > a.1 { *s } else { a });
                return Err(Error::Contraction {
                    field: name,
                    value: v,
                });
            }
        } else {
            growth = 0;
        }
        last_change = change;
    }
    Err(Error::MaxIterations(max_iter))
}

/// Default tolerances for the fixed point used across the crate.
pub fn greens(pair: &FieldPair, sp: SpectralParameter) -> Result<DiagonalGreens> {
    greens_fixed_point(pair, sp, 1e-14, 200)
}

#[derive(Clone, Debug)]
pub struct SeriesTerms {
    pub g12_1: Vec<C64>,
    pub g12_3: Vec<C64>,
    pub g21_1: Vec<C64>,
    pub g21_3: Vec<C64>,
    pub gamma_2: Vec<C64>,
    pub gamma_4: Vec<C64>,
}

pub fn series_terms(pair: &FieldPair, sp: SpectralParameter) -> SeriesTerms {
    let grid = pair.grid();
    let n = grid.len();
    let tau = sp.tau();
    let k = sp.kappa();
    let kq: Vec<C64> = pair.q().iter().map(|v| k * v).collect();
    let kr: Vec<C64> = pair.r().iter().map(|v| k * v).collect();
    // p = (2tau + d)^{-1} kq, s = (2tau - d)^{-1} kr
    let p = grid.res(&kq, 2.0 * tau);
    let s: Vec<C64> = grid.res(&kr, -2.0 * tau).iter().map(|v| -v).collect();
    let g12_1: Vec<C64> = p.iter().map(|v| -v).collect();
    let g21_1: Vec<C64> = s.iter().map(|v| -v).collect();
    let gamma_2: Vec<C64> = (0..n).map(|j| -2.0 * p[j] * s[j]).collect();
    let inner12: Vec<C64> = (0..n).map(|j| kq[j] * s[j] * p[j]).collect();
    let inner21: Vec<C64> = (0..n).map(|j| kr[j] * p[j] * s[j]).collect();
    let g12_3: Vec<C64> = grid
        .res(&inner12, 2.0 * tau)
        .iter()
        .map(|v| 2.0 * v)
        .collect();
    let g21_3: Vec<C64> = grid
        .res(&inner21, -2.0 * tau)
        .iter()
        .map(|v| -2.0 * v)
        .collect();
    let gamma_4 = (0..n)
        .map(|j| p[j] * 2.0 * g21_3[j] + 2.0 * g12_3[j] * s[j] - 2.0 * p[j] * s[j] * p[j] * s[j])
        .collect();
    SeriesTerms {
        g12_1,
        g12_3,
        g21_1,
        g21_3,
        gamma_2,
        gamma_4,
    }
}

#[derive(Clone, Debug)]
pub struct ComboRatio {
    pub ratio12: Vec<C64>,
    pub ratio21: Vec<C64>,
    pub remainder12_geq3: Vec<C64>,
}

/// g12/(2+gamma), g21/(2+gamma) and the cubic-and-higher part of the first.
pub fn combo_ratio(dg: &DiagonalGreens, pair: &FieldPair) -> Result<ComboRatio> {
    let g12 = dg.g12();
    let g21 = dg.g21();
    let series = series_terms(pair, dg.sp);
    let n = g12.len();
    let mut ratio12 = Vec::with_capacity(n);
    let mut ratio21 = Vec::with_capacity(n);
    let mut rem = Vec::with_capacity(n);
    for j in 0..n {
        let gam = dg.gamma()[j];
        let den = 2.0 + gam;
        if den.norm() < 0.5 {
            return Err(Error::SmallData(format!(
                "|2 + gamma| = {:.3} below 0.5",
                den.norm()
            )));
        }
        ratio12.push(g12[j] / den);
        ratio21.push(g21[j] / den);
        rem.push(0.5 * (g12[j] - series.g12_1[j]) - g12[j] * gam / (2.0 * den));
    }
    Ok(ComboRatio {
        ratio12,
        ratio21,
        remainder12_geq3: rem,
    })
}

/// Rows x, Re gamma, Im gamma, Re g12, Im g12, Re g21, Im g21.
pub fn write_triple_csv<W: std::io::Write>(dg: &DiagonalGreens, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,re_gamma,im_gamma,re_g12,im_g12,re_g21,im_g21")?;
    let (g12, g21) = (dg.g12(), dg.g21());
    let grid = dg.grid();
    for j in 0..grid.len() {
        let g = dg.gamma()[j];
        writeln!(
            out,
            "{:.10},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            grid.x(j),
            g.re,
            g.im,
            g12[j].re,
            g12[j].im,
            g21[j].re,
            g21[j].im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{sample_profile, ProfileSpec};

    fn setup(a: f64) -> FieldPair {
        let g = Grid::new(40.0, 1024).unwrap();
        sample_profile(&ProfileSpec::gaussian(a), &g).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_triple() {
        let p = setup(0.0);
        let dg = greens(&p, SpectralParameter::new(4.0).unwrap()).unwrap();
        assert_eq!(sup_norm(dg.gamma()), 0.0);
        assert_eq!(sup_norm(dg.h12()), 0.0);
        assert_eq!(sup_norm(dg.h21()), 0.0);
    }

    #[test]
    fn first_iterate_is_linear_term() {
        let p = setup(0.1);
        let sp = SpectralParameter::new(4.0).unwrap();
        let one = greens_fixed_point(&p, sp, f64::INFINITY, 1).unwrap();
        let s = series_terms(&p, sp);
        assert_eq!(one.iterations, 1);
        assert!(crate::grid::sup_diff(&one.g12(), &s.g12_1) < 1e-16);
        assert!(crate::grid::sup_diff(&one.g21(), &s.g21_1) < 1e-16);
    }

    #[test]
    fn identities_hold_at_fixed_point() {
        let p = setup(0.1);
        for tau in [2.0, -2.0, 8.0, -8.0] {
            let dg = greens(&p, SpectralParameter::new(tau).unwrap()).unwrap();
            assert!(dg.iterations < 20);
            assert!(dg.quadratic_residual() < 1e-14);
            let r = dg.ode_residuals(&p);
            assert!(r.iter().all(|v| *v < 1e-12), "{r:?}");
            assert!(dg.rho_id_residual < 1e-12);
        }
    }

    #[test]
    fn branch_flip_parity() {
        let p = setup(0.1);
        let sp = SpectralParameter::new(4.0).unwrap();
        let a = greens(&p, sp).unwrap();
        let b = greens(&p, sp.flipped()).unwrap();
        assert_eq!(a.gamma(), b.gamma());
        assert_eq!(a.h12(), b.h12());
        let g12a = a.g12();
        let g12b = b.g12();
        assert!(g12a.iter().zip(&g12b).all(|(x, y)| (x + y).norm() < 1e-15));
    }

    #[test]
    fn large_data_rejected() {
        let p = setup(1.0);
        let err = greens(&p, SpectralParameter::new(2.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SmallData(_)));
    }

    #[test]
    fn series_match_quadratic_identity() {
        // gamma^[4] = -gamma2^2/2 - 2(g12_1 g21_3 + g12_3 g21_1)
        let p = setup(0.1);
        let s = series_terms(&p, SpectralParameter::new(-3.0).unwrap());
        for j in 0..1024 {
            let want = -s.gamma_2[j] * s.gamma_2[j] / 2.0
                - 2.0 * (s.g12_1[j] * s.g21_3[j] + s.g12_3[j] * s.g21_1[j]);
            assert!((want - s.gamma_4[j]).norm() < 1e-18);
            assert!((s.gamma_2[j] + 2.0 * s.g12_1[j] * s.g21_1[j]).norm() < 1e-18);
        }
    }

    #[test]
    fn series_converges_in_amplitude() {
        let sp = SpectralParameter::new(4.0).unwrap();
        let mut errs = vec![];
        for a in [0.02, 0.04, 0.08] {
            let p = setup(a);
            let dg = greens(&p, sp).unwrap();
            let s = series_terms(&p, sp);
            let g12 = dg.g12();
            let e = (0..1024).fold(0.0f64, |m, j| {
                m.max((g12[j] - s.g12_1[j] - s.g12_3[j]).norm())
            });
            errs.push(e);
        }
        let slope = (errs[2] / errs[0]).ln() / 4f64.ln();
        assert!((slope - 5.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn combo_ratio_leading_part() {
        let sp = SpectralParameter::new(4.0).unwrap();
        let p = setup(0.0);
        let c = combo_ratio(&greens(&p, sp).unwrap(), &p).unwrap();
        assert_eq!(sup_norm(&c.ratio12), 0.0);
        let mut rems = vec![];
        for a in [0.02, 0.04] {
            let p = setup(a);
            let dg = greens(&p, sp).unwrap();
            let c = combo_ratio(&dg, &p).unwrap();
            let s = series_terms(&p, sp);
            // ratio12 - g12_1/2 is the remainder
            let d = (0..1024).fold(0.0f64, |m, j| {
                m.max((c.ratio12[j] - 0.5 * s.g12_1[j] - c.remainder12_geq3[j]).norm())
            });
            assert!(d < 1e-17);
            rems.push(sup_norm(&c.remainder12_geq3));
        }
        let slope = (rems[1] / rems[0]).log2();
        assert!((slope - 3.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn triple_csv_has_header_and_rows() {
        let p = setup(0.1);
        let dg = greens(&p, SpectralParameter::new(2.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_triple_csv(&dg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1025);
        assert!(text.starts_with("x,re_gamma"));
    }
}
