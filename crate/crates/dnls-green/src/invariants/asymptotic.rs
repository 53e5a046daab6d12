use rayon::prelude::*;
use serde::Serialize;

use super::{a_from_density, conserved_polynomials, rho_density};
use crate::error::{Error, Result};
use crate::greens::greens;
use crate::grid::{sup_norm, I};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticRow {
    pub tau: f64,
    /// |A - partial sum| after one, two and three terms
    pub rem1: f64,
    pub rem2: f64,
    pub rem3: f64,
    /// sup-norm remainder of the two-term gamma expansion with the sign of the
    /// fourth-order term as it must be for the quadratic identity to hold
    pub gamma_rem: f64,
    /// same with the opposite sign on the fourth-order term
    pub gamma_rem_flipped: f64,
    /// sup-norm remainders of the three-term expansions of -h21 and -h12
    pub h21_rem: f64,
    pub h12_rem: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticTable {
    pub rows: Vec<AsymptoticRow>,
    pub slope_rem1: f64,
    pub slope_rem2: f64,
    pub slope_rem3: f64,
    pub slope_gamma: f64,
    pub slope_gamma_flipped: f64,
    pub slope_h21: f64,
    pub slope_h12: f64,
}

/// Least-squares slope of log y against log x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn row(pair: &FieldPair, tau: f64) -> Result<AsymptoticRow> {
    let sp = SpectralParameter::new(tau)?;
    let grid = pair.grid();
    let cs = conserved_polynomials(pair);
    let dg = greens(pair, sp)?;
    let a = a_from_density(&rho_density(&dg, pair)?);
    let t1 = -0.5 * I * cs.m;
    let t2 = cs.h_dnls / (4.0 * tau);
    let t3 = I * cs.e_dnls / (8.0 * tau * tau);

    let (q, r) = (pair.q(), pair.r());
    let dq = grid.derivative(q);
    let dr = grid.derivative(r);
    let ddq = grid.second_derivative(q);
    let ddr = grid.second_derivative(r);
    let k2 = sp.kappa2();
    let k4 = k2 * k2;
    let e = 1.0 / (2.0 * tau);
    let n = grid.len();
    let mut gr = Vec::with_capacity(n);
    let mut grf = Vec::with_capacity(n);
    let mut r21 = Vec::with_capacity(n);
    let mut r12 = Vec::with_capacity(n);
    for j in 0..n {
        let (qj, rj) = (q[j], r[j]);
        let lead = qj * rj / (2.0 * k2);
        let next = (I * dq[j] * rj - I * qj * dr[j] + 1.5 * qj * qj * rj * rj) / (4.0 * k4);
        gr.push(dg.gamma()[j] - lead - next);
        grf.push(dg.gamma()[j] - lead + next);
        let m21 = -0.5 * I * rj
            + e * (-0.5 * I * dr[j] + 0.5 * qj * rj * rj)
            + e * e
                * (-0.5 * I * ddr[j] + 1.5 * qj * rj * dr[j] + 0.75 * I * qj * qj * rj * rj * rj);
        let m12 = -0.5 * I * qj
            + e * (0.5 * I * dq[j] + 0.5 * qj * qj * rj)
            + e * e
                * (-0.5 * I * ddq[j] - 1.5 * qj * dq[j] * rj + 0.75 * I * qj * qj * qj * rj * rj);
        r21.push(-dg.h21()[j] - m21);
        r12.push(-dg.h12()[j] - m12);
    }
    Ok(AsymptoticRow {
        tau,
        rem1: (a - t1).norm(),
        rem2: (a - t1 - t2).norm(),
        rem3: (a - t1 - t2 - t3).norm(),
        gamma_rem: sup_norm(&gr),
        gamma_rem_flipped: sup_norm(&grf),
        h21_rem: sup_norm(&r21),
        h12_rem: sup_norm(&r12),
    })
}

pub fn asymptotic_compare(pair: &FieldPair, taus: &[f64]) -> Result<AsymptoticTable> {
    if taus.len() < 2 || taus.windows(2).any(|w| w[1] <= w[0]) || taus.iter().any(|t| t.abs() < 4.0)
    {
        return Err(Error::Invalid(
            "tau list must be increasing with |tau| >= 4".into(),
        ));
    }
    let rows = taus
        .par_iter()
        .map(|t| row(pair, *t))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = taus.iter().map(|t| t.abs()).collect();
    let slope =
        |f: fn(&AsymptoticRow) -> f64| fit_slope(&x, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(AsymptoticTable {
        slope_rem1: slope(|r| r.rem1),
        slope_rem2: slope(|r| r.rem2),
        slope_rem3: slope(|r| r.rem3),
        slope_gamma: slope(|r| r.gamma_rem),
        slope_gamma_flipped: slope(|r| r.gamma_rem_flipped),
        slope_h21: slope(|r| r.h21_rem),
        slope_h12: slope(|r| r.h12_rem),
        rows,
    })
}

impl AsymptoticTable {
    /// Rows tau, |rem1|, |rem2|, |rem3|, pointwise remainders; last row holds the slopes.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "tau,rem1,rem2,rem3,gamma_rem,gamma_rem_flipped,h21_rem,h12_rem"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.tau,
                r.rem1,
                r.rem2,
                r.rem3,
                r.gamma_rem,
                r.gamma_rem_flipped,
                r.h21_rem,
                r.h12_rem
            )?;
        }
        writeln!(
            out,
            "slope,{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.slope_rem1,
            self.slope_rem2,
            self.slope_rem3,
            self.slope_gamma,
            self.slope_gamma_flipped,
            self.slope_h21,
            self.slope_h12
        )
    }
}
