//! Dense inverse of the discretized Lax operator.
//!
//! The spectral discretization of (d +- tau)^{-1} has a kernel that jumps on the
//! diagonal, and its discrete diagonal converges only like tau/xi_max. The free
//! resolvents and the first two Born terms carry that jump, so they are
//! subtracted from the inverse before reading the diagonal, and their exact
//! diagonals (the series terms) are added back. Going one order further
//! (third order off the diagonal, fourth in gamma) leaves a remainder whose
//! discretization error sits far below the identities' tolerances.

use nalgebra::DMatrix;

use super::{rho_id_residual, series_terms, DiagonalGreens, Method};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, C64};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

pub(crate) fn circulant(grid: &Grid, symbol: impl Fn(usize) -> C64) -> DMatrix<C64> {
    let n = grid.len();
    let s: Vec<C64> = (0..n).map(symbol).collect();
    let c = grid.ifft(&s);
    DMatrix::from_fn(n, n, |i, j| c[(i + n - j) % n])
}

fn scale_cols(m: &DMatrix<C64>, d: &[C64]) -> DMatrix<C64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

pub fn greens_dense_oracle(
    pair: &FieldPair,
    sp: SpectralParameter,
    n_small: usize,
) -> Result<DiagonalGreens> {
    if n_small > 1024 {
        return Err(Error::Invalid(format!(
            "dense oracle size {n_small} above 1024"
        )));
    }
    let grid = Grid::new(pair.grid().half_length(), n_small)?;
    let pair = pair.resample(&grid)?;
    let n = n_small;
    let tau = sp.tau();
    let k = sp.kappa();
    let s = sp.sign();
    let h = grid.h();
    let qk: Vec<C64> = pair.q().iter().map(|v| k * v).collect();
    let rk: Vec<C64> = pair.r().iter().map(|v| k * v).collect();

    let d = circulant(&grid, |m| grid.derivative_symbol(m));
    let mut l = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] = d[(i, j)];
            l[(n + i, n + j)] = d[(i, j)];
        }
        l[(i, i)] += tau;
        l[(n + i, n + i)] -= tau;
        l[(i, n + i)] = -qk[i];
        l[(n + i, i)] = -rk[i];
    }
    let g = l
        .try_inverse()
        .ok_or(Error::Singular("dense Lax operator"))?;

    let a = circulant(&grid, |m| 1.0 / (tau + grid.derivative_symbol(m)));
    let b = circulant(&grid, |m| 1.0 / (-tau + grid.derivative_symbol(m)));
    let r1_12 = scale_cols(&a, &qk) * &b;
    let r1_21 = scale_cols(&b, &rk) * &a;
    let aq = scale_cols(&a, &qk);
    let br = scale_cols(&b, &rk);
    let r3_12 = &aq * (&br * &r1_12);
    let r3_21 = &br * (&aq * &r1_21);

    let series = series_terms(&pair, sp);
    let mut gamma = Vec::with_capacity(n);
    let mut h12 = Vec::with_capacity(n);
    let mut h21 = Vec::with_capacity(n);
    for i in 0..n {
        // diagonals of the second and fourth Born terms
        let mut r2_11 = C64::new(0.0, 0.0);
        let mut r2_22 = C64::new(0.0, 0.0);
        let mut r4_11 = C64::new(0.0, 0.0);
        let mut r4_22 = C64::new(0.0, 0.0);
        for m in 0..n {
            r2_11 += aq[(i, m)] * r1_21[(m, i)];
            r2_22 += br[(i, m)] * r1_12[(m, i)];
            r4_11 += aq[(i, m)] * r3_21[(m, i)];
            r4_22 += br[(i, m)] * r3_12[(m, i)];
        }
        let d11 = g[(i, i)] - a[(i, i)] - r2_11 - r4_11;
        let d22 = g[(n + i, n + i)] - b[(i, i)] - r2_22 - r4_22;
        let rem_g = s * (d11 - d22) / h;
        let rem12 = s * (g[(i, n + i)] - r1_12[(i, i)] - r3_12[(i, i)]) / h;
        let rem21 = s * (g[(n + i, i)] - r1_21[(i, i)] - r3_21[(i, i)]) / h;
        gamma.push(series.gamma_2[i] + series.gamma_4[i] + rem_g);
        h12.push(k * (series.g12_1[i] + series.g12_3[i] + rem12));
        h21.push(k * (series.g21_1[i] + series.g21_3[i] + rem21));
    }
    let rho = rho_id_residual(&grid, &pair, &gamma, &h12, &h21);
    Ok(DiagonalGreens {
        sp,
        gamma: ComplexField::new(grid.clone(), gamma),
        h12: ComplexField::new(grid.clone(), h12),
        h21: ComplexField::new(grid.clone(), h21),
        method: Method::DenseOracle,
        iterations: 0,
        rho_id_residual: rho,
        wronskian: None,
    })
}
