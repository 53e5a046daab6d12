//! A(kappa) by density and by trace, the polynomial conserved quantities,
//! gradients, brackets, asymptotics and Hilbert-Schmidt diagnostics.

mod asymptotic;
mod hs;
mod trace;

use serde::Serialize;

pub use asymptotic::{asymptotic_compare, fit_slope, AsymptoticRow, AsymptoticTable};
pub use hs::{hs_norm_lambda, HsNorms};
pub use trace::{a_trace, TraceKernel, TraceMode, TraceResult};

use crate::error::{Error, Result};
use crate::greens::{greens, DiagonalGreens};
use crate::grid::{ComplexField, C64, I};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConservedSet {
    pub m: C64,
    pub h_dnls: C64,
    pub e_dnls: C64,
    /// (tau, branch, A)
    pub a_values: Vec<(f64, i8, C64)>,
}

pub fn conserved_polynomials(pair: &FieldPair) -> ConservedSet {
    let grid = pair.grid();
    let (q, r) = (pair.q(), pair.r());
    let dq = grid.derivative(q);
    let dr = grid.derivative(r);
    let mut m = C64::new(0.0, 0.0);
    let mut h = C64::new(0.0, 0.0);
    let mut e = C64::new(0.0, 0.0);
    for j in 0..grid.len() {
        let qr = q[j] * r[j];
        m += qr;
        h += -I * q[j] * dr[j] + 0.5 * qr * qr;
        e += dq[j] * dr[j] - 1.5 * I * q[j] * qr * dr[j] + 0.5 * qr * qr * qr;
    }
    let w = grid.h();
    ConservedSet {
        m: m * w,
        h_dnls: h * w,
        e_dnls: e * w,
        a_values: Vec::new(),
    }
}

/// rho = -(q h21 + r h12)/(2 + gamma), branch free.
pub fn rho_density(dg: &DiagonalGreens, pair: &FieldPair) -> Result<ComplexField> {
    let (q, r) = (pair.q(), pair.r());
    let mut out = Vec::with_capacity(q.len());
    for j in 0..q.len() {
        let den = 2.0 + dg.gamma()[j];
        if den.norm() < 0.5 {
            return Err(Error::SmallData(format!(
                "|2 + gamma| = {:.3} below 0.5",
                den.norm()
            )));
        }
        out.push(-(q[j] * dg.h21()[j] + r[j] * dg.h12()[j]) / den);
    }
    Ok(ComplexField::new(pair.grid().clone(), out))
}

pub fn a_from_density(rho: &ComplexField) -> C64 {
    rho.integral()
}

/// A(kappa) through the fixed point and the density.
pub fn a_kappa(pair: &FieldPair, sp: SpectralParameter) -> Result<C64> {
    let dg = greens(pair, sp)?;
    Ok(a_from_density(&rho_density(&dg, pair)?))
}

pub fn conserved_with_a(pair: &FieldPair, probes: &[SpectralParameter]) -> Result<ConservedSet> {
    let mut set = conserved_polynomials(pair);
    for sp in probes {
        set.a_values
            .push((sp.tau(), sp.branch(), a_kappa(pair, *sp)?));
    }
    Ok(set)
}

/// dA/dtau from the density side: int gamma - (1/(2 tau)) int (q h21 + r h12).
pub fn da_dtau_density(dg: &DiagonalGreens, pair: &FieldPair) -> C64 {
    let grid = pair.grid();
    let tau = dg.sp.tau();
    let (q, r) = (pair.q(), pair.r());
    let s: C64 = (0..grid.len())
        .map(|j| dg.gamma()[j] - (q[j] * dg.h21()[j] + r[j] * dg.h12()[j]) / (2.0 * tau))
        .sum();
    s * grid.h()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GradientCheck {
    pub err_q: f64,
    pub err_r: f64,
    pub fd_q: C64,
    pub fd_r: C64,
    pub exact_q: C64,
    pub exact_r: C64,
}

fn rel_err(a: C64, b: C64) -> f64 {
    let d = (a - b).norm();
    if b.norm() > 0.0 {
        d / b.norm()
    } else {
        d
    }
}

/// Central differences of A along q+eps f and r+eps f (fields independent),
/// against int f (-kappa g21) and int f (-kappa g12).
pub fn functional_derivative_check(
    pair: &FieldPair,
    sp: SpectralParameter,
    f: &[C64],
    eps: f64,
) -> Result<GradientCheck> {
    if !(1e-7..=1e-2).contains(&eps) {
        return Err(Error::Invalid(format!(
            "finite-difference step {eps:e} out of range"
        )));
    }
    let grid = pair.grid();
    let dg = greens(pair, sp)?;
    let exact_q = -grid.integrate(
        &f.iter()
            .zip(dg.h21())
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    );
    let exact_r = -grid.integrate(
        &f.iter()
            .zip(dg.h12())
            .map(|(a, b)| a * b)
            .collect::<Vec<_>>(),
    );
    let shift_q = |e: f64| pair.map(|j, v| v + e * f[j], |_, v| v);
    let shift_r = |e: f64| pair.map(|_, v| v, |j, v| v + e * f[j]);
    let fd_q = (a_kappa(&shift_q(eps), sp)? - a_kappa(&shift_q(-eps), sp)?) / (2.0 * eps);
    let fd_r = (a_kappa(&shift_r(eps), sp)? - a_kappa(&shift_r(-eps), sp)?) / (2.0 * eps);
    Ok(GradientCheck {
        err_q: rel_err(fd_q, exact_q),
        err_r: rel_err(fd_r, exact_r),
        fd_q,
        fd_r,
        exact_q,
        exact_r,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BracketResult {
    pub value: C64,
    /// sup of integrand minus the derivative of its closed-form antiderivative
    pub total_derivative_residual: f64,
    /// antiderivative minus its limiting constant at the two ends
    pub tail: f64,
}

/// {A(kappa), A(varkappa)} = kappa varkappa int g12(k) g21'(vk) + g21(k) g12'(vk).
pub fn poisson_bracket_a(
    pair: &FieldPair,
    sp_a: SpectralParameter,
    sp_b: SpectralParameter,
) -> Result<BracketResult> {
    if sp_a.tau() == sp_b.tau() {
        return Err(Error::CoincidentParameters(sp_a.tau()));
    }
    let grid = pair.grid();
    let a = greens(pair, sp_a)?;
    let b = greens(pair, sp_b)?;
    let d12 = grid.derivative(b.h12());
    let d21 = grid.derivative(b.h21());
    let n = grid.len();
    let integrand: Vec<C64> = (0..n)
        .map(|j| a.h12()[j] * d21[j] + a.h21()[j] * d12[j])
        .collect();
    // antiderivative from the two-parameter identity with the roles swapped
    let (k, vk) = (sp_a.kappa(), sp_b.kappa());
    let (k2, vk2) = (sp_a.kappa2(), sp_b.kappa2());
    let ratio = k / (2.0 * vk);
    let big_f: Vec<C64> = (0..n)
        .map(|j| {
            (b.h12()[j] * a.h21()[j] + b.h21()[j] * a.h12()[j]) / (k * vk)
                + ratio * (b.gamma()[j] + 1.0) * (a.gamma()[j] + 1.0)
        })
        .collect();
    let df = grid.derivative(&big_f);
    let c = vk2 / (vk2 - k2);
    let total_derivative_residual = (0..n).fold(0.0f64, |m, j| {
        m.max((integrand[j] - c * k * vk * df[j]).norm())
    });
    let tail = (big_f[0] - ratio).norm().max((big_f[n - 1] - ratio).norm());
    Ok(BracketResult {
        value: grid.integrate(&integrand),
        total_derivative_residual,
        tail,
    })
}
