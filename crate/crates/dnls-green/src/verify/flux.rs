//! Fluxes of the three microscopic conservation laws and their continuity
//! residuals along trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flows::{Flow, Trajectory};
use crate::greens::{greens, DiagonalGreens};
use crate::grid::{ComplexField, C64, I};
use crate::invariants::rho_density;
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    DnlsFlux,
    AFlux,
    GammaFlux,
}

#[derive(Clone, Debug)]
pub struct FluxRecord {
    pub kind: FluxKind,
    pub j: ComplexField,
    pub tau: f64,
    pub tau_gen: Option<f64>,
    pub theta: Option<C64>,
    pub xi: Option<C64>,
}

fn check_den(gamma: C64) -> Result<C64> {
    let den = 2.0 + gamma;
    if den.norm() < 0.5 {
        return Err(Error::SmallData(format!(
            "|2 + gamma| = {:.3} below 0.5",
            den.norm()
        )));
    }
    Ok(den)
}

/// j = i(q' h21 - r' h12)/(2+gamma) - i vk^2 q r - 2 vk^2 rho - q r rho.
pub fn flux_dnls(pair: &FieldPair, dg: &DiagonalGreens) -> Result<FluxRecord> {
    let grid = pair.grid();
    let (q, r) = (pair.q(), pair.r());
    let dq = grid.derivative(q);
    let dr = grid.derivative(r);
    let rho = rho_density(dg, pair)?;
    let v2 = dg.sp.kappa2();
    let mut j = Vec::with_capacity(q.len());
    for n in 0..q.len() {
        let den = check_den(dg.gamma()[n])?;
        let qr = q[n] * r[n];
        let p = rho.values()[n];
        j.push(
            I * (dq[n] * dg.h21()[n] - dr[n] * dg.h12()[n]) / den
                - I * v2 * qr
                - 2.0 * v2 * p
                - qr * p,
        );
    }
    Ok(FluxRecord {
        kind: FluxKind::DnlsFlux,
        j: ComplexField::new(grid.clone(), j),
        tau: dg.sp.tau(),
        tau_gen: None,
        theta: None,
        xi: None,
    })
}

fn distinct(probe: SpectralParameter, gen: SpectralParameter) -> Result<()> {
    if probe.tau() == gen.tau() {
        return Err(Error::CoincidentParameters(probe.tau()));
    }
    Ok(())
}

/// Flux of rho(vk) under the flow of A(kappa):
/// -Theta [g12(k) g21(vk) + g12(vk) g21(k)]/(2+gamma(vk)) - Theta (vk/2k) gamma(k),
/// assembled as kappa^2/(kappa^2-vk^2) h h and Xi/2 so no branch enters.
pub fn flux_a(probe: &DiagonalGreens, gen: &DiagonalGreens) -> Result<FluxRecord> {
    distinct(probe.sp, gen.sp)?;
    let (k2, v2) = (gen.sp.kappa2(), probe.sp.kappa2());
    let c = k2 / (k2 - v2);
    let xi = v2 * k2 / (k2 - v2);
    let n = probe.gamma().len();
    let mut j = Vec::with_capacity(n);
    for m in 0..n {
        let den = check_den(probe.gamma()[m])?;
        let hh = gen.h12()[m] * probe.h21()[m] + probe.h12()[m] * gen.h21()[m];
        j.push(-c * hh / den - 0.5 * xi * gen.gamma()[m]);
    }
    let theta = probe.sp.kappa() * gen.sp.kappa() * k2 / (k2 - v2);
    Ok(FluxRecord {
        kind: FluxKind::AFlux,
        j: ComplexField::new(probe.grid().clone(), j),
        tau: probe.sp.tau(),
        tau_gen: Some(gen.sp.tau()),
        theta: Some(theta),
        xi: Some(xi),
    })
}

/// Flux of 2i vk gamma(vk) - (q g21(vk) + r g12(vk)) under the flow of A(kappa).
/// Odd in the branch of vk, like its density.
pub fn flux_gamma(probe: &DiagonalGreens, gen: &DiagonalGreens) -> Result<FluxRecord> {
    distinct(probe.sp, gen.sp)?;
    let (k, v) = (gen.sp.kappa(), probe.sp.kappa());
    let (k2, v2) = (k * k, v * v);
    let d2 = (k2 - v2) * (k2 - v2);
    let a = k * k2 * (k2 + v2) / d2;
    let b = k2 * k2 * v / d2;
    let (pg12, pg21, gg12, gg21) = (probe.g12(), probe.g21(), gen.g12(), gen.g21());
    let j = (0..pg12.len())
        .map(|m| {
            -a * (gg12[m] * pg21[m] + gg21[m] * pg12[m])
                - b * (gen.gamma()[m] + 1.0) * (probe.gamma()[m] + 1.0)
        })
        .collect();
    Ok(FluxRecord {
        kind: FluxKind::GammaFlux,
        j: ComplexField::new(probe.grid().clone(), j),
        tau: probe.sp.tau(),
        tau_gen: Some(gen.sp.tau()),
        theta: None,
        xi: None,
    })
}

/// 2i vk gamma(vk) - (q g21(vk) + r g12(vk)).
pub fn gamma_density(dg: &DiagonalGreens, pair: &FieldPair) -> Vec<C64> {
    let v = dg.sp.kappa();
    let (g12, g21) = (dg.g12(), dg.g21());
    (0..g12.len())
        .map(|m| 2.0 * I * v * dg.gamma()[m] - (pair.q()[m] * g21[m] + pair.r()[m] * g12[m]))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub kind: FluxKind,
    /// interior snapshot times
    pub times: Vec<f64>,
    /// L2 norm of the centered d/dt density plus d/dx flux
    pub residuals: Vec<f64>,
    /// max over snapshots of |int density(t) - int density(0)| / |int density(0)|
    pub integral_drift: f64,
}

impl ContinuityReport {
    pub fn max(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |a, b| a.max(*b))
    }
}

fn density_and_flux(
    kind: FluxKind,
    state: &FieldPair,
    probe: SpectralParameter,
    gen: Option<SpectralParameter>,
) -> Result<(Vec<C64>, Vec<C64>)> {
    let dg = greens(state, probe)?;
    let density = match kind {
        FluxKind::GammaFlux => gamma_density(&dg, state),
        _ => rho_density(&dg, state)?.into_values(),
    };
    let flux = match (kind, gen) {
        (FluxKind::DnlsFlux, _) => flux_dnls(state, &dg)?.j.into_values(),
        (FluxKind::AFlux, Some(g)) => flux_a(&dg, &greens(state, g)?)?.j.into_values(),
        (FluxKind::GammaFlux, Some(g)) => flux_gamma(&dg, &greens(state, g)?)?.j.into_values(),
        _ => return Err(Error::Invalid("flux kind needs a generator".into())),
    };
    Ok((density, flux))
}

/// Per interior snapshot: ||(rho_{n+1} - rho_{n-1})/(2 dt) + d/dx j_n||_{L2}.
pub fn continuity_residual(
    traj: &Trajectory,
    kind: FluxKind,
    probe: SpectralParameter,
) -> Result<ContinuityReport> {
    let gen = match (kind, traj.flow) {
        (FluxKind::DnlsFlux, Flow::Dnls) => None,
        (FluxKind::AFlux | FluxKind::GammaFlux, Flow::AKappa(g)) => Some(g),
        _ => {
            return Err(Error::Invalid(format!(
                "flux {kind:?} does not belong to flow {}",
                traj.flow.name()
            )))
        }
    };
    if traj.states.len() < 3 {
        return Err(Error::Invalid("need at least three snapshots".into()));
    }
    let grid = traj.grid();
    let fields = traj
        .states
        .iter()
        .map(|s| density_and_flux(kind, s, probe, gen))
        .collect::<Result<Vec<_>>>()?;
    let step = traj.spacing();
    let mut rep = ContinuityReport {
        kind,
        times: Vec::new(),
        residuals: Vec::new(),
        integral_drift: 0.0,
    };
    for n in 1..fields.len() - 1 {
        let dj = grid.derivative(&fields[n].1);
        let res: Vec<C64> = (0..grid.len())
            .map(|m| (fields[n + 1].0[m] - fields[n - 1].0[m]) / (2.0 * step) + dj[m])
            .collect();
        rep.times.push(traj.times[n]);
        rep.residuals.push(grid.l2_norm(&res));
    }
    let i0 = grid.integrate(&fields[0].0);
    for f in &fields {
        let d = (grid.integrate(&f.0) - i0).norm();
        rep.integral_drift =
            rep.integral_drift
                .max(if i0.norm() > 0.0 { d / i0.norm() } else { d });
    }
    Ok(rep)
}
