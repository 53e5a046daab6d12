//! Identity checks, continuity residuals and estimate sweeps, collected into a
//! machine-readable report.

mod flux;
mod sweep;

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::greens::{greens, greens_jost, series_terms};
use crate::grid::{sup_diff, sup_norm, C64};
use crate::invariants::{
    a_kappa, a_trace, da_dtau_density, poisson_bracket_a, TraceKernel, TraceMode,
};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

pub use flux::{
    continuity_residual, flux_a, flux_dnls, flux_gamma, gamma_density, ContinuityReport, FluxKind,
    FluxRecord,
};
pub use sweep::{estimate_sweep, EstimateSummary, SweepRow, SweepTable, DIAGNOSTICS, ESTIMATES};

/// Named tolerances. Every check looks its tolerance up here; a missing name is an error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Tolerances {
    pub const DEFAULTS: [(&'static str, f64); 22] = [
        ("quadratic", 1e-8),
        ("ode", 1e-8),
        ("symmetry", 1e-10),
        ("branch", 1e-12),
        ("a_symmetry", 1e-10),
        ("commute", 1e-8),
        ("bracket", 1e-8),
        ("rho_to_a", 1e-6),
        ("gamma2_slice", 1e-6),
        ("decomposition", 1e-10),
        ("trace", 1e-7),
        ("gradient", 1e-6),
        ("lax", 1e-6),
        ("dynamics", 1e-5),
        ("continuity", 1e-4),
        ("uniformity", 10.0),
        ("methods", 1e-6),
        ("mass_drift", 1e-10),
        ("hamiltonian_drift", 1e-8),
        ("a_drift", 1e-6),
        ("gauge", 1e-10),
        ("slope", 0.3),
    ];

    pub fn defaults() -> Self {
        Tolerances(
            Self::DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("no tolerance configured for check '{name}'")))
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::defaults()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub config_hash: String,
    pub started_at: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl VerificationReport {
    pub fn new(config_text: &str) -> Self {
        VerificationReport {
            config_hash: config_hash(config_text),
            started_at: chrono::Utc::now().to_rfc3339(),
            checks: Vec::new(),
            pass: true,
        }
    }

    /// Records residual <= tolerance under the given tolerance name. NaN fails.
    pub fn push(&mut self, name: &str, residual: f64, tol: &Tolerances, key: &str) -> Result<bool> {
        let tolerance = tol.get(key)?;
        let pass = residual <= tolerance;
        self.checks.push(Check {
            name: name.to_string(),
            residual,
            tolerance,
            pass,
        });
        self.pass &= pass;
        Ok(pass)
    }

    /// A check that could not be evaluated is recorded as failed with an infinite residual.
    pub fn push_result(
        &mut self,
        name: &str,
        residual: Result<f64>,
        tol: &Tolerances,
        key: &str,
    ) -> Result<bool> {
        self.push(name, residual.unwrap_or(f64::INFINITY), tol, key)
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.pass &= other.pass;
        self.checks.extend(other.checks);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn greens_residuals(pair: &FieldPair, sp: SpectralParameter) -> Result<(f64, f64, f64)> {
    let dg = greens(pair, sp)?;
    let jost = greens_jost(pair, sp)?;
    let ode = dg.ode_residuals(pair).iter().fold(0.0f64, |m, v| m.max(*v));
    Ok((dg.quadratic_residual(), jost.quadratic_residual(), ode))
}

/// Branch invariance of gamma, h12, h21.
fn branch_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    Ok(greens(pair, sp)?.distance_h(&greens(pair, sp.flipped())?))
}

/// gamma(tau) = conj gamma(-tau) and h12(tau) = conj h21(-tau) under r = -conj q.
fn symmetry_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    if !pair.gauge {
        return Err(Error::Invalid("symmetry needs gauged data".into()));
    }
    let a = greens(pair, sp)?;
    let b = greens(pair, sp.reflected())?;
    let conj = |v: &[C64]| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
    let g = sup_diff(a.gamma(), &conj(b.gamma()));
    let h = sup_diff(a.h12(), &conj(b.h21())).max(sup_diff(a.h21(), &conj(b.h12())));
    Ok(g.max(h))
}

/// (k^2 - vk^2)/k^2 [g12'(k) g21(vk) + g21'(k) g12(vk)]
///   = [g12(k) g21(vk) + g21(k) g12(vk)]' + (vk/2k) [(gamma(k)+1)(gamma(vk)+1)]'.
fn commute_residual(
    pair: &FieldPair,
    sp_a: SpectralParameter,
    sp_b: SpectralParameter,
) -> Result<f64> {
    let grid = pair.grid();
    let a = greens(pair, sp_a)?;
    let b = greens(pair, sp_b)?;
    let (k, v) = (sp_a.kappa(), sp_b.kappa());
    let (a12, a21, b12, b21) = (a.g12(), a.g21(), b.g12(), b.g21());
    let (da12, da21) = (grid.derivative(&a12), grid.derivative(&a21));
    let n = grid.len();
    let prod: Vec<C64> = (0..n).map(|j| a12[j] * b21[j] + a21[j] * b12[j]).collect();
    let gg: Vec<C64> = (0..n)
        .map(|j| (a.gamma()[j] + 1.0) * (b.gamma()[j] + 1.0))
        .collect();
    let (dp, dgg) = (grid.derivative(&prod), grid.derivative(&gg));
    let c = (k * k - v * v) / (k * k);
    let res: Vec<C64> = (0..n)
        .map(|j| c * (da12[j] * b21[j] + da21[j] * b12[j]) - dp[j] - v / (2.0 * k) * dgg[j])
        .collect();
    Ok(sup_norm(&res))
}

/// |A(tau) + conj A(-tau)| relative to |A(tau)|.
fn a_symmetry_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    let a = a_kappa(pair, sp)?;
    let b = a_kappa(pair, sp.reflected())?;
    Ok((a + b.conj()).norm() / a.norm().max(1e-300))
}

fn fd_tau<F: Fn(SpectralParameter) -> Result<C64>>(
    f: F,
    sp: SpectralParameter,
    step: f64,
) -> Result<C64> {
    let at = |d: f64| SpectralParameter::with_branch(sp.tau() + d, sp.branch()).and_then(&f);
    Ok((-at(2.0 * step)? + 8.0 * at(step)? - 8.0 * at(-step)? + at(-2.0 * step)?) / (12.0 * step))
}

/// dA/dtau from the density against a fourth-order difference in tau.
fn rho_to_a_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    let exact = da_dtau_density(&greens(pair, sp)?, pair);
    let fd = fd_tau(|s| a_kappa(pair, s), sp, 1e-3 * sp.tau().abs())?;
    Ok(rel(fd, exact))
}

/// m = 1 slice: dA_1/dtau = A_1/tau + int gamma^[2].
fn gamma2_slice_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    let grid = pair.grid();
    let a1 = |s: SpectralParameter| -> Result<C64> {
        let ser = series_terms(pair, s);
        let k = s.kappa();
        Ok(-grid.integrate(
            &pair
                .q()
                .iter()
                .zip(&ser.g21_1)
                .map(|(q, g)| k * q * g)
                .collect::<Vec<_>>(),
        ))
    };
    let fd = fd_tau(a1, sp, 1e-3 * sp.tau().abs())?;
    let exact = a1(sp)? / sp.tau() + grid.integrate(&series_terms(pair, sp).gamma_2);
    Ok(rel(fd, exact))
}

/// gamma - gamma^[2] = -gamma^2/2 - 2(g12 - g12^[1]) g21 - 2 g12^[1](g21 - g21^[1]).
fn decomposition_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    let dg = greens(pair, sp)?;
    let ser = series_terms(pair, sp);
    let (g12, g21) = (dg.g12(), dg.g21());
    let res: Vec<C64> = (0..g12.len())
        .map(|j| {
            let g = dg.gamma()[j];
            g - ser.gamma_2[j]
                + 0.5 * g * g
                + 2.0 * (g12[j] - ser.g12_1[j]) * g21[j]
                + 2.0 * ser.g12_1[j] * (g21[j] - ser.g21_1[j])
        })
        .collect();
    Ok(sup_norm(&res))
}

/// |{A(k), A(vk)}| / max(|A(k)|, |A(vk)|, 1e-3).
pub fn bracket_residual(
    pair: &FieldPair,
    sp_a: SpectralParameter,
    sp_b: SpectralParameter,
) -> Result<f64> {
    let b = poisson_bracket_a(pair, sp_a, sp_b)?;
    let scale = a_kappa(pair, sp_a)?
        .norm()
        .max(a_kappa(pair, sp_b)?.norm())
        .max(1e-3);
    Ok(b.value.norm() / scale)
}

fn trace_residual(pair: &FieldPair, sp: SpectralParameter) -> Result<f64> {
    let ld = a_trace(&TraceKernel::new(pair, sp)?, TraceMode::LogDet)?.value;
    let dens = a_kappa(pair, sp)?;
    Ok((ld - dens).norm() / dens.norm().max(1e-3))
}

/// Pointwise and integral identities for the Green's functions at two spectral
/// parameters. Failures are recorded in the report, never thrown; only a
/// missing tolerance is an error.
pub fn identity_suite(
    pair: &FieldPair,
    sp_a: SpectralParameter,
    sp_b: SpectralParameter,
    tol: &Tolerances,
    config_text: &str,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new(config_text);
    for sp in [sp_a, sp_b] {
        let t = sp.tau();
        let base = greens_residuals(pair, sp);
        rep.push_result(
            &format!("quadratic_fixed_point_tau{t}"),
            base.as_ref().map(|v| v.0).map_err(clone_err),
            tol,
            "quadratic",
        )?;
        rep.push_result(
            &format!("quadratic_jost_tau{t}"),
            base.as_ref().map(|v| v.1).map_err(clone_err),
            tol,
            "quadratic",
        )?;
        rep.push_result(
            &format!("first_order_odes_tau{t}"),
            base.as_ref().map(|v| v.2).map_err(clone_err),
            tol,
            "ode",
        )?;
        rep.push_result(
            &format!("branch_invariance_tau{t}"),
            branch_residual(pair, sp),
            tol,
            "branch",
        )?;
        if pair.gauge {
            rep.push_result(
                &format!("reflection_symmetry_tau{t}"),
                symmetry_residual(pair, sp),
                tol,
                "symmetry",
            )?;
            rep.push_result(
                &format!("a_symmetry_tau{t}"),
                a_symmetry_residual(pair, sp),
                tol,
                "a_symmetry",
            )?;
        }
        rep.push_result(
            &format!("rho_to_a_tau{t}"),
            rho_to_a_residual(pair, sp),
            tol,
            "rho_to_a",
        )?;
        rep.push_result(
            &format!("gamma2_slice_tau{t}"),
            gamma2_slice_residual(pair, sp),
            tol,
            "gamma2_slice",
        )?;
        rep.push_result(
            &format!("decomposition_tau{t}"),
            decomposition_residual(pair, sp),
            tol,
            "decomposition",
        )?;
        rep.push_result(
            &format!("trace_vs_density_tau{t}"),
            trace_residual(pair, sp),
            tol,
            "trace",
        )?;
    }
    rep.push_result(
        "two_parameter_commute",
        commute_residual(pair, sp_a, sp_b),
        tol,
        "commute",
    )?;
    rep.push_result(
        "a_bracket_vanishes",
        bracket_residual(pair, sp_a, sp_b),
        tol,
        "bracket",
    )?;
    Ok(rep)
}

fn clone_err(e: &Error) -> Error {
    Error::Invalid(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profile::{sample_profile, ProfileSpec};

    fn pair(spec: ProfileSpec) -> FieldPair {
        sample_profile(&spec, &Grid::new(40.0, 1024).unwrap()).unwrap()
    }

    fn sps() -> (SpectralParameter, SpectralParameter) {
        (
            SpectralParameter::new(2.0).unwrap(),
            SpectralParameter::new(8.0).unwrap(),
        )
    }

    #[test]
    fn suite_passes_on_smooth_data() {
        let (a, b) = sps();
        let spec = ProfileSpec::Gaussian {
            a: 0.1,
            w: 1.0,
            x0: 0.0,
            chirp: 0.1,
            k0: 0.5,
        };
        let rep = identity_suite(&pair(spec), a, b, &Tolerances::defaults(), "x").unwrap();
        let failed: Vec<_> = rep.checks.iter().filter(|c| !c.pass).collect();
        assert!(rep.pass, "{failed:#?}");
        assert!(rep.checks.len() >= 20);
    }

    #[test]
    fn zero_data_is_trivially_consistent() {
        let (a, b) = sps();
        let rep =
            identity_suite(&pair(ProfileSpec::Zero), a, b, &Tolerances::defaults(), "").unwrap();
        for c in &rep.checks {
            assert!(
                c.residual <= c.tolerance
                    || c.name.starts_with("rho_to_a")
                    || c.name.starts_with("gamma2"),
                "{c:?}"
            );
        }
    }

    #[test]
    fn failures_are_reported_not_thrown() {
        let (a, b) = sps();
        let mut tol = Tolerances::defaults();
        tol.set("quadratic", 0.0);
        tol.set("branch", -1.0);
        let rep = identity_suite(&pair(ProfileSpec::gaussian(0.1)), a, b, &tol, "").unwrap();
        assert!(!rep.pass);
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name.starts_with("branch") && !c.pass));
        // large data: the fixed point refuses, checks become infinite failures
        let rep = identity_suite(
            &pair(ProfileSpec::gaussian(2.0)),
            a,
            b,
            &Tolerances::defaults(),
            "",
        )
        .unwrap();
        assert!(!rep.pass);
        assert!(rep.checks.iter().any(|c| c.residual.is_infinite()));
    }

    #[test]
    fn tolerance_gap_is_an_error() {
        let (a, b) = sps();
        let mut tol = Tolerances::defaults();
        tol.0.remove("commute");
        assert!(matches!(
            identity_suite(&pair(ProfileSpec::gaussian(0.1)), a, b, &tol, ""),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn report_json_shape() {
        let mut rep = VerificationReport::new("abc");
        rep.push("one", 1e-12, &Tolerances::defaults(), "quadratic")
            .unwrap();
        rep.push("two", f64::NAN, &Tolerances::defaults(), "quadratic")
            .unwrap();
        assert!(!rep.pass);
        let v: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
        assert!(v["started_at"].is_string());
        assert_eq!(v["checks"][0]["pass"], true);
        assert_eq!(v["checks"][1]["pass"], false);
        assert_eq!(v["pass"], false);
        assert_eq!(
            config_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
