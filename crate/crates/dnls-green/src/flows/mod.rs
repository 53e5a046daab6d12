//! Time evolution under the DNLS flow and under the flow generated by A(kappa).

mod lax;

pub use lax::{
    greens_dynamics_check, lax_residual, random_test_fields, DynamicsReport, LaxPairMatrix,
};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::greens::{greens_fixed_point_from, DiagonalGreens};
use crate::grid::{sup_norm, Grid, C64};
use crate::invariants::{conserved_with_a, ConservedSet};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

pub const DEALIAS_FRACTION: f64 = 2.0 / 3.0;
const GREENS_TOL: f64 = 1e-14;
const GREENS_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Flow {
    Dnls,
    /// generated by A at this spectral parameter
    AKappa(SpectralParameter),
}

impl Flow {
    pub fn name(&self) -> String {
        match self {
            Flow::Dnls => "dnls".into(),
            Flow::AKappa(sp) => format!("akappa({})", sp.tau()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SnapshotOptions {
    /// steps between recorded snapshots
    pub stride: usize,
    /// spectral parameters at which A is recorded
    pub probes: Vec<SpectralParameter>,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        SnapshotOptions {
            stride: 1,
            probes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub flow: Flow,
    pub dt: f64,
    pub stride: usize,
    pub dealias: f64,
    pub times: Vec<f64>,
    pub states: Vec<FieldPair>,
    pub conserved: Vec<ConservedSet>,
    pub gauge_deviation: Vec<f64>,
    pub probes: Vec<SpectralParameter>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<Grid> {
        self.states[0].grid()
    }

    /// Time between consecutive snapshots.
    pub fn spacing(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn last(&self) -> &FieldPair {
        self.states
            .last()
            .expect("trajectory has at least one snapshot")
    }

    /// Rows t, Re/Im A per probe, M, Re/Im H, Re/Im E, gauge deviation.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        for sp in &self.probes {
            header.push(format!("re_a({})", sp.tau()));
            header.push(format!("im_a({})", sp.tau()));
        }
        header.extend(["m", "re_h", "im_h", "re_e", "im_e", "gauge_deviation"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for ((t, c), g) in self
            .times
            .iter()
            .zip(&self.conserved)
            .zip(&self.gauge_deviation)
        {
            let mut row = vec![format!("{t}")];
            for (_, _, a) in &c.a_values {
                row.push(format!("{:e}", a.re));
                row.push(format!("{:e}", a.im));
            }
            for v in [
                c.m.re,
                c.h_dnls.re,
                c.h_dnls.im,
                c.e_dnls.re,
                c.e_dnls.im,
                *g,
            ] {
                row.push(format!("{v:e}"));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn dealias_mask(grid: &Grid) -> Vec<f64> {
    let n = grid.len();
    let cut = (DEALIAS_FRACTION * n as f64 / 2.0).floor() as usize;
    (0..n)
        .map(|k| {
            let m = if k <= n / 2 { k } else { n - k };
            if m <= cut {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Spectrum of (f)' with the product f dealiased.
fn dealiased_derivative_hat(grid: &Grid, f: &[C64], mask: &[f64]) -> Vec<C64> {
    let mut s = grid.fft(f);
    for (k, v) in s.iter_mut().enumerate() {
        *v *= mask[k] * grid.derivative_symbol(k);
    }
    s
}

/// q_t = i q'' + (q^2 r)', r_t = -i r'' + (q r^2)'.
pub fn dnls_rhs(pair: &FieldPair) -> FieldPair {
    let grid = pair.grid();
    let mask = dealias_mask(grid);
    let (q, r) = (pair.q(), pair.r());
    let nq: Vec<C64> = q.iter().zip(r).map(|(a, b)| a * a * b).collect();
    let nr: Vec<C64> = q.iter().zip(r).map(|(a, b)| a * b * b).collect();
    let qh = grid.fft(q);
    let rh = grid.fft(r);
    let nqh = dealiased_derivative_hat(grid, &nq, &mask);
    let nrh = dealiased_derivative_hat(grid, &nr, &mask);
    let dq: Vec<C64> = (0..grid.len())
        .map(|k| {
            let d = grid.derivative_symbol(k);
            C64::i() * d * d * qh[k] + nqh[k]
        })
        .collect();
    let dr: Vec<C64> = (0..grid.len())
        .map(|k| {
            let d = grid.derivative_symbol(k);
            -C64::i() * d * d * rh[k] + nrh[k]
        })
        .collect();
    FieldPair::from_values(grid, grid.ifft(&dq), grid.ifft(&dr), false)
}

fn snapshot(pair: &FieldPair, probes: &[SpectralParameter]) -> Result<(ConservedSet, f64)> {
    Ok((conserved_with_a(pair, probes)?, pair.gauge_deviation()))
}

fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final > 0.0) || !(dt > 0.0) || dt > t_final {
        return Err(Error::Invalid(format!(
            "need 0 < dt <= T, got dt = {dt}, T = {t_final}"
        )));
    }
    let n = (t_final / dt).round();
    if ((n * dt - t_final) / t_final).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "T = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    Ok(n as usize)
}

/// Largest stable step of the explicit part, from the transport speed of the
/// cubic derivative term at the top retained frequency.
pub fn dnls_stable_dt(pair: &FieldPair) -> f64 {
    let speed = 3.0 * sup_norm(pair.q()) * sup_norm(pair.r()) * pair.grid().max_frequency();
    if speed == 0.0 {
        f64::INFINITY
    } else {
        2.8 / speed
    }
}

struct Recorder {
    times: Vec<f64>,
    states: Vec<FieldPair>,
    conserved: Vec<ConservedSet>,
    gauge: Vec<f64>,
    probes: Vec<SpectralParameter>,
    sup0: f64,
}

impl Recorder {
    fn new(pair: &FieldPair, probes: &[SpectralParameter]) -> Result<Self> {
        let mut r = Recorder {
            times: Vec::new(),
            states: Vec::new(),
            conserved: Vec::new(),
            gauge: Vec::new(),
            probes: probes.to_vec(),
            sup0: sup_norm(pair.q()).max(sup_norm(pair.r())),
        };
        r.push(0.0, pair.clone())?;
        Ok(r)
    }

    fn guard(&self, t: f64, pair: &FieldPair) -> Result<()> {
        let s = sup_norm(pair.q()).max(sup_norm(pair.r()));
        if !s.is_finite() || (self.sup0 > 0.0 && s > 2.0 * self.sup0) {
            return Err(Error::BlowUp(t));
        }
        Ok(())
    }

    fn push(&mut self, t: f64, pair: FieldPair) -> Result<()> {
        let (c, g) = snapshot(&pair, &self.probes)?;
        self.times.push(t);
        self.states.push(pair);
        self.conserved.push(c);
        self.gauge.push(g);
        Ok(())
    }

    fn finish(self, flow: Flow, dt: f64, stride: usize, dealias: f64) -> Trajectory {
        Trajectory {
            flow,
            dt,
            stride,
            dealias,
            times: self.times,
            states: self.states,
            conserved: self.conserved,
            gauge_deviation: self.gauge,
            probes: self.probes,
        }
    }
}

/// Integrating-factor RK4 (Lawson) in Fourier space with 2/3 dealiasing.
pub fn dnls_evolve(
    pair: &FieldPair,
    t_final: f64,
    dt: f64,
    opts: &SnapshotOptions,
) -> Result<Trajectory> {
    let steps = steps_for(t_final, dt)?;
    let stable = dnls_stable_dt(pair);
    if dt > stable {
        return Err(Error::Invalid(format!(
            "dt = {dt} above the stability estimate {stable:.3e}"
        )));
    }
    let stride = opts.stride.max(1);
    let grid = pair.grid().clone();
    let n = grid.len();
    let mask = dealias_mask(&grid);
    // half-step integrating factors for q^ (e^{-i xi^2 t}) and r^ (e^{+i xi^2 t})
    let lin: Vec<f64> = (0..n)
        .map(|k| (grid.derivative_symbol(k) * grid.derivative_symbol(k)).re)
        .collect();
    let eq: Vec<C64> = lin
        .iter()
        .map(|l| (C64::i() * l * dt / 2.0).exp())
        .collect();
    let er: Vec<C64> = lin
        .iter()
        .map(|l| (-C64::i() * l * dt / 2.0).exp())
        .collect();

    let nonlinear = |qh: &[C64], rh: &[C64]| -> (Vec<C64>, Vec<C64>) {
        let q = grid.ifft(qh);
        let r = grid.ifft(rh);
        let nq: Vec<C64> = q.iter().zip(&r).map(|(a, b)| a * a * b).collect();
        let nr: Vec<C64> = q.iter().zip(&r).map(|(a, b)| a * b * b).collect();
        (
            dealiased_derivative_hat(&grid, &nq, &mask),
            dealiased_derivative_hat(&grid, &nr, &mask),
        )
    };
    let mul = |e: &[C64], v: &[C64]| -> Vec<C64> { e.iter().zip(v).map(|(a, b)| a * b).collect() };
    let axpy = |u: &[C64], a: f64, v: &[C64]| -> Vec<C64> {
        u.iter().zip(v).map(|(x, y)| x + a * y).collect()
    };

    let mut rec = Recorder::new(pair, &opts.probes)?;
    let mut qh = grid.fft(pair.q());
    let mut rh = grid.fft(pair.r());
    for step in 1..=steps {
        let (k1q, k1r) = nonlinear(&qh, &rh);
        let (k2q, k2r) = nonlinear(
            &mul(&eq, &axpy(&qh, dt / 2.0, &k1q)),
            &mul(&er, &axpy(&rh, dt / 2.0, &k1r)),
        );
        let eqh = mul(&eq, &qh);
        let erh = mul(&er, &rh);
        let (k3q, k3r) = nonlinear(&axpy(&eqh, dt / 2.0, &k2q), &axpy(&erh, dt / 2.0, &k2r));
        let e2q = mul(&eq, &eqh);
        let e2r = mul(&er, &erh);
        let (k4q, k4r) = nonlinear(
            &axpy(&e2q, dt, &mul(&eq, &k3q)),
            &axpy(&e2r, dt, &mul(&er, &k3r)),
        );
        for k in 0..n {
            qh[k] = e2q[k]
                + dt / 6.0 * (eq[k] * eq[k] * k1q[k] + 2.0 * eq[k] * (k2q[k] + k3q[k]) + k4q[k]);
            rh[k] = e2r[k]
                + dt / 6.0 * (er[k] * er[k] * k1r[k] + 2.0 * er[k] * (k2r[k] + k3r[k]) + k4r[k]);
        }
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            let state = FieldPair::from_values(&grid, grid.ifft(&qh), grid.ifft(&rh), pair.gauge);
            rec.guard(t, &state)?;
            rec.push(t, state)?;
        }
    }
    Ok(rec.finish(Flow::Dnls, dt, stride, DEALIAS_FRACTION))
}

/// The triple at `sp`, warm-started from `init`.
fn triple(
    pair: &FieldPair,
    sp: SpectralParameter,
    init: Option<&DiagonalGreens>,
) -> Result<DiagonalGreens> {
    greens_fixed_point_from(pair, sp, GREENS_TOL, GREENS_MAX_ITER, init)
}

fn akappa_rhs_from(
    pair: &FieldPair,
    sp: SpectralParameter,
    init: Option<&DiagonalGreens>,
) -> Result<(FieldPair, DiagonalGreens)> {
    let dg = triple(pair, sp, init)?;
    let grid = pair.grid();
    let dq: Vec<C64> = grid.derivative(dg.h12()).iter().map(|v| -v).collect();
    let dr: Vec<C64> = grid.derivative(dg.h21()).iter().map(|v| -v).collect();
    Ok((FieldPair::from_values(grid, dq, dr, false), dg))
}

/// q_t = -(kappa g12)', r_t = -(kappa g21)'.
pub fn akappa_rhs(pair: &FieldPair, sp: SpectralParameter) -> Result<FieldPair> {
    Ok(akappa_rhs_from(pair, sp, None)?.0)
}

/// Explicit RK4; each stage recomputes the triple, warm-started from the last one.
pub fn akappa_evolve(
    pair: &FieldPair,
    sp: SpectralParameter,
    t_final: f64,
    dt: f64,
    opts: &SnapshotOptions,
) -> Result<Trajectory> {
    let steps = steps_for(t_final, dt)?;
    let stride = opts.stride.max(1);
    let grid = pair.grid().clone();
    let mut rec = Recorder::new(pair, &opts.probes)?;
    let mut state = FieldPair::from_values(&grid, pair.q().to_vec(), pair.r().to_vec(), false);
    let mut warm: Option<DiagonalGreens> = None;
    let shift = |p: &FieldPair, a: f64, d: &FieldPair| {
        p.map(|j, v| v + a * d.q()[j], |j, v| v + a * d.r()[j])
    };
    for step in 1..=steps {
        let (k1, g1) = akappa_rhs_from(&state, sp, warm.as_ref())?;
        let (k2, g2) = akappa_rhs_from(&shift(&state, dt / 2.0, &k1), sp, Some(&g1))?;
        let (k3, g3) = akappa_rhs_from(&shift(&state, dt / 2.0, &k2), sp, Some(&g2))?;
        let (k4, _) = akappa_rhs_from(&shift(&state, dt, &k3), sp, Some(&g3))?;
        state = state.map(
            |j, v| v + dt / 6.0 * (k1.q()[j] + 2.0 * k2.q()[j] + 2.0 * k3.q()[j] + k4.q()[j]),
            |j, v| v + dt / 6.0 * (k1.r()[j] + 2.0 * k2.r()[j] + 2.0 * k3.r()[j] + k4.r()[j]),
        );
        warm = Some(g1);
        if step % stride == 0 || step == steps {
            let t = step as f64 * dt;
            rec.guard(t, &state)?;
            rec.push(t, state.clone())?;
        }
    }
    Ok(rec.finish(Flow::AKappa(sp), dt, stride, 0.0))
}

pub fn evolve(
    pair: &FieldPair,
    flow: Flow,
    t_final: f64,
    dt: f64,
    opts: &SnapshotOptions,
) -> Result<Trajectory> {
    match flow {
        Flow::Dnls => dnls_evolve(pair, t_final, dt, opts),
        Flow::AKappa(sp) => akappa_evolve(pair, sp, t_final, dt, opts),
    }
}

pub fn rhs(pair: &FieldPair, flow: Flow) -> Result<FieldPair> {
    match flow {
        Flow::Dnls => Ok(dnls_rhs(pair)),
        Flow::AKappa(sp) => akappa_rhs(pair, sp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sup_diff, I};
    use crate::invariants::conserved_polynomials;
    use crate::profile::{sample_profile, ProfileSpec};

    fn grid() -> Arc<Grid> {
        Grid::new(40.0, 1024).unwrap()
    }

    fn gauss(a: f64) -> FieldPair {
        sample_profile(&ProfileSpec::gaussian(a), &grid()).unwrap()
    }

    #[test]
    fn zero_is_fixed() {
        let z = sample_profile(&ProfileSpec::Zero, &grid()).unwrap();
        assert!(dnls_rhs(&z).is_zero());
        assert!(akappa_rhs(&z, SpectralParameter::new(2.0).unwrap())
            .unwrap()
            .is_zero());
        let t = dnls_evolve(&z, 0.01, 1e-3, &SnapshotOptions::default()).unwrap();
        assert!(t.states.iter().all(FieldPair::is_zero));
        assert_eq!(t.times.len(), 11);
    }

    #[test]
    fn rhs_reduces_to_gauged_dnls() {
        let spec = ProfileSpec::Gaussian {
            a: 0.3,
            w: 1.5,
            x0: 0.2,
            chirp: 0.1,
            k0: 0.7,
        };
        let p = sample_profile(&spec, &grid()).unwrap();
        let d = dnls_rhs(&p);
        // i q_t + q_xx + i (|q|^2 q)_x = 0, evaluated without dealiasing
        let g = p.grid();
        let q = p.q();
        let qxx = g.second_derivative(q);
        let cubic: Vec<C64> = q.iter().map(|v| v.norm_sqr() * v).collect();
        let cx = g.derivative(&cubic);
        let res: Vec<C64> = (0..q.len())
            .map(|j| I * d.q()[j] + qxx[j] + I * cx[j])
            .collect();
        assert!(sup_norm(&res) < 1e-12, "{:e}", sup_norm(&res));
        // r equation is the conjugate one
        let rc: Vec<C64> = d.q().iter().map(|v| -v.conj()).collect();
        assert!(sup_diff(&rc, d.r()) < 1e-12 * sup_norm(d.r()));
    }

    #[test]
    fn single_mode_linearization() {
        let g = grid();
        let xi0 = g.xi()[10];
        let p = FieldPair::gauged(crate::grid::ComplexField::from_fn(g.clone(), |x| {
            1e-6 * (I * xi0 * x).exp()
        }));
        let d = dnls_rhs(&p);
        let lin: Vec<C64> = p.q().iter().map(|v| -I * xi0 * xi0 * v).collect();
        assert!(sup_diff(d.q(), &lin) < 1e-9 * sup_norm(&lin));
    }

    #[test]
    fn linear_regime_matches_free_evolution() {
        let a = 0.05;
        let p = gauss(a);
        let t = dnls_evolve(
            &p,
            0.5,
            1e-3,
            &SnapshotOptions {
                stride: 500,
                probes: vec![],
            },
        )
        .unwrap();
        let g = p.grid();
        let free = g.apply_multiplier(p.q(), |k| {
            let d = g.derivative_symbol(k);
            (I * d * d * 0.5).exp()
        });
        let err = sup_diff(t.last().q(), &free);
        assert!(err < 10.0 * a * a * a, "{err:e}");
    }

    #[test]
    fn dnls_conserves_mass_and_gauge() {
        let p = gauss(0.1);
        let t = dnls_evolve(
            &p,
            0.2,
            1e-3,
            &SnapshotOptions {
                stride: 50,
                probes: vec![],
            },
        )
        .unwrap();
        let m0 = t.conserved[0].m;
        let m1 = t.conserved.last().unwrap().m;
        assert!((m1 - m0).norm() <= 1e-10 * m0.norm());
        assert!(t.gauge_deviation.iter().all(|g| *g <= 1e-10));
        assert_eq!(t.times.len(), 5);
    }

    #[test]
    fn rk4_order() {
        let p = gauss(0.3);
        let run = |dt: f64| {
            dnls_evolve(
                &p,
                0.4,
                dt,
                &SnapshotOptions {
                    stride: 10_000,
                    probes: vec![],
                },
            )
            .unwrap()
        };
        let reference = run(1.25e-3);
        let e1 = sup_diff(run(2e-2).last().q(), reference.last().q());
        let e2 = sup_diff(run(1e-2).last().q(), reference.last().q());
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 4.0, "{e1:e} {e2:e} {ratio}");
    }

    #[test]
    fn rejects_bad_steps() {
        let p = gauss(0.1);
        assert!(dnls_evolve(&p, 0.1, 0.0, &SnapshotOptions::default()).is_err());
        assert!(dnls_evolve(&p, 0.1, 0.03, &SnapshotOptions::default()).is_err());
        let big = gauss(30.0);
        assert!(dnls_evolve(&big, 0.1, 1e-3, &SnapshotOptions::default()).is_err());
    }

    #[test]
    fn akappa_flow_conservation() {
        let p = gauss(0.1);
        let sp = SpectralParameter::new(2.0).unwrap();
        let probe = SpectralParameter::new(8.0).unwrap();
        let opts = SnapshotOptions {
            stride: 25,
            probes: vec![sp, probe],
        };
        let t = akappa_evolve(&p, sp, 0.1, 2e-3, &opts).unwrap();
        let first = &t.conserved[0];
        let last = t.conserved.last().unwrap();
        for i in 0..2 {
            let (a0, a1) = (first.a_values[i].2, last.a_values[i].2);
            assert!(
                (a1 - a0).norm() <= 1e-6 * a0.norm(),
                "{i}: {:e}",
                (a1 - a0).norm() / a0.norm()
            );
        }
        assert!((last.m - first.m).norm() <= 1e-8 * first.m.norm());
        // the state actually moves
        assert!(sup_diff(t.last().q(), p.q()) > 1e-4);
        let m = conserved_polynomials(t.last()).m;
        assert_eq!(m, last.m);
    }

    #[test]
    fn akappa_leading_order() {
        let p = gauss(0.01);
        let sp = SpectralParameter::new(4.0).unwrap();
        let d = akappa_rhs(&p, sp).unwrap();
        let g = p.grid();
        let k2q: Vec<C64> = p.q().iter().map(|v| sp.kappa2() * v).collect();
        let lead = g.derivative(&g.resolvent(&k2q, 2.0 * sp.tau()).unwrap());
        assert!(sup_diff(d.q(), &lead) < 1e-3 * sup_norm(&lead));
    }

    #[test]
    fn csv_columns() {
        let p = gauss(0.1);
        let probes = vec![
            SpectralParameter::new(4.0).unwrap(),
            SpectralParameter::new(-4.0).unwrap(),
        ];
        let t = dnls_evolve(&p, 0.002, 1e-3, &SnapshotOptions { stride: 1, probes }).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 1 + 4 + 6);
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
