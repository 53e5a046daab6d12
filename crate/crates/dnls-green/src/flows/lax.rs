//! Lax pairs of both flows, checked weakly on smooth test fields, and the
//! evolution equations of the diagonal Green's functions along trajectories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{rhs, Flow, Trajectory, GREENS_MAX_ITER, GREENS_TOL};
use crate::error::{Error, Result};
use crate::greens::{greens_fixed_point_from, DiagonalGreens};
use crate::grid::{sup_norm, Grid, C64, I};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

/// Theta = vk kappa^3/(kappa^2 - vk^2) and Xi = vk^2 kappa^2/(kappa^2 - vk^2)
/// for generator kappa and probe vk.
pub fn theta_xi(gen: SpectralParameter, probe: SpectralParameter) -> Result<(C64, C64)> {
    if gen.tau() == probe.tau() {
        return Err(Error::CoincidentParameters(gen.tau()));
    }
    let (k, vk) = (gen.kappa(), probe.kappa());
    let den = gen.kappa2() - probe.kappa2();
    Ok((vk * k * k * k / den, vk * vk * k * k / den))
}

#[derive(Clone, Debug)]
pub struct LaxPairMatrix {
    pub flow: Flow,
    pub probe: SpectralParameter,
    pub p11: Vec<C64>,
    pub p12: Vec<C64>,
    pub p21: Vec<C64>,
    pub p22: Vec<C64>,
    pub theta: Option<C64>,
    pub xi: Option<C64>,
}

impl LaxPairMatrix {
    pub fn dnls(pair: &FieldPair, probe: SpectralParameter) -> Self {
        let grid = pair.grid();
        let (q, r) = (pair.q(), pair.r());
        let dq = grid.derivative(q);
        let dr = grid.derivative(r);
        let v = probe.kappa();
        let (v2, v3) = (v * v, v * v * v);
        let v4 = v2 * v2;
        let n = q.len();
        let diag: Vec<C64> = (0..n)
            .map(|j| 2.0 * I * v4 + I * v2 * q[j] * r[j])
            .collect();
        LaxPairMatrix {
            flow: Flow::Dnls,
            probe,
            p11: diag.iter().map(|d| -d).collect(),
            p12: (0..n)
                .map(|j| 2.0 * v3 * q[j] + I * v * dq[j] + v * q[j] * q[j] * r[j])
                .collect(),
            p21: (0..n)
                .map(|j| 2.0 * v3 * r[j] - I * v * dr[j] + v * q[j] * r[j] * r[j])
                .collect(),
            p22: diag,
            theta: None,
            xi: None,
        }
    }

    /// P for the flow of A(kappa) with the triple `gen` at the generator.
    pub fn akappa(gen: &DiagonalGreens, probe: SpectralParameter) -> Result<Self> {
        let (theta, xi) = theta_xi(gen.sp, probe)?;
        let k = gen.sp.kappa();
        let diag: Vec<C64> = gen.gamma().iter().map(|g| 0.5 * xi * (g + 1.0)).collect();
        Ok(LaxPairMatrix {
            flow: Flow::AKappa(gen.sp),
            probe,
            p11: diag.iter().map(|d| -d).collect(),
            p12: gen.h12().iter().map(|h| -theta * h / k).collect(),
            p21: gen.h21().iter().map(|h| -theta * h / k).collect(),
            p22: diag,
            theta: Some(theta),
            xi: Some(xi),
        })
    }

    fn apply(&self, a: &[C64], b: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let n = a.len();
        (
            (0..n)
                .map(|j| self.p11[j] * a[j] + self.p12[j] * b[j])
                .collect(),
            (0..n)
                .map(|j| self.p21[j] * a[j] + self.p22[j] * b[j])
                .collect(),
        )
    }
}

/// L(vk) = d + diag(tau, -tau) - vk [[0, q], [r, 0]].
fn apply_l(
    grid: &Grid,
    pair: &FieldPair,
    sp: SpectralParameter,
    a: &[C64],
    b: &[C64],
) -> (Vec<C64>, Vec<C64>) {
    let (q, r) = (pair.q(), pair.r());
    let da = grid.derivative(a);
    let db = grid.derivative(b);
    let (t, v) = (sp.tau(), sp.kappa());
    let n = a.len();
    (
        (0..n).map(|j| da[j] + t * a[j] - v * q[j] * b[j]).collect(),
        (0..n).map(|j| db[j] - t * b[j] - v * r[j] * a[j]).collect(),
    )
}

/// Seeded random smooth 2-vector fields: sums of modulated Gaussians.
pub fn random_test_fields(grid: &Grid, count: usize, seed: u64) -> Vec<[Vec<C64>; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = grid.xs();
    let component = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        let bumps: Vec<(f64, f64, C64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(0.5..2.0),
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(-2.0..2.0),
                )
            })
            .collect();
        xs.iter()
            .map(|x| {
                bumps
                    .iter()
                    .map(|(c, w, a, k)| {
                        let u = (x - c) / w;
                        a * (C64::new(-u * u, k * x)).exp()
                    })
                    .sum()
            })
            .collect()
    };
    (0..count)
        .map(|_| [component(&mut rng), component(&mut rng)])
        .collect()
}

/// max over test fields of ||dL/dt phi - [P, L] phi|| / ||phi||.
pub fn lax_residual(
    pair: &FieldPair,
    flow: Flow,
    probe: SpectralParameter,
    fields: &[[Vec<C64>; 2]],
) -> Result<f64> {
    let grid = pair.grid();
    let p = match flow {
        Flow::Dnls => LaxPairMatrix::dnls(pair, probe),
        Flow::AKappa(sp) => {
            let gen = greens_fixed_point_from(pair, sp, GREENS_TOL, GREENS_MAX_ITER, None)?;
            LaxPairMatrix::akappa(&gen, probe)?
        }
    };
    let dt = rhs(pair, flow)?;
    let v = probe.kappa();
    let mut worst = 0.0f64;
    for [a, b] in fields {
        let (la, lb) = apply_l(grid, pair, probe, a, b);
        let (pla, plb) = p.apply(&la, &lb);
        let (pa, pb) = p.apply(a, b);
        let (lpa, lpb) = apply_l(grid, pair, probe, &pa, &pb);
        let n = a.len();
        let ra: Vec<C64> = (0..n)
            .map(|j| -v * dt.q()[j] * b[j] - (pla[j] - lpa[j]))
            .collect();
        let rb: Vec<C64> = (0..n)
            .map(|j| -v * dt.r()[j] * a[j] - (plb[j] - lpb[j]))
            .collect();
        let num = (grid.l2_norm(&ra).powi(2) + grid.l2_norm(&rb).powi(2)).sqrt();
        let den = (grid.l2_norm(a).powi(2) + grid.l2_norm(b).powi(2)).sqrt();
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsReport {
    /// interior snapshot times
    pub times: Vec<f64>,
    pub g12: Vec<f64>,
    pub g21: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl DynamicsReport {
    pub fn max(&self) -> [f64; 3] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(*b));
        [m(&self.g12), m(&self.g21), m(&self.gamma)]
    }
}

/// Centered time differences of the triple at `probe` against the evolution
/// equations of the trajectory's flow.
pub fn greens_dynamics_check(
    traj: &Trajectory,
    probe: SpectralParameter,
) -> Result<DynamicsReport> {
    if traj.states.len() < 3 {
        return Err(Error::Invalid("need at least three snapshots".into()));
    }
    let solve = |p: &FieldPair, sp: SpectralParameter| {
        greens_fixed_point_from(p, sp, GREENS_TOL, GREENS_MAX_ITER, None)
    };
    let probes = traj
        .states
        .iter()
        .map(|s| solve(s, probe))
        .collect::<Result<Vec<_>>>()?;
    let step = traj.spacing();
    let v = probe.kappa();
    let mut rep = DynamicsReport {
        times: Vec::new(),
        g12: Vec::new(),
        g21: Vec::new(),
        gamma: Vec::new(),
    };
    for n in 1..traj.states.len() - 1 {
        let state = &traj.states[n];
        let grid = state.grid();
        let cur = &probes[n];
        let (g12, g21, gam) = (cur.g12(), cur.g21(), cur.gamma());
        let d = |f: fn(&DiagonalGreens) -> Vec<C64>| -> Vec<C64> {
            let (a, b) = (f(&probes[n + 1]), f(&probes[n - 1]));
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y) / (2.0 * step))
                .collect()
        };
        let dt12 = d(|g| g.g12());
        let dt21 = d(|g| g.g21());
        let dtg = d(|g| g.gamma().to_vec());
        let len = g12.len();
        let (r12, r21, rg): (Vec<C64>, Vec<C64>, Vec<C64>) = match traj.flow {
            Flow::Dnls => {
                let (q, r) = (state.q(), state.r());
                let dq = grid.derivative(q);
                let dr = grid.derivative(r);
                let dgam = grid.derivative(gam);
                let v2 = v * v;
                let v3 = v2 * v;
                let v4 = v2 * v2;
                let mut r12 = Vec::with_capacity(len);
                let mut r21 = Vec::with_capacity(len);
                let mut rg = Vec::with_capacity(len);
                for j in 0..len {
                    let a = 2.0 * I * v4 + I * v2 * q[j] * r[j];
                    let b12 = 2.0 * v3 * q[j] + I * v * dq[j] + v * q[j] * q[j] * r[j];
                    let b21 = 2.0 * v3 * r[j] - I * v * dr[j] + v * q[j] * r[j] * r[j];
                    r12.push(dt12[j] - (-2.0 * a * g12[j] - b12 * (gam[j] + 1.0)));
                    r21.push(dt21[j] - (2.0 * a * g21[j] + b21 * (gam[j] + 1.0)));
                    let rhs_g = 2.0 * v2 * dgam[j]
                        + 2.0 * I * v * (dq[j] * g21[j] + dr[j] * g12[j])
                        + q[j] * r[j] * dgam[j];
                    rg.push(dtg[j] - rhs_g);
                }
                (r12, r21, rg)
            }
            Flow::AKappa(gen_sp) => {
                let gen = solve(state, gen_sp)?;
                let (theta, xi) = theta_xi(gen_sp, probe)?;
                let (k12, k21, kg) = (gen.g12(), gen.g21(), gen.gamma());
                let mut r12 = Vec::with_capacity(len);
                let mut r21 = Vec::with_capacity(len);
                let mut rg = Vec::with_capacity(len);
                for j in 0..len {
                    r12.push(
                        dt12[j] - (-xi * g12[j] * (kg[j] + 1.0) + theta * k12[j] * (gam[j] + 1.0)),
                    );
                    r21.push(
                        dt21[j] - (xi * g21[j] * (kg[j] + 1.0) - theta * k21[j] * (gam[j] + 1.0)),
                    );
                    rg.push(dtg[j] - (-2.0 * theta * (k12[j] * g21[j] - k21[j] * g12[j])));
                }
                (r12, r21, rg)
            }
        };
        rep.times.push(traj.times[n]);
        rep.g12.push(sup_norm(&r12));
        rep.g21.push(sup_norm(&r21));
        rep.gamma.push(sup_norm(&rg));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{akappa_evolve, dnls_evolve, SnapshotOptions};
    use crate::profile::{sample_profile, ProfileSpec};

    fn gauss(a: f64) -> FieldPair {
        sample_profile(&ProfileSpec::gaussian(a), &Grid::new(40.0, 1024).unwrap()).unwrap()
    }

    #[test]
    fn theta_flips_under_exchange() {
        let a = SpectralParameter::new(2.0).unwrap();
        let b = SpectralParameter::new(8.0).unwrap();
        let (t_ab, _) = theta_xi(a, b).unwrap();
        let (t_ba, _) = theta_xi(b, a).unwrap();
        // Theta(k, vk) / Theta(vk, k) = -kappa^2 / vk^2
        let expect = -a.kappa2() / b.kappa2();
        assert!((t_ab / t_ba - expect).norm() < 1e-14);
        assert!(theta_xi(a, a).is_err());
    }

    #[test]
    fn dnls_lax_pair() {
        let p = gauss(0.1);
        let fields = random_test_fields(p.grid(), 8, 7);
        let res = lax_residual(
            &p,
            Flow::Dnls,
            SpectralParameter::new(4.0).unwrap(),
            &fields,
        )
        .unwrap();
        assert!(res < 1e-6, "{res:e}");
        let z = sample_profile(&ProfileSpec::Zero, p.grid()).unwrap();
        let res0 = lax_residual(
            &z,
            Flow::Dnls,
            SpectralParameter::new(4.0).unwrap(),
            &fields,
        )
        .unwrap();
        assert!(res0 < 1e-9, "{res0:e}");
    }

    #[test]
    fn akappa_lax_pair() {
        let p = gauss(0.1);
        let fields = random_test_fields(p.grid(), 8, 11);
        let flow = Flow::AKappa(SpectralParameter::new(2.0).unwrap());
        let res = lax_residual(&p, flow, SpectralParameter::new(8.0).unwrap(), &fields).unwrap();
        assert!(res < 1e-6, "{res:e}");
        assert!(lax_residual(&p, flow, SpectralParameter::new(2.0).unwrap(), &fields).is_err());
    }

    #[test]
    fn test_fields_are_seeded() {
        let g = Grid::new(40.0, 256).unwrap();
        assert_eq!(
            random_test_fields(&g, 2, 3)[1][0],
            random_test_fields(&g, 2, 3)[1][0]
        );
        assert_ne!(
            random_test_fields(&g, 1, 3)[0][0],
            random_test_fields(&g, 1, 4)[0][0]
        );
    }

    #[test]
    fn dnls_greens_dynamics() {
        let p = gauss(0.1);
        let t = dnls_evolve(&p, 0.004, 1e-3, &SnapshotOptions::default()).unwrap();
        let rep = greens_dynamics_check(&t, SpectralParameter::new(4.0).unwrap()).unwrap();
        assert_eq!(rep.times.len(), 3);
        let m = rep.max();
        assert!(m.iter().all(|v| *v < 1e-5), "{m:?}");
    }

    #[test]
    fn akappa_greens_dynamics() {
        let p = gauss(0.1);
        let sp = SpectralParameter::new(2.0).unwrap();
        let t = akappa_evolve(&p, sp, 0.004, 1e-3, &SnapshotOptions::default()).unwrap();
        let rep = greens_dynamics_check(&t, SpectralParameter::new(8.0).unwrap()).unwrap();
        let m = rep.max();
        assert!(m.iter().all(|v| *v < 1e-5), "{m:?}");
    }
}
