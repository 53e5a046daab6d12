//! Green's function from the two decaying solutions of psi' = M psi.
//!
//! Both rays are integrated in exponentially normalized form
//! m(x) = e^{-+|tau| x} psi(x), so nothing over- or underflows.

use super::{rho_id_residual, DiagonalGreens, Method};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, C64};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

type V2 = [C64; 2];

struct Coeffs<'a> {
    a11: f64,
    a22: f64,
    q: &'a [C64],
    r: &'a [C64],
}

impl Coeffs<'_> {
    fn apply(&self, i: usize, m: V2) -> V2 {
        let i = i % self.q.len();
        [
            self.a11 * m[0] + self.q[i] * m[1],
            self.r[i] * m[0] + self.a22 * m[1],
        ]
    }
}

fn axpy(m: V2, s: C64, k: V2) -> V2 {
    [m[0] + s * k[0], m[1] + s * k[1]]
}

/// RK4 over the fine grid with step two fine cells; stores every `stride` fine cells.
fn integrate(c: &Coeffs, start: V2, fine: usize, stride: usize, forward: bool) -> Vec<V2> {
    let n_out = fine / stride;
    let mut out = vec![[C64::new(0.0, 0.0); 2]; n_out];
    let mut m = start;
    if forward {
        out[0] = m;
        let mut i = 0;
        while i + 2 <= fine - stride {
            m = step(c, m, i, 1);
            i += 2;
            if i % stride == 0 {
                out[i / stride] = m;
            }
        }
    } else {
        let mut i = fine;
        while i >= 2 {
            m = step(c, m, i, -1);
            i -= 2;
            if i.is_multiple_of(stride) {
                out[i / stride] = m;
            }
        }
    }
    out
}

// `dir` selects the direction; the physical step length is folded into the coefficients.
fn step(c: &Coeffs, m: V2, i: usize, dir: i64) -> V2 {
    let ds = C64::new(dir as f64 * 2.0, 0.0);
    let half = ds * 0.5;
    let mid = (i as i64 + dir) as usize;
    let end = (i as i64 + 2 * dir) as usize;
    let k1 = c.apply(i, m);
    let k2 = c.apply(mid, axpy(m, half, k1));
    let k3 = c.apply(mid, axpy(m, half, k2));
    let k4 = c.apply(end, axpy(m, ds, k3));
    [
        m[0] + ds / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        m[1] + ds / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

pub fn greens_jost(pair: &FieldPair, sp: SpectralParameter) -> Result<DiagonalGreens> {
    let grid = pair.grid().clone();
    let n = grid.len();
    let tau = sp.tau();
    let at = tau.abs();
    let k = sp.kappa();
    // fine cell hf, RK4 step 2 hf with 2|tau| * 2 hf <= 0.02
    let mut up = 2usize;
    while 4.0 * at * grid.h() / up as f64 > 0.02 {
        up *= 2;
    }
    let fine_grid = crate::grid::Grid::new(grid.half_length(), n * up)?;
    let hf = fine_grid.h();
    let kq: Vec<C64> = pair.q().iter().map(|v| k * v).collect();
    let kr: Vec<C64> = pair.r().iter().map(|v| k * v).collect();
    // coefficients pre-multiplied by the fine spacing
    let qf: Vec<C64> = grid
        .resample(&kq, &fine_grid)?
        .iter()
        .map(|v| v * hf)
        .collect();
    let rf: Vec<C64> = grid
        .resample(&kr, &fine_grid)?
        .iter()
        .map(|v| v * hf)
        .collect();
    let fine = n * up;
    let e1 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let e2 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];

    // right ray: m' = (M + |tau|) m, fixed at +L
    let cp = Coeffs {
        a11: (-tau + at) * hf,
        a22: (tau + at) * hf,
        q: &qf,
        r: &rf,
    };
    let plus = integrate(&cp, if tau > 0.0 { e1 } else { e2 }, fine, up, false);
    // left ray: m' = (M - |tau|) m, fixed at -L
    let cm = Coeffs {
        a11: (-tau - at) * hf,
        a22: (tau - at) * hf,
        q: &qf,
        r: &rf,
    };
    let minus = integrate(&cm, if tau > 0.0 { e2 } else { e1 }, fine, up, true);

    let s = sp.sign();
    let mut gamma = Vec::with_capacity(n);
    let mut g12 = Vec::with_capacity(n);
    let mut g21 = Vec::with_capacity(n);
    let mut w0 = C64::new(0.0, 0.0);
    let mut w_var = 0.0f64;
    for j in 0..n {
        let (p, m) = (plus[j], minus[j]);
        let w = p[0] * m[1] - m[0] * p[1];
        if j == 0 {
            w0 = w;
            if w.norm() < 1e-8 {
                return Err(Error::Wronskian(w.norm()));
            }
        }
        w_var = w_var.max((w - w0).norm());
        gamma.push(s * (p[0] * m[1] + m[0] * p[1]) / w - 1.0);
        g12.push(-s * p[0] * m[0] / w);
        g21.push(s * p[1] * m[1] / w);
    }
    let h12: Vec<C64> = g12.iter().map(|v| k * v).collect();
    let h21: Vec<C64> = g21.iter().map(|v| k * v).collect();
    let rho = rho_id_residual(&grid, pair, &gamma, &h12, &h21);
    Ok(DiagonalGreens {
        sp,
        gamma: ComplexField::new(grid.clone(), gamma),
        h12: ComplexField::new(grid.clone(), h12),
        h21: ComplexField::new(grid.clone(), h21),
        method: Method::Jost,
        iterations: 0,
        rho_id_residual: rho,
        wronskian: Some((w0, w_var)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::greens;
    use crate::grid::{sup_norm, Grid};
    use crate::profile::{sample_profile, ProfileSpec};

    #[test]
    fn free_solutions() {
        let g = Grid::new(20.0, 256).unwrap();
        let p = sample_profile(&ProfileSpec::Zero, &g).unwrap();
        for tau in [3.0, -3.0] {
            let dg = greens_jost(&p, SpectralParameter::new(tau).unwrap()).unwrap();
            assert!(sup_norm(dg.gamma()) < 1e-15);
            assert!(sup_norm(dg.h12()) == 0.0);
            let (w, var) = dg.wronskian.unwrap();
            assert!((w.norm() - 1.0).abs() < 1e-15 && var == 0.0);
        }
    }

    #[test]
    fn agrees_with_fixed_point() {
        let g = Grid::new(40.0, 1024).unwrap();
        let p = sample_profile(&ProfileSpec::gaussian(0.1), &g).unwrap();
        for tau in [2.0, -2.0, 8.0, -8.0] {
            let sp = SpectralParameter::new(tau).unwrap();
            let a = greens_jost(&p, sp).unwrap();
            let b = greens(&p, sp).unwrap();
            let d = a.distance(&b);
            assert!(d < 1e-8, "tau {tau}: {d:e}");
            assert!(a.wronskian.unwrap().1 < 1e-10);
        }
    }
}
