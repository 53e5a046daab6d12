use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::profile::FieldPair;
use crate::spectral::SpectralParameter;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HsNorms {
    /// s = 0: weights (tau^2 + xi^2)^{-1/2} on both sides
    pub hs_half: f64,
    pub hs_s: f64,
}

/// Hilbert-Schmidt norm of (d + tau)^{sigma} kappa q (d - tau)^{-1/2} as the
/// double frequency sum of |q^(xi - eta)|^2 (tau^2+xi^2)^sigma (tau^2+eta^2)^{-1/2}.
fn hs_norm(spec2: &[f64], xi: &[f64], dxi: f64, tau: f64, sigma: f64, kappa_abs2: f64) -> f64 {
    let n = spec2.len();
    let half = (n / 2) as isize;
    let t2 = tau * tau;
    let w_right: Vec<f64> = xi.iter().map(|e| (t2 + e * e).powf(-0.5)).collect();
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|k| {
            let wl = (t2 + xi[k] * xi[k]).powf(sigma);
            let mut acc = 0.0;
            for l in 0..n {
                let d = signed(k, n) - signed(l, n);
                if d.abs() >= half {
                    continue;
                }
                acc += spec2[d.rem_euclid(n as isize) as usize] * w_right[l];
            }
            acc * wl
        })
        .sum();
    (kappa_abs2 / (2.0 * std::f64::consts::PI) * total * dxi * dxi).sqrt()
}

fn signed(k: usize, n: usize) -> isize {
    if k < n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

pub fn hs_norm_lambda(pair: &FieldPair, sp: SpectralParameter, s: f64) -> Result<HsNorms> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::Invalid(format!(
            "regularity s = {s} outside (0, 1/2)"
        )));
    }
    let grid = pair.grid();
    let h = grid.h();
    // |q^(xi_k)|^2 with q^ = (2 pi)^{-1/2} int e^{-i x xi} q
    let spec2: Vec<f64> = grid
        .fft(pair.q())
        .iter()
        .map(|v| v.norm_sqr() * h * h / (2.0 * std::f64::consts::PI))
        .collect();
    let dxi = std::f64::consts::PI / grid.half_length();
    let ka2 = sp.tau().abs();
    let tau = sp.tau();
    Ok(HsNorms {
        hs_half: hs_norm(&spec2, grid.xi(), dxi, tau, -0.5, ka2),
        hs_s: hs_norm(&spec2, grid.xi(), dxi, tau, s - 0.5, ka2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profile::{sample_profile, ProfileSpec};

    #[test]
    fn zero_and_scaling() {
        let g = Grid::new(40.0, 256).unwrap();
        let sp = SpectralParameter::new(4.0).unwrap();
        let z = hs_norm_lambda(&sample_profile(&ProfileSpec::Zero, &g).unwrap(), sp, 0.25).unwrap();
        assert_eq!((z.hs_half, z.hs_s), (0.0, 0.0));
        let a = hs_norm_lambda(
            &sample_profile(&ProfileSpec::gaussian(0.1), &g).unwrap(),
            sp,
            0.25,
        )
        .unwrap();
        let b = hs_norm_lambda(
            &sample_profile(&ProfileSpec::gaussian(0.2), &g).unwrap(),
            sp,
            0.25,
        )
        .unwrap();
        assert!((b.hs_half / a.hs_half - 2.0).abs() < 1e-12);
        assert!(hs_norm_lambda(&sample_profile(&ProfileSpec::Zero, &g).unwrap(), sp, 0.5).is_err());
    }

    #[test]
    fn matches_continuum_double_integral() {
        let g = Grid::new(40.0, 512).unwrap();
        let p = sample_profile(&ProfileSpec::gaussian(0.1), &g).unwrap();
        let tau = 2.0;
        let n = hs_norm_lambda(&p, SpectralParameter::new(tau).unwrap(), 0.25).unwrap();
        // independent quadrature: q^(z) = 0.1 e^{-z^2/4}/sqrt(2)
        // over the same frequency band as the grid, with a finer midpoint rule
        let band = 256.0 * std::f64::consts::PI / 40.0;
        let m = 4000;
        let dz = 2.0 * band / m as f64;
        let mut tot = 0.0;
        for i in 0..m {
            let xi = -band + (i as f64 + 0.5) * dz;
            for j in 0..m {
                let eta = -band + (j as f64 + 0.5) * dz;
                let d = xi - eta;
                if d.abs() > 12.0 {
                    continue;
                }
                let qh2 = 0.01 * (-d * d / 2.0).exp() / 2.0;
                tot += qh2 / ((tau * tau + xi * xi) * (tau * tau + eta * eta)).sqrt();
            }
        }
        let oracle = (tau / (2.0 * std::f64::consts::PI) * tot * dz * dz).sqrt();
        assert!(
            (n.hs_half - oracle).abs() < 1e-3 * oracle,
            "{} {}",
            n.hs_half,
            oracle
        );
    }
}
