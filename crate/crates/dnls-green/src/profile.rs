use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{sup_norm, ComplexField, Grid, C64, I};

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileSpec {
    /// a exp(-((x-x0)/w)^2 + i c x^2 + i k0 x)
    Gaussian {
        a: f64,
        w: f64,
        x0: f64,
        chirp: f64,
        k0: f64,
    },
    Sech {
        a: f64,
        w: f64,
        x0: f64,
    },
    Zero,
    File(PathBuf),
}

impl ProfileSpec {
    pub fn gaussian(a: f64) -> Self {
        ProfileSpec::Gaussian {
            a,
            w: 1.0,
            x0: 0.0,
            chirp: 0.0,
            k0: 0.0,
        }
    }

    pub fn with_amplitude(&self, amp: f64) -> Self {
        match self {
            ProfileSpec::Gaussian {
                w, x0, chirp, k0, ..
            } => ProfileSpec::Gaussian {
                a: amp,
                w: *w,
                x0: *x0,
                chirp: *chirp,
                k0: *k0,
            },
            ProfileSpec::Sech { w, x0, .. } => ProfileSpec::Sech {
                a: amp,
                w: *w,
                x0: *x0,
            },
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FieldPair {
    pub q: ComplexField,
    pub r: ComplexField,
    pub gauge: bool,
}

impl FieldPair {
    /// r = -conj(q).
    pub fn gauged(q: ComplexField) -> Self {
        let r = q.conj().scale(C64::new(-1.0, 0.0));
        FieldPair { q, r, gauge: true }
    }

    pub fn independent(q: ComplexField, r: ComplexField) -> Result<Self> {
        if q.grid() != r.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(FieldPair { q, r, gauge: false })
    }

    pub fn from_values(grid: &Arc<Grid>, q: Vec<C64>, r: Vec<C64>, gauge: bool) -> Self {
        FieldPair {
            q: ComplexField::new(grid.clone(), q),
            r: ComplexField::new(grid.clone(), r),
            gauge,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.q.grid()
    }

    pub fn q(&self) -> &[C64] {
        self.q.values()
    }

    pub fn r(&self) -> &[C64] {
        self.r.values()
    }

    pub fn tail(&self) -> f64 {
        self.q.tail().max(self.r.tail())
    }

    pub fn gauge_deviation(&self) -> f64 {
        self.q()
            .iter()
            .zip(self.r())
            .fold(0.0, |m, (q, r)| m.max((r + q.conj()).norm()))
    }

    pub fn is_zero(&self) -> bool {
        sup_norm(self.q()) == 0.0 && sup_norm(self.r()) == 0.0
    }

    /// Size used for the small-data guard.
    pub fn size(&self) -> f64 {
        self.q.l2_norm().max(self.r.l2_norm())
    }

    pub fn map(&self, fq: impl Fn(usize, C64) -> C64, fr: impl Fn(usize, C64) -> C64) -> Self {
        let g = self.grid();
        let q = self
            .q()
            .iter()
            .enumerate()
            .map(|(j, v)| fq(j, *v))
            .collect();
        let r = self
            .r()
            .iter()
            .enumerate()
            .map(|(j, v)| fr(j, *v))
            .collect();
        FieldPair::from_values(g, q, r, false)
    }

    pub fn resample(&self, target: &Arc<Grid>) -> Result<Self> {
        Ok(FieldPair {
            q: self.q.resample(target)?,
            r: self.r.resample(target)?,
            gauge: self.gauge,
        })
    }

    /// q -> lambda^{1/2} q(lambda x) by trigonometric interpolation.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::BadScale(lambda));
        }
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let g = self.grid();
        let q = rescale_values(g, self.q(), lambda);
        let r = if self.gauge {
            q.iter().map(|v| -v.conj()).collect()
        } else {
            rescale_values(g, self.r(), lambda)
        };
        Ok(FieldPair::from_values(g, q, r, self.gauge))
    }
}

fn rescale_values(g: &Grid, f: &[C64], lambda: f64) -> Vec<C64> {
    let s = g.fft(f);
    let n = g.len();
    let l = g.half_length();
    let amp = lambda.sqrt() / n as f64;
    (0..n)
        .map(|j| {
            let y = lambda * g.x(j) + l;
            // outside the box the profile is taken to be its (negligible) tail
            if !(0.0..2.0 * l).contains(&y) {
                return C64::new(0.0, 0.0);
            }
            let mut acc = C64::new(0.0, 0.0);
            for (k, c) in s.iter().enumerate() {
                if k == n / 2 {
                    acc += c * (g.xi()[k] * y).cos();
                } else {
                    acc += c * (I * g.xi()[k] * y).exp();
                }
            }
            acc * amp
        })
        .collect()
}

pub fn sample_profile(spec: &ProfileSpec, grid: &Arc<Grid>) -> Result<FieldPair> {
    let q = match spec {
        ProfileSpec::Zero => ComplexField::zeros(grid.clone()),
        ProfileSpec::Gaussian {
            a,
            w,
            x0,
            chirp,
            k0,
        } => ComplexField::from_fn(grid.clone(), |x| {
            let u = (x - x0) / w;
            *a * (C64::new(-u * u, chirp * x * x + k0 * x)).exp()
        }),
        ProfileSpec::Sech { a, w, x0 } => {
            ComplexField::from_fn(grid.clone(), |x| C64::new(a / ((x - x0) / w).cosh(), 0.0))
        }
        ProfileSpec::File(path) => {
            ComplexField::new(grid.clone(), read_profile_csv(path, grid.len())?)
        }
    };
    Ok(FieldPair::gauged(q))
}

/// Warning text when the boundary tails exceed `threshold`.
pub fn tail_warning(pair: &FieldPair, threshold: f64) -> Option<String> {
    let t = pair.tail();
    (t > threshold).then(|| format!("boundary tail {t:.3e} exceeds threshold {threshold:.1e}"))
}

fn read_profile_csv(path: &PathBuf, n: usize) -> Result<Vec<C64>> {
    let err = |msg: String| Error::ProfileFile {
        path: path.display().to_string(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut out = Vec::with_capacity(n);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(err(format!("line {}: expected two columns", i + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| err(format!("line {}: {e}", i + 1)))
        };
        out.push(C64::new(parse(cols[0])?, parse(cols[1])?));
    }
    if out.len() != n {
        return Err(err(format!("expected {n} rows, found {}", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::io::Write;

    #[test]
    fn zero_profile() {
        let g = Grid::new(40.0, 64).unwrap();
        let p = sample_profile(&ProfileSpec::Zero, &g).unwrap();
        assert!(p.is_zero());
        assert!(p.gauge);
    }

    #[test]
    fn gaussian_peak_and_mass() {
        let g = Grid::new(40.0, 1024).unwrap();
        let p = sample_profile(&ProfileSpec::gaussian(0.1), &g).unwrap();
        assert!((p.q()[512] - 0.1).norm() < 1e-15);
        assert!((p.r()[512] + 0.1).norm() < 1e-15);
        let m = p.q.l2_norm().powi(2);
        assert!((m - 0.01 * (PI / 2.0).sqrt()).abs() < 1e-14);
        assert!(p.gauge_deviation() <= 1e-14 * p.q.sup());
        assert!(tail_warning(&p, 1e-12).is_none());
    }

    #[test]
    fn wide_profile_warns() {
        let g = Grid::new(10.0, 64).unwrap();
        let spec = ProfileSpec::Sech {
            a: 0.1,
            w: 3.0,
            x0: 0.0,
        };
        let p = sample_profile(&spec, &g).unwrap();
        assert!(tail_warning(&p, 1e-6).is_some());
    }

    #[test]
    fn rescale_preserves_l2() {
        let g = Grid::new(40.0, 1024).unwrap();
        let p = sample_profile(&ProfileSpec::gaussian(0.1), &g).unwrap();
        let s = p.rescale(2.0).unwrap();
        assert!((s.q.l2_norm() - p.q.l2_norm()).abs() < 1e-8);
        assert!((s.q()[512] - 0.1 * 2f64.sqrt()).norm() < 1e-12);
        assert!(p.rescale(0.0).is_err());
        let z = sample_profile(&ProfileSpec::Zero, &g)
            .unwrap()
            .rescale(3.0)
            .unwrap();
        assert!(z.is_zero());
        let id = p.rescale(1.0).unwrap();
        assert_eq!(id.q(), p.q());
    }

    #[test]
    fn file_profile() {
        let g = Grid::new(5.0, 16).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for j in 0..16 {
            writeln!(f, "{},{}", j as f64 * 0.5, -(j as f64)).unwrap();
        }
        let p = sample_profile(&ProfileSpec::File(f.path().to_path_buf()), &g).unwrap();
        assert_eq!(p.q()[3], C64::new(1.5, -3.0));
        let g2 = Grid::new(5.0, 32).unwrap();
        assert!(sample_profile(&ProfileSpec::File(f.path().to_path_buf()), &g2).is_err());
        assert!(sample_profile(&ProfileSpec::File("/nonexistent/q.csv".into()), &g).is_err());
    }
}
