use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::grid::{C64, I};

/// tau = i kappa^2 together with a choice of square root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParameter {
    tau: f64,
    branch: i8,
}

impl SpectralParameter {
    pub fn new(tau: f64) -> Result<Self> {
        Self::with_branch(tau, 1)
    }

    pub fn with_branch(tau: f64, branch: i8) -> Result<Self> {
        if !tau.is_finite() || tau.abs() < 1.0 {
            return Err(Error::SpectralParameter(tau.abs()));
        }
        let branch = if branch < 0 { -1 } else { 1 };
        Ok(SpectralParameter { tau, branch })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn branch(&self) -> i8 {
        self.branch
    }

    pub fn sign(&self) -> f64 {
        self.tau.signum()
    }

    pub fn kappa(&self) -> C64 {
        let phase = -self.sign() * FRAC_PI_4;
        self.branch as f64 * self.tau.abs().sqrt() * C64::from_polar(1.0, phase)
    }

    /// kappa^2 = -i tau, identical on both branches.
    pub fn kappa2(&self) -> C64 {
        -I * self.tau
    }

    pub fn flipped(&self) -> Self {
        SpectralParameter {
            tau: self.tau,
            branch: -self.branch,
        }
    }

    /// The parameter at -conj(kappa): tau changes sign.
    pub fn reflected(&self) -> Self {
        let k = -self.kappa().conj();
        let s = SpectralParameter {
            tau: -self.tau,
            branch: 1,
        };
        if (s.kappa() - k).norm() < 1e-12 * k.norm() {
            s
        } else {
            s.flipped()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_squared_is_minus_i_tau() {
        for tau in [1.0, -1.0, 2.5, -8.0, 64.0] {
            for b in [1, -1] {
                let sp = SpectralParameter::with_branch(tau, b).unwrap();
                let k = sp.kappa();
                assert!((I * k * k - tau).norm() < 1e-13 * tau.abs());
                assert!((k * k - sp.kappa2()).norm() < 1e-13 * tau.abs());
            }
        }
    }

    #[test]
    fn below_threshold_rejected() {
        assert!(SpectralParameter::new(0.5).is_err());
        assert!(SpectralParameter::new(-0.99).is_err());
        assert!(SpectralParameter::new(f64::NAN).is_err());
    }

    #[test]
    fn reflection_negates_tau() {
        let sp = SpectralParameter::new(3.0).unwrap();
        let r = sp.reflected();
        assert_eq!(r.tau(), -3.0);
        assert!((r.kappa() + sp.kappa().conj()).norm() < 1e-14);
        let sp = SpectralParameter::with_branch(-5.0, -1).unwrap();
        assert!((sp.reflected().kappa() + sp.kappa().conj()).norm() < 1e-14);
    }
}
