use crate::{Error, Result, C64};

/// Relative tolerance for the cooperativity relation C = (g√N)²/(κγ).
const COOPERATIVITY_REL_TOL: f64 = 1e-12;

/// Fixed physics of a run. All rates are in units of γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Cooperativity C.
    pub c: f64,
    /// Optical polarization decay rate γ (1 in internal units).
    pub gamma: f64,
    /// One-photon detuning Δ.
    pub delta: f64,
    /// Spin-wave decay rate γ_s.
    pub gamma_s: f64,
    /// Cavity field decay half-width κ (full-cavity model only).
    pub kappa: Option<f64>,
    /// Collective coupling g√N (full-cavity model only).
    pub g_n: Option<f64>,
}

impl PhysicalParams {
    /// Bad-cavity parameters with γ = 1 and no spin-wave decay.
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        let p = PhysicalParams {
            c,
            gamma: 1.0,
            delta,
            gamma_s: 0.0,
            kappa: None,
            g_n: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Full-cavity parameters; C is derived from κ and g√N.
    pub fn from_cavity(kappa: f64, g_n: f64, gamma: f64, delta: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite() && g_n > 0.0 && g_n.is_finite()) {
            return Err(Error::domain(format!(
                "kappa and gN must be positive and finite (kappa = {kappa}, gN = {g_n})"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {gamma}")));
        }
        let p = PhysicalParams {
            c: g_n * g_n / (kappa * gamma),
            gamma,
            delta,
            gamma_s: 0.0,
            kappa: Some(kappa),
            g_n: Some(g_n),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma_s(mut self, gamma_s: f64) -> Result<Self> {
        self.gamma_s = gamma_s;
        self.validate()?;
        Ok(self)
    }

    /// Attach cavity parameters. They must reproduce the existing C.
    pub fn with_cavity(mut self, kappa: f64, g_n: f64) -> Result<Self> {
        self.kappa = Some(kappa);
        self.g_n = Some(g_n);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain(format!("cooperativity C must be > 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("detuning must be finite"));
        }
        if !(self.gamma_s >= 0.0 && self.gamma_s.is_finite()) {
            return Err(Error::domain(format!("gamma_s must be >= 0, got {}", self.gamma_s)));
        }
        match (self.kappa, self.g_n) {
            (None, None) => {}
            (Some(kappa), Some(g_n)) => {
                if !(kappa > 0.0 && kappa.is_finite() && g_n > 0.0 && g_n.is_finite()) {
                    return Err(Error::domain(format!(
                        "kappa and gN must be positive (kappa = {kappa}, gN = {g_n})"
                    )));
                }
                let implied = g_n * g_n / (kappa * self.gamma);
                if ((implied - self.c) / self.c).abs() > COOPERATIVITY_REL_TOL {
                    return Err(Error::domain(format!(
                        "C = {} inconsistent with gN^2/(kappa gamma) = {implied}",
                        self.c
                    )));
                }
            }
            _ => return Err(Error::domain("kappa and gN must be set together")),
        }
        Ok(())
    }

    /// γ(1+C), the total decay rate of the polarization.
    pub fn total_decay(&self) -> f64 {
        self.gamma * (1.0 + self.c)
    }

    /// γ(1+C) + iΔ.
    pub fn complex_decay(&self) -> C64 {
        C64::new(self.total_decay(), self.delta)
    }

    /// γ²(1+C)² + Δ².
    pub fn decay_norm_sq(&self) -> f64 {
        self.complex_decay().norm_sqr()
    }

    /// 2γ(1+C)/(γ²(1+C)²+Δ²): rate at which h(t,t') depletes the spin wave.
    pub fn depletion_coefficient(&self) -> f64 {
        2.0 * self.total_decay() / self.decay_norm_sq()
    }

    /// |γC + iΔ|, the reference rate for adiabaticity conditions.
    pub fn adiabatic_rate(&self) -> f64 {
        C64::new(self.gamma * self.c, self.delta).norm()
    }

    /// √(2γC), the cavity-mediated coupling of P to the output field.
    pub fn output_coupling(&self) -> f64 {
        (2.0 * self.gamma * self.c).sqrt()
    }

    /// C/(1+C).
    pub fn ideal_efficiency(&self) -> f64 {
        self.c / (1.0 + self.c)
    }

    pub fn has_cavity(&self) -> bool {
        self.kappa.is_some() && self.g_n.is_some()
    }

    /// κ/(g√N), the bad-cavity figure; `None` without cavity parameters.
    pub fn bad_cavity_ratio(&self) -> Option<f64> {
        Some(self.kappa? / self.g_n?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_cooperativity() {
        assert!(PhysicalParams::new(-1.0, 0.0).is_err());
        assert!(PhysicalParams::new(0.0, 0.0).is_err());
        assert!(PhysicalParams::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn cavity_constructor_derives_cooperativity() {
        let p = PhysicalParams::from_cavity(100.0, 10.0, 1.0, 0.0).unwrap();
        assert!((p.c - 1.0).abs() < 1e-15);
        assert_eq!(p.bad_cavity_ratio(), Some(10.0));
    }

    #[test]
    fn cooperativity_relation_enforced() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        assert!(p.with_cavity(100.0, 10.0).is_ok());
        assert!(p.with_cavity(100.0, 10.0 * (1.0 + 1e-9)).is_err());
        let p2 = PhysicalParams::new(2.0, 0.0).unwrap();
        assert!(p2.with_cavity(100.0, 10.0).is_err());
    }

    #[test]
    fn negative_spin_decay_rejected() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        assert!(p.with_gamma_s(-0.1).is_err());
        assert!(p.with_gamma_s(0.1).is_ok());
    }

    #[test]
    fn derived_rates() {
        let p = PhysicalParams::new(10.0, 3.0).unwrap();
        assert_eq!(p.total_decay(), 11.0);
        assert_eq!(p.decay_norm_sq(), 121.0 + 9.0);
        assert!((p.depletion_coefficient() - 22.0 / 130.0).abs() < 1e-15);
        assert!((p.ideal_efficiency() - 10.0 / 11.0).abs() < 1e-15);
    }
}
