use crate::{Error, Result, C64};

/// Polarization and spin-wave amplitudes of a single excitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicState {
    pub p: C64,
    pub s: C64,
}

impl AtomicState {
    pub fn new(p: C64, s: C64) -> Self {
        AtomicState { p, s }
    }

    pub fn ground() -> Self {
        AtomicState::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    /// Unit excitation stored in the spin wave.
    pub fn spin_excited() -> Self {
        AtomicState::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    /// |P|² + |S|².
    pub fn excitation(&self) -> f64 {
        self.p.norm_sqr() + self.s.norm_sqr()
    }

    pub fn distance(&self, other: &AtomicState) -> f64 {
        ((self.p - other.p).norm_sqr() + (self.s - other.s).norm_sqr()).sqrt()
    }
}

/// Fidelity of an entangled state after a linear mapping of efficiency η:
/// F = (1 + η)/2.
pub fn fidelity_from_efficiency(eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("efficiency must lie in [0, 1], got {eta}")));
    }
    Ok(0.5 * (1.0 + eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_values() {
        assert_eq!(fidelity_from_efficiency(1.0).unwrap(), 1.0);
        assert_eq!(fidelity_from_efficiency(0.0).unwrap(), 0.5);
        assert_eq!(fidelity_from_efficiency(0.5).unwrap(), 0.75);
        assert!(fidelity_from_efficiency(1.2).is_err());
        assert!(fidelity_from_efficiency(-0.1).is_err());
        assert!(fidelity_from_efficiency(f64::NAN).is_err());
    }
}
