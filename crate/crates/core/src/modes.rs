//! Builtin input/target modes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::{Envelope, EnvelopeRole, Error, Result, TimeGrid, C64};

fn require_span(grid: &TimeGrid, duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::domain(format!("mode duration must be positive, got {duration}")));
    }
    if !grid.spans(0.0, duration) {
        return Err(Error::domain(format!(
            "grid [{}, {}] does not span [0, {duration}]",
            grid.t0(),
            grid.t1()
        )));
    }
    Ok(())
}

/// Gaussian-like pulse `A(e^{-30(t/T-1/2)²} - e^{-7.5})/√T` on `[0, T]`.
///
/// Vanishes exactly at both ends. `A` (≈ 2.09) is fixed by the trapezoidal
/// norm on `grid`.
pub fn make_gaussian_like_mode(duration: f64, grid: TimeGrid) -> Result<Envelope> {
    require_span(&grid, duration)?;
    let floor = (-7.5f64).exp();
    let n = grid.len();
    let shape = |i: usize| {
        if i == 0 || i + 1 == n {
            return 0.0;
        }
        // t/T - 1/2 from the index, so the samples are exactly mirror-symmetric
        let x = (2.0 * i as f64 - (n - 1) as f64) / (2.0 * (n - 1) as f64);
        ((-30.0 * x * x).exp() - floor) / duration.sqrt()
    };
    let values = (0..n).map(|i| C64::new(shape(i), 0.0)).collect();
    Envelope::new(grid, values, EnvelopeRole::InputField)?.normalized()
}

/// Flat-top mode `1/√T` on `[0, T]`.
pub fn make_square_mode(duration: f64, grid: TimeGrid) -> Result<Envelope> {
    require_span(&grid, duration)?;
    Envelope::from_fn(grid, EnvelopeRole::InputField, |_| C64::new(1.0, 0.0))?.normalized()
}

/// `sin²(πt/T)` pulse, normalized.
pub fn make_sine_squared_mode(duration: f64, grid: TimeGrid) -> Result<Envelope> {
    require_span(&grid, duration)?;
    Envelope::from_fn(grid, EnvelopeRole::InputField, |t| {
        C64::new((PI * t / duration).sin().powi(2), 0.0)
    })?
    .normalized()
}

/// Gaussian-like pulse with a quadratic phase `chirp·(t/T - 1/2)²`.
pub fn make_chirped_mode(duration: f64, chirp: f64, grid: TimeGrid) -> Result<Envelope> {
    let base = make_gaussian_like_mode(duration, grid)?;
    Ok(base.modulated(|t| {
        let x = t / duration - 0.5;
        C64::from_polar(1.0, chirp * x * x)
    }))
}

/// Named builtin mode shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeShape {
    GaussianLike,
    Square,
    SineSquared,
    /// Gaussian-like with a quadratic phase of the given strength (radians).
    Chirped(f64),
}

/// Default chirp strength for the `chirped` builtin.
pub const DEFAULT_CHIRP: f64 = 8.0;

impl ModeShape {
    pub fn build(&self, duration: f64, grid: TimeGrid) -> Result<Envelope> {
        match *self {
            ModeShape::GaussianLike => make_gaussian_like_mode(duration, grid),
            ModeShape::Square => make_square_mode(duration, grid),
            ModeShape::SineSquared => make_sine_squared_mode(duration, grid),
            ModeShape::Chirped(chirp) => make_chirped_mode(duration, chirp, grid),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModeShape::GaussianLike => "gaussian",
            ModeShape::Square => "square",
            ModeShape::SineSquared => "sine2",
            ModeShape::Chirped(_) => "chirped",
        }
    }

    /// False for shapes with discontinuous edges.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, ModeShape::Square)
    }
}

impl fmt::Display for ModeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModeShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" | "gaussian-like" => Ok(ModeShape::GaussianLike),
            "square" => Ok(ModeShape::Square),
            "sine2" | "sin2" => Ok(ModeShape::SineSquared),
            "chirped" => Ok(ModeShape::Chirped(DEFAULT_CHIRP)),
            other => Err(Error::domain(format!("unknown builtin mode `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_like_vanishes_at_ends() {
        let g = TimeGrid::span(1.0, 2001).unwrap();
        let e = make_gaussian_like_mode(1.0, g).unwrap();
        assert_eq!(e.values()[0], C64::new(0.0, 0.0));
        assert_eq!(e.values()[2000], C64::new(0.0, 0.0));
    }

    #[test]
    fn gaussian_like_normalization_constant() {
        let g = TimeGrid::span(1.0, 2001).unwrap();
        let e = make_gaussian_like_mode(1.0, g).unwrap();
        // Peak sample sits at t = T/2 where the bracket is 1 - e^{-7.5}.
        let a = e.values()[1000].re / (1.0 - (-7.5f64).exp());
        assert!((a - 2.09).abs() < 0.005, "A = {a}");
    }

    #[test]
    fn gaussian_like_norm_matches_fine_quadrature() {
        // Independent oracle: the analytic formula with the recovered A,
        // integrated by trapezoid on a 10^6-point grid.
        let duration = 1.0;
        let g = TimeGrid::span(duration, 2001).unwrap();
        let e = make_gaussian_like_mode(duration, g).unwrap();
        let floor = (-7.5f64).exp();
        let a = e.values()[1000].re * duration.sqrt() / (1.0 - floor);
        let m = 1_000_000usize;
        let h = duration / (m - 1) as f64;
        let mut acc = 0.0;
        for i in 0..m {
            let x = i as f64 * h / duration - 0.5;
            let v = a * ((-30.0 * x * x).exp() - floor) / duration.sqrt();
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
            acc += w * v * v;
        }
        acc *= h;
        assert!((acc - 1.0).abs() < 1e-9, "norm^2 = {acc}");
    }

    #[test]
    fn constructors_produce_unit_norm() {
        let dur = 3.0;
        let g = TimeGrid::span(dur, 1501).unwrap();
        for shape in [
            ModeShape::GaussianLike,
            ModeShape::Square,
            ModeShape::SineSquared,
            ModeShape::Chirped(5.0),
        ] {
            let e = shape.build(dur, g).unwrap();
            assert!((e.norm_sq() - 1.0).abs() < 1e-9, "{shape}");
        }
    }

    #[test]
    fn rejects_grid_not_spanning_duration() {
        let g = TimeGrid::new(0.0, 2.0, 101).unwrap();
        assert!(matches!(make_gaussian_like_mode(1.0, g), Err(Error::Domain(_))));
        let g = TimeGrid::new(0.5, 1.0, 101).unwrap();
        assert!(make_square_mode(1.0, g).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("gaussian".parse::<ModeShape>().unwrap(), ModeShape::GaussianLike);
        assert_eq!("sine2".parse::<ModeShape>().unwrap(), ModeShape::SineSquared);
        assert!("triangle".parse::<ModeShape>().is_err());
    }
}
