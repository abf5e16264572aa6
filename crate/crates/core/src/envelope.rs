//! Complex envelopes on uniform grids, with trapezoidal L² semantics.

use crate::{Error, Result, TimeGrid, C64};

/// What an envelope represents. Informational; operations do not branch on it
/// except for output labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeRole {
    InputField,
    OutputField,
    Control,
    SpinMode,
}

impl EnvelopeRole {
    pub fn label(&self) -> &'static str {
        match self {
            EnvelopeRole::InputField => "E_in",
            EnvelopeRole::OutputField => "E_out",
            EnvelopeRole::Control => "omega",
            EnvelopeRole::SpinMode => "spin_mode",
        }
    }
}

/// Anything that can be evaluated as a complex drive at time `t`.
///
/// The integrators sample controls and input fields through this trait at
/// RK4 stage times, so envelopes are linearly interpolated between nodes.
pub trait Drive: Sync {
    fn at(&self, t: f64) -> C64;
}

impl<F> Drive for F
where
    F: Fn(f64) -> C64 + Sync,
{
    fn at(&self, t: f64) -> C64 {
        self(t)
    }
}

/// The identically zero drive.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Drive for Zero {
    fn at(&self, _t: f64) -> C64 {
        C64::new(0.0, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    grid: TimeGrid,
    values: Vec<C64>,
    role: EnvelopeRole,
}

impl Envelope {
    pub fn new(grid: TimeGrid, values: Vec<C64>, role: EnvelopeRole) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "envelope has {} samples for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::domain("envelope samples must be finite"));
        }
        Ok(Envelope { grid, values, role })
    }

    pub fn from_fn(grid: TimeGrid, role: EnvelopeRole, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values = grid.times().map(f).collect();
        Self::new(grid, values, role)
    }

    pub fn zeros(grid: TimeGrid, role: EnvelopeRole) -> Self {
        Envelope {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
            role,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn role(&self) -> EnvelopeRole {
        self.role
    }

    pub fn with_role(mut self, role: EnvelopeRole) -> Self {
        self.role = role;
        self
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// ∫|values|² dt by the trapezoidal rule.
    pub fn norm_sq(&self) -> f64 {
        let abs2: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid(&abs2, self.grid.dt())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rescaled to unit trapezoidal norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("cannot normalize an envelope with vanishing norm"));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Envelope {
            grid: self.grid,
            values: self.values.iter().map(|v| v * k).collect(),
            role: self.role,
        }
    }

    /// Pointwise product with `f(t)`.
    pub fn modulated(&self, f: impl Fn(f64) -> C64) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.grid.times())
            .map(|(v, t)| v * f(t))
            .collect();
        Envelope { grid: self.grid, values, role: self.role }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation onto another grid, zero outside this envelope's
    /// window.
    pub fn resampled(&self, grid: TimeGrid) -> Self {
        let values = grid.times().map(|t| self.at(t)).collect();
        Envelope { grid, values, role: self.role }
    }
}

impl Drive for Envelope {
    /// Linear interpolation between nodes; zero outside the grid window.
    fn at(&self, t: f64) -> C64 {
        match self.grid.locate(t) {
            Some((i, frac)) => self.values[i] * (1.0 - frac) + self.values[i + 1] * frac,
            None => C64::new(0.0, 0.0),
        }
    }
}

/// Conjugated, time-flipped copy: `E(t) -> E*(t0 + t1 - t)` on the same grid.
/// An involution that preserves the norm exactly.
pub fn time_reverse(env: &Envelope) -> Envelope {
    let values = env.values.iter().rev().map(|v| v.conj()).collect();
    Envelope { grid: env.grid, values, role: env.role }
}

/// Trapezoidal inner product ⟨a, b⟩ = ∫ a*(t) b(t) dt.
pub fn mode_overlap(a: &Envelope, b: &Envelope) -> Result<C64> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::domain("mode_overlap needs envelopes on the same grid"));
    }
    let prod: Vec<C64> = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).collect();
    Ok(trapezoid_c(&prod, a.grid.dt()))
}

pub(crate) fn trapezoid(y: &[f64], dt: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = y[1..n - 1].iter().sum();
            dt * (0.5 * (y[0] + y[n - 1]) + inner)
        }
    }
}

pub(crate) fn trapezoid_c(y: &[C64], dt: f64) -> C64 {
    match y.len() {
        0 | 1 => C64::new(0.0, 0.0),
        n => {
            let inner: C64 = y[1..n - 1].iter().sum();
            (inner + (y[0] + y[n - 1]) * 0.5) * dt
        }
    }
}

/// Running trapezoid integral from the first node: out[k] = ∫_{t0}^{t_k}.
pub(crate) fn cumulative_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dt;
        out.push(acc);
    }
    out
}

/// Running trapezoid integral to the last node: out[k] = ∫_{t_k}^{t1}.
///
/// Accumulates from the end, so applying it to a reversed array reproduces
/// `cumulative_trapezoid` of the original bit for bit.
pub(crate) fn tail_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut rev: Vec<f64> = y.to_vec();
    rev.reverse();
    let mut out = cumulative_trapezoid(&rev, dt);
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::span(2.0, 201).unwrap()
    }

    fn bump(grid: TimeGrid, center: f64, phase: f64) -> Envelope {
        Envelope::from_fn(grid, EnvelopeRole::InputField, |t| {
            let x = t - center;
            C64::from_polar((-8.0 * x * x).exp(), phase * t)
        })
        .unwrap()
    }

    #[test]
    fn overlap_with_self_is_norm_sq() {
        let f = bump(grid(), 1.0, 0.7);
        let o = mode_overlap(&f, &f).unwrap();
        assert!((o.re - f.norm_sq()).abs() < 1e-14);
        assert!(o.im.abs() < 1e-14);
    }

    #[test]
    fn overlap_conjugate_symmetric() {
        let f = bump(grid(), 0.8, 0.3);
        let g = bump(grid(), 1.2, -1.1);
        let fg = mode_overlap(&f, &g).unwrap();
        let gf = mode_overlap(&g, &f).unwrap();
        assert!((fg - gf.conj()).norm() < 1e-14);
    }

    #[test]
    fn disjoint_modes_are_orthogonal() {
        let g = grid();
        let a = Envelope::from_fn(g, EnvelopeRole::InputField, |t| {
            C64::new(if t < 0.9 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let b = Envelope::from_fn(g, EnvelopeRole::InputField, |t| {
            C64::new(if t > 1.1 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        assert_eq!(mode_overlap(&a, &b).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let a = bump(grid(), 1.0, 0.0);
        let b = bump(TimeGrid::span(2.0, 101).unwrap(), 1.0, 0.0);
        assert!(matches!(mode_overlap(&a, &b), Err(Error::Domain(_))));
    }

    #[test]
    fn time_reverse_of_real_symmetric_mode_is_identity() {
        let f = crate::modes::make_gaussian_like_mode(2.0, grid()).unwrap();
        let r = time_reverse(&f);
        let dev = f
            .values()
            .iter()
            .zip(r.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn time_reverse_negates_phase_slope() {
        let omega = 3.0;
        let g = grid();
        let f = bump(g, 1.0, omega);
        let r = time_reverse(&f);
        // E*(T - t) = g(T - t) e^{iω(t - T)}, and g is even about T/2.
        for (i, t) in g.times().enumerate() {
            let expected = C64::from_polar((-8.0 * (t - 1.0) * (t - 1.0)).exp(), omega * (t - 2.0));
            assert!((r.values()[i] - expected).norm() < 1e-12);
        }
        assert!((r.norm_sq() - f.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn time_reverse_is_involution() {
        let f = bump(grid(), 0.6, 2.5);
        assert_eq!(time_reverse(&time_reverse(&f)), f);
    }

    #[test]
    fn interpolation_and_outside_zero() {
        let g = TimeGrid::span(1.0, 3).unwrap();
        let e = Envelope::new(
            g,
            vec![C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 4.0)],
            EnvelopeRole::Control,
        )
        .unwrap();
        assert_eq!(e.at(0.25), C64::new(1.0, 0.0));
        assert_eq!(e.at(0.75), C64::new(1.0, 2.0));
        assert_eq!(e.at(1.5), C64::new(0.0, 0.0));
    }

    #[test]
    fn tail_matches_reversed_cumulative() {
        let y: Vec<f64> = (0..57).map(|i| ((i as f64) * 0.37).sin().powi(2)).collect();
        let mut rev = y.clone();
        rev.reverse();
        let tail = tail_trapezoid(&rev, 0.01);
        let cum = cumulative_trapezoid(&y, 0.01);
        for k in 0..y.len() {
            assert_eq!(tail[k], cum[y.len() - 1 - k]);
        }
    }
}
