//! Exact integration of the cavity memory equations.
//!
//! Two models are provided. The bad-cavity model has the cavity field
//! adiabatically eliminated:
//!
//! ```text
//! E_out = E_in + i√(2γC) P
//! dP/dt = -(γ(1+C) + iΔ) P + iΩ S + i√(2γC) E_in
//! dS/dt = iΩ* P - γ_s S
//! ```
//!
//! The full-cavity model keeps the intracavity field `E` explicitly, with
//! `E_out = √(2κ) E - E_in`.
//!
//! Both are integrated with classical RK4 on the trajectory grid, with
//! controls and inputs sampled through [`Drive`] at the stage times. Each run
//! is repeated with doubled substeps until the reported efficiency settles.

mod diagnostics;
mod rk4;

pub use diagnostics::{conservation_residual, second_order_residual};
pub use rk4::IntegratorOptions;

use crate::envelope::Zero;
use crate::{AtomicState, Drive, Error, PhysicalParams, Result, TimeGrid, C64};
use rk4::{converge, drive_peak, initial_substeps, integrate};

/// Residual excitation above which a retrieval run is flagged incomplete.
pub const INCOMPLETE_RETRIEVAL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Storage,
    Retrieval,
    FullCavityStorage,
    FullCavityRetrieval,
}

impl RunKind {
    pub fn is_retrieval(&self) -> bool {
        matches!(self, RunKind::Retrieval | RunKind::FullCavityRetrieval)
    }
}

/// Sampled solution of one run plus its efficiencies.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: RunKind,
    pub grid: TimeGrid,
    pub p: Vec<C64>,
    pub s: Vec<C64>,
    pub e_out: Vec<C64>,
    /// Intracavity field; full-cavity runs only.
    pub e_cav: Option<Vec<C64>>,
    /// |S(end)|² for storage runs.
    pub eta_s: Option<f64>,
    /// ∫|E_out|² dt for retrieval runs.
    pub eta_r: Option<f64>,
    /// Total efficiency when a run composes storage and retrieval.
    pub eta_tot: Option<f64>,
    /// ∫|E_out|² dt over the window, integrated alongside the state.
    pub emitted: f64,
    /// |P|² + |S|² at the last node.
    pub residual_excitation: f64,
    /// Retrieval left more than [`INCOMPLETE_RETRIEVAL_THRESHOLD`] behind.
    pub incomplete: bool,
    pub initial: AtomicState,
    /// RK4 substeps per grid cell at the accepted resolution.
    pub substeps: usize,
    /// Efficiency change between the last two refinement levels.
    pub refinement_change: f64,
    /// κ/(g√N) for full-cavity runs.
    pub kappa_over_gn: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> AtomicState {
        let last = self.grid.len() - 1;
        AtomicState::new(self.p[last], self.s[last])
    }

    /// Efficiency relevant to the run kind.
    pub fn efficiency(&self) -> f64 {
        if self.kind.is_retrieval() {
            self.eta_r.unwrap_or(0.0)
        } else {
            self.eta_s.unwrap_or(0.0)
        }
    }

    /// Trapezoidal ∫|E_out|² over the stored samples.
    pub fn sampled_output_energy(&self) -> f64 {
        let abs2: Vec<f64> = self.e_out.iter().map(|v| v.norm_sqr()).collect();
        crate::envelope::trapezoid(&abs2, self.grid.dt())
    }
}

struct Samples {
    p: Vec<C64>,
    s: Vec<C64>,
    e_out: Vec<C64>,
    e_cav: Option<Vec<C64>>,
    emitted: f64,
}

fn run_bad_cavity(
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    substeps: usize,
    initial: AtomicState,
) -> Result<Samples> {
    let z = params.complex_decay();
    let k = params.output_coupling();
    let gs = params.gamma_s;
    let i = C64::i();
    let rhs = move |t: f64, y: &[C64; 3]| {
        let om = control.at(t);
        let ein = input.at(t);
        let (p, s) = (y[0], y[1]);
        let eout = ein + i * k * p;
        [
            -z * p + i * om * s + i * k * ein,
            i * om.conj() * p - gs * s,
            C64::new(eout.norm_sqr(), 0.0),
        ]
    };
    let n = grid.len();
    let mut out = Samples {
        p: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        e_out: Vec::with_capacity(n),
        e_cav: None,
        emitted: 0.0,
    };
    let y0 = [initial.p, initial.s, C64::new(0.0, 0.0)];
    let y = integrate(&rhs, grid, substeps, y0, |idx, y| {
        let t = grid.time(idx);
        out.p.push(y[0]);
        out.s.push(y[1]);
        out.e_out.push(input.at(t) + i * k * y[0]);
    })?;
    out.emitted = y[2].re;
    Ok(out)
}

fn run_full_cavity(
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    substeps: usize,
    initial: AtomicState,
) -> Result<Samples> {
    let (kappa, g_n) = cavity_of(params)?;
    let zp = C64::new(params.gamma, params.delta);
    let gs = params.gamma_s;
    let root = (2.0 * kappa).sqrt();
    let i = C64::i();
    let rhs = move |t: f64, y: &[C64; 4]| {
        let om = control.at(t);
        let ein = input.at(t);
        let (e, p, s) = (y[0], y[1], y[2]);
        let eout = e * root - ein;
        [
            -kappa * e + i * g_n * p + ein * root,
            -zp * p + i * g_n * e + i * om * s,
            i * om.conj() * p - gs * s,
            C64::new(eout.norm_sqr(), 0.0),
        ]
    };
    let n = grid.len();
    let mut out = Samples {
        p: Vec::with_capacity(n),
        s: Vec::with_capacity(n),
        e_out: Vec::with_capacity(n),
        e_cav: Some(Vec::with_capacity(n)),
        emitted: 0.0,
    };
    let y0 = [C64::new(0.0, 0.0), initial.p, initial.s, C64::new(0.0, 0.0)];
    let y = integrate(&rhs, grid, substeps, y0, |idx, y| {
        let t = grid.time(idx);
        out.p.push(y[1]);
        out.s.push(y[2]);
        out.e_out.push(y[0] * root - input.at(t));
        if let Some(cav) = out.e_cav.as_mut() {
            cav.push(y[0]);
        }
    })?;
    out.emitted = y[3].re;
    Ok(out)
}

fn cavity_of(params: &PhysicalParams) -> Result<(f64, f64)> {
    match (params.kappa, params.g_n) {
        (Some(k), Some(g)) => Ok((k, g)),
        _ => Err(Error::domain("full-cavity model needs kappa and gN")),
    }
}

fn finish(
    kind: RunKind,
    grid: TimeGrid,
    initial: AtomicState,
    params: &PhysicalParams,
    conv: rk4::Converged<Samples>,
) -> Trajectory {
    let samples = conv.value;
    let last = grid.len() - 1;
    let residual = samples.p[last].norm_sqr() + samples.s[last].norm_sqr();
    let retrieval = kind.is_retrieval();
    Trajectory {
        kind,
        grid,
        eta_s: (!retrieval).then(|| samples.s[last].norm_sqr()),
        eta_r: retrieval.then_some(samples.emitted),
        eta_tot: None,
        emitted: samples.emitted,
        residual_excitation: residual,
        incomplete: retrieval && residual > INCOMPLETE_RETRIEVAL_THRESHOLD,
        initial,
        substeps: conv.substeps,
        refinement_change: conv.change,
        kappa_over_gn: params.bad_cavity_ratio().filter(|_| {
            matches!(kind, RunKind::FullCavityStorage | RunKind::FullCavityRetrieval)
        }),
        p: samples.p,
        s: samples.s,
        e_out: samples.e_out,
        e_cav: samples.e_cav,
    }
}

fn bad_cavity_rate(params: &PhysicalParams, control: &dyn Drive, grid: &TimeGrid) -> f64 {
    params
        .complex_decay()
        .norm()
        .max(params.gamma_s)
        .max(drive_peak(control, grid))
}

pub(crate) fn simulate_bad_cavity(
    kind: RunKind,
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    initial: AtomicState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    params.validate()?;
    let m0 = initial_substeps(grid, bad_cavity_rate(params, control, grid), opts);
    let what = match kind {
        RunKind::Storage => "storage efficiency",
        _ => "retrieval efficiency",
    };
    let conv = converge(what, grid, m0, opts, |m| {
        let s = run_bad_cavity(params, control, input, grid, m, initial)?;
        let q = if kind.is_retrieval() {
            s.emitted
        } else {
            s.s.last().map_or(0.0, |v| v.norm_sqr())
        };
        Ok((s, q))
    })?;
    Ok(finish(kind, *grid, initial, params, conv))
}

/// Storage from `P(0) = S(0) = 0` driven by `input`; reports η_s = |S(T)|².
pub fn simulate_storage(
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    simulate_bad_cavity(RunKind::Storage, params, control, input, grid, AtomicState::ground(), opts)
}

/// Retrieval from `S(0) = 1`, `P(0) = 0` with no input; reports η_r = ∫|E_out|².
pub fn simulate_retrieval(
    params: &PhysicalParams,
    control: &dyn Drive,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    simulate_retrieval_from(params, control, grid, AtomicState::spin_excited(), opts)
}

/// Retrieval from an arbitrary initial `(P, S)`.
pub fn simulate_retrieval_from(
    params: &PhysicalParams,
    control: &dyn Drive,
    grid: &TimeGrid,
    initial: AtomicState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    simulate_bad_cavity(RunKind::Retrieval, params, control, &Zero, grid, initial, opts)
}

fn full_cavity_rate(params: &PhysicalParams, control: &dyn Drive, grid: &TimeGrid) -> Result<f64> {
    let (kappa, g_n) = cavity_of(params)?;
    Ok(kappa
        .max(g_n)
        .max(C64::new(params.gamma, params.delta).norm())
        .max(params.gamma_s)
        .max(drive_peak(control, grid)))
}

fn simulate_full(
    kind: RunKind,
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    initial: AtomicState,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    params.validate()?;
    let m0 = initial_substeps(grid, full_cavity_rate(params, control, grid)?, opts);
    let conv = converge("full-cavity efficiency", grid, m0, opts, |m| {
        let s = run_full_cavity(params, control, input, grid, m, initial)?;
        let q = if kind.is_retrieval() {
            s.emitted
        } else {
            s.s.last().map_or(0.0, |v| v.norm_sqr())
        };
        Ok((s, q))
    })?;
    Ok(finish(kind, *grid, initial, params, conv))
}

/// Storage with the intracavity field kept as a dynamical variable.
pub fn simulate_full_cavity(
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    simulate_full(
        RunKind::FullCavityStorage,
        params,
        control,
        input,
        grid,
        AtomicState::ground(),
        opts,
    )
}

/// Retrieval from `S(0) = 1` in the full-cavity model.
pub fn simulate_full_cavity_retrieval(
    params: &PhysicalParams,
    control: &dyn Drive,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    simulate_full(
        RunKind::FullCavityRetrieval,
        params,
        control,
        &Zero,
        grid,
        AtomicState::spin_excited(),
        opts,
    )
}

/// Storage followed by retrieval, with the spin wave decaying at `γ_s` for
/// the hold time between them.
pub fn compose_storage_retrieval(eta_s: f64, eta_r: f64, gamma_s: f64, hold: f64) -> f64 {
    eta_s * eta_r * (-2.0 * gamma_s * hold).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Envelope, EnvelopeRole};

    fn constant(v: f64) -> impl Fn(f64) -> C64 + Sync {
        move |_t| C64::new(v, 0.0)
    }

    #[test]
    fn zero_control_stores_nothing() {
        let p = PhysicalParams::new(10.0, 3.0).unwrap();
        let g = TimeGrid::span(2.0, 401).unwrap();
        let input = crate::modes::make_gaussian_like_mode(2.0, g).unwrap();
        let tr = simulate_storage(&p, &Zero, &input, &g, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.eta_s, Some(0.0));
        assert!(tr.s.iter().all(|s| *s == C64::new(0.0, 0.0)));
    }

    #[test]
    fn zero_input_keeps_ground_state() {
        let p = PhysicalParams::new(10.0, 0.0).unwrap();
        let g = TimeGrid::span(2.0, 101).unwrap();
        let tr =
            simulate_storage(&p, &constant(3.0), &Zero, &g, &IntegratorOptions::default()).unwrap();
        assert!(tr.p.iter().chain(&tr.s).chain(&tr.e_out).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn undriven_spin_wave_stays_put() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        let g = TimeGrid::span(5.0, 101).unwrap();
        let tr = simulate_retrieval(&p, &Zero, &g, &IntegratorOptions::default()).unwrap();
        assert_eq!(tr.eta_r, Some(0.0));
        assert!(tr.s.iter().all(|s| *s == C64::new(1.0, 0.0)));
        assert!(tr.p.iter().all(|p| p.norm() == 0.0));
        assert!(tr.incomplete);
    }

    #[test]
    fn constant_control_retrieves_half_at_unit_cooperativity() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        let g = TimeGrid::span(20.0, 4001).unwrap();
        let tr = simulate_retrieval(&p, &constant(5.0), &g, &IntegratorOptions::default()).unwrap();
        let eta = tr.eta_r.unwrap();
        assert!((eta - 0.5).abs() < 1e-3, "eta_r = {eta}");
        assert!(!tr.incomplete);
        // augmented integral agrees with trapezoid over the stored samples
        assert!((tr.sampled_output_energy() - eta).abs() < 1e-4);
    }

    #[test]
    fn retrieval_independent_of_control_shape() {
        let p = PhysicalParams::new(10.0, 0.0).unwrap();
        let g = TimeGrid::span(20.0, 4001).unwrap();
        let opts = IntegratorOptions::default();
        let flat = simulate_retrieval(&p, &constant(3.0), &g, &opts).unwrap();
        let ramp = |t: f64| C64::new(0.3 * t, 0.0);
        let ramped = simulate_retrieval(&p, &ramp, &g, &opts).unwrap();
        let target = 10.0 / 11.0;
        assert!((flat.eta_r.unwrap() - target).abs() < 1e-3);
        assert!((ramped.eta_r.unwrap() - target).abs() < 1e-3);
    }

    #[test]
    fn full_cavity_output_relation_holds_pointwise() {
        let p = PhysicalParams::from_cavity(20.0, 6.0, 1.0, 0.5).unwrap();
        let g = TimeGrid::span(4.0, 801).unwrap();
        let input = crate::modes::make_gaussian_like_mode(4.0, g).unwrap();
        let tr = simulate_full_cavity(&p, &constant(2.0), &input, &g, &IntegratorOptions::default())
            .unwrap();
        let cav = tr.e_cav.as_ref().unwrap();
        let root = (2.0 * 20.0f64).sqrt();
        for (i, (eo, ec)) in tr.e_out.iter().zip(cav).enumerate() {
            assert_eq!(*eo, ec * root - input.values()[i], "node {i}");
        }
        assert_eq!(tr.kappa_over_gn, Some(20.0 / 6.0));
    }

    #[test]
    fn full_cavity_requires_cavity_params() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        let g = TimeGrid::span(1.0, 11).unwrap();
        let r = simulate_full_cavity_retrieval(&p, &constant(1.0), &g, &IntegratorOptions::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn bad_cavity_limit_matches_eliminated_model() {
        let gn = 100.0;
        let kappa = 100.0 * gn;
        let full = PhysicalParams::from_cavity(kappa, gn, 1.0, 0.0).unwrap();
        let elim = PhysicalParams::new(full.c, 0.0).unwrap();
        let g = TimeGrid::span(30.0, 3001).unwrap();
        let opts = IntegratorOptions::default();
        let a = simulate_full_cavity_retrieval(&full, &constant(1.0), &g, &opts).unwrap();
        let b = simulate_retrieval(&elim, &constant(1.0), &g, &opts).unwrap();
        let dev = (a.eta_r.unwrap() - b.eta_r.unwrap()).abs();
        assert!(dev < 0.01 * b.eta_r.unwrap(), "deviation {dev}");
    }

    #[test]
    fn envelope_controls_are_accepted() {
        let p = PhysicalParams::new(1.0, 0.0).unwrap();
        let g = TimeGrid::span(20.0, 2001).unwrap();
        let ctrl = Envelope::from_fn(g, EnvelopeRole::Control, |_| C64::new(5.0, 0.0)).unwrap();
        let tr = simulate_retrieval(&p, &ctrl, &g, &IntegratorOptions::default()).unwrap();
        assert!((tr.eta_r.unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn composition_applies_hold_decay() {
        let v = compose_storage_retrieval(0.9, 0.8, 0.1, 5.0);
        assert!((v - 0.72 * (-1.0f64).exp()).abs() < 1e-15);
    }
}
