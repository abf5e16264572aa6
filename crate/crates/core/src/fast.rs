//! Fast storage and retrieval with a short resonant π pulse.
//!
//! A π pulse much stronger than `γC` swaps polarization and spin wave,
//! `(P, S) → (iS, iP)`. Retrieval then reduces to free decay of `P` and
//! storage to free accumulation of `P` followed by a swap at the end of the
//! input window.

use std::f64::consts::FRAC_PI_2;

use crate::dynamics::{simulate_bad_cavity, IntegratorOptions, RunKind, Trajectory};
use crate::envelope::{trapezoid_c, Zero};
use crate::{AtomicState, Envelope, EnvelopeRole, Error, PhysicalParams, Result, TimeGrid, C64};

/// Nodes used to resolve the finite π pulse.
const PULSE_NODES: usize = 257;

/// Rectangular resonant π pulse of real amplitude `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiPulseSpec {
    omega: f64,
    duration: f64,
}

impl PiPulseSpec {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!("pi pulse amplitude must be positive, got {omega}")));
        }
        Ok(PiPulseSpec { omega, duration: FRAC_PI_2 / omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `π/(2Ω)`.
    pub fn duration(&self) -> f64 {
        self.duration
    }
}

/// The ideal π-pulse map `(P, S) → (iS, iP)`.
pub fn pi_pulse_map(state: AtomicState) -> AtomicState {
    let i = C64::i();
    AtomicState::new(i * state.s, i * state.p)
}

/// Output after an ideal π pulse at the start of `grid`, starting from `S = 1`:
/// `E_out(t) = −√(2γC)·exp(−(γ(1+C)+iΔ)(t − t0))`.
pub fn fast_retrieval_output(params: &PhysicalParams, grid: TimeGrid) -> Envelope {
    let k = params.output_coupling();
    let z = params.complex_decay();
    let t0 = grid.t0();
    Envelope::from_fn(grid, EnvelopeRole::OutputField, |t| -k * (-z * (t - t0)).exp())
        .expect("decaying exponential is finite")
}

/// The optimal fast-storage input and its exact norm.
#[derive(Debug, Clone)]
pub struct FastInput {
    /// `f(t) = −√(2γ(1+C))·exp((γ(1+C)+iΔ)(t − T))` as given, not renormalized.
    pub mode: Envelope,
    /// `1 − exp(−2γ(1+C)T)`.
    pub norm_sq: f64,
    /// `norm_sq` falls short of 1 by more than 1e-4.
    pub incomplete: bool,
}

impl FastInput {
    pub fn normalized(&self) -> Result<Envelope> {
        self.mode.normalized()
    }
}

/// Optimal input for fast storage over `[0, T]`.
pub fn optimal_fast_input(params: &PhysicalParams, duration: f64, grid: TimeGrid) -> Result<FastInput> {
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::domain(format!("duration must be positive, got {duration}")));
    }
    if !grid.spans(0.0, duration) {
        return Err(Error::domain(format!(
            "grid [{}, {}] does not span [0, {duration}]",
            grid.t0(),
            grid.t1()
        )));
    }
    let mode = Envelope::from_fn(grid, EnvelopeRole::InputField, |t| fast_kernel(params, duration, t))?;
    let norm_sq = -(-2.0 * params.total_decay() * duration).exp_m1();
    Ok(FastInput { mode, norm_sq, incomplete: norm_sq < 1.0 - 1e-4 })
}

fn fast_kernel(params: &PhysicalParams, duration: f64, t: f64) -> C64 {
    let root = (2.0 * params.total_decay()).sqrt();
    -root * (params.complex_decay() * (t - duration)).exp()
}

/// `S(T) = √(C/(1+C)) ∫ f(t) E_in(t) dt` for an ideal π pulse at `T`, the end
/// of the input's window.
pub fn fast_storage_amplitude(params: &PhysicalParams, input: &Envelope) -> C64 {
    let grid = input.grid();
    let duration = grid.t1();
    let prod: Vec<C64> = grid
        .times()
        .zip(input.values())
        .map(|(t, e)| fast_kernel(params, duration, t) * e)
        .collect();
    params.ideal_efficiency().sqrt() * trapezoid_c(&prod, grid.dt())
}

/// Outcome of fast storage with a finite π pulse.
#[derive(Debug, Clone)]
pub struct FastProtocolResult {
    /// Free accumulation over the input window, `Ω = 0`.
    pub storage: Trajectory,
    /// The π pulse itself on its own fine grid.
    pub pulse: Trajectory,
    /// Undriven evolution after the pulse up to the end of the run grid.
    pub hold: Option<Trajectory>,
    pub before_pulse: AtomicState,
    pub after_pulse: AtomicState,
    /// `pi_pulse_map(before_pulse)`.
    pub ideal: AtomicState,
    /// Euclidean distance between `after_pulse` and `ideal`.
    pub deviation: f64,
    /// `|S|²` at the end of the run grid.
    pub eta_s: f64,
}

/// Fast storage of `input` with a rectangular π pulse starting at the end
/// of the input window. `grid` is the whole run window and must contain the
/// pulse; its spacing also sets the storage resolution.
pub fn simulate_fast_protocol(
    params: &PhysicalParams,
    input: &Envelope,
    pulse: PiPulseSpec,
    grid: &TimeGrid,
    opts: &IntegratorOptions,
) -> Result<FastProtocolResult> {
    params.validate()?;
    let t0 = grid.t0();
    let t_pulse = input.grid().t1();
    let t_end = t_pulse + pulse.duration;
    let tol = 1e-12 * grid.duration().max(1.0);
    if t_pulse <= t0 || t_end > grid.t1() + tol {
        return Err(Error::domain(format!(
            "pi pulse window [{t_pulse}, {t_end}] does not fit in the run grid [{t0}, {}]",
            grid.t1()
        )));
    }
    let cells = |a: f64, b: f64| (((b - a) / grid.dt()).round() as usize).max(1);

    let store_grid = TimeGrid::new(t0, t_pulse, cells(t0, t_pulse) + 1)?;
    let control_off = Zero;
    let storage = simulate_bad_cavity(
        RunKind::Storage,
        params,
        &control_off,
        input,
        &store_grid,
        AtomicState::ground(),
        opts,
    )?;
    let before_pulse = storage.final_state();

    let omega = C64::new(pulse.omega, 0.0);
    let on = move |_t: f64| omega;
    let pulse_grid = TimeGrid::new(t_pulse, t_end, PULSE_NODES)?;
    let pulse_run =
        simulate_bad_cavity(RunKind::Storage, params, &on, &Zero, &pulse_grid, before_pulse, opts)?;
    let after_pulse = pulse_run.final_state();
    let ideal = pi_pulse_map(before_pulse);

    let hold = if grid.t1() - t_end > tol {
        let hold_grid = TimeGrid::new(t_end, grid.t1(), cells(t_end, grid.t1()) + 1)?;
        Some(simulate_bad_cavity(
            RunKind::Storage,
            params,
            &control_off,
            &Zero,
            &hold_grid,
            after_pulse,
            opts,
        )?)
    } else {
        None
    };
    let eta_s = hold
        .as_ref()
        .map_or(after_pulse.s.norm_sqr(), |h| h.final_state().s.norm_sqr());
    Ok(FastProtocolResult {
        storage,
        pulse: pulse_run,
        hold,
        before_pulse,
        after_pulse,
        ideal,
        deviation: after_pulse.distance(&ideal),
        eta_s,
    })
}
