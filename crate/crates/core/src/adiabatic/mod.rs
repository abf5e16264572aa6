//! Adiabatic-limit solutions and closed-form optimal control shaping.
//!
//! With `P` adiabatically eliminated, both storage and retrieval depend on the
//! control only through `h(t, t') = ∫_t^{t'} |Ω|²`. The optimal controls below
//! invert the norm relations for `h` through a logarithm, so no root finding
//! is involved.

mod margins;
mod shaping;

pub use margins::{adiabaticity_margins, AdiabaticityMargins, ADIABATIC_RATIO_LIMIT, ADIABATIC_TCG_MIN};
pub use shaping::{
    retrieval_control_for_mode, retrieval_decay_weight, storage_control_for_mode,
    ShapingDirection, ShapingOptions, ShapingResult,
};

use crate::envelope::{cumulative_trapezoid, tail_trapezoid, trapezoid_c};
use crate::{Envelope, EnvelopeRole, Error, PhysicalParams, Result, C64};

/// `h(t, t1) = ∫_t^{t1} |Ω|² dt`, trapezoidal between nodes and exact for the
/// linear interpolant of `|Ω|²` inside a cell.
pub fn h_integral(control: &Envelope, t: f64, t1: f64) -> Result<f64> {
    if t > t1 {
        return Err(Error::domain(format!("h_integral needs t <= t1, got {t} > {t1}")));
    }
    let cum = cumulative_h(control);
    Ok(h_at(control, &cum, t1)? - h_at(control, &cum, t)?)
}

/// `h(t0, t_k)` at every node of the control's grid.
pub fn cumulative_h(control: &Envelope) -> Vec<f64> {
    let abs2: Vec<f64> = control.values().iter().map(|v| v.norm_sqr()).collect();
    cumulative_trapezoid(&abs2, control.grid().dt())
}

/// `h(t_k, t1)` at every node of the control's grid.
pub fn remaining_h(control: &Envelope) -> Vec<f64> {
    let abs2: Vec<f64> = control.values().iter().map(|v| v.norm_sqr()).collect();
    tail_trapezoid(&abs2, control.grid().dt())
}

fn h_at(control: &Envelope, cum: &[f64], t: f64) -> Result<f64> {
    let grid = control.grid();
    let (i, frac) = grid
        .locate(t)
        .ok_or_else(|| Error::domain(format!("t = {t} outside the control grid")))?;
    let a = control.values()[i].norm_sqr();
    let b = control.values()[i + 1].norm_sqr();
    Ok(cum[i] + grid.dt() * (a * frac + 0.5 * (b - a) * frac * frac))
}

/// Closed-form adiabatic retrieval output for `S(0) = 1`:
///
/// `E_out(t) = −√(2γC) Ω(t)/(γ(1+C)+iΔ) · exp(−h(0,t)/(γ(1+C)+iΔ))`.
pub fn adiabatic_retrieval_output(params: &PhysicalParams, control: &Envelope) -> Envelope {
    let z = params.complex_decay();
    let k = params.output_coupling();
    let h = cumulative_h(control);
    let values = control
        .values()
        .iter()
        .zip(&h)
        .map(|(om, h)| -k * om / z * (-*h / z).exp())
        .collect();
    Envelope::new(*control.grid(), values, EnvelopeRole::OutputField)
        .expect("finite control gives finite output")
}

/// Retrieval efficiency for a control delivering total `h(0, ∞)`:
/// `C/(1+C) · (1 − exp(−2γ(1+C) h/(γ²(1+C)²+Δ²)))`.
pub fn adiabatic_retrieval_efficiency(params: &PhysicalParams, h_total: f64) -> f64 {
    params.ideal_efficiency() * (1.0 - (-params.depletion_coefficient() * h_total).exp())
}

/// The storage kernel
/// `f(t) = −Ω*(t)√(2γ(1+C))/(γ(1+C)+iΔ) · exp(−h(t,T)/(γ(1+C)+iΔ))`
/// on the control's grid.
pub fn storage_kernel(params: &PhysicalParams, control: &Envelope) -> Envelope {
    let z = params.complex_decay();
    let root = (2.0 * params.total_decay()).sqrt();
    let h = remaining_h(control);
    let values = control
        .values()
        .iter()
        .zip(&h)
        .map(|(om, h)| -om.conj() * root / z * (-*h / z).exp())
        .collect();
    Envelope::new(*control.grid(), values, EnvelopeRole::SpinMode)
        .expect("finite control gives finite kernel")
}

/// Adiabatic storage amplitude `S(T) = √(C/(1+C)) ∫ f(t) E_in(t) dt`.
pub fn adiabatic_storage_amplitude(
    params: &PhysicalParams,
    control: &Envelope,
    input: &Envelope,
) -> Result<C64> {
    if !control.grid().same_as(input.grid()) {
        return Err(Error::domain("control and input must share a grid"));
    }
    let f = storage_kernel(params, control);
    let prod: Vec<C64> = f.values().iter().zip(input.values()).map(|(a, b)| a * b).collect();
    Ok(params.ideal_efficiency().sqrt() * trapezoid_c(&prod, input.grid().dt()))
}

/// Output pulse duration scale `(γ²C²+Δ²)/(γC|Ω|²)` for a control of
/// magnitude `omega_scale`.
pub fn output_duration_estimate(params: &PhysicalParams, omega_scale: f64) -> Result<f64> {
    if !(omega_scale > 0.0 && omega_scale.is_finite()) {
        return Err(Error::domain(format!("omega_scale must be positive, got {omega_scale}")));
    }
    let gc = params.gamma * params.c;
    Ok((gc * gc + params.delta * params.delta) / (gc * omega_scale * omega_scale))
}
