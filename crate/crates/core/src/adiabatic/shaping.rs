use crate::envelope::{cumulative_trapezoid, tail_trapezoid, trapezoid};
use crate::{Envelope, EnvelopeRole, Error, PhysicalParams, Result, C64};

use super::{cumulative_h, remaining_h};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingOptions {
    /// Residual boundary term ε in the logarithmic inversion. The shaped
    /// control then leaves roughly ε·C/(1+C) of efficiency on the table.
    pub epsilon_boundary: f64,
    /// Fraction of the window at the divergent end over which |Ω| is frozen.
    pub truncation_fraction: f64,
    pub truncate: bool,
}

impl Default for ShapingOptions {
    fn default() -> Self {
        ShapingOptions {
            epsilon_boundary: 1e-4,
            truncation_fraction: 0.01,
            truncate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapingDirection {
    Storage,
    Retrieval,
}

#[derive(Debug, Clone)]
pub struct ShapingResult {
    pub direction: ShapingDirection,
    pub control: Envelope,
    /// `h(0,t)` for retrieval, `h(t,T)` for storage, from the returned control.
    pub h_profile: Vec<f64>,
    pub truncated: bool,
    /// Last (storage: first) node whose magnitude was kept as computed.
    pub truncation_index: Option<usize>,
    pub epsilon_boundary: f64,
    pub predicted_efficiency: f64,
    /// Efficiency deficit implied by ε, ≈ ε·C/(1+C).
    pub boundary_deficit: f64,
    /// The normalized mode the control was shaped for (after any γ_s reweighting).
    pub target: Envelope,
}

fn check_options(opts: &ShapingOptions) -> Result<()> {
    if !(opts.epsilon_boundary > 0.0 && opts.epsilon_boundary < 1.0) {
        return Err(Error::domain(format!(
            "epsilon_boundary must lie in (0, 1), got {}",
            opts.epsilon_boundary
        )));
    }
    if !(0.0..0.5).contains(&opts.truncation_fraction) {
        return Err(Error::domain(format!(
            "truncation fraction must lie in [0, 0.5), got {}",
            opts.truncation_fraction
        )));
    }
    Ok(())
}

/// Number of nodes covered by the truncated end, `ceil((n-1)·fraction)`.
fn truncation_width(n: usize, fraction: f64) -> usize {
    ((n - 1) as f64 * fraction - 1e-9).ceil().max(0.0) as usize
}

/// Unit phasors of `values`; zero samples borrow the phase of the nearest
/// nonzero neighbour (earlier samples win ties).
fn unit_phasors(values: &[C64]) -> Vec<C64> {
    let own: Vec<Option<C64>> = values
        .iter()
        .map(|v| {
            let r = v.norm();
            (r > 0.0).then(|| v / r)
        })
        .collect();
    let n = own.len();
    let mut before = vec![None; n];
    let mut last = None;
    for i in 0..n {
        if let Some(u) = own[i] {
            last = Some((i, u));
        }
        before[i] = last;
    }
    let mut out = vec![C64::new(1.0, 0.0); n];
    let mut next: Option<(usize, C64)> = None;
    for i in (0..n).rev() {
        if let Some(u) = own[i] {
            next = Some((i, u));
        }
        out[i] = match (before[i], next) {
            (Some((j, u)), Some((k, w))) => if i - j <= k - i { u } else { w },
            (Some((_, u)), None) | (None, Some((_, u))) => u,
            (None, None) => C64::new(1.0, 0.0),
        };
    }
    out
}

/// Control that retrieves a unit spin wave into `mode` in the adiabatic limit.
///
/// `h(0,t) = −[(γ²(1+C)²+Δ²)/(2γ(1+C))]·ln(∫_t^T|e|² + ε)`; `|Ω|²` is its
/// analytic derivative and the phase follows the target plus a Stark-shift
/// compensation. With `γ_s > 0` the target is reweighted by `e^{γ_s t}`
/// first. The magnitude diverges where the target's remaining norm runs out,
/// so the last `truncation_fraction` of the window is frozen.
pub fn retrieval_control_for_mode(
    params: &PhysicalParams,
    mode: &Envelope,
    opts: &ShapingOptions,
) -> Result<ShapingResult> {
    check_options(opts)?;
    let grid = *mode.grid();
    let t0 = grid.t0();
    let base = mode.normalized()?;
    let (target, weight) = if params.gamma_s > 0.0 {
        let gs = params.gamma_s;
        let boosted = base.modulated(|t| C64::new((gs * (t - t0)).exp(), 0.0));
        let weight = boosted.norm_sq();
        (boosted.normalized()?, weight)
    } else {
        (base, 1.0)
    };

    let eps = opts.epsilon_boundary;
    let inv_a = 1.0 / params.depletion_coefficient();
    let z = params.complex_decay();
    let stark = params.delta / params.decay_norm_sq();
    let abs2: Vec<f64> = target.values().iter().map(|v| v.norm_sqr()).collect();
    let tail = tail_trapezoid(&abs2, grid.dt());
    let lead = -z / z.norm();
    let phases = unit_phasors(target.values());

    let n = grid.len();
    let mut mags: Vec<f64> = (0..n).map(|i| (inv_a * abs2[i] / (tail[i] + eps)).sqrt()).collect();
    let width = if opts.truncate { truncation_width(n, opts.truncation_fraction) } else { 0 };
    let keep = n - 1 - width;
    if width > 0 {
        let frozen = mags[keep];
        mags[keep + 1..].fill(frozen);
    }
    let values = (0..n)
        .map(|i| {
            let h = -inv_a * (tail[i] + eps).ln();
            lead * phases[i] * C64::from_polar(mags[i], -stark * h)
        })
        .collect();
    let control = Envelope::new(grid, values, EnvelopeRole::Control)?;
    let h_profile = cumulative_h(&control);
    let ideal = params.ideal_efficiency();
    Ok(ShapingResult {
        direction: ShapingDirection::Retrieval,
        control,
        h_profile,
        truncated: width > 0,
        truncation_index: (width > 0).then_some(keep),
        epsilon_boundary: eps,
        predicted_efficiency: ideal / weight,
        boundary_deficit: eps * ideal,
        target,
    })
}

/// Optimal adiabatic storage control for `input`.
///
/// `h(t,T) = −[(γ²(1+C)²+Δ²)/(2γ(1+C))]·ln(∫_0^t|E_in|² + ε)`; magnitude and
/// Stark-compensating phase follow as for retrieval. With `γ_s > 0` the input
/// is reweighted by `e^{−γ_s(T−t)}`. |Ω| diverges at `t = 0`, so it is
/// frozen at its value at `t = T·truncation_fraction` before that.
pub fn storage_control_for_mode(
    params: &PhysicalParams,
    input: &Envelope,
    opts: &ShapingOptions,
) -> Result<ShapingResult> {
    check_options(opts)?;
    let grid = *input.grid();
    let t1 = grid.t1();
    let base = input.normalized()?;
    let (target, weight) = if params.gamma_s > 0.0 {
        let gs = params.gamma_s;
        let damped = base.modulated(|t| C64::new((-gs * (t1 - t)).exp(), 0.0));
        let weight = damped.norm_sq();
        (damped.normalized()?, weight)
    } else {
        (base, 1.0)
    };

    let eps = opts.epsilon_boundary;
    let inv_a = 1.0 / params.depletion_coefficient();
    let zc = params.complex_decay().conj();
    let stark = params.delta / params.decay_norm_sq();
    let abs2: Vec<f64> = target.values().iter().map(|v| v.norm_sqr()).collect();
    let cum = cumulative_trapezoid(&abs2, grid.dt());
    let lead = -zc / zc.norm();
    let phases = unit_phasors(target.values());

    let n = grid.len();
    let mut mags: Vec<f64> = (0..n).map(|i| (inv_a * abs2[i] / (cum[i] + eps)).sqrt()).collect();
    let width = if opts.truncate { truncation_width(n, opts.truncation_fraction) } else { 0 };
    if width > 0 {
        let frozen = mags[width];
        mags[..width].fill(frozen);
    }
    let values = (0..n)
        .map(|i| {
            let h = -inv_a * (cum[i] + eps).ln();
            lead * phases[i] * C64::from_polar(mags[i], stark * h)
        })
        .collect();
    let control = Envelope::new(grid, values, EnvelopeRole::Control)?;
    let h_profile = remaining_h(&control);
    let ideal = params.ideal_efficiency();
    Ok(ShapingResult {
        direction: ShapingDirection::Storage,
        control,
        h_profile,
        truncated: width > 0,
        truncation_index: (width > 0).then_some(width),
        epsilon_boundary: eps,
        predicted_efficiency: ideal * weight,
        boundary_deficit: eps * ideal,
        target,
    })
}

/// `∫|e|² e^{2γ_s t} dt` for a normalized `e`; the retrieval efficiency is
/// divided by this when the spin wave decays.
pub fn retrieval_decay_weight(mode: &Envelope, gamma_s: f64) -> Result<f64> {
    let e = mode.normalized()?;
    let t0 = e.grid().t0();
    let w: Vec<f64> = e
        .grid()
        .times()
        .zip(e.values())
        .map(|(t, v)| v.norm_sqr() * (2.0 * gamma_s * (t - t0)).exp())
        .collect();
    Ok(trapezoid(&w, e.grid().dt()))
}
