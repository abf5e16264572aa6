use crate::{Envelope, PhysicalParams, C64};

/// Smallest `TCγ` accepted as adiabatic.
pub const ADIABATIC_TCG_MIN: f64 = 10.0;

/// Largest rate ratio accepted as adiabatic.
///
/// For the Gaussian-like test mode the worst ratio is about `43/(TCγ)`,
/// i.e. 0.43 at `TCγ = 100` and 1.4 at `TCγ = 30`.
pub const ADIABATIC_RATIO_LIMIT: f64 = 0.5;

/// Samples below this fraction of the peak are ignored when forming
/// logarithmic derivatives.
const MASK_FRACTION: f64 = 1e-3;

/// Dimensionless adiabaticity diagnostics, each normalized by `|γC+iΔ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityMargins {
    /// `max|Ω| / |γC+iΔ|`
    pub omega: f64,
    /// `max|Ω̇/Ω| / |γC+iΔ|`
    pub omega_rate: f64,
    /// `max|Ė_in/E_in| / |γC+iΔ|`; zero when there is no input.
    pub input_rate: f64,
    /// `max|d|Ω|/dt| / (|Ω||γC+iΔ|)`
    pub magnitude_rate: f64,
    /// `max|dφ/dt| / |γC+iΔ|` for `Ω = |Ω|e^{iφ}`
    pub phase_rate: f64,
    /// `T·C·γ`
    pub tcg: f64,
    pub adiabatic: bool,
}

impl AdiabaticityMargins {
    /// The largest of the rate ratios.
    pub fn worst_ratio(&self) -> f64 {
        [self.omega, self.omega_rate, self.input_rate, self.magnitude_rate, self.phase_rate]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Neighbours and spacing of the difference stencil at node `i`.
fn stencil(n: usize, i: usize, dt: f64) -> (usize, usize, f64) {
    if i == 0 {
        (0, 1, dt)
    } else if i == n - 1 {
        (n - 2, n - 1, dt)
    } else {
        (i - 1, i + 1, 2.0 * dt)
    }
}

fn derivative(v: &[C64], dt: f64, i: usize) -> C64 {
    let (a, b, span) = stencil(v.len(), i, dt);
    (v[b] - v[a]) / span
}

/// Nodes where `env` exceeds the mask fraction of its peak.
fn support(env: &Envelope) -> Vec<bool> {
    let peak = env.max_abs();
    env.values().iter().map(|v| peak > 0.0 && v.norm() > MASK_FRACTION * peak).collect()
}

/// Max of `|ẋ/x|` over the nodes selected by `mask`.
fn log_rate(env: &Envelope, mask: &[bool]) -> f64 {
    let v = env.values();
    if v.len() < 2 {
        return 0.0;
    }
    let dt = env.grid().dt();
    (0..v.len())
        .filter(|&i| mask[i] && v[i].norm() > 0.0)
        .map(|i| (derivative(v, dt, i) / v[i]).norm())
        .fold(0.0, f64::max)
}

/// Adiabaticity ratios of a control (and optional input) over a window of
/// length `duration`.
///
/// Rates are taken where the input exceeds 1e-3 of its peak. Without an
/// input (retrieval), or when the grids differ, the control's own support
/// is used instead.
pub fn adiabaticity_margins(
    params: &PhysicalParams,
    control: &Envelope,
    input: Option<&Envelope>,
    duration: f64,
) -> AdiabaticityMargins {
    let rate = params.adiabatic_rate();
    let v = control.values();
    let dt = control.grid().dt();
    let peak = control.max_abs();
    let input_mask = input.map(support);
    let mask = match (input, &input_mask) {
        (Some(e), Some(m)) if e.grid().same_as(control.grid()) => m.clone(),
        _ => support(control),
    };
    let mut magnitude: f64 = 0.0;
    let mut phase: f64 = 0.0;
    if v.len() >= 2 && peak > 0.0 {
        for i in 0..v.len() {
            if !mask[i] || v[i].norm() == 0.0 {
                continue;
            }
            let (a, b, span) = stencil(v.len(), i, dt);
            let d_mag = (v[b].norm() - v[a].norm()) / span;
            let d_phase = (v[b] / v[a]).arg() / span;
            magnitude = magnitude.max((d_mag / v[i].norm()).abs());
            if v[a].norm() > 0.0 && v[b].norm() > 0.0 {
                phase = phase.max(d_phase.abs());
            }
        }
    }
    let tcg = duration * params.c * params.gamma;
    let mut m = AdiabaticityMargins {
        omega: peak / rate,
        omega_rate: log_rate(control, &mask) / rate,
        input_rate: match (input, &input_mask) {
            (Some(e), Some(m)) => log_rate(e, m) / rate,
            _ => 0.0,
        },
        magnitude_rate: magnitude / rate,
        phase_rate: phase / rate,
        tcg,
        adiabatic: false,
    };
    m.adiabatic = tcg >= ADIABATIC_TCG_MIN && m.worst_ratio() <= ADIABATIC_RATIO_LIMIT;
    m
}
