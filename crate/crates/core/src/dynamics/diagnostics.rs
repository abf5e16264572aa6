use super::{RunKind, Trajectory};
use crate::{Drive, Error, PhysicalParams, Result};

/// Max over interior nodes of `|d/dt(|P|²+|S|²) + 2γ(1+C)|P|²|`, with the
/// derivative taken by central differences. Vanishes at O(dt²) for a
/// retrieval run without spin-wave decay.
pub fn conservation_residual(traj: &Trajectory, params: &PhysicalParams) -> Result<f64> {
    if traj.kind != RunKind::Retrieval {
        return Err(Error::domain(
            "conservation residual applies to bad-cavity retrieval runs (no input drive)",
        ));
    }
    if params.gamma_s != 0.0 {
        return Err(Error::domain("conservation residual requires gamma_s = 0"));
    }
    let n = traj.grid.len();
    if n < 3 {
        return Ok(0.0);
    }
    let dt = traj.grid.dt();
    let excitation: Vec<f64> = traj
        .p
        .iter()
        .zip(&traj.s)
        .map(|(p, s)| p.norm_sqr() + s.norm_sqr())
        .collect();
    let loss = 2.0 * params.total_decay();
    let worst = (1..n - 1)
        .map(|i| {
            let dn = (excitation[i + 1] - excitation[i - 1]) / (2.0 * dt);
            (dn + loss * traj.p[i].norm_sqr()).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Residual of the single second-order equation for `S`,
///
/// `S̈ − (Ω̇*/Ω*)Ṡ + (γ(1+C)+iΔ)Ṡ + |Ω|²S + Ω*√(2γC)E_in`,
///
/// evaluated by central differences at interior nodes where
/// `|Ω| > 1e-3·max|Ω|`. Requires `γ_s = 0`.
pub fn second_order_residual(
    traj: &Trajectory,
    params: &PhysicalParams,
    control: &dyn Drive,
    input: &dyn Drive,
) -> Result<f64> {
    if !matches!(traj.kind, RunKind::Storage | RunKind::Retrieval) {
        return Err(Error::domain("second-order residual applies to bad-cavity runs"));
    }
    if params.gamma_s != 0.0 {
        return Err(Error::domain("second-order residual requires gamma_s = 0"));
    }
    let grid = &traj.grid;
    let n = grid.len();
    let dt = grid.dt();
    let omega: Vec<_> = grid.times().map(|t| control.at(t)).collect();
    let peak = omega.iter().map(|o| o.norm()).fold(0.0, f64::max);
    if n < 3 || peak == 0.0 {
        return Ok(0.0);
    }
    let z = params.complex_decay();
    let k = params.output_coupling();
    let s = &traj.s;
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let om = omega[i];
        if om.norm() <= 1e-3 * peak {
            continue;
        }
        let ds = (s[i + 1] - s[i - 1]) / (2.0 * dt);
        let dds = (s[i + 1] - s[i] * 2.0 + s[i - 1]) / (dt * dt);
        let dom_conj = ((omega[i + 1] - omega[i - 1]) / (2.0 * dt)).conj();
        let ein = input.at(grid.time(i));
        let r = dds - dom_conj / om.conj() * ds
            + z * ds
            + s[i] * om.norm_sqr()
            + om.conj() * k * ein;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
