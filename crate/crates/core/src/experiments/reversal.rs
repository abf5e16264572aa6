use rayon::prelude::*;

use super::{control_roughness, error_text, refined_nodes, Cell, ScanOptions, ScanTable};
use crate::adiabatic::{
    adiabaticity_margins, retrieval_control_for_mode, storage_control_for_mode, AdiabaticityMargins,
};
use crate::dynamics::{simulate_retrieval, simulate_storage};
use crate::modes::ModeShape;
use crate::{time_reverse, Envelope, PhysicalParams, Result, TimeGrid, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeReversalConfig {
    pub c_list: Vec<f64>,
    pub modes: Vec<ModeShape>,
    /// Mode duration as `TCγ`.
    pub tcg: f64,
    pub delta: f64,
    pub gamma_s: f64,
    pub options: ScanOptions,
}

impl Default for TimeReversalConfig {
    fn default() -> Self {
        TimeReversalConfig {
            c_list: vec![1.0, 10.0],
            modes: vec![ModeShape::GaussianLike, ModeShape::Chirped(crate::modes::DEFAULT_CHIRP)],
            tcg: 1000.0,
            delta: 0.0,
            gamma_s: 0.0,
            options: ScanOptions::default(),
        }
    }
}

const COLUMNS: &[&str] = &[
    "C",
    "mode",
    "tcg",
    "T",
    "n",
    "adiabatic",
    "worst_ratio",
    "eta_r",
    "eta_s",
    "abs_diff",
    "control_identity_dev",
    "asserted",
    "status",
];

struct Point {
    n: usize,
    margins: AdiabaticityMargins,
    eta_r: Option<f64>,
    eta_s: Option<f64>,
    identity_dev: f64,
}

/// Copy of `env` on a grid with the same spacing extended by `extra` cells,
/// zero beyond the original window.
pub(crate) fn pad_with_zeros(env: &Envelope, extra: usize) -> Result<Envelope> {
    let g = env.grid();
    let n = g.len() + extra;
    let grid = TimeGrid::new(g.t0(), g.t0() + g.dt() * (n - 1) as f64, n)?;
    let mut values = env.values().to_vec();
    values.resize(n, C64::new(0.0, 0.0));
    Envelope::new(grid, values, env.role())
}

fn run_point(c: f64, mode: ModeShape, cfg: &TimeReversalConfig) -> Result<Point> {
    let params = PhysicalParams::new(c, cfg.delta)?.with_gamma_s(cfg.gamma_s)?;
    let duration = cfg.tcg / (c * params.gamma);

    // resolve the retrieval control
    let mut n = cfg.options.nodes(cfg.options.base_nodes);
    let (target, shaped) = loop {
        let grid = TimeGrid::span(duration, n)?;
        let target = mode.build(duration, grid)?;
        let shaped = retrieval_control_for_mode(&params, &target, &cfg.options.shaping)?;
        let next = refined_nodes(n, control_roughness(shaped.control.values()));
        if next <= n {
            break (target, shaped);
        }
        n = next;
    };

    // App. B identity on the mode window
    let stored_mode = time_reverse(&target);
    let storage_shaped = storage_control_for_mode(&params, &stored_mode, &cfg.options.shaping)?;
    let reversed_control = time_reverse(&shaped.control);
    let identity_dev = storage_shaped
        .control
        .values()
        .iter()
        .zip(reversed_control.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let margins = adiabaticity_margins(&params, &storage_shaped.control, Some(&stored_mode), duration);
    if !margins.adiabatic {
        return Ok(Point { n, margins, eta_r: None, eta_s: None, identity_dev });
    }

    // retrieve, with room for P to relax after the control window
    let g = *target.grid();
    let tail_cells = ((10.0 / params.total_decay()) / g.dt()).ceil() as usize;
    let control = pad_with_zeros(&shaped.control, tail_cells)?;
    let run_grid = *control.grid();
    let retrieved = simulate_retrieval(&params, &control, &run_grid, &cfg.options.integrator)?;
    let eta_r = retrieved.eta_r.unwrap_or(0.0);

    // store the time-reversed actual output with the time-reversed control
    let output = Envelope::new(run_grid, retrieved.e_out.clone(), crate::EnvelopeRole::OutputField)?;
    let input = time_reverse(&output).normalized()?;
    let store_control = time_reverse(&control);
    let stored = simulate_storage(&params, &store_control, &input, &run_grid, &cfg.options.integrator)?;
    Ok(Point {
        n,
        margins,
        eta_r: Some(eta_r),
        eta_s: stored.eta_s,
        identity_dev,
    })
}

/// Retrieval into each mode with its shaped control, then storage of the
/// time-reversed output with the time-reversed control.
///
/// Without spin-wave decay the two efficiencies should agree; the check is
/// skipped when `γ_s > 0`. Modes whose storage control fails the
/// adiabaticity margins are not run.
pub fn time_reversal_scan(cfg: &TimeReversalConfig) -> ScanTable {
    let mut specs = Vec::new();
    for &c in &cfg.c_list {
        for &mode in &cfg.modes {
            specs.push((c, mode));
        }
    }
    let results: Vec<_> = specs.par_iter().map(|&(c, m)| run_point(c, m, cfg)).collect();
    let asserted = cfg.gamma_s == 0.0;

    let mut table = ScanTable::new("time_reversal", COLUMNS);
    let mut worst: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    let mut compared = 0;
    let mut problems = Vec::new();
    for (&(c, mode), result) in specs.iter().zip(&results) {
        let duration = cfg.tcg / c;
        let mut row: Vec<Cell> = vec![c.into(), mode.to_string().into(), cfg.tcg.into(), duration.into()];
        match result {
            Ok(p) => {
                let diff = match (p.eta_r, p.eta_s) {
                    (Some(r), Some(s)) => Some((r - s).abs()),
                    _ => None,
                };
                let status = if p.margins.adiabatic { "ok" } else { "rejected: not adiabatic" };
                if let Some(d) = diff {
                    worst = worst.max(d);
                    compared += 1;
                } else {
                    problems.push(format!("C={c} {mode}: {status}"));
                }
                worst_identity = worst_identity.max(p.identity_dev);
                row.extend([
                    p.n.into(),
                    p.margins.adiabatic.into(),
                    p.margins.worst_ratio().into(),
                    p.eta_r.into(),
                    p.eta_s.into(),
                    diff.into(),
                    p.identity_dev.into(),
                    asserted.into(),
                    status.into(),
                ]);
            }
            Err(e) => {
                problems.push(format!("C={c} {mode}: error"));
                row.extend(std::iter::repeat_n(Cell::Missing, 7));
                row.extend([asserted.into(), error_text(e).into()]);
            }
        }
        table.push_row(row).expect("row matches schema");
    }
    cfg.options.describe(&mut table);
    table.add_metadata("delta", cfg.delta);
    table.add_metadata("gamma_s", cfg.gamma_s);
    table.add_metadata("tcg", cfg.tcg);
    table.add_check(
        "control_identity",
        worst_identity < 1e-9,
        format!("max |Omega_storage - reversed Omega_retrieval| = {worst_identity:.3e}"),
    );
    if asserted {
        table.add_check(
            "time_reversal_equality",
            problems.is_empty() && compared > 0 && worst < 5e-3,
            if problems.is_empty() {
                format!("{compared} pairs, max |eta_s - eta_r| = {worst:.3e}")
            } else {
                format!("{compared} pairs, max |eta_s - eta_r| = {worst:.3e}; {}", problems.join("; "))
            },
        );
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_keeps_spacing() {
        let g = TimeGrid::span(1.0, 11).unwrap();
        let e = Envelope::from_fn(g, crate::EnvelopeRole::Control, |_| C64::new(1.0, 0.0)).unwrap();
        let p = pad_with_zeros(&e, 5).unwrap();
        assert_eq!(p.grid().len(), 16);
        assert!((p.grid().dt() - 0.1).abs() < 1e-15);
        assert_eq!(p.values()[10], C64::new(1.0, 0.0));
        assert_eq!(p.values()[11], C64::new(0.0, 0.0));
    }

    #[test]
    fn non_adiabatic_modes_are_rejected() {
        let cfg = TimeReversalConfig {
            c_list: vec![10.0],
            modes: vec![ModeShape::GaussianLike],
            tcg: 3.0,
            ..Default::default()
        };
        let t = time_reversal_scan(&cfg);
        assert_eq!(t.cell(0, "adiabatic"), Some(&Cell::Bool(false)));
        assert_eq!(t.real(0, "eta_s"), None);
        assert!(!t.check("time_reversal_equality").unwrap().passed);
    }
}
