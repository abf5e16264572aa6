use rayon::prelude::*;

use super::{error_text, Cell, ScanOptions, ScanTable};
use crate::dynamics::{simulate_full_cavity_retrieval, simulate_retrieval};
use crate::{PhysicalParams, Result, TimeGrid, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct BadCavityConfig {
    pub c: f64,
    pub delta: f64,
    /// κ/(g√N) values, ascending.
    pub ratio_list: Vec<f64>,
    /// Constant retrieval control amplitude.
    pub omega: f64,
    /// Retrieval window length.
    pub horizon: f64,
    pub nodes: usize,
    pub options: ScanOptions,
}

impl Default for BadCavityConfig {
    fn default() -> Self {
        BadCavityConfig {
            c: 1.0,
            delta: 0.0,
            ratio_list: vec![3.0, 10.0, 30.0, 100.0],
            omega: 5.0,
            horizon: 20.0,
            nodes: 2001,
            options: ScanOptions::default(),
        }
    }
}

const COLUMNS: &[&str] = &[
    "kappa_over_gN",
    "kappa",
    "gN",
    "C",
    "eta_r_full",
    "eta_r_eliminated",
    "abs_deviation",
    "rel_deviation",
    "status",
];

fn run_point(ratio: f64, cfg: &BadCavityConfig) -> Result<(f64, f64, f64)> {
    let g_n = ratio * cfg.c;
    let kappa = ratio * ratio * cfg.c;
    let params = PhysicalParams::from_cavity(kappa, g_n, 1.0, cfg.delta)?;
    let grid = TimeGrid::span(cfg.horizon, cfg.options.nodes(cfg.nodes))?;
    let omega = C64::new(cfg.omega, 0.0);
    let control = move |_t: f64| omega;
    let traj = simulate_full_cavity_retrieval(&params, &control, &grid, &cfg.options.integrator)?;
    Ok((kappa, g_n, traj.eta_r.unwrap_or(0.0)))
}

/// Full-cavity versus bad-cavity retrieval at fixed `C` as `κ/(g√N)` grows,
/// with `g√N = ratio·Cγ` and `κ = ratio²·Cγ`.
pub fn bad_cavity_scan(cfg: &BadCavityConfig) -> ScanTable {
    let mut table = ScanTable::new("bad_cavity", COLUMNS);
    cfg.options.describe(&mut table);
    table.add_metadata("omega", cfg.omega);
    table.add_metadata("horizon", cfg.horizon);
    table.add_metadata("nodes", cfg.nodes);

    let reference = PhysicalParams::new(cfg.c, cfg.delta).and_then(|p| {
        let grid = TimeGrid::span(cfg.horizon, cfg.options.nodes(cfg.nodes))?;
        let omega = C64::new(cfg.omega, 0.0);
        let control = move |_t: f64| omega;
        simulate_retrieval(&p, &control, &grid, &cfg.options.integrator)
    });
    let eliminated = match reference {
        Ok(t) => t.eta_r.unwrap_or(0.0),
        Err(e) => {
            for &ratio in &cfg.ratio_list {
                let mut row = vec![ratio.into()];
                row.extend(std::iter::repeat_n(Cell::Missing, 7));
                row.push(format!("reference run failed: {}", error_text(&e)).into());
                table.push_row(row).expect("row matches schema");
            }
            table.add_check("bad_cavity_convergence", false, "reference run failed");
            return table;
        }
    };

    let results: Vec<_> = cfg
        .ratio_list
        .par_iter()
        .map(|&r| run_point(r, cfg))
        .collect();
    let mut deviations = Vec::new();
    for (&ratio, result) in cfg.ratio_list.iter().zip(&results) {
        let mut row: Vec<Cell> = vec![ratio.into()];
        match result {
            Ok((kappa, g_n, full)) => {
                let dev = (full - eliminated).abs();
                deviations.push((ratio, Some(dev / eliminated)));
                row.extend([
                    (*kappa).into(),
                    (*g_n).into(),
                    cfg.c.into(),
                    (*full).into(),
                    eliminated.into(),
                    dev.into(),
                    (dev / eliminated).into(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                deviations.push((ratio, None));
                row.extend(std::iter::repeat_n(Cell::Missing, 3));
                row.extend([Cell::Missing, eliminated.into(), Cell::Missing, Cell::Missing]);
                row.push(error_text(e).into());
            }
        }
        table.push_row(row).expect("row matches schema");
    }

    let devs: Option<Vec<f64>> = deviations.iter().map(|(_, d)| *d).collect();
    let (monotone, detail) = match &devs {
        Some(d) => (
            d.windows(2).all(|w| w[1] < w[0]),
            format!("relative deviations {:?}", d.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>()),
        ),
        None => (false, "failed rows".to_string()),
    };
    table.add_check("bad_cavity_monotone", monotone, detail);
    if let Some(&(_, Some(d))) = deviations.iter().find(|(r, _)| *r == 100.0) {
        table.add_check("bad_cavity_ratio100", d < 0.01, format!("relative deviation {d:.3e}"));
    }
    table
}
