//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line to
//! stdout (bypassing libtest capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use cavmem::adiabatic::{retrieval_control_for_mode, ShapingOptions};
use cavmem::dynamics::{conservation_residual, simulate_retrieval, simulate_storage, IntegratorOptions};
use cavmem::experiments::{
    bad_cavity_scan, breakdown_scan, default_tcg_grid, retrieval_universality_scan, time_reversal_scan,
    BadCavityConfig, BreakdownConfig, Cell, ControlShape, ScanOptions, TimeReversalConfig, UniversalityConfig,
};
use cavmem::fast::{
    fast_retrieval_output, fast_storage_amplitude, optimal_fast_input, pi_pulse_map, simulate_fast_protocol,
    PiPulseSpec,
};
use cavmem::modes::{make_gaussian_like_mode, ModeShape};
use cavmem::{Envelope, EnvelopeRole, PhysicalParams, TimeGrid, C64};

fn verdict(id: u32, title: &str, passed: bool, detail: &str) {
    let line = format!(
        "{} criterion {id} ({title}): {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(passed, "criterion {id} failed: {detail}");
}

fn trapezoid(v: &[f64], dt: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    dt * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

#[test]
fn criterion_1_retrieval_universality() {
    let cfg = UniversalityConfig::default();
    assert!(cfg.margin >= 20.0);
    assert_eq!(cfg.controls, ControlShape::FAMILY);
    let start = Instant::now();
    let table = retrieval_universality_scan(&cfg);
    let per_point = start.elapsed().as_secs_f64() / table.len() as f64;

    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for i in 0..table.len() {
        let c = table.real(i, "C").unwrap();
        let complete = table.cell(i, "complete") == Some(&Cell::Bool(true));
        match table.real(i, "eta_r") {
            Some(eta) if complete => worst = worst.max((eta - c / (1.0 + c)).abs()),
            _ => problems.push(format!("row {i} incomplete or failed")),
        }
    }
    let expected_rows = cfg.c_list.len() * cfg.delta_list.len() * 3;
    let passed = problems.is_empty() && table.len() == expected_rows && worst < 2e-3;
    verdict(
        1,
        "retrieval universality",
        passed,
        &format!(
            "{} rows (C x delta x 3 controls), max |eta_r - C/(1+C)| = {worst:.2e} (tol 2e-3), {per_point:.3} s/point {}",
            table.len(),
            problems.join("; ")
        ),
    );
}

/// Constant control of `0.3|γ(1+C)+iΔ|` that depletes the spin wave with
/// exponent 30, followed by ten decay times of zero control.
fn strong_constant_retrieval(params: &PhysicalParams, cells: usize) -> (Envelope, TimeGrid) {
    let omega = 0.3 * params.complex_decay().norm();
    let t_on = 30.0 / (params.depletion_coefficient() * omega * omega);
    let total = t_on + 10.0 / params.total_decay();
    let grid = TimeGrid::span(total, cells + 1).unwrap();
    let control = Envelope::from_fn(grid, EnvelopeRole::Control, |t| {
        C64::new(if t <= t_on { omega } else { 0.0 }, 0.0)
    })
    .unwrap();
    (control, grid)
}

#[test]
fn criterion_2_conservation_law() {
    let opts = IntegratorOptions::default();
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    let mut ratios_ok = true;
    for (c, delta) in [(0.1, 0.0), (1.0, 0.0), (1.0, 10.0), (10.0, 0.0), (10.0, 10.0)] {
        let params = PhysicalParams::new(c, delta).unwrap();
        // resolve the fastest scale, |γ(1+C)+iΔ|, with ~4000 cells per unit
        let (_, probe) = strong_constant_retrieval(&params, 1);
        let cells = ((probe.duration() * params.complex_decay().norm() * 4000.0).ceil() as usize).max(20_000);
        let mut residuals = Vec::new();
        for m in [cells, 2 * cells] {
            let (control, grid) = strong_constant_retrieval(&params, m);
            let traj = simulate_retrieval(&params, &control, &grid, &opts).unwrap();
            residuals.push(conservation_residual(&traj, &params).unwrap());
        }
        let ratio = residuals[0] / residuals[1];
        ratios_ok &= (3.6..4.4).contains(&ratio);
        worst = worst.max(residuals[0]).max(residuals[1]);
        lines.push(format!("C={c} delta={delta}: {:.2e} -> {:.2e} (ratio {ratio:.3})", residuals[0], residuals[1]));
    }
    verdict(
        2,
        "conservation law",
        worst < 1e-6 && ratios_ok,
        &format!("max residual {worst:.2e} (tol 1e-6), halving dt: {}", lines.join("; ")),
    );
}

#[test]
fn criterion_3_storage_plateau() {
    // (C/(1+C))² rounded to three figures
    let listed: [(f64, f64); 4] = [(1.0, 0.25), (10.0, 0.826), (100.0, 0.980), (1000.0, 0.998)];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut slowest: f64 = 0.0;
    for (c, shown) in listed {
        let plateau = (c / (1.0 + c)).powi(2);
        ok &= (plateau - shown).abs() < 5e-4;
        let start = Instant::now();
        let table = breakdown_scan(&BreakdownConfig {
            c_list: vec![c],
            delta_list: vec![0.0],
            tcg_grid: default_tcg_grid(0.1, 1000.0, 40),
            options: ScanOptions::default(),
        });
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        let check = table.check(&format!("plateau_C{c}_delta0")).expect("plateau check");
        ok &= check.passed && table.check("all_rows_ok").unwrap().passed;
        let last = table.real(table.len() - 1, "eta_tot").unwrap();
        parts.push(format!("C={c}: eta_tot(1000) = {last:.5} vs {plateau:.5}"));
    }
    ok &= slowest < 60.0;
    verdict(
        3,
        "optimal adiabatic storage plateau",
        ok,
        &format!("{} (tol 1% rel); slowest 40-point curve {slowest:.1} s (limit 60 s)", parts.join(", ")),
    );
}

#[test]
fn criterion_4_breakdown_shape() {
    let mut grid = default_tcg_grid(0.1, 1000.0, 40);
    grid.push(1.0);
    grid.sort_by(f64::total_cmp);
    let table = breakdown_scan(&BreakdownConfig {
        c_list: vec![10.0],
        delta_list: vec![0.0, 100.0, 1000.0],
        tcg_grid: grid,
        options: ScanOptions::default(),
    });
    let breakdown = table.check("breakdown_at_tcg1").expect("TCγ = 1 is on the grid");
    let coincide = table.check("raman_curves_coincide").expect("both Raman curves present");
    let rows_ok = table.check("all_rows_ok").unwrap();
    let passed = breakdown.passed && coincide.passed && rows_ok.passed;
    verdict(
        4,
        "breakdown shape",
        passed,
        &format!(
            "breakdown at TCg=1: {} [{}]; delta 100 vs 1000 within 0.02: {} [{}]",
            if breakdown.passed { "yes" } else { "no" },
            breakdown.detail,
            if coincide.passed { "yes" } else { "no" },
            coincide.detail
        ),
    );
}

#[test]
fn criterion_5_time_reversal_duality() {
    let cfg = TimeReversalConfig {
        modes: vec![ModeShape::GaussianLike, ModeShape::Chirped(cavmem::modes::DEFAULT_CHIRP), ModeShape::SineSquared],
        ..Default::default()
    };
    assert_eq!(cfg.c_list, [1.0, 10.0]);
    let table = time_reversal_scan(&cfg);
    let identity = table.check("control_identity").unwrap();
    let equality = table.check("time_reversal_equality").unwrap();
    verdict(
        5,
        "time-reversal duality",
        identity.passed && equality.passed,
        &format!("{} modes x C in {{1, 10}} at TCg={}: {}; {}", cfg.modes.len(), cfg.tcg, equality.detail, identity.detail),
    );
}

#[test]
fn criterion_6_fast_protocol() {
    let opts = IntegratorOptions::default();
    let mut parts = Vec::new();
    let mut ok = true;

    // closed-form output after an ideal π pulse
    for c in [1.0, 10.0] {
        let p = PhysicalParams::new(c, 0.0).unwrap();
        let horizon = 20.0 / p.total_decay();
        let grid = TimeGrid::span(horizon, 400_001).unwrap();
        let eta = fast_retrieval_output(&p, grid).norm_sq();
        let dev = (eta - c / (1.0 + c)).abs();
        ok &= dev < 1e-4;
        parts.push(format!("output C={c}: |eta - C/(1+C)| = {dev:.1e}"));
    }

    // storage of the optimal input followed by the ideal map
    let p = PhysicalParams::new(10.0, 0.0).unwrap();
    let duration = 0.1;
    let grid = TimeGrid::span(duration, 20_001).unwrap();
    let f = optimal_fast_input(&p, duration, grid).unwrap();
    let input = f.normalized().unwrap();
    let expected = p.ideal_efficiency() * (1.0 - (-2.0 * p.total_decay() * duration).exp());
    let zero = |_t: f64| C64::new(0.0, 0.0);
    let stored = simulate_storage(&p, &zero, &input, &grid, &opts).unwrap();
    let ideal = pi_pulse_map(stored.final_state()).s.norm_sqr();
    let dev_ideal = (ideal - expected).abs();
    let dev_formula = (fast_storage_amplitude(&p, &input).norm_sqr() - expected).abs();
    ok &= dev_ideal < 1e-6 && dev_formula < 1e-6;
    parts.push(format!(
        "ideal-map storage T={duration}: {ideal:.8} vs {expected:.8} (dev {dev_ideal:.1e}, quadrature dev {dev_formula:.1e})"
    ));

    // finite π pulse at Ω = 10³·Cγ
    let pulse = PiPulseSpec::new(1e3 * p.c).unwrap();
    let run_grid = TimeGrid::new(0.0, duration + pulse.duration(), 20_002).unwrap();
    let r = simulate_fast_protocol(&p, &input, pulse, &run_grid, &opts).unwrap();
    let dev_pulse = (r.eta_s - expected).abs();
    ok &= dev_pulse < 1e-2;
    parts.push(format!("finite pulse: eta_s = {:.6} (dev {dev_pulse:.1e}, tol 1e-2)", r.eta_s));

    verdict(6, "fast protocol", ok, &parts.join("; "));
}

#[test]
fn criterion_7_bad_cavity_convergence() {
    let cfg = BadCavityConfig::default();
    assert_eq!(cfg.ratio_list, [3.0, 10.0, 30.0, 100.0]);
    let table = bad_cavity_scan(&cfg);
    let monotone = table.check("bad_cavity_monotone").unwrap();
    let at100 = table.check("bad_cavity_ratio100").unwrap();
    verdict(
        7,
        "bad-cavity convergence",
        monotone.passed && at100.passed,
        &format!("{}; at kappa/gN=100: {}", monotone.detail, at100.detail),
    );
}

#[test]
fn criterion_8_spin_wave_decay() {
    let gamma_s = 0.1;
    let mut parts = Vec::new();
    let mut ok = true;
    for c in [10.0, 100.0] {
        let params = PhysicalParams::new(c, 0.0).unwrap().with_gamma_s(gamma_s).unwrap();
        let duration = 100.0 / c;
        let grid = TimeGrid::span(duration, 8001).unwrap();
        let mode = make_gaussian_like_mode(duration, grid).unwrap();
        let shaped = retrieval_control_for_mode(&params, &mode, &ShapingOptions::default()).unwrap();

        // zero control after the mode window so P relaxes
        let tail = ((10.0 / params.total_decay()) / grid.dt()).ceil() as usize;
        let n = grid.len() + tail;
        let run_grid = TimeGrid::new(0.0, grid.dt() * (n - 1) as f64, n).unwrap();
        let mut values = shaped.control.values().to_vec();
        values.resize(n, C64::new(0.0, 0.0));
        let control = Envelope::new(run_grid, values, EnvelopeRole::Control).unwrap();
        let traj = simulate_retrieval(&params, &control, &run_grid, &IntegratorOptions::default()).unwrap();
        let eta = traj.eta_r.unwrap();

        let weighted: Vec<f64> = grid
            .times()
            .zip(mode.values())
            .map(|(t, e)| e.norm_sqr() * (2.0 * gamma_s * t).exp())
            .collect();
        let expected = c / (1.0 + c) / trapezoid(&weighted, grid.dt());
        let dev = (eta - expected).abs();
        ok &= dev < 1e-2;
        parts.push(format!("C={c}, T={duration}: eta_r = {eta:.5} vs {expected:.5} (dev {dev:.1e})"));
    }
    verdict(8, "spin-wave decay", ok, &format!("{} (tol 1e-2)", parts.join("; ")));
}
