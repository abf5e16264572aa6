use std::fmt::Write as _;
use std::path::PathBuf;

use super::config::{Command, ControlSpec, ModeSpec, RunConfig};
use super::mode_csv::{mode_from_samples, parse_mode_csv};
use crate::adiabatic::{
    adiabatic_retrieval_efficiency, adiabatic_storage_amplitude, adiabaticity_margins, h_integral,
    retrieval_control_for_mode, storage_control_for_mode, AdiabaticityMargins, ShapingDirection,
};
use crate::dynamics::{
    conservation_residual, simulate_full_cavity, simulate_full_cavity_retrieval, simulate_retrieval, simulate_storage,
    Trajectory,
};
use crate::experiments::{
    bad_cavity_scan, breakdown_scan, default_tcg_grid, pad_with_zeros, retrieval_universality_scan,
    time_reversal_scan, BadCavityConfig, BreakdownConfig, Cell, ScanOptions, ScanTable, TimeReversalConfig,
    UniversalityConfig,
};
use crate::fast::{fast_storage_amplitude, optimal_fast_input, simulate_fast_protocol, PiPulseSpec};
use crate::{Envelope, EnvelopeRole, Error, PhysicalParams, Result, TimeGrid, C64};

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Time series of a single run.
    pub trajectory: Option<Series>,
    /// One row per sweep point, or a one-row summary for single runs.
    pub scan: ScanTable,
    /// Integrator report for single runs.
    pub convergence: Vec<(String, String)>,
}

/// Real columns sampled on a time axis.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    /// CSV with a header, `{:.16e}` values and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}"))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
    }
}

/// Complex column names expanded to `<name>_re,<name>_im`.
fn complex_columns(names: &[&str]) -> Vec<String> {
    let mut out = vec!["t".to_string()];
    for n in names {
        out.push(format!("{n}_re"));
        out.push(format!("{n}_im"));
    }
    out
}

fn trajectory_series(traj: &Trajectory, control: &dyn crate::Drive, input: Option<&dyn crate::Drive>) -> Series {
    let mut names = vec!["omega", "E_in", "P", "S", "E_out"];
    if traj.e_cav.is_some() {
        names.push("E_cav");
    }
    let mut s = Series { columns: complex_columns(&names), rows: Vec::new() };
    for (i, t) in traj.grid.times().enumerate() {
        let mut vals = vec![
            control.at(t),
            input.map_or(C64::new(0.0, 0.0), |d| d.at(t)),
            traj.p[i],
            traj.s[i],
            traj.e_out[i],
        ];
        if let Some(e) = &traj.e_cav {
            vals.push(e[i]);
        }
        let mut row = vec![t];
        row.extend(vals.iter().flat_map(|v| [v.re, v.im]));
        s.rows.push(row);
    }
    s
}

fn report(traj: &Trajectory) -> Vec<(String, String)> {
    vec![
        ("model".into(), model_name(traj).into()),
        ("grid_nodes".into(), traj.grid.len().to_string()),
        ("dt".into(), format!("{:e}", traj.grid.dt())),
        ("substeps".into(), traj.substeps.to_string()),
        ("refinement_change".into(), format!("{:e}", traj.refinement_change)),
        ("residual_excitation".into(), format!("{:e}", traj.residual_excitation)),
    ]
}

fn model_name(traj: &Trajectory) -> &'static str {
    if traj.e_cav.is_some() {
        "full-cavity"
    } else {
        "bad-cavity"
    }
}

fn scan_options(cfg: &RunConfig) -> ScanOptions {
    ScanOptions {
        integrator: cfg.integrator,
        shaping: cfg.shaping,
        base_nodes: cfg.base_nodes,
        grid_scale: cfg.grid_scale,
    }
}

fn scaled_nodes(cfg: &RunConfig) -> usize {
    (cfg.nodes - 1) * cfg.grid_scale.max(1) + 1
}

fn need<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKeys(vec![key.to_string()]))
}

/// The configured mode on `grid`, normalized.
fn load_mode(cfg: &RunConfig, duration: f64, grid: TimeGrid, role: EnvelopeRole) -> Result<Envelope> {
    match cfg.mode.as_ref() {
        Some(ModeSpec::Builtin(shape)) => Ok(shape.build(duration, grid)?.with_role(role)),
        Some(ModeSpec::File(path)) => {
            let path = cfg.mode_path(path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let samples = parse_mode_csv(&text)?;
            mode_from_samples(&samples, duration, grid, role)
        }
        None => Err(Error::MissingKeys(vec!["mode".into()])),
    }
}

fn margin_cells(m: &AdiabaticityMargins) -> [Cell; 3] {
    [m.adiabatic.into(), m.worst_ratio().into(), m.tcg.into()]
}

fn store(cfg: &RunConfig) -> Result<RunOutcome> {
    let params = cfg.params()?;
    let duration = need(cfg.duration, "T")?;
    let grid = TimeGrid::span(duration, scaled_nodes(cfg))?;
    let input = load_mode(cfg, duration, grid, EnvelopeRole::InputField)?;
    let (control, predicted) = match cfg.control {
        ControlSpec::Shaped => {
            let shaped = storage_control_for_mode(&params, &input, &cfg.shaping)?;
            (shaped.control, shaped.predicted_efficiency)
        }
        ControlSpec::Profile(_) => {
            let omega = C64::new(need(cfg.omega, "omega")?, 0.0);
            let control = Envelope::from_fn(grid, EnvelopeRole::Control, |_| omega)?;
            let amp = adiabatic_storage_amplitude(&params, &control, &input)?;
            (control, amp.norm_sqr())
        }
    };
    let traj = if params.has_cavity() {
        simulate_full_cavity(&params, &control, &input, &grid, &cfg.integrator)?
    } else {
        simulate_storage(&params, &control, &input, &grid, &cfg.integrator)?
    };
    let margins = adiabaticity_margins(&params, &control, Some(&input), duration);
    let eta_s = traj.eta_s.unwrap_or(0.0);

    let mut scan = ScanTable::new(
        "store",
        &[
            "C", "delta", "gamma_s", "T", "n", "model", "substeps", "eta_s", "eta_tot", "eta_s_predicted",
            "adiabatic", "worst_ratio", "tcg",
        ],
    );
    let mut row: Vec<Cell> = vec![
        params.c.into(),
        params.delta.into(),
        params.gamma_s.into(),
        duration.into(),
        grid.len().into(),
        model_name(&traj).into(),
        traj.substeps.into(),
        eta_s.into(),
        (eta_s * params.ideal_efficiency()).into(),
        predicted.into(),
    ];
    row.extend(margin_cells(&margins));
    scan.push_row(row)?;
    Ok(RunOutcome {
        convergence: report(&traj),
        trajectory: Some(trajectory_series(&traj, &control, Some(&input))),
        scan,
    })
}

fn retrieval_control(cfg: &RunConfig, params: &PhysicalParams) -> Result<(Envelope, Option<f64>)> {
    match cfg.control {
        ControlSpec::Shaped => {
            let duration = need(cfg.duration, "T")?;
            let grid = TimeGrid::span(duration, scaled_nodes(cfg))?;
            let target = load_mode(cfg, duration, grid, EnvelopeRole::OutputField)?;
            let shaped = retrieval_control_for_mode(params, &target, &cfg.shaping)?;
            let horizon = cfg.horizon.unwrap_or(duration + 10.0 / params.total_decay());
            if horizon < duration {
                return Err(Error::Config(format!("horizon {horizon} is shorter than T = {duration}")));
            }
            let extra = ((horizon - duration) / grid.dt()).round() as usize;
            Ok((pad_with_zeros(&shaped.control, extra)?, Some(shaped.predicted_efficiency)))
        }
        ControlSpec::Profile(shape) => {
            let horizon = need(cfg.horizon, "horizon")?;
            let omega = need(cfg.omega, "omega")?;
            let grid = TimeGrid::span(horizon, scaled_nodes(cfg))?;
            let control = Envelope::from_fn(grid, EnvelopeRole::Control, |t| {
                C64::new(omega * shape.profile(t / horizon), 0.0)
            })?;
            Ok((control, None))
        }
    }
}

fn retrieve(cfg: &RunConfig) -> Result<RunOutcome> {
    let params = cfg.params()?;
    let (control, shaped_prediction) = retrieval_control(cfg, &params)?;
    let grid = *control.grid();
    let traj = if params.has_cavity() {
        simulate_full_cavity_retrieval(&params, &control, &grid, &cfg.integrator)?
    } else {
        simulate_retrieval(&params, &control, &grid, &cfg.integrator)?
    };
    let predicted = match shaped_prediction {
        Some(p) => p,
        None => adiabatic_retrieval_efficiency(&params, h_integral(&control, grid.t0(), grid.t1())?),
    };
    let residual = if params.has_cavity() || params.gamma_s != 0.0 {
        Cell::Missing
    } else {
        conservation_residual(&traj, &params)?.into()
    };
    let mut scan = ScanTable::new(
        "retrieve",
        &[
            "C", "delta", "gamma_s", "horizon", "n", "model", "substeps", "eta_r", "eta_r_predicted", "ideal",
            "residual_excitation", "complete", "conservation_residual",
        ],
    );
    scan.push_row(vec![
        params.c.into(),
        params.delta.into(),
        params.gamma_s.into(),
        grid.t1().into(),
        grid.len().into(),
        model_name(&traj).into(),
        traj.substeps.into(),
        traj.eta_r.into(),
        predicted.into(),
        params.ideal_efficiency().into(),
        traj.residual_excitation.into(),
        (!traj.incomplete).into(),
        residual,
    ])?;
    Ok(RunOutcome {
        convergence: report(&traj),
        trajectory: Some(trajectory_series(&traj, &control, None)),
        scan,
    })
}

fn fast(cfg: &RunConfig) -> Result<RunOutcome> {
    let params = cfg.params()?;
    let duration = need(cfg.duration, "T")?;
    let grid = TimeGrid::span(duration, scaled_nodes(cfg))?;
    let optimal = optimal_fast_input(&params, duration, grid)?;
    let input = match cfg.mode {
        None => Envelope::new(
            grid,
            optimal.normalized()?.values().iter().map(|v| v.conj()).collect(),
            EnvelopeRole::InputField,
        )?,
        Some(_) => load_mode(cfg, duration, grid, EnvelopeRole::InputField)?,
    };
    let pulse = PiPulseSpec::new(cfg.pi_omega.unwrap_or(1e3 * params.c * params.gamma))?;
    let horizon = cfg.horizon.unwrap_or(duration + pulse.duration());
    let cells = ((horizon - grid.t0()) / grid.dt()).ceil().max(1.0) as usize;
    let run_grid = TimeGrid::new(grid.t0(), grid.t0().max(horizon), cells + 1)?;
    let result = simulate_fast_protocol(&params, &input, pulse, &run_grid, &cfg.integrator)?;
    let ideal_pulse = fast_storage_amplitude(&params, &input).norm_sqr();

    let mut scan = ScanTable::new(
        "fast",
        &[
            "C", "delta", "T", "n", "pi_omega", "pi_duration", "eta_s", "eta_s_ideal_pulse", "eta_s_optimal",
            "pulse_deviation", "optimal_incomplete",
        ],
    );
    scan.push_row(vec![
        params.c.into(),
        params.delta.into(),
        duration.into(),
        grid.len().into(),
        pulse.omega().into(),
        pulse.duration().into(),
        result.eta_s.into(),
        ideal_pulse.into(),
        (params.ideal_efficiency() * optimal.norm_sq).into(),
        result.deviation.into(),
        optimal.incomplete.into(),
    ])?;

    let mut series = Series { columns: complex_columns(&["omega", "E_in", "P", "S", "E_out"]), rows: Vec::new() };
    let omega = C64::new(pulse.omega(), 0.0);
    let zero = C64::new(0.0, 0.0);
    let segments: Vec<(&Trajectory, C64, bool)> = [
        Some((&result.storage, zero, true)),
        Some((&result.pulse, omega, false)),
        result.hold.as_ref().map(|h| (h, zero, false)),
    ]
    .into_iter()
    .flatten()
    .collect();
    for (k, (traj, om, with_input)) in segments.into_iter().enumerate() {
        let part = trajectory_series(traj, &move |_t: f64| om, with_input.then_some(&input as &dyn crate::Drive));
        series.rows.extend(part.rows.into_iter().skip(usize::from(k > 0)));
    }
    let mut convergence = vec![
        ("storage_substeps".into(), result.storage.substeps.to_string()),
        ("pulse_substeps".into(), result.pulse.substeps.to_string()),
    ];
    if let Some(h) = &result.hold {
        convergence.push(("hold_substeps".into(), h.substeps.to_string()));
    }
    convergence.push(("grid_nodes".into(), grid.len().to_string()));
    Ok(RunOutcome { trajectory: Some(series), scan, convergence })
}

fn shape(cfg: &RunConfig) -> Result<RunOutcome> {
    let params = cfg.params()?;
    let duration = need(cfg.duration, "T")?;
    let grid = TimeGrid::span(duration, scaled_nodes(cfg))?;
    let (shaped, input) = match cfg.direction {
        ShapingDirection::Storage => {
            let input = load_mode(cfg, duration, grid, EnvelopeRole::InputField)?;
            (storage_control_for_mode(&params, &input, &cfg.shaping)?, Some(input))
        }
        ShapingDirection::Retrieval => {
            let target = load_mode(cfg, duration, grid, EnvelopeRole::OutputField)?;
            (retrieval_control_for_mode(&params, &target, &cfg.shaping)?, None)
        }
    };
    let margins = adiabaticity_margins(&params, &shaped.control, input.as_ref(), duration);

    let mut columns = complex_columns(&["omega", "mode"]);
    columns.push("h".into());
    let mut series = Series { columns, rows: Vec::new() };
    for (i, t) in grid.times().enumerate() {
        let (o, m) = (shaped.control.values()[i], shaped.target.values()[i]);
        series.rows.push(vec![t, o.re, o.im, m.re, m.im, shaped.h_profile[i]]);
    }

    let mut scan = ScanTable::new(
        "shape",
        &[
            "C", "delta", "gamma_s", "T", "n", "direction", "predicted_efficiency", "boundary_deficit", "truncated",
            "omega_max", "omega_ratio", "omega_rate", "input_rate", "magnitude_rate", "phase_rate", "adiabatic",
            "worst_ratio", "tcg",
        ],
    );
    let mut row: Vec<Cell> = vec![
        params.c.into(),
        params.delta.into(),
        params.gamma_s.into(),
        duration.into(),
        grid.len().into(),
        match shaped.direction {
            ShapingDirection::Storage => "storage",
            ShapingDirection::Retrieval => "retrieval",
        }
        .into(),
        shaped.predicted_efficiency.into(),
        shaped.boundary_deficit.into(),
        shaped.truncated.into(),
        shaped.control.max_abs().into(),
        margins.omega.into(),
        margins.omega_rate.into(),
        margins.input_rate.into(),
        margins.magnitude_rate.into(),
        margins.phase_rate.into(),
    ];
    row.extend(margin_cells(&margins));
    scan.push_row(row)?;
    Ok(RunOutcome { trajectory: Some(series), scan, convergence: Vec::new() })
}

fn scan(cfg: &RunConfig) -> Result<RunOutcome> {
    let options = scan_options(cfg);
    let table = match cfg.command {
        Command::ScanBreakdown => breakdown_scan(&BreakdownConfig {
            c_list: cfg.c_list.clone(),
            delta_list: cfg.delta_list.clone(),
            tcg_grid: default_tcg_grid(cfg.tcg_min, cfg.tcg_max, cfg.tcg_points),
            options,
        }),
        Command::ScanUniversality => retrieval_universality_scan(&UniversalityConfig {
            c_list: cfg.c_list.clone(),
            delta_list: cfg.delta_list.clone(),
            controls: cfg.control_list.clone(),
            margin: cfg.margin,
            peak_fraction: cfg.peak_fraction,
            nodes: cfg.nodes,
            options,
        }),
        Command::ScanTimeReversal => time_reversal_scan(&TimeReversalConfig {
            c_list: cfg.c_list.clone(),
            modes: cfg.mode_list.clone(),
            tcg: cfg.tcg,
            delta: cfg.delta,
            gamma_s: cfg.gamma_s,
            options,
        }),
        Command::ScanBadCavity => bad_cavity_scan(&BadCavityConfig {
            c: need(cfg.c, "C")?,
            delta: cfg.delta,
            ratio_list: cfg.ratio_list.clone(),
            omega: need(cfg.omega, "omega")?,
            horizon: need(cfg.horizon, "horizon")?,
            nodes: cfg.nodes,
            options,
        }),
        other => unreachable!("{other} is not a scan"),
    };
    Ok(RunOutcome { trajectory: None, scan: table, convergence: Vec::new() })
}

/// Runs the configured command without touching the filesystem (apart from
/// reading a file-based mode).
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    match cfg.command {
        Command::Store => store(cfg),
        Command::Retrieve => retrieve(cfg),
        Command::Fast => fast(cfg),
        Command::Shape => shape(cfg),
        _ => scan(cfg),
    }
}

/// `key = value` metadata: the effective config, table metadata, the
/// integrator report and the scan checks.
pub fn render_meta(cfg: &RunConfig, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    let mut section = |title: &str, pairs: &mut dyn Iterator<Item = (String, String)>| {
        let _ = writeln!(s, "[{title}]");
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s.push('\n');
    };
    section("config", &mut cfg.echo().into_iter());
    section("table", &mut outcome.scan.metadata.iter().cloned());
    if !outcome.convergence.is_empty() {
        section("convergence", &mut outcome.convergence.iter().cloned());
    }
    if !outcome.scan.checks.is_empty() {
        section(
            "checks",
            &mut outcome.scan.checks.iter().map(|c| {
                (c.name.clone(), format!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.detail))
            }),
        );
    }
    s.truncate(s.trim_end().len());
    s.push('\n');
    s
}

/// Executes `cfg` and writes `<output>_trajectory.csv` (single runs),
/// `<output>_scan.csv` and `<output>_meta.txt`. Returns the outcome and the
/// paths written.
pub fn run(cfg: &RunConfig) -> Result<(RunOutcome, Vec<PathBuf>)> {
    let outcome = execute(cfg)?;
    let mut files = Vec::new();
    let mut write = |suffix: &str, body: String| -> Result<()> {
        let path = PathBuf::from(format!("{}_{suffix}", cfg.output));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(())
    };
    if let Some(series) = &outcome.trajectory {
        write("trajectory.csv", series.to_csv())?;
    }
    write("scan.csv", outcome.scan.to_csv())?;
    write("meta.txt", render_meta(cfg, &outcome))?;
    Ok((outcome, files))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::parse_config;

    #[test]
    fn retrieve_constant_control() {
        let cfg = parse_config("command = retrieve\nC = 1\ndelta = 0\nomega = 3\nhorizon = 20\nn = 2001\n").unwrap();
        let out = execute(&cfg).unwrap();
        let eta = out.scan.real(0, "eta_r").unwrap();
        assert!((eta - 0.5).abs() < 2e-3, "{eta}");
        let r = out.scan.real(0, "conservation_residual").unwrap();
        assert!(r > 0.0 && r < 1e-2, "{r}");
        let series = out.trajectory.unwrap();
        assert_eq!(series.rows.len(), 2001);
        assert_eq!(series.columns[..3], ["t", "omega_re", "omega_im"]);
    }

    #[test]
    fn store_shaped_gaussian() {
        let cfg = parse_config("command = store\nC = 10\ndelta = 0\nmode = gaussian\nT = 10\nn = 4001\n").unwrap();
        let out = execute(&cfg).unwrap();
        let eta = out.scan.real(0, "eta_s").unwrap();
        assert!((eta - 10.0 / 11.0).abs() < 0.01 * 10.0 / 11.0, "{eta}");
        assert_eq!(out.scan.cell(0, "adiabatic"), Some(&Cell::Bool(true)));
    }

    #[test]
    fn fast_optimal_input() {
        let cfg = parse_config("command = fast\nC = 10\nT = 1\nn = 20001\n").unwrap();
        let out = execute(&cfg).unwrap();
        let ideal = out.scan.real(0, "eta_s_optimal").unwrap();
        let got = out.scan.real(0, "eta_s").unwrap();
        assert!((got - ideal).abs() < 1e-2, "{got} vs {ideal}");
        let series = out.trajectory.unwrap();
        assert!(series.rows.windows(2).all(|w| w[1][0] > w[0][0]));
    }

    #[test]
    fn shape_rows_cover_grid() {
        let cfg = parse_config("command = shape\nC = 1\ndelta = 5\nmode = sine2\nT = 50\nn = 501\n").unwrap();
        let out = execute(&cfg).unwrap();
        assert_eq!(out.trajectory.unwrap().rows.len(), 501);
        assert_eq!(out.scan.cell(0, "direction"), Some(&Cell::Text("storage".into())));
    }

    #[test]
    fn meta_sections() {
        let cfg = parse_config("command = scan-badcavity\nratio_list = 10, 100\n").unwrap();
        let out = execute(&cfg).unwrap();
        let meta = render_meta(&cfg, &out);
        assert!(meta.starts_with("[config]\ncommand = scan-badcavity\n"));
        assert!(meta.contains("\n[checks]\nbad_cavity_monotone = PASS"));
        assert!(meta.ends_with('\n') && !meta.ends_with("\n\n"));
    }
}
