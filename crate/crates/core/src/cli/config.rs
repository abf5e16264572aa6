use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adiabatic::{ShapingDirection, ShapingOptions};
use crate::dynamics::IntegratorOptions;
use crate::experiments::ControlShape;
use crate::modes::ModeShape;
use crate::{Error, PhysicalParams, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Store,
    Retrieve,
    Fast,
    Shape,
    ScanBreakdown,
    ScanUniversality,
    ScanTimeReversal,
    ScanBadCavity,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Store,
        Command::Retrieve,
        Command::Fast,
        Command::Shape,
        Command::ScanBreakdown,
        Command::ScanUniversality,
        Command::ScanTimeReversal,
        Command::ScanBadCavity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Store => "store",
            Command::Retrieve => "retrieve",
            Command::Fast => "fast",
            Command::Shape => "shape",
            Command::ScanBreakdown => "scan-breakdown",
            Command::ScanUniversality => "scan-universality",
            Command::ScanTimeReversal => "scan-timereversal",
            Command::ScanBadCavity => "scan-badcavity",
        }
    }

    pub fn is_scan(&self) -> bool {
        matches!(
            self,
            Command::ScanBreakdown | Command::ScanUniversality | Command::ScanTimeReversal | Command::ScanBadCavity
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!("unknown command `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Where an input or target mode comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSpec {
    Builtin(ModeShape),
    /// Two-column `re,im` CSV, samples spread uniformly over `[0, T]`.
    File(PathBuf),
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::Builtin(m) => write!(f, "{m}"),
            ModeSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Control used by single runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlSpec {
    /// Closed-form optimal control for the configured mode.
    Shaped,
    /// Fixed profile of peak `omega` over the whole window.
    Profile(ControlShape),
}

impl fmt::Display for ControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSpec::Shaped => f.write_str("shaped"),
            ControlSpec::Profile(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for ControlSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "shaped" => Ok(ControlSpec::Shaped),
            "weak" => Err(Error::Config("control `weak` is only available in scan-universality".into())),
            other => other.parse().map(ControlSpec::Profile),
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub c: Option<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub gamma_s: f64,
    pub kappa: Option<f64>,
    pub g_n: Option<f64>,
    pub mode: Option<ModeSpec>,
    /// Mode window `T`.
    pub duration: Option<f64>,
    /// Grid nodes.
    pub nodes: usize,
    pub horizon: Option<f64>,
    pub control: ControlSpec,
    pub omega: Option<f64>,
    pub direction: ShapingDirection,
    /// Output path prefix.
    pub output: String,
    pub integrator: IntegratorOptions,
    pub shaping: ShapingOptions,
    pub base_nodes: usize,
    pub grid_scale: usize,
    pub c_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub tcg_min: f64,
    pub tcg_max: f64,
    pub tcg_points: usize,
    pub tcg: f64,
    pub ratio_list: Vec<f64>,
    pub pi_omega: Option<f64>,
    pub margin: f64,
    pub peak_fraction: f64,
    pub mode_list: Vec<ModeShape>,
    pub control_list: Vec<ControlShape>,
    /// Directory that relative mode paths are resolved against.
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Physical parameters of a single run.
    pub fn params(&self) -> Result<PhysicalParams> {
        let p = match (self.c, self.kappa, self.g_n) {
            (None, Some(k), Some(g)) => PhysicalParams::from_cavity(k, g, self.gamma, self.delta)?,
            (Some(c), None, None) => PhysicalParams::new(c, self.delta)?.with_gamma(self.gamma)?,
            (Some(c), Some(k), Some(g)) => PhysicalParams::new(c, self.delta)?
                .with_gamma(self.gamma)?
                .with_cavity(k, g)?,
            _ => return Err(Error::Config("set C, or both kappa and gN".into())),
        };
        p.with_gamma_s(self.gamma_s)
    }

    /// Resolved path of a file-based mode.
    pub fn mode_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Effective settings as `key = value` pairs, defaults included.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("command", self.command.to_string());
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
        for spec in KEYS.iter().filter(|s| s.applies(self.command)) {
            let v = match spec.name {
                "command" => continue,
                "C" => opt(self.c),
                "gamma" => format!("{}", self.gamma),
                "delta" => format!("{}", self.delta),
                "gamma_s" => format!("{}", self.gamma_s),
                "kappa" => opt(self.kappa),
                "gN" => opt(self.g_n),
                "mode" => self.mode.as_ref().map_or_else(|| "optimal".to_string(), |m| m.to_string()),
                "T" => opt(self.duration),
                "n" => self.nodes.to_string(),
                "horizon" => opt(self.horizon),
                "control" => self.control.to_string(),
                "omega" => opt(self.omega),
                "direction" => match self.direction {
                    ShapingDirection::Storage => "storage".into(),
                    ShapingDirection::Retrieval => "retrieval".into(),
                },
                "output" => self.output.clone(),
                "epsilon_boundary" => format!("{:e}", self.shaping.epsilon_boundary),
                "truncation_fraction" => format!("{}", self.shaping.truncation_fraction),
                "truncate" => self.shaping.truncate.to_string(),
                "tolerance" => format!("{:e}", self.integrator.tolerance),
                "stiffness" => format!("{}", self.integrator.stiffness),
                "max_steps" => self.integrator.max_steps.to_string(),
                "base_nodes" => self.base_nodes.to_string(),
                "C_list" => list(&self.c_list),
                "delta_list" => list(&self.delta_list),
                "tcg_min" => format!("{}", self.tcg_min),
                "tcg_max" => format!("{}", self.tcg_max),
                "tcg_points" => self.tcg_points.to_string(),
                "tcg" => format!("{}", self.tcg),
                "ratio_list" => list(&self.ratio_list),
                "pi_omega" => opt(self.pi_omega),
                "margin" => format!("{}", self.margin),
                "peak_fraction" => format!("{}", self.peak_fraction),
                "mode_list" => self.mode_list.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
                "control_list" => self.control_list.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
                other => unreachable!("key `{other}` has no echo"),
            };
            put(spec.name, v);
        }
        put("grid_scale", self.grid_scale.to_string());
        out
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "unset".to_string(), |v| format!("{v}"))
}

/// Which commands accept a key.
#[derive(Debug, Clone, Copy)]
enum Scope {
    All,
    Only(&'static [Command]),
}

struct KeySpec {
    name: &'static str,
    scope: Scope,
}

impl KeySpec {
    fn applies(&self, c: Command) -> bool {
        match self.scope {
            Scope::All => true,
            Scope::Only(list) => list.contains(&c),
        }
    }
}

use Command::*;

const SINGLE: &[Command] = &[Store, Retrieve, Fast, Shape];
const SHAPED: &[Command] = &[Store, Retrieve, Shape, ScanBreakdown, ScanTimeReversal];

const KEYS: &[KeySpec] = &[
    KeySpec { name: "command", scope: Scope::All },
    KeySpec { name: "C", scope: Scope::Only(&[Store, Retrieve, Fast, Shape, ScanBadCavity]) },
    KeySpec { name: "gamma", scope: Scope::Only(SINGLE) },
    KeySpec { name: "delta", scope: Scope::Only(&[Store, Retrieve, Fast, Shape, ScanTimeReversal, ScanBadCavity]) },
    KeySpec { name: "gamma_s", scope: Scope::Only(&[Store, Retrieve, Fast, Shape, ScanTimeReversal]) },
    KeySpec { name: "kappa", scope: Scope::Only(&[Store, Retrieve]) },
    KeySpec { name: "gN", scope: Scope::Only(&[Store, Retrieve]) },
    KeySpec { name: "mode", scope: Scope::Only(SINGLE) },
    KeySpec { name: "T", scope: Scope::Only(SINGLE) },
    KeySpec { name: "n", scope: Scope::Only(&[Store, Retrieve, Fast, Shape, ScanUniversality, ScanBadCavity]) },
    KeySpec { name: "horizon", scope: Scope::Only(&[Retrieve, Fast, ScanBadCavity]) },
    KeySpec { name: "control", scope: Scope::Only(&[Store, Retrieve]) },
    KeySpec { name: "omega", scope: Scope::Only(&[Store, Retrieve, ScanBadCavity]) },
    KeySpec { name: "direction", scope: Scope::Only(&[Shape]) },
    KeySpec { name: "output", scope: Scope::All },
    KeySpec { name: "epsilon_boundary", scope: Scope::Only(SHAPED) },
    KeySpec { name: "truncation_fraction", scope: Scope::Only(SHAPED) },
    KeySpec { name: "truncate", scope: Scope::Only(SHAPED) },
    KeySpec { name: "tolerance", scope: Scope::Only(&[Store, Retrieve, Fast, ScanBreakdown, ScanUniversality, ScanTimeReversal, ScanBadCavity]) },
    KeySpec { name: "stiffness", scope: Scope::Only(&[Store, Retrieve, Fast, ScanBreakdown, ScanUniversality, ScanTimeReversal, ScanBadCavity]) },
    KeySpec { name: "max_steps", scope: Scope::Only(&[Store, Retrieve, Fast, ScanBreakdown, ScanUniversality, ScanTimeReversal, ScanBadCavity]) },
    KeySpec { name: "base_nodes", scope: Scope::Only(&[ScanBreakdown, ScanTimeReversal]) },
    KeySpec { name: "C_list", scope: Scope::Only(&[ScanBreakdown, ScanUniversality, ScanTimeReversal]) },
    KeySpec { name: "delta_list", scope: Scope::Only(&[ScanBreakdown, ScanUniversality]) },
    KeySpec { name: "tcg_min", scope: Scope::Only(&[ScanBreakdown]) },
    KeySpec { name: "tcg_max", scope: Scope::Only(&[ScanBreakdown]) },
    KeySpec { name: "tcg_points", scope: Scope::Only(&[ScanBreakdown]) },
    KeySpec { name: "tcg", scope: Scope::Only(&[ScanTimeReversal]) },
    KeySpec { name: "ratio_list", scope: Scope::Only(&[ScanBadCavity]) },
    KeySpec { name: "pi_omega", scope: Scope::Only(&[Fast]) },
    KeySpec { name: "margin", scope: Scope::Only(&[ScanUniversality]) },
    KeySpec { name: "peak_fraction", scope: Scope::Only(&[ScanUniversality]) },
    KeySpec { name: "mode_list", scope: Scope::Only(&[ScanTimeReversal]) },
    KeySpec { name: "control_list", scope: Scope::Only(&[ScanUniversality]) },
];

/// Raw `key = value` entries with their 1-based line numbers.
struct Entries {
    map: BTreeMap<&'static str, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| Error::ConfigLine {
                line,
                message: format!("`{key}`: expected {what}, got `{v}`"),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let x: Option<f64> = self.get(key, "a number")?;
        if let (Some(x), Some((_, line))) = (x, self.raw(key)) {
            if !x.is_finite() {
                return Err(Error::ConfigLine { line, message: format!("`{key}` must be finite") });
            }
        }
        Ok(x)
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.get(key, "a non-negative integer")
    }

    fn list<T>(&self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<Vec<T>>> {
        let Some((v, line)) = self.raw(key) else { return Ok(None) };
        let items: Vec<&str> = v.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(Error::ConfigLine { line, message: format!("`{key}` is empty") });
        }
        items
            .iter()
            .map(|s| {
                parse(s).ok_or_else(|| Error::ConfigLine {
                    line,
                    message: format!("`{key}`: expected a list of {what}, got `{s}`"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.list(key, "numbers", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
    }
}

fn split_lines(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(Error::ConfigLine { line, message: format!("expected `key = value`, got `{content}`") });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(spec) = KEYS.iter().find(|s| s.name == k) else {
            return Err(Error::UnknownKey { key: k.to_string(), line });
        };
        if v.is_empty() {
            return Err(Error::ConfigLine { line, message: format!("`{k}` has no value") });
        }
        if let Some((_, first)) = map.insert(spec.name, (v.to_string(), line)) {
            return Err(Error::ConfigLine { line, message: format!("`{k}` already set on line {first}") });
        }
    }
    Ok(Entries { map })
}

fn required(command: Command, e: &Entries) -> Vec<&'static str> {
    let has_cavity = e.has("kappa") || e.has("gN");
    let shaped = e.raw("control").map(|(v, _)| v.trim() == "shaped");
    let mut need: Vec<&'static str> = Vec::new();
    let cooperativity = |need: &mut Vec<&'static str>| {
        if has_cavity {
            need.extend(["kappa", "gN"]);
        } else {
            need.push("C");
        }
    };
    match command {
        Store => {
            cooperativity(&mut need);
            need.extend(["delta", "mode", "T", "n"]);
            if shaped == Some(false) {
                need.push("omega");
            }
        }
        Retrieve => {
            cooperativity(&mut need);
            need.extend(["delta", "n"]);
            match shaped {
                Some(true) => need.extend(["mode", "T"]),
                _ => need.extend(["omega", "horizon"]),
            }
        }
        Fast => need.extend(["C", "T", "n"]),
        Shape => need.extend(["C", "delta", "mode", "T", "n"]),
        _ => {}
    }
    need.retain(|k| !e.has(k));
    need
}

fn parse_direction(s: &str) -> Option<ShapingDirection> {
    match s {
        "storage" => Some(ShapingDirection::Storage),
        "retrieval" => Some(ShapingDirection::Retrieval),
        _ => None,
    }
}

fn parse_mode(s: &str) -> ModeSpec {
    s.parse::<ModeShape>()
        .map(ModeSpec::Builtin)
        .unwrap_or_else(|_| ModeSpec::File(PathBuf::from(s)))
}

fn positive(e: &Entries, key: &str, x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x)
    } else {
        let line = e.raw(key).map_or(0, |(_, l)| l);
        Err(Error::ConfigLine { line, message: format!("`{key}` must be positive, got {x}") })
    }
}

/// Parses and validates a flat `key = value` configuration.
///
/// `#` starts a comment. Defaults are filled for every optional key and
/// physical parameters are checked against their invariants.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let e = split_lines(text)?;
    let command: Command = match e.raw("command") {
        None => return Err(Error::MissingKeys(vec!["command".into()])),
        Some((v, line)) => v.parse().map_err(|err: Error| Error::ConfigLine { line, message: err.to_string() })?,
    };
    for (k, (_, line)) in &e.map {
        let spec = KEYS.iter().find(|s| s.name == *k).expect("keys are filtered on read");
        if !spec.applies(command) {
            return Err(Error::ConfigLine { line: *line, message: format!("`{k}` is not used by `{command}`") });
        }
    }
    let missing = required(command, &e);
    if !missing.is_empty() {
        return Err(Error::MissingKeys(missing.into_iter().map(String::from).collect()));
    }

    let integ_default = IntegratorOptions::default();
    let integrator = IntegratorOptions {
        tolerance: e.real("tolerance")?.map_or(Ok(integ_default.tolerance), |x| positive(&e, "tolerance", x))?,
        stiffness: e.real("stiffness")?.map_or(Ok(integ_default.stiffness), |x| positive(&e, "stiffness", x))?,
        max_steps: e.count("max_steps")?.unwrap_or(integ_default.max_steps),
    };
    let shape_default = ShapingOptions::default();
    let shaping = ShapingOptions {
        epsilon_boundary: e.real("epsilon_boundary")?.unwrap_or(shape_default.epsilon_boundary),
        truncation_fraction: e.real("truncation_fraction")?.unwrap_or(shape_default.truncation_fraction),
        truncate: e.get("truncate", "true or false")?.unwrap_or(shape_default.truncate),
    };

    let default_nodes = match command {
        ScanUniversality => crate::experiments::UniversalityConfig::default().nodes,
        ScanBadCavity => crate::experiments::BadCavityConfig::default().nodes,
        _ => 0,
    };
    let nodes = e.count("n")?.unwrap_or(default_nodes);
    if e.has("n") && nodes < 3 {
        return Err(Error::ConfigLine { line: e.raw("n").map_or(0, |r| r.1), message: "`n` must be at least 3".into() });
    }

    let control = match e.raw("control") {
        None if command == Retrieve => ControlSpec::Profile(ControlShape::Constant),
        None => ControlSpec::Shaped,
        Some((v, line)) => v.parse().map_err(|err: Error| Error::ConfigLine { line, message: err.to_string() })?,
    };
    if command == Store && !matches!(control, ControlSpec::Shaped | ControlSpec::Profile(ControlShape::Constant)) {
        let line = e.raw("control").map_or(0, |r| r.1);
        return Err(Error::ConfigLine { line, message: "store supports `control = shaped` or `constant`".into() });
    }

    let breakdown = crate::experiments::BreakdownConfig::default();
    let universality = crate::experiments::UniversalityConfig::default();
    let reversal = crate::experiments::TimeReversalConfig::default();
    let bad = crate::experiments::BadCavityConfig::default();

    let (c_default, delta_default) = match command {
        ScanBreakdown => (breakdown.c_list.clone(), vec![0.0, 100.0, 1000.0]),
        ScanUniversality => (universality.c_list.clone(), universality.delta_list.clone()),
        ScanTimeReversal => (reversal.c_list.clone(), vec![reversal.delta]),
        _ => (Vec::new(), Vec::new()),
    };

    let cfg = RunConfig {
        command,
        c: e.real("C")?.or(if command == ScanBadCavity { Some(bad.c) } else { None }),
        gamma: e.real("gamma")?.unwrap_or(1.0),
        delta: e.real("delta")?.unwrap_or(if command == ScanTimeReversal { reversal.delta } else { 0.0 }),
        gamma_s: e.real("gamma_s")?.unwrap_or(0.0),
        kappa: e.real("kappa")?,
        g_n: e.real("gN")?,
        mode: e.raw("mode").map(|(v, _)| parse_mode(v)),
        duration: e.real("T")?.map(|x| positive(&e, "T", x)).transpose()?,
        nodes,
        horizon: e
            .real("horizon")?
            .map(|x| positive(&e, "horizon", x))
            .transpose()?
            .or(if command == ScanBadCavity { Some(bad.horizon) } else { None }),
        control,
        omega: e.real("omega")?.or(if command == ScanBadCavity { Some(bad.omega) } else { None }),
        direction: match e.raw("direction") {
            None => ShapingDirection::Storage,
            Some((v, line)) => parse_direction(v).ok_or_else(|| Error::ConfigLine {
                line,
                message: format!("`direction` must be `storage` or `retrieval`, got `{v}`"),
            })?,
        },
        output: e.raw("output").map_or_else(|| "cavmem".to_string(), |(v, _)| v.to_string()),
        integrator,
        shaping,
        base_nodes: e.count("base_nodes")?.unwrap_or(crate::experiments::ScanOptions::default().base_nodes),
        grid_scale: 1,
        c_list: e.reals("C_list")?.unwrap_or(c_default),
        delta_list: e.reals("delta_list")?.unwrap_or(delta_default),
        tcg_min: e.real("tcg_min")?.unwrap_or(0.1),
        tcg_max: e.real("tcg_max")?.unwrap_or(1000.0),
        tcg_points: e.count("tcg_points")?.unwrap_or(breakdown.tcg_grid.len()),
        tcg: e.real("tcg")?.unwrap_or(reversal.tcg),
        ratio_list: e.reals("ratio_list")?.unwrap_or(bad.ratio_list.clone()),
        pi_omega: e.real("pi_omega")?,
        margin: e.real("margin")?.unwrap_or(universality.margin),
        peak_fraction: e.real("peak_fraction")?.unwrap_or(universality.peak_fraction),
        mode_list: e.list("mode_list", "builtin modes", |s| s.parse().ok())?.unwrap_or(reversal.modes.clone()),
        control_list: e
            .list("control_list", "control shapes", |s| s.parse().ok())?
            .unwrap_or(universality.controls.clone()),
        base_dir: PathBuf::new(),
    };
    validate(&cfg, &e)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, e: &Entries) -> Result<()> {
    let line_of = |k: &str| e.raw(k).map_or(0, |r| r.1);
    let bad = |k: &str, msg: String| Err(Error::ConfigLine { line: line_of(k), message: msg });
    if !cfg.command.is_scan() || cfg.command == ScanBadCavity {
        cfg.params()?;
    }
    if let Some(w) = cfg.pi_omega {
        if w <= 0.0 {
            return bad("pi_omega", format!("`pi_omega` must be positive, got {w}"));
        }
    }
    if let Some(w) = cfg.omega {
        if w < 0.0 {
            return bad("omega", format!("`omega` must be non-negative, got {w}"));
        }
    }
    if cfg.command == ScanBreakdown {
        if !(cfg.tcg_min > 0.0 && cfg.tcg_max > cfg.tcg_min) {
            return bad("tcg_max", format!("need 0 < tcg_min < tcg_max, got {} and {}", cfg.tcg_min, cfg.tcg_max));
        }
        if cfg.tcg_points < 2 {
            return bad("tcg_points", "`tcg_points` must be at least 2".into());
        }
    }
    if cfg.command.is_scan() {
        for (k, v) in [("C_list", &cfg.c_list), ("ratio_list", &cfg.ratio_list)] {
            if e.has(k) && v.iter().any(|x| *x <= 0.0) {
                return bad(k, format!("`{k}` entries must be positive"));
            }
        }
        if cfg.command == ScanBadCavity && cfg.ratio_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad("ratio_list", "`ratio_list` must be strictly increasing".into());
        }
        if e.has("base_nodes") && cfg.base_nodes < 3 {
            return bad("base_nodes", "`base_nodes` must be at least 3".into());
        }
        if cfg.command == ScanTimeReversal && cfg.tcg <= 0.0 {
            return bad("tcg", "`tcg` must be positive".into());
        }
        if cfg.command == ScanUniversality && !(cfg.margin > 0.0 && cfg.peak_fraction > 0.0) {
            return bad("margin", "`margin` and `peak_fraction` must be positive".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_STORE: &str = "command = store\nC = 10\ndelta = 0\nmode = gaussian\nT = 10\nn = 2001\n";

    #[test]
    fn minimal_store_fills_defaults() {
        let cfg = parse_config(MINIMAL_STORE).unwrap();
        assert_eq!(cfg.command, Store);
        assert_eq!(cfg.c, Some(10.0));
        assert_eq!(cfg.mode, Some(ModeSpec::Builtin(ModeShape::GaussianLike)));
        assert_eq!(cfg.control, ControlSpec::Shaped);
        assert_eq!(cfg.gamma, 1.0);
        assert_eq!(cfg.gamma_s, 0.0);
        assert_eq!(cfg.output, "cavmem");
        assert_eq!(cfg.integrator, IntegratorOptions::default());
        assert_eq!(cfg.shaping, ShapingOptions::default());
        let echo = cfg.echo();
        assert!(echo.iter().any(|(k, v)| k == "tolerance" && v == "1e-6"));
        assert!(echo.iter().any(|(k, v)| k == "epsilon_boundary" && v == "1e-4"));
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config("coop = 10\n").unwrap_err();
        match err {
            Error::UnknownKey { key, line } => {
                assert_eq!(key, "coop");
                assert_eq!(line, 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_keys_are_listed() {
        let err = parse_config("command = store\nC = 1\n").unwrap_err();
        match err {
            Error::MissingKeys(keys) => assert_eq!(keys, ["delta", "mode", "T", "n"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let err = parse_config("command = store\n# comment\nC = ten\ndelta = 0\nmode = gaussian\nT = 1\nn = 11\n")
            .unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn negative_cooperativity_is_a_domain_error() {
        let text = MINIMAL_STORE.replace("C = 10", "C = -1");
        assert!(matches!(parse_config(&text), Err(Error::Domain(_))));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{}  # trailing\n", MINIMAL_STORE.trim_end());
        assert!(parse_config(&text).is_ok());
    }

    #[test]
    fn duplicate_and_misplaced_keys() {
        let dup = format!("{MINIMAL_STORE}C = 2\n");
        assert!(matches!(parse_config(&dup), Err(Error::ConfigLine { line: 7, .. })));
        let misplaced = format!("{MINIMAL_STORE}ratio_list = 3, 10\n");
        assert!(matches!(parse_config(&misplaced), Err(Error::ConfigLine { line: 7, .. })));
    }

    #[test]
    fn retrieval_requirements_follow_control() {
        let err = parse_config("command = retrieve\nC = 1\ndelta = 0\nn = 101\n").unwrap_err();
        assert!(matches!(err, Error::MissingKeys(ref k) if k == &["omega", "horizon"]), "{err:?}");
        let err = parse_config("command = retrieve\ncontrol = shaped\nC = 1\ndelta = 0\nn = 101\n").unwrap_err();
        assert!(matches!(err, Error::MissingKeys(ref k) if k == &["mode", "T"]), "{err:?}");
    }

    #[test]
    fn cavity_parameters_replace_cooperativity() {
        let text = "command = retrieve\nkappa = 100\ngN = 10\ndelta = 0\nn = 101\nomega = 1\nhorizon = 5\n";
        let cfg = parse_config(text).unwrap();
        let p = cfg.params().unwrap();
        assert!((p.c - 1.0).abs() < 1e-15);
        assert!(p.has_cavity());
    }

    #[test]
    fn scan_lists() {
        let cfg = parse_config("command = scan-breakdown\nC_list = 1, 10 100\ndelta_list = 0\n").unwrap();
        assert_eq!(cfg.c_list, [1.0, 10.0, 100.0]);
        assert_eq!(cfg.tcg_points, 40);
        let err = parse_config("command = scan-badcavity\nratio_list = 3, x\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 2, .. }));
        let err = parse_config("command = scan-timereversal\nmode_list = gaussian, zigzag\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 2, .. }));
    }

    #[test]
    fn unknown_command() {
        assert!(matches!(parse_config("command = teleport\n"), Err(Error::ConfigLine { line: 1, .. })));
        assert!(matches!(parse_config("C = 1\n"), Err(Error::MissingKeys(_))));
    }

    #[test]
    fn file_modes() {
        let text = MINIMAL_STORE.replace("mode = gaussian", "mode = pulses/input.csv");
        let mut cfg = parse_config(&text).unwrap();
        cfg.base_dir = PathBuf::from("/data");
        let Some(ModeSpec::File(p)) = cfg.mode.clone() else { panic!() };
        assert_eq!(cfg.mode_path(&p), PathBuf::from("/data/pulses/input.csv"));
    }
}
