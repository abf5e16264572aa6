//! Parameter sweeps that reproduce the storage/retrieval efficiency studies.
//!
//! Every scan evaluates its rows in parallel and returns them in sweep
//! order, so a table depends only on its inputs.

mod bad_cavity;
mod breakdown;
mod reversal;
mod universality;

pub use bad_cavity::{bad_cavity_scan, BadCavityConfig};
pub use breakdown::{breakdown_scan, default_tcg_grid, plateau_crossing, BreakdownConfig};
pub(crate) use reversal::pad_with_zeros;
pub use reversal::{time_reversal_scan, TimeReversalConfig};
pub use universality::{retrieval_universality_scan, ControlShape, UniversalityConfig};

use std::fmt;

use crate::adiabatic::ShapingOptions;
use crate::dynamics::IntegratorOptions;
use crate::{Error, Result};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    /// No value, e.g. a row whose run failed.
    Missing,
}

impl Cell {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Cell::Real(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cell::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Real(x) => write!(f, "{x:.16e}"),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Missing => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Real)
    }
}

/// A named property evaluated over a finished table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Rows of a sweep with a fixed column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl ScanTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        ScanTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: vec![("code_version".to_string(), crate::VERSION.to_string())],
            checks: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::domain(format!(
                "row has {} cells, table '{}' has {} columns",
                row.len(),
                self.name,
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Cell> {
        let j = self.column_index(column)?;
        self.rows.get(row).map(|r| &r[j])
    }

    pub fn real(&self, row: usize, column: &str) -> Option<f64> {
        self.cell(row, column).and_then(Cell::as_real)
    }

    /// All values of a column, `None` where missing or non-numeric.
    pub fn reals(&self, column: &str) -> Vec<Option<f64>> {
        (0..self.rows.len()).map(|i| self.real(i, column)).collect()
    }

    pub fn add_metadata(&mut self, key: &str, value: impl fmt::Display) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn add_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// CSV with a header row, `{:.16e}` reals and `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }
}

/// Numerical settings shared by all scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub integrator: IntegratorOptions,
    pub shaping: ShapingOptions,
    /// Minimum number of grid nodes for a shaped control.
    pub base_nodes: usize,
    /// Multiplies every grid's cell count.
    pub grid_scale: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            integrator: IntegratorOptions::default(),
            shaping: ShapingOptions::default(),
            base_nodes: 4001,
            grid_scale: 1,
        }
    }
}

impl ScanOptions {
    pub(crate) fn nodes(&self, n: usize) -> usize {
        (n - 1) * self.grid_scale.max(1) + 1
    }

    pub(crate) fn describe(&self, table: &mut ScanTable) {
        table.add_metadata("tolerance", self.integrator.tolerance);
        table.add_metadata("stiffness", self.integrator.stiffness);
        table.add_metadata("max_steps", self.integrator.max_steps);
        table.add_metadata("epsilon_boundary", self.shaping.epsilon_boundary);
        table.add_metadata("truncation_fraction", self.shaping.truncation_fraction);
        table.add_metadata("base_nodes", self.base_nodes);
        table.add_metadata("grid_scale", self.grid_scale);
    }
}

/// Largest relative step `|Ω_{i+1} − Ω_i| / max(|Ω_i|, |Ω_{i+1}|)` over cells
/// where the control exceeds 1% of its peak.
pub(crate) fn control_roughness(values: &[crate::C64]) -> f64 {
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    values
        .windows(2)
        .filter(|w| w[0].norm().max(w[1].norm()) > 1e-2 * peak)
        .map(|w| (w[1] - w[0]).norm() / w[0].norm().max(w[1].norm()))
        .fold(0.0, f64::max)
}

/// Target relative step between control samples.
pub(crate) const CONTROL_STEP: f64 = 0.05;

/// Cap on grid nodes chosen by resolution refinement.
pub(crate) const MAX_NODES: usize = 1 << 22;

/// Node count that brings `roughness` at `n` nodes down to [`CONTROL_STEP`].
pub(crate) fn refined_nodes(n: usize, roughness: f64) -> usize {
    if roughness <= CONTROL_STEP {
        return n;
    }
    let cells = ((n - 1) as f64 * roughness / CONTROL_STEP * 1.1).ceil() as usize;
    (cells + 1).min(MAX_NODES)
}

pub(crate) fn error_text(e: &Error) -> String {
    e.to_string().replace(['\n', ','], " ")
}
