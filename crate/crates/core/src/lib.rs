//! Photon storage and retrieval in a Λ-type atomic ensemble coupled to a
//! single-mode cavity.
//!
//! The crate integrates the bad-cavity and full three-mode equations of
//! motion, synthesizes optimal storage/retrieval controls in closed form,
//! models fast (π-pulse) protocols, and runs the efficiency scans that map
//! out where adiabatic storage breaks down.
//!
//! Units: the optical polarization decay rate γ sets the time unit. Rates
//! are in units of γ and times in units of 1/γ.

pub mod adiabatic;
pub mod cli;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod experiments;
pub mod fast;
pub mod grid;
pub mod modes;
pub mod params;
pub mod state;

pub use envelope::{mode_overlap, time_reverse, Drive, Envelope, EnvelopeRole};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use params::PhysicalParams;
pub use state::{fidelity_from_efficiency, AtomicState};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;

/// Crate version embedded into output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
