//! Solver library for a lithium-ion cell model that couples two nonlinear
//! elliptic equations for the solid and electrolyte potentials, through a
//! temperature-truncated Butler-Volmer kernel, to a parabolic heat equation.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: layered anode | separator | cathode tensor grids (1D or 2D)
//! - [`params`]: coefficient data and hypothesis checks
//! - [`butler_volmer`]: truncation, effective temperature, kernel, heat source
//! - [`potentials`]: regularized/constrained potential solves and identities
//! - [`heat`]: implicit heat step with Robin exchange
//! - [`coupled`]: per-step fixed-point coupling, full run, existence horizon
//! - [`oracle`]: independent reference computations for verification
//! - [`config`], [`output`], [`cli`]: configuration files, outputs and the CLI

pub mod butler_volmer;
pub mod cli;
pub mod config;
pub mod coupled;
pub mod error;
pub mod heat;
mod linalg;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod params;
pub mod potentials;

pub use butler_volmer::{ButlerVolmerContext, Truncation};
pub use coupled::{run_simulation, SimulationResult, SolverSettings, TStar};
pub use error::{Error, Result, Stage};
pub use mesh::{build_sandwich_mesh, Domain, Mesh, Region, Width};
pub use params::{validate_hypotheses, ParamSpec, PhysicalParams};
pub use potentials::{NonlinearSettings, PotentialPair};
