//! Structured-grid finite-volume simulator for a compressible Oldroyd-B
//! model with a scalar extra stress and no stress diffusion, together with
//! the diagnostics that check its structural properties: positivity,
//! domination of `rho` and `tau` by `eta`, the energy balance, the Gibbs
//! relation between free energy and pressure, and the `tau - k eta`
//! reduction.
//!
//! Layout:
//!
//! * [`model`]: pointwise pressures, free energies, stresses.
//! * [`grid`]: meshes, fields, ghost layers, discrete operators.
//! * [`transport`]: donor-cell transport of the densities and stress damping.
//! * [`momentum`]: explicit momentum update.
//! * [`characteristics`]: semi-Lagrangian reference solutions and bounds.
//! * [`diagnostics`]: energy ledger, masses, renormalized residuals.
//! * [`scenarios`]: canned runs with pass/fail verdicts.
//! * [`config`], [`io`]: config files, snapshots and CSV output.

pub mod characteristics;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod momentum;
pub mod scenarios;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{Boundary, Grid, ScalarField, State, VectorField};
pub use model::{ModelParams, ThermoSample};
