//! Spectral-Galerkin simulator for the Cahn–Hilliard–Darcy system on a
//! rectangle with homogeneous Neumann data and a prescribed zero-mean mass
//! source.
//!
//! Fields are sampled at cell midpoints and expanded in the cosine
//! eigenfunctions of the Neumann Laplacian. See [`integrator`] for the time
//! scheme and [`diagnostics`] for the observables it reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chemistry;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod gronwall;
pub mod init;
pub mod integrator;
pub mod pressure;
pub mod probes;
pub mod snapshot;
pub mod source;
pub mod steady;
mod transform;

pub use chemistry::PhysicsParams;
pub use error::{ChdError, Result};
pub use grid::{Basis, Field, GridSpec, SpectralField, SpectralVector, VectorField};
pub use integrator::{SimState, StepperConfig, TrajectoryRecord};
pub use source::{Profile, SourceModel};
