//! Dissipative spin squeezing of two-level emitters coupled to a
//! squeezed-vacuum waveguide reservoir.
//!
//! The layers build on each other: [`couplings`] turns emitter positions into
//! coupling matrices, [`spin`] supplies operators and states, [`dynamics`]
//! integrates the master equations and solves for numeric steady states,
//! [`steadystate`] constructs the closed-form steady state of the collective
//! model, [`observables`] extracts squeezing figures of merit, and
//! [`experiments`] runs sweeps, fits and disorder ensembles. [`cli`] exposes
//! everything through configuration files and result tables.

pub mod cli;
pub mod couplings;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod observables;
pub mod spin;
pub mod steadystate;

pub use error::{Error, Result};
