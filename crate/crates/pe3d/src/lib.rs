//! Normal-mode solver for the 3D inviscid primitive equations on a channel
//! with a rigid lid and uniform stratification.
//!
//! The vertical structure is expanded in a cosine/sine eigenbasis. The
//! barotropic (vertically constant) mode is advanced with a predictor /
//! pressure-correction scheme that keeps its horizontal divergence at machine
//! level; every baroclinic mode is advanced with implicit upwind sweeps of its
//! characteristic variables, with sweep directions chosen by the sign of the
//! advective characteristic speeds. Boundary values come either from the
//! homogeneous (transparent) conditions or from traces recorded by a host run
//! on a larger domain, which enables one-way nesting on a subrectangle.

pub mod baroclinic;
pub mod boundary;
pub mod cli;
pub mod error;
pub mod grid;
pub mod io;
pub mod modes;
pub mod nesting;
pub mod nonlinear;
pub mod poisson;
pub mod state;
pub mod zero_mode;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
