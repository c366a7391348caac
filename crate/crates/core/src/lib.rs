//! Two-dimensional Boussinesq free-boundary flow in a rectangular vessel with
//! moving contact points, posed on the fixed equilibrium domain through a
//! flattening map.
//!
//! The crate is organised bottom-up: physical constants and exponent
//! bookkeeping, the capillary equilibrium, the flattening geometry, the corner
//! pencil analysis, the temperature solver, the flow/contact stepper and the
//! energy diagnostics.

pub mod corner;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod fem;
pub mod flow;
pub mod geometry;
pub mod heat;
pub mod io;
pub mod linalg;
pub mod params;

pub use error::{Error, Result};
