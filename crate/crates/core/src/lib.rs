//! Microwave-to-optical photon conversion in a driven Rydberg ensemble
//! coupled to a coplanar-waveguide cavity.

pub mod analytic;
pub mod diagnostics;
pub mod dynamics;
pub mod emission;
pub mod ensemble;
pub mod error;
pub mod physics;
pub mod quadrature;
pub mod scenario;
pub mod shaping;
pub mod units;

pub use error::{Error, Result};
