//! Spectral representation and dispersive decay of Klein-Gordon waves on a
//! two-branch star graph with branch-dependent potentials.

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fdtd;
pub mod profile;
pub mod quadrature;
pub mod registry;
pub mod solution;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
pub use profile::{make_bump, EnergyBand, Profile, SpectralProfile};
pub use quadrature::{QuadratureConfig, C64};
pub use spectral::{Branch, BranchPotentials, Sign, StarGraph};
