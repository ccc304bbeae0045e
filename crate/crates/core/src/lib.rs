//! Scattering laboratory for H = (−Δ)^{s/2} + V on periodic grids.

pub mod error;
pub mod grid;
pub mod agmon;
pub mod dynamics;
pub mod eigen;
pub mod multiplier;
pub mod potentials;
pub mod resolvent;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, Space, C64};
pub use multiplier::{apply_multiplier, bessel_potential, lp_block, MultiplierSpec};
