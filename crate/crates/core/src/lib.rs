//! Energy-consistent velocity-only reduced-order models for the 2D incompressible
//! Navier-Stokes equations on a staggered grid, with time-dependent inflow data.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: sparse/dense linear algebra (CSC storage, LU, thin SVD, weighted QR)
//! - [`mesh`]: staggered grid bookkeeping and finite-volume operator assembly
//! - [`boundary`]: inflow trace models and their POD compression
//! - [`fom`]: RK4 full-order integrator with per-stage pressure projection
//! - [`lifting`]: lifting operator, snapshot homogenization and weighted POD
//! - [`rom`]: offline tensor assembly and online integration of both ROM variants
//! - [`diagnostics`]: error metrics, spectra and timing reports
//! - [`pipeline`]: config files, binary containers and the staged CLI driver

pub mod boundary;
pub mod diagnostics;
pub mod error;
pub mod fom;
pub mod lifting;
pub mod mesh;
pub mod numerics;
pub mod pipeline;
pub mod rom;

pub use error::{Error, Result};
