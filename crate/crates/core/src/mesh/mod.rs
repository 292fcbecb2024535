//! Staggered grid, finite-volume operators and the pressure Poisson solver.

mod grid;
mod operators;
mod poisson;

pub use grid::{BcEntry, BcSpec, Side, SideKind, Slot, StaggeredGrid};
pub use operators::{ActuatorDisk, Extension, ForcingSpec, Operators};
pub use poisson::{PoissonSolver, POISSON_TOL};
