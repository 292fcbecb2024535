//! Reduced-order models: offline operator assembly and online integration.
//!
//! Two variants share the same quadratic machinery ([`QuadraticSystem`]):
//! the velocity-only model evolves homogeneous coefficients with the boundary
//! coefficients given, the velocity-pressure model evolves the full coefficient
//! vector together with a reduced pressure.

mod offline;
mod online;
mod vp;

pub use offline::{QuadraticSystem, RomOperators};
pub use online::{
    recover_pressure, rom_integrate, vo_initial, vp_initial, vp_rom_integrate, EnergySeries,
    RomTrajectory, VpTrajectory,
};
pub use vp::{TheoremChecks, VpRomOperators};
