//! Energy-aware trajectory and schedule planning for a rotary-wing UAV that
//! delivers fixed data volumes to ground users with help from intelligent
//! reflecting surfaces (IRSs).
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation; file formats, the conic solver backend and the command line
//! live in the `irs-uav` companion crate.
//!
//! Module map:
//! - [`scenario`]: mission description and physical constants.
//! - [`channel`]: geometry, line-of-sight probability, fading draws, IRS phase
//!   alignment and the Monte Carlo rate oracle.
//! - [`rate`]: closed-form expected rate, its gradient and convexity checks.
//! - [`power`]: rotary-wing propulsion power and mission energy.
//! - [`trajectory`]: discretised path, invariant checks and the seed plan.
//! - [`conic`]: canonical conic program and the solver contract.
//! - [`sca`]: successive convex approximation for every planning variant.
//! - [`heuristic`]: the low-complexity planner and open-path TSP.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod conic;
pub mod geometry;
pub mod heuristic;
pub mod power;
pub mod rate;
pub mod sca;
pub mod scenario;
pub mod trajectory;

pub use geometry::Vec2;
pub use scenario::ScenarioConfig;
