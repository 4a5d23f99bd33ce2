//! File formats, the Clarabel conic backend, the experiment harness and the
//! command line for the `irs-uav-core` planners.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod experiment;
pub mod io;
pub mod montecarlo;
pub mod solver;

pub use solver::ClarabelSolver;
