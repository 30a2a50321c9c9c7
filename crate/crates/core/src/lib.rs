//! Flexibility regions of active distribution grids at the transmission interface.
//!
//! The crate models a radial or meshed distribution grid with a linearized
//! power flow, describes distributed flexible devices as convex (P, Q)
//! regions, and sweeps linear programs to obtain the convex set of exchange
//! deviations the grid can offer at its point of common coupling.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod devices;
pub mod ffor;
pub mod geometry;
pub mod grid;
pub mod identification;
pub mod lp;
pub mod powerflow;
pub mod synthetic;

pub use devices::{BessDevice, ControllableLoad, Device, LoadKind, PvDevice};
pub use ffor::{sweep, sweep_multi, Direction, FforError, Polytope, ScenarioFrame};
pub use grid::{Bus, BusKind, Line, Network};
