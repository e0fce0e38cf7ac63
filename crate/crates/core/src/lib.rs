//! Discrete time-periodic branched transport between atomic measure paths:
//! energies with cycle decomposition, dyadic flux constructions with energy
//! bounds, `Lid_1` lower bounds and an upper-bound search.

// NaN must fail validation, so comparisons are written in negated form
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod cost;
pub mod cycles;
pub mod dyadic;
pub mod error;
pub mod flow;
pub mod graph;
pub mod grid;
pub mod measures;
pub mod optimize;
pub mod point;
pub mod quadrature;
pub mod wasserstein;
