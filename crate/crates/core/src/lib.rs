//! Mountain-pass solver for nonlocal semilinear problems on an interval.
//!
//! The pipeline runs kernel → mesh → assembled form → energy → descent
//! iteration → verification. [`config::RunConfig::build`] wires the pieces
//! together for a given mesh size.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod cli;
pub mod config;
pub mod energy;
pub mod fem;
pub mod kernels;
pub mod mountain_pass;
pub mod quadrature;
pub mod verify;
