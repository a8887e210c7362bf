//! Photon-pair generation models for silicon waveguides, Sagnac loops and
//! micro-rings, with gated coincidence statistics and fitting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod detection;
pub mod error;
pub mod loss;
pub mod pipeline;
pub mod presets;
pub mod ring;
pub mod sagnac;
pub mod units;
pub mod waveguide;
