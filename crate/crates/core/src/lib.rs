//! Tip-over analysis and normal-force control for multi-wheeled passive
//! sliding with a fully-actuated aerial vehicle.
//!
//! - [`geometry`]: frames, wrenches, wheel layouts.
//! - [`force_angle`]: force-angle stability measure, trace analysis and
//!   geometry sweeps.
//! - [`contact`]: penalty contact, planar and spatial plants, momentum observer.
//! - [`control`]: contact classification, reference gating, normal-force and
//!   baseline controllers, saturation.
//! - [`uncertainty`]: identification, synthesis, resampling and injection of
//!   wrench uncertainties, and pressure-sensor noise.
//! - [`scenario`]: scenario configuration, batch runs, metrics and outputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod control;
pub mod error;
pub mod force_angle;
pub mod geometry;
pub mod io;
pub mod plot;
pub mod scenario;
pub mod uncertainty;

pub use error::{Error, Result};
