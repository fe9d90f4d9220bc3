//! Manpower and equipment cost of dietary data acquisition in smart canteens.
//!
//! RFID systems are costed through staff procedures whose accuracy follows a
//! power law in invested equivalent man-hours (EMH); CV systems are simulated
//! meal by meal, with recognition accuracy following a sigmoid in the number
//! of training samples per dish type. Both pay a checkout correction for every
//! erroneous record.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod cost;
pub mod cv;
pub mod error;
pub mod experiments;
pub mod model;
pub mod output;
pub mod rfid;
pub mod scenario;

pub use error::{Error, Result};
