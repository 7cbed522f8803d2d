//! Networked atomic clock ensemble: distributed synchronization from
//! Kalman-filtered edge measurements, GNSS time tracking through a
//! periodically broadcast supervisor correction, Allan variance analysis.

pub mod avar;
pub mod clock;
pub mod config;
pub mod control;
pub mod design;
pub mod error;
pub mod estimation;
pub mod network;
pub mod numerics;
pub mod presets;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
