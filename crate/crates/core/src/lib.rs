//! Decentralized synchronization and tracking control for networks of
//! Lagrangian systems.

pub mod analysis;
pub mod config;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod presets;
pub mod simulator;
pub mod topology;

pub use error::{Error, Result};
