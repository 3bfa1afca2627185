//! Sea-state estimation from onboard vessel motion measurements.
//!
//! Jointly estimates irregular wave excitations and unknown vessel
//! parameters (waterline breadth, draught) from noisy heave/pitch motion
//! data using a square-root cubature Kalman filter over a bank of pseudo
//! mass-spring-damper wave-vessel models, then recovers the wave spectrum,
//! significant wave height and zero up-crossing period. A recursive
//! posterior Cramer-Rao bound evaluator and a synthetic-data Monte Carlo
//! harness are included.

pub mod config;
pub mod error;
pub mod estimators;
pub mod noise_model;
pub mod pcrlb;
pub mod simharness;
pub mod spectrum;
pub mod vessel_model;
pub mod wave_env;

pub use error::{Error, Result};
