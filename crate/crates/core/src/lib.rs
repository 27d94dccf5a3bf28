//! Simulation and maximum-likelihood estimation of ultrasmall optical time
//! delays measured by postselected weak measurement.
//!
//! Units: delays in seconds, angular frequencies in rad/s, wavelengths in
//! nanometres unless a name says otherwise.

pub mod config;
pub mod error;
pub mod estimators;
pub mod io;
pub mod polarization;
pub mod simulator;
pub mod spectrum;
pub mod waveplate;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use estimators::{estimate, estimate_all, EstimationResult, Method};
pub use polarization::{Port, Postselection, QwpModel};
pub use simulator::{simulate, ExperimentConfig};
pub use spectrum::{MeasurementRecord, Spectrum};
pub use waveplate::{PlateStack, TiltAngles};
