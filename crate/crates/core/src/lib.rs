//! Trip-level energy-efficiency prediction for the Vehicle Energy Dataset:
//! ingestion, labeling, featurization, probabilistic ensembles, baselines and
//! evaluation statistics.

pub mod baselines;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod net;
pub mod stats;
pub mod synth;
pub mod ved;

pub use error::{Error, Result};
pub use ved::{SamplePoint, TripKey, TripSeries, VehicleMeta, VehicleType};
