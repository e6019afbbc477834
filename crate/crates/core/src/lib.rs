//! Geometry-based calibration of carrier-phase and sampling-time offsets for
//! (distributed) multi-antenna OFDM receivers.
//!
//! Per subcarrier `n`, measurements are modelled as
//! `R[n] = diag(g[n]) A[n] diag(s) + Z`, where `A[n]` holds the free-space
//! line-of-sight coefficients computed from known antenna and transmitter
//! positions, `g[n]` the unknown per-antenna gains and `s` the unknown
//! unit-modulus transmit phases. [`estimator`] recovers `g[n]` up to a
//! common phase, and [`offsets`] turns the gains of all subcarriers into a
//! phase offset and a sampling-time offset per antenna.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod offsets;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod sweep;
pub mod synthesis;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use estimator::{Algorithm, GainPhaseEstimate, SolverConfig};
pub use geometry::{ArrayGeometry, Position, RadioConfig, Subarray, TransmitterTrack};
pub use io::{CalibrationRecord, DatasetBundle};
pub use offsets::{AntennaOffset, Calibration, GainTable};
pub use scenario::{Scenario, ScenarioKind};
pub use synthesis::{ImpairmentProfile, TransmitPhases};
pub use tensor::{IdealTensor, MeasurementTensor};
