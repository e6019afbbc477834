//! End-to-end calibration of a dataset bundle.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::Result;
use crate::estimator::{coordinate_descent_traced, eigenvector_estimate, Algorithm, GainPhaseEstimate, SolverConfig};
use crate::geometry::build_ideal_tensor;
use crate::io::{CalibrationRecord, DatasetBundle, Provenance};
use crate::offsets::{extract_offsets, GainTable};
use crate::rng::{self, Purpose};
use crate::tensor::{IdealTensor, MeasurementTensor};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs the selected estimator independently on every subcarrier. The
/// coordinate-descent start for subcarrier `n` comes from its own stream of
/// `config.seed`, so the result does not depend on thread scheduling.
pub fn estimate_subcarriers(
    r: &MeasurementTensor,
    a: &IdealTensor,
    algorithm: Algorithm,
    config: &SolverConfig,
) -> Result<Vec<GainPhaseEstimate>> {
    r.check_matches(a)?;
    config.validate()?;
    (0..r.num_subcarriers())
        .into_par_iter()
        .map(|n| match algorithm {
            Algorithm::CoordinateDescent => {
                let mut init = rng::stream(config.seed, Purpose::SolverInit, n as u64);
                coordinate_descent_traced(r.subcarrier(n), a.subcarrier(n), config, &mut init).map(|(e, _)| e)
            }
            Algorithm::Eigenvector => eigenvector_estimate(r.subcarrier(n), a.subcarrier(n)),
        })
        .collect()
}

/// Estimates per-subcarrier gains and per-antenna offsets for a bundle.
/// Uses the bundle's ideal tensor when present, otherwise rebuilds it from
/// the geometry. `keep_gains` stores the per-subcarrier gains in the record.
pub fn calibrate_bundle(
    bundle: &DatasetBundle,
    algorithm: Algorithm,
    config: &SolverConfig,
    keep_gains: bool,
) -> Result<CalibrationRecord> {
    let m = &bundle.metadata;
    let ideal = match &bundle.ideal {
        Some(ideal) => Cow::Borrowed(ideal),
        None => Cow::Owned(build_ideal_tensor(&m.geometry, &m.track, &m.radio)?),
    };
    let estimates = estimate_subcarriers(&bundle.measurement, &ideal, algorithm, config)?;
    let table = GainTable::from_estimates(&estimates)?;
    let antennas = extract_offsets(&table, &m.radio)?;
    let record = CalibrationRecord {
        radio: m.radio,
        antennas,
        provenance: Provenance {
            algorithm,
            max_iterations: config.max_iterations,
            relative_residual_tolerance: config.relative_residual_tolerance,
            seed: config.seed,
            tool_version: TOOL_VERSION.to_string(),
            input_digest: bundle.digest(),
        },
        subcarrier_residuals: estimates.iter().map(|e| e.residual_frobenius).collect(),
        gains: keep_gains.then_some(table),
    };
    record.validate()?;
    Ok(record)
}
