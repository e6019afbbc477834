//! Per-antenna phase and sampling-time offsets from per-subcarrier gain
//! estimates, and application of a calibration to measurements.
//!
//! A sampling-time offset `t` shows up as a phase slope `2 pi n t df` over
//! the subcarrier index `n`. The slope is estimated with Kay's weighted
//! phase-difference frequency estimator, which never unwraps phases and
//! therefore tolerates `2 pi` jumps. The offsets are relative to whichever
//! antenna fixes the gain gauge (antenna 0 for the estimators in this crate).

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GainPhaseEstimate;
use crate::geometry::RadioConfig;
use crate::synthesis::ImpairmentProfile;
use crate::tensor::MeasurementTensor;

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_to_two_pi(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    wrap_to_two_pi(angle + PI) - PI
}

/// Gain estimates for every subcarrier, shape `(num_subcarriers, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable(Array2<Complex64>);

impl GainTable {
    pub fn new(data: Array2<Complex64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("gain table", "no subcarriers or no antennas"));
        }
        Ok(GainTable(data))
    }

    /// Unit gains.
    pub fn identity(num_subcarriers: usize, num_antennas: usize) -> Self {
        GainTable(Array2::from_elem((num_subcarriers, num_antennas), Complex64::new(1.0, 0.0)))
    }

    /// Stacks estimates ordered by subcarrier index.
    pub fn from_estimates(estimates: &[GainPhaseEstimate]) -> Result<Self> {
        let n_sub = estimates.len();
        Self::from_indexed(n_sub, estimates.iter().enumerate().map(|(n, e)| (n, e.g_hat.view())))
    }

    /// Builds a table from `(subcarrier, gains)` pairs in any order. Every
    /// subcarrier in `0..num_subcarriers` must appear exactly once.
    pub fn from_indexed<'a>(
        num_subcarriers: usize,
        rows: impl IntoIterator<Item = (usize, ArrayView1<'a, Complex64>)>,
    ) -> Result<Self> {
        let mut slots: Vec<Option<ArrayView1<'a, Complex64>>> = vec![None; num_subcarriers];
        let mut width = None;
        for (n, gains) in rows {
            if n >= num_subcarriers {
                return Err(Error::IndexOutOfRange {
                    what: "subcarrier",
                    index: n,
                    len: num_subcarriers,
                });
            }
            if slots[n].is_some() {
                return Err(Error::invalid("gain table", format!("subcarrier {n} given twice")));
            }
            match width {
                None => width = Some(gains.len()),
                Some(w) if w != gains.len() => {
                    return Err(Error::shape("gain table row", w, gains.len()));
                }
                _ => {}
            }
            slots[n] = Some(gains);
        }
        let missing: Vec<usize> = (0..num_subcarriers).filter(|&n| slots[n].is_none()).collect();
        if !missing.is_empty() || num_subcarriers == 0 {
            return Err(Error::MissingSubcarriers(missing));
        }
        let views: Vec<_> = slots.into_iter().map(|s| s.expect("checked")).collect();
        let data = ndarray::stack(Axis(0), &views).expect("row widths checked");
        GainTable::new(data)
    }

    /// True gains of a synthetic profile, in the antenna-0 gauge.
    pub fn from_profile(profile: &ImpairmentProfile, config: &RadioConfig) -> Result<Self> {
        let mut data = Array2::zeros((config.num_subcarriers, profile.num_antennas()));
        for n in 0..config.num_subcarriers {
            let g = crate::estimator::normalize_global_phase(profile.gains(n, config)?.view())?;
            data.row_mut(n).assign(&g);
        }
        GainTable::new(data)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.0.ncols()
    }

    pub fn subcarrier(&self, n: usize) -> ArrayView1<'_, Complex64> {
        self.0.row(n)
    }

    pub fn antenna(&self, l: usize) -> ArrayView1<'_, Complex64> {
        self.0.column(l)
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.0
    }
}

/// Smoothing weights of Kay's estimator for a sequence of length `n`:
/// `w_k = 1.5 n / (n^2 - 1) * (1 - ((k - (n/2 - 1)) / (n/2))^2)`,
/// `k = 0..n-2`. They sum to one.
pub fn kay_weights(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("Kay estimator", format!("needs at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let scale = 1.5 * nf / (nf * nf - 1.0);
    let center = nf / 2.0 - 1.0;
    let half = nf / 2.0;
    Ok((0..n - 1)
        .map(|k| {
            let x = (k as f64 - center) / half;
            scale * (1.0 - x * x)
        })
        .collect())
}

/// Frequency of a single complex exponential in radians per sample, from the
/// weighted average of consecutive phase differences. Exact for noiseless
/// input whose per-sample phase step lies in `(-pi, pi)`.
pub fn kay_frequency(sequence: ArrayView1<'_, Complex64>) -> Result<f64> {
    let weights = kay_weights(sequence.len())?;
    if let Some(k) = sequence.iter().position(|z| z.norm() == 0.0) {
        return Err(Error::UndefinedPhase(format!("sample {k} is zero")));
    }
    Ok(sequence
        .windows(2)
        .into_iter()
        .zip(weights)
        .map(|(pair, w)| w * (pair[1] * pair[0].conj()).arg())
        .sum())
}

/// Sampling-time offset in seconds from the gains of one antenna over all
/// subcarriers.
pub fn estimate_time_offset(gains: ArrayView1<'_, Complex64>, config: &RadioConfig) -> Result<f64> {
    Ok(kay_frequency(gains)? / (TAU * config.subcarrier_spacing_hz))
}

/// Phase offset at subcarrier 0, in `[0, 2pi)`: the argument of the mean of
/// the gains after removing the slope implied by `time_offset`.
pub fn estimate_phase_offset(
    gains: ArrayView1<'_, Complex64>,
    time_offset: f64,
    config: &RadioConfig,
) -> Result<f64> {
    let slope = TAU * time_offset * config.subcarrier_spacing_hz;
    let sum: Complex64 = gains
        .iter()
        .enumerate()
        .map(|(n, g)| g * Complex64::from_polar(1.0, -slope * n as f64))
        .sum();
    let mean = sum / gains.len() as f64;
    if !(mean.norm() > 0.0) {
        return Err(Error::UndefinedPhase("de-rotated mean gain is zero".into()));
    }
    Ok(wrap_to_two_pi(mean.arg()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaOffset {
    pub phase_offset_rad: f64,
    pub time_offset_s: f64,
    /// RMS of the wrapped deviation of the gain phases from the fitted
    /// affine phase model.
    pub fit_residual_rad: f64,
}

/// RMS deviation (radians) of `arg(gains[n])` from `phase + 2 pi n t df`.
pub fn affine_fit_residual(
    gains: ArrayView1<'_, Complex64>,
    offset_phase: f64,
    time_offset: f64,
    config: &RadioConfig,
) -> f64 {
    let slope = TAU * time_offset * config.subcarrier_spacing_hz;
    let sum_sq: f64 = gains
        .iter()
        .enumerate()
        .map(|(n, g)| wrap_to_pi(g.arg() - offset_phase - slope * n as f64).powi(2))
        .sum();
    (sum_sq / gains.len() as f64).sqrt()
}

/// Estimates the offsets of every antenna from a full gain table.
pub fn extract_offsets(table: &GainTable, config: &RadioConfig) -> Result<Vec<AntennaOffset>> {
    let expected = config.num_subcarriers;
    if table.num_subcarriers() < expected {
        return Err(Error::MissingSubcarriers((table.num_subcarriers()..expected).collect()));
    }
    if table.num_subcarriers() > expected {
        return Err(Error::shape("gain table subcarriers", expected, table.num_subcarriers()));
    }
    (0..table.num_antennas())
        .map(|l| {
            let gains = table.antenna(l);
            let time_offset_s = estimate_time_offset(gains, config)?;
            let phase_offset_rad = estimate_phase_offset(gains, time_offset_s, config)?;
            Ok(AntennaOffset {
                phase_offset_rad,
                time_offset_s,
                fit_residual_rad: affine_fit_residual(gains, phase_offset_rad, time_offset_s, config),
            })
        })
        .collect()
}

/// How to undo the receiver impairments.
#[derive(Debug, Clone, Copy)]
pub enum Calibration<'a> {
    /// Divide by the estimated complex gain of each antenna and subcarrier.
    PerSubcarrier(&'a GainTable),
    /// Remove the fitted phase `phi + 2 pi n t df`; amplitudes are untouched.
    Parametric {
        offsets: &'a [AntennaOffset],
        config: &'a RadioConfig,
    },
}

pub fn apply_calibration(r: &MeasurementTensor, calibration: Calibration<'_>) -> Result<MeasurementTensor> {
    let (n_sub, l, _) = r.dims();
    let correction: Array2<Complex64> = match calibration {
        Calibration::PerSubcarrier(table) => {
            if (table.num_subcarriers(), table.num_antennas()) != (n_sub, l) {
                return Err(Error::shape(
                    "calibration gain table",
                    format!("{n_sub} x {l}"),
                    format!("{} x {}", table.num_subcarriers(), table.num_antennas()),
                ));
            }
            if let Some(((n, li), _)) = table.as_array().indexed_iter().find(|(_, g)| g.norm() == 0.0) {
                return Err(Error::Degenerate(format!(
                    "gain of antenna {li} at subcarrier {n} is zero"
                )));
            }
            table.as_array().clone()
        }
        Calibration::Parametric { offsets, config } => {
            if offsets.len() != l {
                return Err(Error::shape("calibration offsets", l, offsets.len()));
            }
            if config.num_subcarriers != n_sub {
                return Err(Error::shape("calibration subcarriers", n_sub, config.num_subcarriers));
            }
            Array2::from_shape_fn((n_sub, l), |(n, li)| {
                let o = &offsets[li];
                Complex64::from_polar(
                    1.0,
                    o.phase_offset_rad + TAU * n as f64 * o.time_offset_s * config.subcarrier_spacing_hz,
                )
            })
        }
    };

    let mut out = r.clone();
    for (n, mut matrix) in out.as_array_mut().outer_iter_mut().enumerate() {
        for (li, mut row) in matrix.outer_iter_mut().enumerate() {
            let g = correction[[n, li]];
            if g == Complex64::new(1.0, 0.0) {
                continue;
            }
            match calibration {
                Calibration::PerSubcarrier(_) => row.mapv_inplace(|z| z / g),
                Calibration::Parametric { .. } => {
                    let inverse = g.conj();
                    row.mapv_inplace(|z| z * inverse)
                }
            }
        }
    }
    Ok(out)
}

/// Gains implied by fitted offsets, unit amplitude.
pub fn parametric_gains(offsets: &[AntennaOffset], config: &RadioConfig) -> GainTable {
    GainTable(Array2::from_shape_fn((config.num_subcarriers, offsets.len()), |(n, l)| {
        let o = &offsets[l];
        Complex64::from_polar(
            1.0,
            o.phase_offset_rad + TAU * n as f64 * o.time_offset_s * config.subcarrier_spacing_hz,
        )
    }))
}
