//! Receiver impairments, transmitter starting phases, and synthetic
//! measurements `R[n] = diag(g[n]) A[n] diag(s) + Z[n]`.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::geometry::RadioConfig;
use crate::noise;
use crate::rng::{self, Purpose};
use crate::tensor::{IdealTensor, MeasurementTensor};

/// Per-antenna phase offset, sampling-time offset and amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentProfile {
    /// Phase of subcarrier 0, radians in `[0, 2pi)`.
    pub phase_offsets: Vec<f64>,
    /// Sampling-time offsets, seconds.
    pub time_offsets: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl ImpairmentProfile {
    /// Builds a profile with unit amplitudes. Phases are wrapped into `[0, 2pi)`.
    pub fn new(phase_offsets: Vec<f64>, time_offsets: Vec<f64>) -> Result<Self> {
        let amplitudes = vec![1.0; phase_offsets.len()];
        Self::with_amplitudes(phase_offsets, time_offsets, amplitudes)
    }

    pub fn with_amplitudes(
        phase_offsets: Vec<f64>,
        time_offsets: Vec<f64>,
        amplitudes: Vec<f64>,
    ) -> Result<Self> {
        let profile = ImpairmentProfile {
            phase_offsets: phase_offsets.into_iter().map(|p| p.rem_euclid(TAU)).collect(),
            time_offsets,
            amplitudes,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// All-zero offsets, unit amplitudes.
    pub fn identity(num_antennas: usize) -> Self {
        ImpairmentProfile {
            phase_offsets: vec![0.0; num_antennas],
            time_offsets: vec![0.0; num_antennas],
            amplitudes: vec![1.0; num_antennas],
        }
    }

    /// Draws uniform phases, time offsets uniform in
    /// `+-time_fraction * unambiguous_limit`, and amplitudes uniform in
    /// `[amplitude_range.0, amplitude_range.1]`.
    pub fn random<R: Rng + ?Sized>(
        num_antennas: usize,
        config: &RadioConfig,
        time_fraction: f64,
        amplitude_range: (f64, f64),
        rng: &mut R,
    ) -> Self {
        let limit = config.unambiguous_time_offset() * time_fraction;
        let mut profile = ImpairmentProfile::identity(num_antennas);
        for l in 0..num_antennas {
            profile.phase_offsets[l] = rng.random_range(0.0..TAU);
            profile.time_offsets[l] = rng.random_range(-limit..=limit);
            profile.amplitudes[l] = rng.random_range(amplitude_range.0..=amplitude_range.1);
        }
        profile
    }

    pub fn num_antennas(&self) -> usize {
        self.phase_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.phase_offsets.len();
        if l == 0 {
            return Err(Error::invalid("impairment profile", "no antennas"));
        }
        if self.time_offsets.len() != l || self.amplitudes.len() != l {
            return Err(Error::shape(
                "impairment profile",
                format!("{l} entries per field"),
                format!(
                    "{} phases, {} time offsets, {} amplitudes",
                    l,
                    self.time_offsets.len(),
                    self.amplitudes.len()
                ),
            ));
        }
        if let Some(i) = self.phase_offsets.iter().position(|p| !(0.0..TAU).contains(p)) {
            return Err(Error::invalid(
                "impairment profile",
                format!("phase offset {i} = {} outside [0, 2pi)", self.phase_offsets[i]),
            ));
        }
        if let Some(i) = self.time_offsets.iter().position(|t| !t.is_finite()) {
            return Err(Error::invalid("impairment profile", format!("time offset {i} is not finite")));
        }
        if let Some(i) = self.amplitudes.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::invalid(
                "impairment profile",
                format!("amplitude {i} = {} must be positive", self.amplitudes[i]),
            ));
        }
        Ok(())
    }

    /// Checks that every time offset lies in the unambiguous range of `config`.
    pub fn validate_for(&self, config: &RadioConfig) -> Result<()> {
        self.validate()?;
        let limit = config.unambiguous_time_offset();
        match self.time_offsets.iter().position(|t| t.abs() >= limit) {
            Some(i) => Err(Error::invalid(
                "impairment profile",
                format!(
                    "time offset {i} = {:e} s outside the unambiguous range +-{limit:e} s",
                    self.time_offsets[i]
                ),
            )),
            None => Ok(()),
        }
    }

    /// Gain vector `g[n]` over all antennas.
    pub fn gains(&self, n: usize, config: &RadioConfig) -> Result<Array1<Complex64>> {
        (0..self.num_antennas())
            .map(|l| impairment_gain(self, l, n, config))
            .collect()
    }
}

/// Complex gain of antenna `l` at subcarrier `n`:
/// `amplitude * exp(j (phase_offset + 2 pi n t_off df))`.
pub fn impairment_gain(
    profile: &ImpairmentProfile,
    l: usize,
    n: usize,
    config: &RadioConfig,
) -> Result<Complex64> {
    check_index("antenna", l, profile.num_antennas())?;
    check_index("subcarrier", n, config.num_subcarriers)?;
    let phase = profile.phase_offsets[l]
        + TAU * n as f64 * profile.time_offsets[l] * config.subcarrier_spacing_hz;
    Ok(Complex64::from_polar(profile.amplitudes[l], phase))
}

/// Unit-modulus transmitter starting phases, one per time instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitPhases(Vec<Complex64>);

const UNIT_MODULUS_TOL: f64 = 1e-12;

impl TransmitPhases {
    pub fn new(phases: Vec<Complex64>) -> Result<Self> {
        let phases = TransmitPhases(phases);
        phases.validate()?;
        Ok(phases)
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        TransmitPhases(angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect())
    }

    pub fn ones(num_positions: usize) -> Self {
        TransmitPhases(vec![Complex64::new(1.0, 0.0); num_positions])
    }

    pub fn random<R: Rng + ?Sized>(num_positions: usize, rng: &mut R) -> Self {
        TransmitPhases(
            (0..num_positions)
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self.0.iter().position(|s| (s.norm() - 1.0).abs() > UNIT_MODULUS_TOL) {
            Some(i) => Err(Error::invalid(
                "transmit phases",
                format!("|s_{i}| = {} is not 1", self.0[i].norm()),
            )),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn to_array(&self) -> Array1<Complex64> {
        Array1::from(self.0.clone())
    }
}

/// Noiseless `diag(g) A diag(s)` for one subcarrier.
pub fn impaired_matrix(
    ideal: ndarray::ArrayView2<'_, Complex64>,
    gains: &Array1<Complex64>,
    phases: &[Complex64],
) -> Array2<Complex64> {
    let mut out = ideal.to_owned();
    for ((l, d), z) in out.indexed_iter_mut() {
        *z = gains[l] * *z * phases[d];
    }
    out
}

/// Synthesizes measurements from an ideal tensor and ground truth.
///
/// `snr_db = None` produces noiseless data. Noise for subcarrier `n` is drawn
/// from its own stream of `seed`, so the output is identical however the
/// subcarriers are scheduled.
pub fn synthesize_measurements(
    ideal: &IdealTensor,
    profile: &ImpairmentProfile,
    phases: &TransmitPhases,
    config: &RadioConfig,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MeasurementTensor> {
    let (n_sub, l, d) = ideal.dims();
    if profile.num_antennas() != l {
        return Err(Error::shape("impairment profile", l, profile.num_antennas()));
    }
    if phases.len() != d {
        return Err(Error::shape("transmit phases", d, phases.len()));
    }
    if config.num_subcarriers != n_sub {
        return Err(Error::shape("radio config subcarriers", n_sub, config.num_subcarriers));
    }
    profile.validate_for(config)?;
    phases.validate()?;

    let matrices = (0..n_sub)
        .into_par_iter()
        .map(|n| {
            let gains = profile.gains(n, config)?;
            let clean = impaired_matrix(ideal.subcarrier(n), &gains, phases.as_slice());
            match snr_db {
                None => Ok(clean),
                Some(snr) => {
                    let mut noisy = clean;
                    let power = noise::mean_power(noisy.view());
                    let mut rng = rng::stream(seed, Purpose::MeasurementNoise, n as u64);
                    noise::add_noise_in_place(noisy.view_mut(), power, snr, &mut rng);
                    Ok(noisy)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementTensor::from_subcarriers(&matrices)
}
