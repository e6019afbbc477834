//! Built-in synthetic deployments: one planar 4 x 8 array, and four 2 x 4
//! arrays spread around a shared measurement area.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_ideal_tensor, ArrayGeometry, Position, RadioConfig, Subarray, TransmitterTrack};
use crate::io::{BundleMetadata, DatasetBundle, GroundTruth, SynthesisInfo};
use crate::rng::{self, Purpose};
use crate::synthesis::{synthesize_measurements, ImpairmentProfile, TransmitPhases};
use crate::tensor::IdealTensor;

pub const DEFAULT_CENTER_FREQ_HZ: f64 = 1.272e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 50e6;

/// Fraction of the unambiguous range used when drawing time offsets.
pub const TIME_OFFSET_FRACTION: f64 = 0.45;
pub const AMPLITUDE_RANGE: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "grid-4x8")]
    Grid4x8,
    #[serde(rename = "distributed-4x-2x4")]
    Distributed4x2x4,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 2] = [ScenarioKind::Grid4x8, ScenarioKind::Distributed4x2x4];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Grid4x8 => "grid-4x8",
            ScenarioKind::Distributed4x2x4 => "distributed-4x-2x4",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "scenario",
                    format!("unknown scenario '{s}' (expected grid-4x8 or distributed-4x-2x4)"),
                )
            })
    }
}

/// Centers (x, y) and azimuths (degrees) of the four distributed arrays.
const DISTRIBUTED_ARRAYS: [(&str, [f64; 2], f64); 4] = [
    ("A", [2.67, -13.9], 116.8),
    ("B", [-11.25, -9.69], 37.2),
    ("C", [-1.53, -15.06], 77.8),
    ("D", [-12.68, -4.48], -4.87),
];

const ARRAY_HEIGHT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub radio: RadioConfig,
    pub geometry: ArrayGeometry,
    pub track: TransmitterTrack,
}

impl Scenario {
    /// Builds the deployment with `num_positions` random transmitter
    /// positions and a 50 MHz band at 1.272 GHz split into
    /// `num_subcarriers` tones.
    pub fn build(kind: ScenarioKind, num_positions: usize, num_subcarriers: usize, seed: u64) -> Result<Self> {
        if num_positions == 0 {
            return Err(Error::invalid("scenario", "at least one transmitter position is required"));
        }
        if num_subcarriers == 0 {
            return Err(Error::invalid("scenario", "at least one subcarrier is required"));
        }
        let radio = RadioConfig::from_center_frequency(
            DEFAULT_CENTER_FREQ_HZ,
            DEFAULT_BANDWIDTH_HZ / num_subcarriers as f64,
            num_subcarriers,
        )?;
        let half_wavelength = radio.speed_of_light / DEFAULT_CENTER_FREQ_HZ / 2.0;
        let mut rng = rng::stream(seed, Purpose::Scenario, 0);

        let (geometry, region) = match kind {
            ScenarioKind::Grid4x8 => {
                // Vertical array in the y-z plane facing +x.
                let positions = (0..4)
                    .flat_map(|row| {
                        (0..8).map(move |col| {
                            [
                                0.0,
                                (col as f64 - 3.5) * half_wavelength,
                                ARRAY_HEIGHT + (row as f64 - 1.5) * half_wavelength,
                            ]
                        })
                    })
                    .collect();
                (ArrayGeometry::new(positions)?, ([2.0, 10.0], [-5.0, 5.0]))
            }
            ScenarioKind::Distributed4x2x4 => {
                let mut positions = Vec::with_capacity(32);
                let mut subarrays = Vec::with_capacity(4);
                for (label, center, azimuth_deg) in DISTRIBUTED_ARRAYS {
                    let start = positions.len();
                    positions.extend(subarray_positions(center, azimuth_deg * PI / 180.0, half_wavelength));
                    subarrays.push(Subarray {
                        label: label.to_string(),
                        antennas: (start..positions.len()).collect(),
                    });
                }
                (
                    ArrayGeometry::with_subarrays(positions, subarrays)?,
                    ([-9.0, -1.0], [-13.0, -6.0]),
                )
            }
        };

        let track = TransmitterTrack::new(
            (0..num_positions)
                .map(|_| -> Position {
                    [
                        rng.random_range(region.0[0]..region.0[1]),
                        rng.random_range(region.1[0]..region.1[1]),
                        rng.random_range(0.3..0.7),
                    ]
                })
                .collect(),
        )?;
        track.check_clearance(&geometry)?;
        Ok(Scenario {
            kind,
            radio,
            geometry,
            track,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas()
    }

    pub fn num_positions(&self) -> usize {
        self.track.num_positions()
    }

    pub fn ideal_tensor(&self) -> Result<IdealTensor> {
        build_ideal_tensor(&self.geometry, &self.track, &self.radio)
    }

    /// Random impairments and transmit phases drawn from the truth stream
    /// of `seed`.
    pub fn random_truth(&self, seed: u64) -> GroundTruth {
        random_truth(self.num_antennas(), self.num_positions(), &self.radio, seed)
    }

    /// Synthesizes a full bundle with embedded ground truth. `snr_db = None`
    /// is noiseless.
    pub fn synthesize(&self, truth: &GroundTruth, snr_db: Option<f64>, seed: u64, include_ideal: bool) -> Result<DatasetBundle> {
        synthesize_bundle(
            &self.radio,
            &self.geometry,
            &self.track,
            truth,
            snr_db,
            seed,
            include_ideal,
            Some(self.kind.name()),
        )
    }
}

/// Builds the ideal tensor for a deployment, applies `truth` and optional
/// noise, and packages everything as a bundle.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_bundle(
    radio: &RadioConfig,
    geometry: &ArrayGeometry,
    track: &TransmitterTrack,
    truth: &GroundTruth,
    snr_db: Option<f64>,
    seed: u64,
    include_ideal: bool,
    scenario: Option<&str>,
) -> Result<DatasetBundle> {
    track.check_clearance(geometry)?;
    let ideal = build_ideal_tensor(geometry, track, radio)?;
    let measurement = synthesize_measurements(&ideal, &truth.profile, &truth.phases, radio, snr_db, seed)?;
    let mut metadata = BundleMetadata::new(*radio, geometry.clone(), track.clone());
    metadata.truth = Some(truth.clone());
    metadata.synthesis = Some(SynthesisInfo {
        scenario: scenario.map(str::to_string),
        snr_db,
        seed,
    });
    metadata.has_ideal = include_ideal;
    let bundle = DatasetBundle {
        metadata,
        measurement,
        ideal: include_ideal.then_some(ideal),
    };
    bundle.validate()?;
    Ok(bundle)
}

/// 2 rows x 4 columns; the columns run along azimuth `azimuth` in the
/// horizontal plane.
fn subarray_positions(center: [f64; 2], azimuth: f64, spacing: f64) -> impl Iterator<Item = Position> {
    let (sin, cos) = azimuth.sin_cos();
    (0..2).flat_map(move |row| {
        (0..4).map(move |col| {
            let along = (col as f64 - 1.5) * spacing;
            [
                center[0] + along * cos,
                center[1] + along * sin,
                ARRAY_HEIGHT + (row as f64 - 0.5) * spacing,
            ]
        })
    })
}

pub fn random_truth(num_antennas: usize, num_positions: usize, radio: &RadioConfig, seed: u64) -> GroundTruth {
    let mut rng = rng::stream(seed, Purpose::Truth, 0);
    let profile = ImpairmentProfile::random(num_antennas, radio, TIME_OFFSET_FRACTION, AMPLITUDE_RANGE, &mut rng);
    let phases = TransmitPhases::random(num_positions, &mut rng);
    GroundTruth { profile, phases }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    #[test]
    fn grid_has_32_antennas_at_half_wavelength() {
        let s = Scenario::build(ScenarioKind::Grid4x8, 256, 64, 1).unwrap();
        assert_eq!(s.num_antennas(), 32);
        assert_eq!(s.num_positions(), 256);
        let half = s.radio.speed_of_light / DEFAULT_CENTER_FREQ_HZ / 2.0;
        let p = &s.geometry.antenna_positions;
        assert!((distance(&p[0], &p[1]) - half).abs() < 1e-12);
        assert!((distance(&p[0], &p[8]) - half).abs() < 1e-12);
        assert!(s.geometry.subarrays.is_empty());
    }

    #[test]
    fn distributed_has_four_labelled_subarrays() {
        let s = Scenario::build(ScenarioKind::Distributed4x2x4, 50, 16, 3).unwrap();
        assert_eq!(s.num_antennas(), 32);
        let labels: Vec<_> = s.geometry.subarrays.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, ["A", "B", "C", "D"]);
        assert!(s.geometry.subarrays.iter().all(|a| a.antennas.len() == 8));
    }

    #[test]
    fn band_is_centered() {
        let s = Scenario::build(ScenarioKind::Grid4x8, 1, 64, 0).unwrap();
        let lo = s.radio.subcarrier_frequency(0);
        let hi = s.radio.subcarrier_frequency(63);
        assert!(((lo + hi) / 2.0 - DEFAULT_CENTER_FREQ_HZ).abs() < 1e-3);
        assert!((s.radio.subcarrier_spacing_hz * 64.0 - DEFAULT_BANDWIDTH_HZ).abs() < 1e-6);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = Scenario::build(ScenarioKind::Distributed4x2x4, 20, 8, 9).unwrap();
        let b = Scenario::build(ScenarioKind::Distributed4x2x4, 20, 8, 9).unwrap();
        let c = Scenario::build(ScenarioKind::Distributed4x2x4, 20, 8, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.track, c.track);
        assert_eq!(a.random_truth(4), b.random_truth(4));
    }

    #[test]
    fn parse_names() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("grid".parse::<ScenarioKind>().is_err());
    }
}
