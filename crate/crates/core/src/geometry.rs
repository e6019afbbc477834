//! Radio configuration, antenna/transmitter geometry and the free-space
//! line-of-sight channel model.

use std::f64::consts::TAU;

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::tensor::IdealTensor;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default minimum transmitter/antenna separation in meters.
pub const DEFAULT_MIN_DISTANCE: f64 = 1e-3;

/// A point in 3-D space, meters.
pub type Position = [f64; 3];

pub fn distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// OFDM radio parameters.
///
/// `carrier_freq_hz` is the frequency of the lowermost subcarrier (`n = 0`),
/// so subcarrier `n` sits at `carrier_freq_hz + n * subcarrier_spacing_hz`.
/// Use [`RadioConfig::from_center_frequency`] when the band center is known
/// instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub num_subcarriers: usize,
    pub speed_of_light: f64,
}

impl RadioConfig {
    pub fn new(
        carrier_freq_hz: f64,
        subcarrier_spacing_hz: f64,
        num_subcarriers: usize,
    ) -> Result<Self> {
        let config = RadioConfig {
            carrier_freq_hz,
            subcarrier_spacing_hz,
            num_subcarriers,
            speed_of_light: SPEED_OF_LIGHT,
        };
        config.validate()?;
        Ok(config)
    }

    /// Builds a config from the band center. The center is taken to lie
    /// halfway between subcarrier 0 and subcarrier `num_subcarriers - 1`.
    pub fn from_center_frequency(
        center_freq_hz: f64,
        subcarrier_spacing_hz: f64,
        num_subcarriers: usize,
    ) -> Result<Self> {
        let half_span = subcarrier_spacing_hz * (num_subcarriers.saturating_sub(1)) as f64 / 2.0;
        Self::new(center_freq_hz - half_span, subcarrier_spacing_hz, num_subcarriers)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("radio config", reason));
        if !(self.carrier_freq_hz.is_finite() && self.carrier_freq_hz > 0.0) {
            return bad(format!("carrier frequency {} Hz must be positive", self.carrier_freq_hz));
        }
        if !(self.subcarrier_spacing_hz.is_finite() && self.subcarrier_spacing_hz > 0.0) {
            return bad(format!(
                "subcarrier spacing {} Hz must be positive",
                self.subcarrier_spacing_hz
            ));
        }
        if self.num_subcarriers == 0 {
            return bad("at least one subcarrier is required".into());
        }
        if !(self.speed_of_light.is_finite() && self.speed_of_light > 0.0) {
            return bad(format!("speed of light {} must be positive", self.speed_of_light));
        }
        let span = self.num_subcarriers as f64 * self.subcarrier_spacing_hz;
        if self.carrier_freq_hz <= span {
            return bad(format!(
                "carrier frequency {} Hz must exceed the occupied span {} Hz",
                self.carrier_freq_hz, span
            ));
        }
        Ok(())
    }

    pub fn subcarrier_frequency(&self, n: usize) -> f64 {
        self.carrier_freq_hz + n as f64 * self.subcarrier_spacing_hz
    }

    /// Largest sampling-time offset magnitude whose per-subcarrier phase
    /// increment stays inside `(-pi, pi)`.
    pub fn unambiguous_time_offset(&self) -> f64 {
        1.0 / (2.0 * self.subcarrier_spacing_hz)
    }
}

/// Wavelength of subcarrier `n` in meters.
pub fn subcarrier_wavelength(config: &RadioConfig, n: usize) -> Result<f64> {
    check_index("subcarrier", n, config.num_subcarriers)?;
    Ok(config.speed_of_light / config.subcarrier_frequency(n))
}

/// A named group of antennas, e.g. one physical array of a distributed
/// deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subarray {
    pub label: String,
    pub antennas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub antenna_positions: Vec<Position>,
    #[serde(default)]
    pub subarrays: Vec<Subarray>,
}

impl ArrayGeometry {
    pub fn new(antenna_positions: Vec<Position>) -> Result<Self> {
        Self::with_subarrays(antenna_positions, Vec::new())
    }

    pub fn with_subarrays(antenna_positions: Vec<Position>, subarrays: Vec<Subarray>) -> Result<Self> {
        let geometry = ArrayGeometry {
            antenna_positions,
            subarrays,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn num_antennas(&self) -> usize {
        self.antenna_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.num_antennas();
        if l == 0 {
            return Err(Error::invalid("array geometry", "at least one antenna is required"));
        }
        check_finite_positions("array geometry", &self.antenna_positions)?;
        let mut owner: Vec<Option<&str>> = vec![None; l];
        for (i, sub) in self.subarrays.iter().enumerate() {
            if sub.antennas.is_empty() {
                return Err(Error::invalid(
                    "array geometry",
                    format!("subarray '{}' is empty", sub.label),
                ));
            }
            if self.subarrays[..i].iter().any(|s| s.label == sub.label) {
                return Err(Error::invalid(
                    "array geometry",
                    format!("duplicate subarray label '{}'", sub.label),
                ));
            }
            for &a in &sub.antennas {
                check_index("antenna", a, l)?;
                if let Some(other) = owner[a] {
                    return Err(Error::invalid(
                        "array geometry",
                        format!(
                            "antenna {a} belongs to both subarray '{other}' and '{}'",
                            sub.label
                        ),
                    ));
                }
                owner[a] = Some(&sub.label);
            }
        }
        Ok(())
    }

    pub fn subarray(&self, label: &str) -> Option<&Subarray> {
        self.subarrays.iter().find(|s| s.label == label)
    }
}

fn default_min_distance() -> f64 {
    DEFAULT_MIN_DISTANCE
}

/// Transmitter positions, one per time instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterTrack {
    pub positions: Vec<Position>,
    /// Minimum allowed distance to any receive antenna, meters.
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
}

impl TransmitterTrack {
    pub fn new(positions: Vec<Position>) -> Result<Self> {
        let track = TransmitterTrack {
            positions,
            min_distance: DEFAULT_MIN_DISTANCE,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid("transmitter track", "at least one position is required"));
        }
        if !(self.min_distance.is_finite() && self.min_distance > 0.0) {
            return Err(Error::invalid(
                "transmitter track",
                format!("minimum distance {} must be positive", self.min_distance),
            ));
        }
        check_finite_positions("transmitter track", &self.positions)
    }

    /// Checks every transmitter position against every antenna.
    pub fn check_clearance(&self, geometry: &ArrayGeometry) -> Result<()> {
        for (antenna, y) in geometry.antenna_positions.iter().enumerate() {
            for (position, x) in self.positions.iter().enumerate() {
                let d = distance(y, x);
                if !(d >= self.min_distance) {
                    return Err(Error::DegenerateGeometry {
                        antenna,
                        position,
                        distance: d,
                        min_distance: self.min_distance,
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_finite_positions(what: &'static str, positions: &[Position]) -> Result<()> {
    match positions
        .iter()
        .position(|p| p.iter().any(|c| !c.is_finite()))
    {
        Some(i) => Err(Error::invalid(what, format!("position {i} is not finite"))),
        None => Ok(()),
    }
}

/// Free-space line-of-sight coefficient between an antenna at `y` and a
/// transmitter at `x`: `exp(-j 2 pi |y - x| / wavelength) / |y - x|`.
///
/// Rejects separations below [`DEFAULT_MIN_DISTANCE`].
pub fn ideal_coefficient(y: &Position, x: &Position, wavelength: f64) -> Result<Complex64> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::invalid("wavelength", format!("{wavelength} m must be positive")));
    }
    let d = distance(y, x);
    if !(d >= DEFAULT_MIN_DISTANCE) {
        return Err(Error::DegenerateGeometry {
            antenna: 0,
            position: 0,
            distance: d,
            min_distance: DEFAULT_MIN_DISTANCE,
        });
    }
    Ok(los_coefficient(d, wavelength))
}

fn los_coefficient(distance: f64, wavelength: f64) -> Complex64 {
    // Only the fractional number of wavelengths matters; reducing first keeps
    // the phase accurate for long paths.
    let cycles = (distance / wavelength).rem_euclid(1.0);
    Complex64::from_polar(1.0 / distance, -TAU * cycles)
}

/// Computes the ideal channel tensor for every subcarrier, antenna and
/// transmitter position.
pub fn build_ideal_tensor(
    geometry: &ArrayGeometry,
    track: &TransmitterTrack,
    config: &RadioConfig,
) -> Result<IdealTensor> {
    config.validate()?;
    geometry.validate()?;
    track.validate()?;
    track.check_clearance(geometry)?;

    let l = geometry.num_antennas();
    let d = track.num_positions();
    let wavelengths = (0..config.num_subcarriers)
        .map(|n| subcarrier_wavelength(config, n))
        .collect::<Result<Vec<_>>>()?;
    let distances: Vec<f64> = geometry
        .antenna_positions
        .iter()
        .flat_map(|y| track.positions.iter().map(move |x| distance(y, x)))
        .collect();

    let data = Array3::from_shape_fn((config.num_subcarriers, l, d), |(n, li, di)| {
        los_coefficient(distances[li * d + di], wavelengths[n])
    });
    Ok(IdealTensor::from_array(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn unit_config(carrier: f64, spacing: f64, n: usize) -> RadioConfig {
        RadioConfig {
            carrier_freq_hz: carrier,
            subcarrier_spacing_hz: spacing,
            num_subcarriers: n,
            speed_of_light: SPEED_OF_LIGHT,
        }
    }

    #[test]
    fn wavelength_examples() {
        let c = unit_config(SPEED_OF_LIGHT, 0.0, 1);
        assert_eq!(subcarrier_wavelength(&c, 0).unwrap(), 1.0);

        let c = unit_config(1.272e9, 1e5, 64);
        let w = subcarrier_wavelength(&c, 0).unwrap();
        assert!(close(w, 299_792_458.0 / 1.272e9, 1e-15), "{w}");
        assert!(close(w, 0.235686, 1e-6));

        let c = unit_config(1e9, 1e6, 1001);
        let w = subcarrier_wavelength(&c, 1000).unwrap();
        assert!(close(w, SPEED_OF_LIGHT / 2e9, 1e-15));
        assert!(close(w, 0.149896, 1e-6));

        assert!(matches!(
            subcarrier_wavelength(&c, 1001),
            Err(Error::IndexOutOfRange { index: 1001, .. })
        ));
    }

    #[test]
    fn config_invariants() {
        assert!(RadioConfig::new(1.272e9, 781_250.0, 64).is_ok());
        assert!(RadioConfig::new(0.0, 1.0, 1).is_err());
        assert!(RadioConfig::new(1e9, 0.0, 1).is_err());
        assert!(RadioConfig::new(1e9, 1.0, 0).is_err());
        assert!(RadioConfig::new(1e6, 1e5, 10).is_err());

        let c = RadioConfig::from_center_frequency(1.272e9, 1e6, 51).unwrap();
        assert_eq!(c.carrier_freq_hz, 1.272e9 - 25e6);
        assert_eq!(c.subcarrier_frequency(25), 1.272e9);
    }

    #[test]
    fn ideal_coefficient_examples() {
        let o = [0.0; 3];
        let a = ideal_coefficient(&o, &[1.0, 0.0, 0.0], 1.0).unwrap();
        assert!(close(a.re, 1.0, 1e-12) && close(a.im, 0.0, 1e-12), "{a}");

        let a = ideal_coefficient(&o, &[0.0, 0.5, 0.0], 1.0).unwrap();
        assert!(close(a.re, -2.0, 1e-12) && close(a.im, 0.0, 1e-12), "{a}");

        let lambda = 0.235686;
        let a = ideal_coefficient(&o, &[3.0, 0.0, 0.0], lambda).unwrap();
        assert!(close(a.norm(), 1.0 / 3.0, 1e-15));
        let expected = (-TAU * 3.0 / lambda).rem_euclid(TAU);
        let got = a.arg().rem_euclid(TAU);
        assert!(close(got, expected, 1e-9), "{got} vs {expected}");

        assert!(matches!(
            ideal_coefficient(&o, &[1e-4, 0.0, 0.0], 1.0),
            Err(Error::DegenerateGeometry { .. })
        ));
        assert!(ideal_coefficient(&o, &[1.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn ideal_tensor_symmetry_and_single_pair() {
        let config = RadioConfig::new(1e9, 1e6, 4).unwrap();
        let geometry = ArrayGeometry::new(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]).unwrap();
        let track = TransmitterTrack::new(vec![[0.0, 0.0, 2.0], [0.3, 0.1, 2.0]]).unwrap();
        let ideal = build_ideal_tensor(&geometry, &track, &config).unwrap();
        for n in 0..4 {
            assert_eq!(ideal.subcarrier(n)[[0, 0]], ideal.subcarrier(n)[[1, 0]]);
        }

        let g1 = ArrayGeometry::new(vec![[0.0; 3]]).unwrap();
        let t1 = TransmitterTrack::new(vec![[0.0, 2.0, 1.0]]).unwrap();
        let c1 = RadioConfig::new(2.4e9, 1e6, 1).unwrap();
        let ideal = build_ideal_tensor(&g1, &t1, &c1).unwrap();
        assert_eq!(ideal.dims(), (1, 1, 1));
        let want = ideal_coefficient(&[0.0; 3], &[0.0, 2.0, 1.0], subcarrier_wavelength(&c1, 0).unwrap())
            .unwrap();
        assert_eq!(ideal.subcarrier(0)[[0, 0]], want);
    }

    #[test]
    fn degenerate_geometry_reports_indices() {
        let config = RadioConfig::new(1e9, 1e6, 2).unwrap();
        let geometry = ArrayGeometry::new(vec![[0.0; 3], [1.0, 1.0, 1.0]]).unwrap();
        let track = TransmitterTrack::new(vec![[5.0, 0.0, 0.0], [1.0, 1.0, 1.0005]]).unwrap();
        match build_ideal_tensor(&geometry, &track, &config) {
            Err(Error::DegenerateGeometry {
                antenna, position, ..
            }) => assert_eq!((antenna, position), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geometry_validation() {
        assert!(ArrayGeometry::new(vec![]).is_err());
        assert!(ArrayGeometry::new(vec![[f64::NAN, 0.0, 0.0]]).is_err());
        let overlapping = vec![
            Subarray { label: "A".into(), antennas: vec![0, 1] },
            Subarray { label: "B".into(), antennas: vec![1] },
        ];
        assert!(ArrayGeometry::with_subarrays(vec![[0.0; 3]; 2], overlapping).is_err());
        let out_of_range = vec![Subarray { label: "A".into(), antennas: vec![2] }];
        assert!(ArrayGeometry::with_subarrays(vec![[0.0; 3]; 2], out_of_range).is_err());
        assert!(TransmitterTrack::new(vec![]).is_err());
    }
}
