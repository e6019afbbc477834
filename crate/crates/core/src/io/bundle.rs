use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{
    complex_bytes, dim_u32, get_complex, put_complex, read_file, sha256_hex, write_atomically,
    FormatError, Reader,
};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, RadioConfig, TransmitterTrack};
use crate::synthesis::{ImpairmentProfile, TransmitPhases};
use crate::tensor::{IdealTensor, MeasurementTensor};

pub const BUNDLE_MAGIC: [u8; 4] = *b"GPTC";
pub const BUNDLE_VERSION: u32 = 1;

/// Synthetic ground truth embedded in generated bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub profile: ImpairmentProfile,
    pub phases: TransmitPhases,
}

/// How a synthetic bundle was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisInfo {
    pub scenario: Option<String>,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub version: u32,
    pub radio: RadioConfig,
    pub geometry: ArrayGeometry,
    pub track: TransmitterTrack,
    #[serde(default)]
    pub truth: Option<GroundTruth>,
    #[serde(default)]
    pub synthesis: Option<SynthesisInfo>,
    /// Description of the calibration applied to produce this bundle, if any.
    #[serde(default)]
    pub applied_calibration: Option<String>,
    #[serde(default)]
    pub has_ideal: bool,
}

impl BundleMetadata {
    pub fn new(radio: RadioConfig, geometry: ArrayGeometry, track: TransmitterTrack) -> Self {
        BundleMetadata {
            version: BUNDLE_VERSION,
            radio,
            geometry,
            track,
            truth: None,
            synthesis: None,
            applied_calibration: None,
            has_ideal: false,
        }
    }

    /// `(N_sub, L, D)` declared by the metadata.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.radio.num_subcarriers,
            self.geometry.num_antennas(),
            self.track.num_positions(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub metadata: BundleMetadata,
    pub measurement: MeasurementTensor,
    pub ideal: Option<IdealTensor>,
}

impl DatasetBundle {
    pub fn new(metadata: BundleMetadata, measurement: MeasurementTensor) -> Result<Self> {
        let bundle = DatasetBundle {
            metadata,
            measurement,
            ideal: None,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Checks every invariant of the metadata and its agreement with the
    /// tensors.
    pub fn validate(&self) -> Result<()> {
        let m = &self.metadata;
        if m.version != BUNDLE_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: m.version,
                supported: BUNDLE_VERSION,
            }
            .into());
        }
        m.radio.validate()?;
        m.geometry.validate()?;
        m.track.validate()?;
        m.track.check_clearance(&m.geometry)?;
        if m.has_ideal != self.ideal.is_some() {
            return Err(Error::invalid(
                "bundle",
                "has_ideal flag disagrees with the ideal tensor payload",
            ));
        }
        let dims = m.dims();
        check_tensor_dims("measurement", dims, self.measurement.dims())?;
        if !self.measurement.is_finite() {
            return Err(Error::invalid("bundle", "measurement tensor has non-finite entries"));
        }
        if let Some(ideal) = &self.ideal {
            check_tensor_dims("ideal", dims, ideal.dims())?;
            if !ideal.is_finite() {
                return Err(Error::invalid("bundle", "ideal tensor has non-finite entries"));
            }
        }
        if let Some(truth) = &m.truth {
            truth.profile.validate_for(&m.radio)?;
            truth.phases.validate()?;
            if truth.profile.num_antennas() != dims.1 {
                return Err(dimension_error("L", dims.1, "ground-truth profile", truth.profile.num_antennas()));
            }
            if truth.phases.len() != dims.2 {
                return Err(dimension_error("D", dims.2, "ground-truth phases", truth.phases.len()));
            }
        }
        Ok(())
    }

    /// Serializes the bundle. Fails if any invariant is violated.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let (n_sub, l, d) = self.metadata.dims();
        let metadata = serde_json::to_vec_pretty(&self.metadata)
            .map_err(|e| Error::invalid("bundle metadata", e.to_string()))?;
        let payload = complex_bytes(&[n_sub, l, d], "measurement payload")?;
        let mut out = Vec::with_capacity(28 + metadata.len() + payload * (1 + self.metadata.has_ideal as usize));
        out.extend_from_slice(&BUNDLE_MAGIC);
        out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
        out.extend_from_slice(&dim_u32(l, "L")?.to_le_bytes());
        out.extend_from_slice(&dim_u32(d, "D")?.to_le_bytes());
        out.extend_from_slice(&dim_u32(n_sub, "N_sub")?.to_le_bytes());
        out.extend_from_slice(&(metadata.len() as u64).to_le_bytes());
        out.extend_from_slice(&metadata);
        put_complex(&mut out, self.measurement.as_array().iter().copied());
        if let Some(ideal) = &self.ideal {
            put_complex(&mut out, ideal.as_array().iter().copied());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        reader.magic(BUNDLE_MAGIC)?;
        let version = reader.u32("header")?;
        if version != BUNDLE_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: BUNDLE_VERSION,
            }
            .into());
        }
        let l = reader.u32("header")? as usize;
        let d = reader.u32("header")? as usize;
        let n_sub = reader.u32("header")? as usize;
        let metadata_len = reader.u64("header")? as usize;
        let metadata_offset = reader.offset() as u64;
        let metadata: BundleMetadata = serde_json::from_slice(reader.take(metadata_len, "metadata")?)
            .map_err(|e| FormatError::Metadata {
                offset: metadata_offset,
                message: e.to_string(),
            })?;

        let (m_sub, m_l, m_d) = metadata.dims();
        for (field, header, found) in [("L", l, m_l), ("D", d, m_d), ("N_sub", n_sub, m_sub)] {
            if header != found {
                return Err(dimension_error(field, header, "metadata", found));
            }
        }
        if d == 0 {
            return Err(Error::invalid("bundle", "no transmitter positions"));
        }

        let payload = complex_bytes(&[n_sub, l, d], "measurement payload")?;
        let measurement = read_tensor(&mut reader, payload, (n_sub, l, d), "measurement payload")?;
        let ideal = if metadata.has_ideal {
            Some(IdealTensor::from_array(read_tensor(
                &mut reader,
                payload,
                (n_sub, l, d),
                "ideal payload",
            )?))
        } else {
            None
        };
        reader.finish()?;

        let bundle = DatasetBundle {
            metadata,
            measurement: MeasurementTensor::from_array(measurement),
            ideal,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// SHA-256 of the measurement payload bytes, hex encoded.
    pub fn digest(&self) -> String {
        payload_digest(&self.measurement)
    }
}

fn read_tensor(
    reader: &mut Reader<'_>,
    len: usize,
    dims: (usize, usize, usize),
    section: &'static str,
) -> Result<Array3<num_complex::Complex64>> {
    let bytes = reader.take(len, section)?;
    let values: Vec<_> = get_complex(bytes).collect();
    Ok(Array3::from_shape_vec(dims, values).expect("payload length matches dims"))
}

fn check_tensor_dims(
    name: &'static str,
    declared: (usize, usize, usize),
    found: (usize, usize, usize),
) -> Result<()> {
    for (field, header, value) in [
        ("N_sub", declared.0, found.0),
        ("L", declared.1, found.1),
        ("D", declared.2, found.2),
    ] {
        if header != value {
            return Err(dimension_error(field, header, name, value));
        }
    }
    Ok(())
}

fn dimension_error(field: &'static str, header: usize, source_name: &'static str, found: usize) -> Error {
    FormatError::DimensionMismatch {
        field,
        header,
        source_name,
        found,
    }
    .into()
}

/// SHA-256 of a measurement tensor's little-endian payload, hex encoded.
pub fn payload_digest(measurement: &MeasurementTensor) -> String {
    let mut bytes = Vec::with_capacity(16 * measurement.as_array().len());
    put_complex(&mut bytes, measurement.as_array().iter().copied());
    sha256_hex(&bytes)
}

pub fn write_bundle(bundle: &DatasetBundle, path: impl AsRef<Path>) -> Result<()> {
    let bytes = bundle.to_bytes()?;
    write_atomically(path.as_ref(), &bytes)
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<DatasetBundle> {
    DatasetBundle::from_bytes(&read_file(path.as_ref())?)
}
