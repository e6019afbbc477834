use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    complex_bytes, dim_u32, get_complex, put_complex, read_file, write_atomically, FormatError,
    Reader,
};
use crate::error::{Error, Result};
use crate::estimator::Algorithm;
use crate::geometry::RadioConfig;
use crate::offsets::{AntennaOffset, GainTable};

pub const CALIBRATION_MAGIC: [u8; 4] = *b"GPCR";
pub const CALIBRATION_VERSION: u32 = 1;

/// Where a calibration came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub max_iterations: usize,
    pub relative_residual_tolerance: f64,
    pub seed: u64,
    pub tool_version: String,
    /// Payload digest of the bundle the calibration was estimated from.
    pub input_digest: String,
}

/// Text section of a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMetadata {
    pub version: u32,
    pub radio: RadioConfig,
    pub antennas: Vec<AntennaOffset>,
    pub provenance: Provenance,
    /// Frobenius residual of the fit on each subcarrier.
    #[serde(default)]
    pub subcarrier_residuals: Vec<f64>,
    #[serde(default)]
    pub has_gains: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub radio: RadioConfig,
    pub antennas: Vec<AntennaOffset>,
    pub provenance: Provenance,
    pub subcarrier_residuals: Vec<f64>,
    pub gains: Option<GainTable>,
}

impl CalibrationRecord {
    pub fn num_antennas(&self) -> usize {
        self.antennas.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        if self.antennas.is_empty() {
            return Err(Error::invalid("calibration", "no antennas"));
        }
        let limit = self.radio.unambiguous_time_offset();
        for (l, o) in self.antennas.iter().enumerate() {
            if !(0.0..std::f64::consts::TAU).contains(&o.phase_offset_rad) {
                return Err(Error::invalid(
                    "calibration",
                    format!("antenna {l}: phase offset {} outside [0, 2pi)", o.phase_offset_rad),
                ));
            }
            if !(o.time_offset_s.abs() < limit) {
                return Err(Error::invalid(
                    "calibration",
                    format!("antenna {l}: time offset {} s outside +-{limit} s", o.time_offset_s),
                ));
            }
            if !(o.fit_residual_rad >= 0.0) || !o.fit_residual_rad.is_finite() {
                return Err(Error::invalid(
                    "calibration",
                    format!("antenna {l}: fit residual {} is not a finite non-negative number", o.fit_residual_rad),
                ));
            }
        }
        if !self.subcarrier_residuals.is_empty()
            && self.subcarrier_residuals.len() != self.radio.num_subcarriers
        {
            return Err(Error::shape(
                "subcarrier residuals",
                self.radio.num_subcarriers,
                self.subcarrier_residuals.len(),
            ));
        }
        if let Some(gains) = &self.gains {
            if gains.num_antennas() != self.antennas.len() {
                return Err(FormatError::DimensionMismatch {
                    field: "L",
                    header: self.antennas.len(),
                    source_name: "gain payload",
                    found: gains.num_antennas(),
                }
                .into());
            }
            if gains.num_subcarriers() != self.radio.num_subcarriers {
                return Err(FormatError::DimensionMismatch {
                    field: "N_sub",
                    header: self.radio.num_subcarriers,
                    source_name: "gain payload",
                    found: gains.num_subcarriers(),
                }
                .into());
            }
            if gains.as_array().iter().any(|g| !g.re.is_finite() || !g.im.is_finite()) {
                return Err(Error::invalid("calibration", "gain payload has non-finite entries"));
            }
        }
        Ok(())
    }

    /// Refuses a record estimated from a different measurement payload
    /// unless `force` is set.
    pub fn check_provenance(&self, bundle_digest: &str, force: bool) -> Result<()> {
        if force || self.provenance.input_digest == bundle_digest {
            return Ok(());
        }
        Err(Error::ProvenanceMismatch {
            expected: self.provenance.input_digest.clone(),
            found: bundle_digest.to_string(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let metadata = CalibrationMetadata {
            version: CALIBRATION_VERSION,
            radio: self.radio,
            antennas: self.antennas.clone(),
            provenance: self.provenance.clone(),
            subcarrier_residuals: self.subcarrier_residuals.clone(),
            has_gains: self.gains.is_some(),
        };
        let json = serde_json::to_vec_pretty(&metadata)
            .map_err(|e| Error::invalid("calibration metadata", e.to_string()))?;
        let n_gain = self.gains.as_ref().map_or(0, GainTable::num_subcarriers);
        let mut out = Vec::with_capacity(24 + json.len() + 16 * n_gain * self.antennas.len());
        out.extend_from_slice(&CALIBRATION_MAGIC);
        out.extend_from_slice(&CALIBRATION_VERSION.to_le_bytes());
        out.extend_from_slice(&dim_u32(self.antennas.len(), "L")?.to_le_bytes());
        out.extend_from_slice(&dim_u32(n_gain, "N_sub")?.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        if let Some(gains) = &self.gains {
            put_complex(&mut out, gains.as_array().iter().copied());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        reader.magic(CALIBRATION_MAGIC)?;
        let version = reader.u32("header")?;
        if version != CALIBRATION_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: CALIBRATION_VERSION,
            }
            .into());
        }
        let l = reader.u32("header")? as usize;
        let n_gain = reader.u32("header")? as usize;
        let metadata_len = reader.u64("header")? as usize;
        let metadata_offset = reader.offset() as u64;
        let metadata: CalibrationMetadata =
            serde_json::from_slice(reader.take(metadata_len, "metadata")?).map_err(|e| {
                FormatError::Metadata {
                    offset: metadata_offset,
                    message: e.to_string(),
                }
            })?;
        if metadata.version != version {
            return Err(FormatError::UnsupportedVersion {
                found: metadata.version,
                supported: CALIBRATION_VERSION,
            }
            .into());
        }
        if metadata.antennas.len() != l {
            return Err(FormatError::DimensionMismatch {
                field: "L",
                header: l,
                source_name: "metadata",
                found: metadata.antennas.len(),
            }
            .into());
        }
        let expected_gain_rows = if metadata.has_gains { metadata.radio.num_subcarriers } else { 0 };
        if n_gain != expected_gain_rows {
            return Err(FormatError::DimensionMismatch {
                field: "N_sub",
                header: n_gain,
                source_name: "metadata",
                found: expected_gain_rows,
            }
            .into());
        }
        let gains = if metadata.has_gains {
            let len = complex_bytes(&[n_gain, l], "gain payload")?;
            let values: Vec<_> = get_complex(reader.take(len, "gain payload")?).collect();
            let table = Array2::from_shape_vec((n_gain, l), values).expect("payload length matches dims");
            Some(GainTable::new(table)?)
        } else {
            None
        };
        reader.finish()?;

        let record = CalibrationRecord {
            radio: metadata.radio,
            antennas: metadata.antennas,
            provenance: metadata.provenance,
            subcarrier_residuals: metadata.subcarrier_residuals,
            gains,
        };
        record.validate()?;
        Ok(record)
    }
}

pub fn write_calibration(record: &CalibrationRecord, path: impl AsRef<Path>) -> Result<()> {
    let bytes = record.to_bytes()?;
    write_atomically(path.as_ref(), &bytes)
}

pub fn read_calibration(path: impl AsRef<Path>) -> Result<CalibrationRecord> {
    CalibrationRecord::from_bytes(&read_file(path.as_ref())?)
}
