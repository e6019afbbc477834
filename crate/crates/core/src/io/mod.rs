//! On-disk formats.
//!
//! Both binary formats start with a fixed little-endian header, followed by
//! a length-prefixed UTF-8 JSON metadata document and then raw complex
//! payloads. Complex values are stored as interleaved `(re, im)` IEEE-754
//! binary64, little-endian.
//!
//! Dataset bundle (`GPTC`, version 1):
//!
//! | offset | size | field                                       |
//! |--------|------|---------------------------------------------|
//! | 0      | 4    | magic `b"GPTC"`                             |
//! | 4      | 4    | u32 format version                          |
//! | 8      | 4    | u32 `L` (antennas)                          |
//! | 12     | 4    | u32 `D` (transmitter positions)             |
//! | 16     | 4    | u32 `N_sub` (subcarriers)                   |
//! | 20     | 8    | u64 metadata length `m`                     |
//! | 28     | m    | metadata JSON ([`BundleMetadata`])          |
//! | 28+m   | 16·N_sub·L·D | measurement tensor                  |
//! | ...    | 16·N_sub·L·D | ideal tensor, if `has_ideal`        |
//!
//! Tensors are stored subcarrier after subcarrier in ascending `n`, each as a
//! row-major `L x D` matrix.
//!
//! Calibration record (`GPCR`, version 1):
//!
//! | offset | size | field                                       |
//! |--------|------|---------------------------------------------|
//! | 0      | 4    | magic `b"GPCR"`                             |
//! | 4      | 4    | u32 format version                          |
//! | 8      | 4    | u32 `L`                                     |
//! | 12     | 4    | u32 `N_sub` of the gain payload, 0 if absent|
//! | 16     | 8    | u64 metadata length `m`                     |
//! | 24     | m    | metadata JSON ([`CalibrationMetadata`])     |
//! | 24+m   | 16·N_sub·L | gains, row-major `N_sub x L`          |

mod bundle;
mod calibration;
mod positions;

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, ErrorKind, Result};

pub use bundle::{
    payload_digest, read_bundle, write_bundle, BundleMetadata, DatasetBundle, GroundTruth,
    SynthesisInfo, BUNDLE_MAGIC, BUNDLE_VERSION,
};
pub use calibration::{
    read_calibration, write_calibration, CalibrationMetadata, CalibrationRecord, Provenance,
    CALIBRATION_MAGIC, CALIBRATION_VERSION,
};
pub use positions::{import_positions, read_positions};

#[derive(Error, Debug)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} at byte 4 (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated {section}: expected {expected} bytes, file has {actual}")]
    Truncated {
        section: &'static str,
        expected: u64,
        actual: u64,
    },

    #[error("{count} unexpected trailing bytes at byte {offset}")]
    TrailingBytes { offset: u64, count: u64 },

    #[error("dimension mismatch: header says {field} = {header}, {source_name} says {found}")]
    DimensionMismatch {
        field: &'static str,
        header: usize,
        source_name: &'static str,
        found: usize,
    },

    #[error("malformed metadata at byte {offset}: {message}")]
    Metadata { offset: u64, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl FormatError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            FormatError::DimensionMismatch { .. } | FormatError::Parse { .. } => {
                ErrorKind::Validation
            }
            _ => ErrorKind::Io,
        }
    }
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

pub(crate) fn put_complex(out: &mut Vec<u8>, values: impl IntoIterator<Item = Complex64>) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub(crate) fn get_complex(bytes: &[u8]) -> impl Iterator<Item = Complex64> + '_ {
    bytes.chunks_exact(16).map(|c| {
        let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
        Complex64::new(re, im)
    })
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cursor over a byte buffer that reports truncation with byte counts.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn take(&mut self, len: usize, section: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self.offset.checked_add(len).ok_or(FormatError::Truncated {
            section,
            expected: u64::MAX,
            actual: self.bytes.len() as u64,
        })?;
        if end > self.bytes.len() {
            return Err(FormatError::Truncated {
                section,
                expected: end as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(out)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found: [u8; 4] = self.take(4, "header")?.try_into().expect("4 bytes");
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn u32(&mut self, section: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self, section: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().expect("8 bytes")))
    }

    pub fn finish(&self) -> Result<(), FormatError> {
        if self.offset != self.bytes.len() {
            return Err(FormatError::TrailingBytes {
                offset: self.offset as u64,
                count: (self.bytes.len() - self.offset) as u64,
            });
        }
        Ok(())
    }
}

/// Byte count of `count` complex values, guarding against overflow.
pub(crate) fn complex_bytes(dims: &[usize], section: &'static str) -> Result<usize, FormatError> {
    dims.iter()
        .try_fold(16usize, |acc, &d| acc.checked_mul(d))
        .ok_or(FormatError::Truncated {
            section,
            expected: u64::MAX,
            actual: 0,
        })
}

pub(crate) fn dim_u32(value: usize, field: &'static str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::invalid("dimensions", format!("{field} = {value} exceeds u32")))
}
